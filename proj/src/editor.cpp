#include "cfedit/editor.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "cfedit/error.hpp"

namespace cfe {
namespace {

bool rank_before(const EditCandidate& a, const EditCandidate& b) {
    if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
    return a.tokens < b.tokens;
}

bool has_mask(std::span<const TokenId> tokens) {
    return std::find(tokens.begin(), tokens.end(), Vocabulary::kMask) != tokens.end();
}

}  // namespace

Triplet make_triplet(TokenSeq query, const Document& doc, const Document& counter, const SearchModel& search) {
    Triplet t;
    t.query = std::move(query);
    t.doc = &doc;
    t.counter = &counter;
    t.rel_doc = search.score(t.query, doc);
    t.rel_counter = search.score(t.query, counter);
    if (!(t.rel_doc > t.rel_counter)) {
        throw Error(Errc::precondition, "not a valid counterfactual target: rel(q, " + doc.id + ") = " +
                                            std::to_string(t.rel_doc) + " does not exceed rel(q, " + counter.id +
                                            ") = " + std::to_string(t.rel_counter));
    }
    return t;
}

Beam expand_beam(const Beam& beam, std::span<const PredictionDistribution> per_candidate) {
    if (per_candidate.size() != beam.candidates.size()) {
        throw Error(Errc::internal, "expand_beam: one distribution per candidate required");
    }
    Beam next;
    next.width = beam.width;
    std::vector<EditCandidate> pool;
    for (std::size_t c = 0; c < beam.candidates.size(); ++c) {
        const auto& cand = beam.candidates[c];
        const auto& dist = per_candidate[c];
        if (dist.entries.empty()) throw Error(Errc::invalid_argument, "expand_beam: empty distribution");
        if (dist.position >= cand.tokens.size() || cand.tokens[dist.position] != Vocabulary::kMask) {
            throw Error(Errc::invalid_argument, "expand_beam: slot " + std::to_string(dist.position) +
                                                    " is not the next unfilled slot");
        }
        for (const auto& e : dist.entries) {
            EditCandidate ext;
            ext.tokens = cand.tokens;
            ext.tokens[dist.position] = e.token;
            ext.log_prob = cand.log_prob + std::log(e.prob);
            ext.filled = cand.filled + 1;
            pool.push_back(std::move(ext));
        }
    }
    // Dedupe: per token sequence keep the highest log_prob.
    std::sort(pool.begin(), pool.end(), [](const EditCandidate& a, const EditCandidate& b) {
        if (a.tokens != b.tokens) return a.tokens < b.tokens;
        return a.log_prob > b.log_prob;
    });
    pool.erase(std::unique(pool.begin(), pool.end(),
                           [](const EditCandidate& a, const EditCandidate& b) { return a.tokens == b.tokens; }),
               pool.end());
    const auto keep = std::min(beam.width, pool.size());
    std::partial_sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(keep), pool.end(), rank_before);
    pool.resize(keep);
    next.candidates = std::move(pool);
    return next;
}

Beam expand_beam(const Beam& beam, const PredictionDistribution& distribution) {
    std::vector<PredictionDistribution> same(beam.candidates.size(), distribution);
    return expand_beam(beam, same);
}

Beam decode(std::span<const TokenId> masked, const Document& d_prime, const MaskedPredictor& predictor,
            std::size_t width) {
    if (width < 1) throw Error(Errc::invalid_argument, "beam width must be >= 1");
    Beam beam;
    beam.width = width;
    beam.candidates.push_back({TokenSeq(masked.begin(), masked.end()), 0.0, 0});
    std::vector<PredictionDistribution> dists;
    for (std::size_t pos = 0; pos < masked.size(); ++pos) {
        if (masked[pos] != Vocabulary::kMask) continue;
        dists.clear();
        for (const auto& cand : beam.candidates) dists.push_back(predictor.predict(cand.tokens, d_prime, pos, width));
        beam = expand_beam(beam, dists);
    }
    return beam;
}

bool check_flip(std::span<const TokenId> candidate, const Triplet& triplet, const SearchModel& search) {
    if (has_mask(candidate)) throw Error(Errc::precondition, "check_flip: candidate still has masked slots");
    return search.score(candidate, *triplet.counter) > search.score(candidate, *triplet.doc);
}

TokenSeq select_final(std::span<const TokenSeq> flipping, const PerplexityModel& perplexity) {
    if (flipping.empty()) throw Error(Errc::invalid_argument, "select_final: no flipping candidates");
    const TokenSeq* best = nullptr;
    double best_ppl = 0.0;
    for (const auto& cand : flipping) {
        const double ppl = perplexity.perplexity(cand);
        if (!best || ppl < best_ppl || (ppl == best_ppl && cand < *best)) {
            best = &cand;
            best_ppl = ppl;
        }
    }
    return *best;
}

EditResult edit(const Triplet& triplet, const SearchModel& search, const ImportanceScores& importance,
                const MaskedPredictor& predictor, const PerplexityModel& perplexity, const EditorConfig& config) {
    const auto start = std::chrono::steady_clock::now();
    const auto& q = triplet.query;
    if (q.empty()) throw Error(Errc::invalid_argument, "edit: empty query");
    if (!triplet.doc || !triplet.counter) throw Error(Errc::invalid_argument, "edit: triplet without documents");
    if (importance.query != q || importance.order.size() != q.size()) {
        throw Error(Errc::invalid_argument, "edit: importance scores belong to a different query");
    }
    if (!(search.score(q, *triplet.doc) > search.score(q, *triplet.counter))) {
        throw Error(Errc::precondition, "not a valid counterfactual target: " + triplet.doc->id +
                                            " does not outrank " + triplet.counter->id);
    }
    if (config.beam_width < 1) throw Error(Errc::invalid_argument, "beam width must be >= 1");
    const std::size_t max_masks = config.max_masks == 0 ? q.size() : std::min(config.max_masks, q.size());

    EditResult result;
    for (std::size_t i = 1; i <= max_masks; ++i) {
        IterationTrace iter;
        iter.masks = i;
        iter.positions.assign(importance.order.begin(), importance.order.begin() + static_cast<std::ptrdiff_t>(i));
        std::sort(iter.positions.begin(), iter.positions.end());
        TokenSeq masked = q;
        for (auto p : iter.positions) masked[p] = Vocabulary::kMask;

        const Beam beam = decode(masked, *triplet.counter, predictor, config.beam_width);
        std::vector<TokenSeq> flipping;
        for (const auto& cand : beam.candidates) {
            const bool flipped = check_flip(cand.tokens, triplet, search);
            if (flipped) flipping.push_back(cand.tokens);
            iter.candidates.push_back({cand.tokens, cand.log_prob, flipped});
        }
        result.trace.push_back(std::move(iter));
        result.masks_used = i;
        if (!flipping.empty()) {
            result.outcome = select_final(flipping, perplexity);
            break;
        }
    }
    result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

}  // namespace cfe
