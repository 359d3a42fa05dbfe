#include "cfedit/lm.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "binary_io.hpp"
#include "cfedit/error.hpp"

namespace cfe {
namespace {

constexpr std::string_view kLmMagic = "CFELM001";
constexpr TokenId kBos = 0xFFFFFFFFu;

}  // namespace

std::string NgramLM::context_key(std::span<const TokenId> history) const {
    const std::size_t width = order_ - 1;
    std::string key(width * sizeof(TokenId), '\0');
    for (std::size_t i = 0; i < width; ++i) {
        // Slot i holds the token width - i positions back.
        const std::size_t back = width - i;
        const TokenId t = back <= history.size() ? history[history.size() - back] : kBos;
        std::memcpy(key.data() + i * sizeof(TokenId), &t, sizeof t);
    }
    return key;
}

const NgramLM::ContextCounts* NgramLM::find(std::span<const TokenId> history) const {
    auto it = contexts_.find(context_key(history));
    return it == contexts_.end() ? nullptr : &it->second;
}

bool NgramLM::context_has_special(std::span<const TokenId> history) const {
    const std::size_t width = std::min(order_ - 1, history.size());
    return std::any_of(history.end() - static_cast<std::ptrdiff_t>(width), history.end(),
                       [](TokenId t) { return Vocabulary::is_special(t); });
}

NgramLM NgramLM::train(std::span<const TokenSeq> sentences, const Vocabulary& vocab, std::size_t order, double k) {
    if (order < 1) throw Error(Errc::invalid_argument, "lm order must be >= 1");
    if (!(k > 0.0)) throw Error(Errc::invalid_argument, "lm smoothing k must be > 0");
    if (vocab.content_size() == 0) throw Error(Errc::invalid_argument, "empty vocabulary");
    const bool any = std::any_of(sentences.begin(), sentences.end(), [](const TokenSeq& s) { return !s.empty(); });
    if (!any) throw Error(Errc::invalid_argument, "empty corpus");

    NgramLM lm(vocab, order, k);
    std::unordered_map<std::string, std::map<TokenId, std::uint32_t>> raw;
    for (const auto& s : sentences) {
        for (std::size_t t = 0; t < s.size(); ++t) {
            if (Vocabulary::is_special(s[t])) continue;
            if (s[t] >= vocab.size()) throw Error(Errc::invalid_argument, "token id out of range in lm training data");
            ++raw[lm.context_key(std::span<const TokenId>(s).first(t))][s[t]];
        }
    }
    for (auto& [key, next] : raw) {
        ContextCounts cc;
        for (auto [tok, n] : next) {
            cc.total += n;
            cc.next.emplace_back(tok, n);
        }
        lm.contexts_.emplace(key, std::move(cc));
    }
    return lm;
}

NgramLM NgramLM::train(const Corpus& corpus, std::size_t order, double k) {
    if (corpus.size() == 0) throw Error(Errc::invalid_argument, "empty corpus");
    std::vector<TokenSeq> sentences;
    for (const auto& doc : corpus.documents()) {
        for (const auto& s : split_sentences(doc.text)) {
            auto ids = corpus.vocab().encode_text(s);
            if (!ids.empty()) sentences.push_back(std::move(ids));
        }
    }
    return train(sentences, corpus.vocab(), order, k);
}

double NgramLM::prob(std::span<const TokenId> history, TokenId token) const {
    const double v = static_cast<double>(vocab_->content_size());
    const ContextCounts* cc = find(history);
    const double total = cc ? static_cast<double>(cc->total) : 0.0;
    double count = 0.0;
    if (cc && !Vocabulary::is_special(token)) {
        auto it = std::lower_bound(cc->next.begin(), cc->next.end(), token,
                                   [](const auto& e, TokenId t) { return e.first < t; });
        if (it != cc->next.end() && it->first == token) count = it->second;
    }
    return (count + k_) / (total + k_ * v);
}

void NgramLM::conditional(std::span<const TokenId> history, std::vector<double>& out) const {
    const double v = static_cast<double>(vocab_->content_size());
    const ContextCounts* cc = find(history);
    const double total = cc ? static_cast<double>(cc->total) : 0.0;
    const double denom = total + k_ * v;
    out.assign(vocab_->content_size(), k_ / denom);
    if (!cc) return;
    for (auto [tok, n] : cc->next) out[tok - Vocabulary::kFirstContent] = (static_cast<double>(n) + k_) / denom;
}

double NgramLM::perplexity(std::span<const TokenId> seq) const {
    if (seq.empty()) throw Error(Errc::invalid_argument, "perplexity of an empty sequence");
    double nll = 0.0;
    for (std::size_t t = 0; t < seq.size(); ++t) nll -= std::log(prob(seq.first(t), seq[t]));
    return std::exp(nll / static_cast<double>(seq.size()));
}

void NgramLM::save(std::ostream& out, std::uint64_t config_hash) const {
    detail::BinaryWriter w(out);
    w.header(kLmMagic, config_hash);
    w.u64(order_);
    w.f64(k_);
    w.u64(vocab_->size());
    std::vector<const std::pair<const std::string, ContextCounts>*> sorted;
    sorted.reserve(contexts_.size());
    for (const auto& e : contexts_) sorted.push_back(&e);
    std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->first < b->first; });
    w.u64(sorted.size());
    for (const auto* e : sorted) {
        w.str(e->first);
        w.u64(e->second.next.size());
        for (auto [tok, n] : e->second.next) {
            w.u32(tok);
            w.u32(n);
        }
    }
    w.finish();
}

NgramLM NgramLM::load(std::istream& in, const Vocabulary& vocab, std::uint64_t config_hash, const std::string& name) {
    detail::BinaryReader r(in, name);
    r.header(kLmMagic, config_hash);
    const auto order = r.u64();
    const double k = r.f64();
    if (order < 1 || order > 16 || !(k > 0.0)) r.fail("bad lm parameters");
    if (r.u64() != vocab.size()) r.fail("vocabulary size does not match the index");
    NgramLM lm(vocab, order, k);
    const auto n = r.u64();
    for (std::uint64_t i = 0; i < n; ++i) {
        auto key = r.str();
        if (key.size() != (order - 1) * sizeof(TokenId)) r.fail("bad context key");
        ContextCounts cc;
        const auto m = r.u64();
        for (std::uint64_t j = 0; j < m; ++j) {
            const TokenId tok = r.u32();
            const std::uint32_t c = r.u32();
            if (tok >= vocab.size() || Vocabulary::is_special(tok) || c == 0) r.fail("bad n-gram entry");
            cc.total += c;
            cc.next.emplace_back(tok, c);
        }
        lm.contexts_.emplace(std::move(key), std::move(cc));
    }
    return lm;
}

std::vector<double> masked_distribution(std::span<const TokenId> masked_query, const Document& d_prime,
                                        std::size_t position, const NgramLM& lm, double lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(Errc::invalid_argument, "lambda must be in [0, 1]");
    if (position >= masked_query.size() || masked_query[position] != Vocabulary::kMask) {
        throw Error(Errc::invalid_argument, "position " + std::to_string(position) + " is not a masked slot");
    }
    const auto history = masked_query.first(position);
    if (std::find(history.begin(), history.end(), Vocabulary::kMask) != history.end()) {
        throw Error(Errc::precondition, "masked slots left of position " + std::to_string(position) +
                                            " must be filled first");
    }
    const auto& vocab = lm.vocab();
    const std::size_t v = vocab.content_size();
    const double k = lm.smoothing();

    std::vector<double> doc_counts(v, 0.0);
    double doc_total = 0.0;
    for (TokenId t : d_prime.tokens) {
        if (Vocabulary::is_special(t) || t >= vocab.size()) continue;
        doc_counts[t - Vocabulary::kFirstContent] += 1.0;
        doc_total += 1.0;
    }
    const double doc_denom = doc_total + k * static_cast<double>(v);

    const double weight = lm.context_has_special(history) ? 1.0 : lambda;
    std::vector<double> out;
    if (weight < 1.0) {
        lm.conditional(history, out);
    } else {
        out.assign(v, 0.0);
    }
    for (std::size_t i = 0; i < v; ++i) {
        out[i] = (1.0 - weight) * out[i] + weight * ((doc_counts[i] + k) / doc_denom);
    }
    return out;
}

PredictionDistribution predict_masked(std::span<const TokenId> masked_query, const Document& d_prime,
                                      std::size_t position, std::size_t top, const NgramLM& lm, double lambda) {
    if (top < 1) throw Error(Errc::invalid_argument, "top must be >= 1");
    const auto probs = masked_distribution(masked_query, d_prime, position, lm, lambda);
    PredictionDistribution dist;
    dist.position = position;
    dist.entries.reserve(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) {
        dist.entries.push_back({static_cast<TokenId>(i + Vocabulary::kFirstContent), probs[i]});
    }
    const auto better = [](const PredictionEntry& a, const PredictionEntry& b) {
        if (a.prob != b.prob) return a.prob > b.prob;
        return a.token < b.token;
    };
    const auto keep = std::min(top, dist.entries.size());
    std::partial_sort(dist.entries.begin(), dist.entries.begin() + static_cast<std::ptrdiff_t>(keep),
                      dist.entries.end(), better);
    dist.entries.resize(keep);
    return dist;
}

InterpolatedPredictor::InterpolatedPredictor(const NgramLM& lm, double lambda) : lm_(lm), lambda_(lambda) {
    if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(Errc::invalid_argument, "lambda must be in [0, 1]");
}

}  // namespace cfe
