#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cfedit/corpus.hpp"
#include "cfedit/lm.hpp"
#include "cfedit/masker.hpp"

namespace cfe {

/// (q, d, d') with rel(q, d) > rel(q, d'). Documents are borrowed from the
/// corpus that produced them.
struct Triplet {
    std::string id;
    std::string query_id;
    TokenSeq query;
    const Document* doc = nullptr;
    const Document* counter = nullptr;
    double rel_doc = 0.0;
    double rel_counter = 0.0;
    std::size_t rank = 0;  // rank of the counterfactual document, 0 when unknown
};

/// Scores both documents with `search` and throws Errc::precondition unless
/// rel(q, d) > rel(q, d') strictly.
Triplet make_triplet(TokenSeq query, const Document& doc, const Document& counter, const SearchModel& search);

struct EditCandidate {
    TokenSeq tokens;
    double log_prob = 0.0;
    std::size_t filled = 0;

    bool operator==(const EditCandidate&) const = default;
};

struct Beam {
    std::size_t width = 1;
    std::vector<EditCandidate> candidates;  // descending log_prob, ascending tokens on ties
};

/// Extends candidate c with every entry of per_candidate[c], accumulating
/// log-probabilities, dedupes identical sequences (max log_prob wins) and
/// keeps the best `beam.width`.
Beam expand_beam(const Beam& beam, std::span<const PredictionDistribution> per_candidate);
/// Same distribution applied to every candidate.
Beam expand_beam(const Beam& beam, const PredictionDistribution& distribution);

/// Fills every masked slot of `masked` left to right, starting from a fresh beam.
Beam decode(std::span<const TokenId> masked, const Document& d_prime, const MaskedPredictor& predictor,
            std::size_t width);

/// rel(q', d') > rel(q', d), strictly. Throws if q' still has masked slots.
bool check_flip(std::span<const TokenId> candidate, const Triplet& triplet, const SearchModel& search);

/// Lowest perplexity, ascending token sequence on ties. Throws on an empty set.
TokenSeq select_final(std::span<const TokenSeq> flipping, const PerplexityModel& perplexity);

struct CandidateCheck {
    TokenSeq tokens;
    double log_prob = 0.0;
    bool flipped = false;
};

struct IterationTrace {
    std::size_t masks = 0;
    std::vector<std::size_t> positions;  // ascending
    std::vector<CandidateCheck> candidates;
};

struct EditResult {
    std::optional<TokenSeq> outcome;
    std::size_t masks_used = 0;
    std::vector<IterationTrace> trace;
    double elapsed_seconds = 0.0;
};

struct EditorConfig {
    std::size_t beam_width = 10;
    /// Upper bound on masked tokens; 0 means the query length. Values above
    /// the query length are clamped to it.
    std::size_t max_masks = 0;
};

/// For i = 1..max_masks: mask the top-i positions by importance, decode with
/// a fresh beam, and stop at the first i whose final beam holds a flipping
/// candidate, returning the lowest-perplexity one. Null when none flips.
EditResult edit(const Triplet& triplet, const SearchModel& search, const ImportanceScores& importance,
                const MaskedPredictor& predictor, const PerplexityModel& perplexity, const EditorConfig& config);

}  // namespace cfe
