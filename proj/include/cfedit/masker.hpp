#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cfedit/corpus.hpp"
#include "cfedit/embed.hpp"
#include "cfedit/text.hpp"

namespace cfe {

/// Per-position importance of query tokens and the masking order derived from
/// it: descending score, leftmost position first on ties.
struct ImportanceScores {
    TokenSeq query;
    std::vector<double> scores;
    std::vector<std::size_t> order;

    /// Sum of scores; for MaxSim this is the masker's own relevance estimate,
    /// which is never used in place of the search model's score.
    double total() const;
};

ImportanceScores make_importance(TokenSeq query, std::vector<double> scores);

/// r_i = max_j v(q_i) . v(d_j) over unit vectors. Identical token ids score
/// exactly 1.0. Throws on an empty query or document.
ImportanceScores maxsim_importance(std::span<const TokenId> query, const Document& doc,
                                   const TokenVectors& vectors);

/// r_i = rel(q, d) - rel(q without position i, d).
ImportanceScores occlusion_importance(std::span<const TokenId> query, const Document& doc,
                                      const SearchModel& search);

enum class MaskerKind { maxsim, occlusion };

}  // namespace cfe
