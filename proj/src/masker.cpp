#include "cfedit/masker.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include "cfedit/error.hpp"

namespace cfe {

double ImportanceScores::total() const {
    return std::accumulate(scores.begin(), scores.end(), 0.0);
}

ImportanceScores make_importance(TokenSeq query, std::vector<double> scores) {
    if (query.size() != scores.size()) {
        throw Error(Errc::internal, "importance scores do not match query length");
    }
    ImportanceScores out;
    out.query = std::move(query);
    out.scores = std::move(scores);
    out.order.resize(out.scores.size());
    std::iota(out.order.begin(), out.order.end(), std::size_t{0});
    std::stable_sort(out.order.begin(), out.order.end(),
                     [&](std::size_t a, std::size_t b) { return out.scores[a] > out.scores[b]; });
    return out;
}

ImportanceScores maxsim_importance(std::span<const TokenId> query, const Document& doc,
                                   const TokenVectors& vectors) {
    if (query.empty()) throw Error(Errc::invalid_argument, "maxsim: empty query");
    if (doc.tokens.empty()) throw Error(Errc::invalid_argument, "maxsim: empty document " + doc.id);

    TokenSeq all(query.begin(), query.end());
    all.insert(all.end(), doc.tokens.begin(), doc.tokens.end());
    const auto vecs = vectors.lookup(all);
    const std::size_t l = query.size();

    std::vector<double> scores(l, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < l; ++i) {
        const auto& qv = vecs[i];
        for (std::size_t j = 0; j < doc.tokens.size(); ++j) {
            double s;
            if (query[i] == doc.tokens[j]) {
                s = 1.0;
            } else {
                const auto& dv = vecs[l + j];
                s = 0.0;
                for (std::size_t k = 0; k < qv.size(); ++k) s += qv[k] * dv[k];
            }
            scores[i] = std::max(scores[i], s);
        }
    }
    return make_importance(TokenSeq(query.begin(), query.end()), std::move(scores));
}

ImportanceScores occlusion_importance(std::span<const TokenId> query, const Document& doc,
                                      const SearchModel& search) {
    if (query.empty()) throw Error(Errc::invalid_argument, "occlusion: empty query");
    const double full = search.score(query, doc);
    std::vector<double> scores;
    scores.reserve(query.size());
    TokenSeq reduced;
    for (std::size_t i = 0; i < query.size(); ++i) {
        reduced.assign(query.begin(), query.end());
        reduced.erase(reduced.begin() + static_cast<std::ptrdiff_t>(i));
        scores.push_back(full - search.score(reduced, doc));
    }
    return make_importance(TokenSeq(query.begin(), query.end()), std::move(scores));
}

}  // namespace cfe
