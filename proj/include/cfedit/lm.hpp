#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "cfedit/corpus.hpp"
#include "cfedit/text.hpp"

namespace cfe {

struct PredictionEntry {
    TokenId token;
    double prob;

    bool operator==(const PredictionEntry&) const = default;
};

/// Top entries for one masked slot: descending probability, ascending token id
/// on ties, specials never present.
struct PredictionDistribution {
    std::size_t position = 0;
    std::vector<PredictionEntry> entries;
};

class PerplexityModel {
public:
    virtual ~PerplexityModel() = default;
    virtual double perplexity(std::span<const TokenId> seq) const = 0;
};

class MaskedPredictor {
public:
    virtual ~MaskedPredictor() = default;
    /// Distribution for `masked_query[position]`, conditioned on the filled
    /// slots to its left and on the counterfactual document.
    virtual PredictionDistribution predict(std::span<const TokenId> masked_query, const Document& d_prime,
                                           std::size_t position, std::size_t top) const = 0;
};

/// Add-k smoothed n-gram model over the content vocabulary. Each sentence is
/// left-padded with order-1 BOS markers. A context never seen in training
/// yields the uniform distribution. Special tokens are never predicted; when
/// they occur in a scored sequence they receive the unseen-token mass
/// k / (C + k|V|).
class NgramLM final : public PerplexityModel {
public:
    static NgramLM train(const Corpus& corpus, std::size_t order = 3, double k = 0.1);
    static NgramLM train(std::span<const TokenSeq> sentences, const Vocabulary& vocab, std::size_t order,
                         double k);

    void save(std::ostream& out, std::uint64_t config_hash) const;
    static NgramLM load(std::istream& in, const Vocabulary& vocab, std::uint64_t config_hash,
                        const std::string& name = "lm");

    /// P(token | last order-1 tokens of history, BOS-padded).
    double prob(std::span<const TokenId> history, TokenId token) const;

    /// Fills `out[id - kFirstContent]` with P(id | history) for every content id.
    void conditional(std::span<const TokenId> history, std::vector<double>& out) const;

    /// exp(-(1/T) sum ln P(x_t | context_t)). Throws on an empty sequence.
    double perplexity(std::span<const TokenId> seq) const override;

    std::size_t order() const { return order_; }
    double smoothing() const { return k_; }
    const Vocabulary& vocab() const { return *vocab_; }
    /// True when the order-1 tokens before `position` contain a special token
    /// other than the implicit BOS padding.
    bool context_has_special(std::span<const TokenId> history) const;

private:
    struct ContextCounts {
        std::uint64_t total = 0;
        std::vector<std::pair<TokenId, std::uint32_t>> next;  // ascending token id
    };

    NgramLM(const Vocabulary& vocab, std::size_t order, double k) : vocab_(&vocab), order_(order), k_(k) {}
    std::string context_key(std::span<const TokenId> history) const;
    const ContextCounts* find(std::span<const TokenId> history) const;

    const Vocabulary* vocab_;
    std::size_t order_;
    double k_;
    std::unordered_map<std::string, ContextCounts> contexts_;
};

/// P(i) = (1 - lambda) * P_ngram(i | left context) + lambda * P_doc(i), with
/// P_doc the add-k unigram distribution of d_prime's content tokens. Falls back
/// to P_doc alone when the left context holds a special token.
PredictionDistribution predict_masked(std::span<const TokenId> masked_query, const Document& d_prime,
                                      std::size_t position, std::size_t top, const NgramLM& lm, double lambda);

/// Untruncated version of predict_masked: one entry per content token, in id order.
std::vector<double> masked_distribution(std::span<const TokenId> masked_query, const Document& d_prime,
                                        std::size_t position, const NgramLM& lm, double lambda);

class InterpolatedPredictor final : public MaskedPredictor {
public:
    InterpolatedPredictor(const NgramLM& lm, double lambda);

    PredictionDistribution predict(std::span<const TokenId> masked_query, const Document& d_prime,
                                   std::size_t position, std::size_t top) const override {
        return predict_masked(masked_query, d_prime, position, top, lm_, lambda_);
    }

    double lambda() const { return lambda_; }

private:
    const NgramLM& lm_;
    double lambda_;
};

}  // namespace cfe
