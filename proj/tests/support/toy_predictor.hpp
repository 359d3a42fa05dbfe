#pragma once

#include <algorithm>
#include <random>

#include "cfedit/lm.hpp"

namespace cfe::testing {

/// Context-dependent random distributions over content ids 3..3+n-1, derived
/// from a hash of (seed, position, left context). With `ties`, some entries
/// copy another entry's weight so the tie-break is exercised.
class ToyPredictor final : public MaskedPredictor {
public:
    ToyPredictor(std::size_t n, std::uint64_t seed, bool ties) : n_(n), seed_(seed), ties_(ties) {}

    std::vector<double> probs(std::span<const TokenId> masked, std::size_t position) const {
        std::uint64_t h = seed_ * 0x9E3779B97F4A7C15ull + position;
        for (std::size_t i = 0; i < position; ++i) h = h * 1315423911ull + masked[i];
        std::mt19937_64 rng(h);
        std::uniform_real_distribution<double> u(0.05, 1.0);
        std::vector<double> w(n_);
        for (auto& x : w) x = u(rng);
        if (ties_) {
            for (std::size_t i = 1; i < n_; ++i) {
                if (rng() % 3 == 0) w[i] = w[rng() % i];
            }
        }
        double s = 0.0;
        for (double x : w) s += x;
        for (auto& x : w) x /= s;
        return w;
    }

    PredictionDistribution predict(std::span<const TokenId> masked, const Document&, std::size_t position,
                                   std::size_t top) const override {
        const auto p = probs(masked, position);
        PredictionDistribution d;
        d.position = position;
        for (std::size_t i = 0; i < n_; ++i) d.entries.push_back({static_cast<TokenId>(i + 3), p[i]});
        std::sort(d.entries.begin(), d.entries.end(), [](const PredictionEntry& a, const PredictionEntry& b) {
            return a.prob != b.prob ? a.prob > b.prob : a.token < b.token;
        });
        d.entries.resize(std::min(top, d.entries.size()));
        return d;
    }

private:
    std::size_t n_;
    std::uint64_t seed_;
    bool ties_;
};

struct EnumeratedFilling {
    TokenSeq tokens;
    double prob;
};

/// Every filling of the masked slots, ranked by product probability, ascending
/// token sequence on ties.
inline std::vector<EnumeratedFilling> enumerate_fillings(const ToyPredictor& p, const TokenSeq& masked,
                                                         std::size_t n) {
    std::vector<EnumeratedFilling> partial{{masked, 1.0}};
    for (std::size_t pos = 0; pos < masked.size(); ++pos) {
        if (masked[pos] != Vocabulary::kMask) continue;
        std::vector<EnumeratedFilling> next;
        for (const auto& f : partial) {
            const auto probs = p.probs(f.tokens, pos);
            for (std::size_t i = 0; i < n; ++i) {
                auto t = f.tokens;
                t[pos] = static_cast<TokenId>(i + 3);
                next.push_back({std::move(t), f.prob * probs[i]});
            }
        }
        partial = std::move(next);
    }
    std::sort(partial.begin(), partial.end(), [](const EnumeratedFilling& a, const EnumeratedFilling& b) {
        return a.prob != b.prob ? a.prob > b.prob : a.tokens < b.tokens;
    });
    return partial;
}

}  // namespace cfe::testing
