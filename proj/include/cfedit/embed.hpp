#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cfedit/text.hpp"

namespace cfe {

class Corpus;

/// Anything that maps tokens to unit-norm vectors of a fixed dimension.
class TokenVectors {
public:
    virtual ~TokenVectors() = default;
    virtual std::size_t dim() const = 0;
    /// One unit-norm vector per input token, in order.
    virtual std::vector<std::vector<double>> lookup(std::span<const TokenId> tokens) const = 0;
};

enum class EmbeddingProvenance { trained, loaded };

struct EmbeddingOptions {
    std::size_t dim = 64;
    std::size_t window = 5;
    std::uint64_t seed = 0;
};

/// Static token vectors indexed by vocabulary id. Specials and tokens without
/// a learned vector share the UNK vector (normalized mean of the others).
class EmbeddingTable final : public TokenVectors {
public:
    /// PPMI over a symmetric window, factored to `dim` by eigendecomposition of
    /// the symmetric PPMI matrix (rows scaled by sqrt|eigenvalue|), then
    /// row-normalized. Vocabularies above kDenseLimit content tokens use a
    /// randomized range finder seeded by `seed`.
    static EmbeddingTable train(const Corpus& corpus, const EmbeddingOptions& options = {});

    /// Word-vector text format: `surface v1 ... vd` per line, optional leading
    /// `count dim` header.
    static EmbeddingTable load_text(std::istream& in, const Vocabulary& vocab);

    void save(std::ostream& out, std::uint64_t config_hash) const;
    static EmbeddingTable load(std::istream& in, std::uint64_t config_hash,
                               const std::string& name = "embeddings");

    std::size_t dim() const override { return dim_; }
    std::vector<std::vector<double>> lookup(std::span<const TokenId> tokens) const override;

    std::span<const double> vector(TokenId id) const;
    std::size_t size() const { return dim_ ? data_.size() / dim_ : 0; }
    EmbeddingProvenance provenance() const { return provenance_; }

    bool operator==(const EmbeddingTable& other) const {
        return dim_ == other.dim_ && data_ == other.data_ && provenance_ == other.provenance_;
    }

    static constexpr std::size_t kDenseLimit = 1200;

private:
    EmbeddingTable() = default;

    std::size_t dim_ = 0;
    std::vector<double> data_;  // row-major, one row per vocabulary id
    EmbeddingProvenance provenance_ = EmbeddingProvenance::trained;
};

/// u.v / (|u||v|); 0.0 when either vector is zero. Throws on dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);

}  // namespace cfe
