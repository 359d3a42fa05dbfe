#include "cfedit/embed.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "binary_io.hpp"
#include "cfedit/corpus.hpp"
#include "cfedit/error.hpp"

namespace cfe {
namespace {

constexpr std::string_view kEmbedMagic = "CFEEMB01";

using Triplets = std::vector<Eigen::Triplet<double>>;

// Positive PMI entries over content tokens (index = id - kFirstContent).
Triplets ppmi_entries(const Corpus& corpus, std::size_t window) {
    const auto n = corpus.vocab().content_size();
    std::unordered_map<std::uint64_t, double> counts;
    std::vector<double> row(n, 0.0);
    double total = 0.0;
    const auto add = [&](std::size_t a, std::size_t b) {
        counts[static_cast<std::uint64_t>(a) * n + b] += 1.0;
        row[a] += 1.0;
        total += 1.0;
    };
    for (const auto& doc : corpus.documents()) {
        const auto& toks = doc.tokens;
        for (std::size_t p = 0; p < toks.size(); ++p) {
            if (Vocabulary::is_special(toks[p])) continue;
            const std::size_t end = std::min(toks.size(), p + window + 1);
            for (std::size_t q = p + 1; q < end; ++q) {
                if (Vocabulary::is_special(toks[q])) continue;
                const std::size_t a = toks[p] - Vocabulary::kFirstContent;
                const std::size_t b = toks[q] - Vocabulary::kFirstContent;
                add(a, b);
                add(b, a);
            }
        }
    }
    std::vector<std::pair<std::uint64_t, double>> sorted(counts.begin(), counts.end());
    std::sort(sorted.begin(), sorted.end());
    Triplets out;
    for (const auto& [key, c] : sorted) {
        const std::size_t a = key / n, b = key % n;
        const double pmi = std::log(c * total / (row[a] * row[b]));
        if (pmi > 0.0) out.emplace_back(static_cast<int>(a), static_cast<int>(b), pmi);
    }
    return out;
}

struct EigenPairs {
    Eigen::VectorXd values;
    Eigen::MatrixXd vectors;  // columns
};

EigenPairs dense_eigen(const Triplets& entries, Eigen::Index n) {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (const auto& t : entries) m(t.row(), t.col()) = t.value();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
    if (solver.info() != Eigen::Success) throw Error(Errc::internal, "eigendecomposition failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

Eigen::MatrixXd orthonormal_basis(const Eigen::MatrixXd& y) {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(y);
    return qr.householderQ() * Eigen::MatrixXd::Identity(y.rows(), y.cols());
}

EigenPairs randomized_eigen(const Triplets& entries, Eigen::Index n, Eigen::Index rank, std::uint64_t seed) {
    Eigen::SparseMatrix<double> m(n, n);
    m.setFromTriplets(entries.begin(), entries.end());
    const Eigen::Index sketch = std::min<Eigen::Index>(n, 2 * rank + 32);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd omega(n, sketch);
    for (Eigen::Index c = 0; c < sketch; ++c) {
        for (Eigen::Index r = 0; r < n; ++r) omega(r, c) = normal(rng);
    }
    Eigen::MatrixXd q = orthonormal_basis(m * omega);
    for (int it = 0; it < 16; ++it) q = orthonormal_basis(m * q);
    const Eigen::MatrixXd small = q.transpose() * (m * q);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(0.5 * (small + small.transpose()));
    if (solver.info() != Eigen::Success) throw Error(Errc::internal, "eigendecomposition failed");
    return {solver.eigenvalues(), q * solver.eigenvectors()};
}

void normalize(std::span<double> v) {
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    for (double& x : v) x /= norm;
}

bool is_zero(std::span<const double> v) {
    return std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; });
}

// Normalized mean of the given unit rows; falls back to e_0 when it vanishes.
std::vector<double> mean_direction(const std::vector<double>& data, std::size_t dim,
                                   const std::vector<bool>& use) {
    std::vector<double> mean(dim, 0.0);
    for (std::size_t r = 0; r < use.size(); ++r) {
        if (!use[r]) continue;
        for (std::size_t k = 0; k < dim; ++k) mean[k] += data[r * dim + k];
    }
    double norm = 0.0;
    for (double x : mean) norm += x * x;
    if (!(norm > 1e-24)) {
        std::fill(mean.begin(), mean.end(), 0.0);
        mean[0] = 1.0;
        return mean;
    }
    normalize(mean);
    return mean;
}

}  // namespace

EmbeddingTable EmbeddingTable::train(const Corpus& corpus, const EmbeddingOptions& options) {
    if (corpus.size() == 0) throw Error(Errc::invalid_argument, "empty corpus");
    if (options.dim < 2) throw Error(Errc::invalid_argument, "embedding dim must be >= 2");
    if (options.window < 1) throw Error(Errc::invalid_argument, "embedding window must be >= 1");
    const auto& vocab = corpus.vocab();
    const auto n = static_cast<Eigen::Index>(vocab.content_size());
    if (options.dim > static_cast<std::size_t>(n)) {
        throw Error(Errc::invalid_argument, "embedding dim " + std::to_string(options.dim) +
                                                " exceeds vocabulary size " + std::to_string(n));
    }

    const auto entries = ppmi_entries(corpus, options.window);
    std::vector<bool> has_row(static_cast<std::size_t>(n), false);
    for (const auto& t : entries) has_row[static_cast<std::size_t>(t.row())] = true;
    const auto available = static_cast<std::size_t>(std::count(has_row.begin(), has_row.end(), true));
    if (options.dim > available) {
        throw Error(Errc::invalid_argument, "embedding dim " + std::to_string(options.dim) +
                                                " exceeds available rank " + std::to_string(available) +
                                                "; use a smaller dim (<= " + std::to_string(available) + ")");
    }

    const auto dim = static_cast<Eigen::Index>(options.dim);
    const EigenPairs eig = n <= static_cast<Eigen::Index>(kDenseLimit)
                               ? dense_eigen(entries, n)
                               : randomized_eigen(entries, n, dim, options.seed);

    // Top-dim eigenpairs by magnitude; ascending index on ties.
    std::vector<Eigen::Index> order(static_cast<std::size_t>(eig.values.size()));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
        return std::abs(eig.values(a)) > std::abs(eig.values(b));
    });

    EmbeddingTable table;
    table.dim_ = options.dim;
    table.provenance_ = EmbeddingProvenance::trained;
    table.data_.assign(vocab.size() * options.dim, 0.0);
    for (Eigen::Index k = 0; k < dim; ++k) {
        const auto col = order[static_cast<std::size_t>(k)];
        Eigen::VectorXd u = eig.vectors.col(col);
        // Sign convention: largest-magnitude component positive.
        Eigen::Index arg = 0;
        u.cwiseAbs().maxCoeff(&arg);
        if (u(arg) < 0) u = -u;
        const double scale = std::sqrt(std::abs(eig.values(col)));
        for (Eigen::Index r = 0; r < n; ++r) {
            table.data_[(static_cast<std::size_t>(r) + Vocabulary::kFirstContent) * options.dim +
                        static_cast<std::size_t>(k)] = u(r) * scale;
        }
    }

    std::vector<bool> learned(vocab.size(), false);
    for (std::size_t id = Vocabulary::kFirstContent; id < vocab.size(); ++id) {
        std::span<double> row(table.data_.data() + id * options.dim, options.dim);
        if (has_row[id - Vocabulary::kFirstContent] && !is_zero(row)) {
            normalize(row);
            learned[id] = true;
        }
    }
    const auto unk = mean_direction(table.data_, options.dim, learned);
    for (std::size_t id = 0; id < vocab.size(); ++id) {
        if (!learned[id]) std::copy(unk.begin(), unk.end(), table.data_.begin() + static_cast<std::ptrdiff_t>(id * options.dim));
    }
    return table;
}

EmbeddingTable EmbeddingTable::load_text(std::istream& in, const Vocabulary& vocab) {
    std::vector<std::pair<TokenId, std::vector<double>>> rows;
    std::vector<std::vector<double>> unmatched;
    std::size_t dim = 0;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::istringstream fields(line);
        std::string surface;
        if (!(fields >> surface)) continue;
        std::vector<std::string> rest;
        for (std::string f; fields >> f;) rest.push_back(f);
        if (line_no == 1 && rest.size() == 1 &&
            surface.find_first_not_of("0123456789") == std::string::npos &&
            rest[0].find_first_not_of("0123456789") == std::string::npos) {
            continue;  // "count dim" header
        }
        std::vector<double> v;
        v.reserve(rest.size());
        for (const auto& f : rest) {
            char* end = nullptr;
            const double x = std::strtod(f.c_str(), &end);
            if (end == f.c_str() || *end != '\0' || !std::isfinite(x)) {
                throw Error(Errc::format, "bad number '" + f + "' @ line " + std::to_string(line_no));
            }
            v.push_back(x);
        }
        if (dim == 0) {
            if (v.size() < 2) throw Error(Errc::format, "embedding dim must be >= 2 @ line " + std::to_string(line_no));
            dim = v.size();
        } else if (v.size() != dim) {
            throw Error(Errc::format, "dimension mismatch: expected " + std::to_string(dim) + ", got " +
                                          std::to_string(v.size()) + " @ line " + std::to_string(line_no));
        }
        if (is_zero(v)) throw Error(Errc::format, "zero vector @ line " + std::to_string(line_no));
        normalize(v);
        if (vocab.contains(surface) && !Vocabulary::is_special(vocab.id(surface))) {
            rows.emplace_back(vocab.id(surface), std::move(v));
        } else {
            unmatched.push_back(std::move(v));
        }
    }
    if (dim == 0) throw Error(Errc::format, "no vectors in embedding file");

    EmbeddingTable table;
    table.dim_ = dim;
    table.provenance_ = EmbeddingProvenance::loaded;
    table.data_.assign(vocab.size() * dim, 0.0);
    std::vector<bool> learned(vocab.size(), false);
    for (auto& [id, v] : rows) {
        std::copy(v.begin(), v.end(), table.data_.begin() + static_cast<std::ptrdiff_t>(id * dim));
        learned[id] = true;
    }
    std::vector<double> unk;
    if (std::find(learned.begin(), learned.end(), true) != learned.end()) {
        unk = mean_direction(table.data_, dim, learned);
    } else {
        std::vector<double> flat;
        for (const auto& v : unmatched) flat.insert(flat.end(), v.begin(), v.end());
        unk = mean_direction(flat, dim, std::vector<bool>(unmatched.size(), true));
    }
    for (std::size_t id = 0; id < vocab.size(); ++id) {
        if (!learned[id]) std::copy(unk.begin(), unk.end(), table.data_.begin() + static_cast<std::ptrdiff_t>(id * dim));
    }
    return table;
}

void EmbeddingTable::save(std::ostream& out, std::uint64_t config_hash) const {
    detail::BinaryWriter w(out);
    w.header(kEmbedMagic, config_hash);
    w.u32(provenance_ == EmbeddingProvenance::trained ? 0 : 1);
    w.u64(dim_);
    w.u64(size());
    for (double x : data_) w.f64(x);
    w.finish();
}

EmbeddingTable EmbeddingTable::load(std::istream& in, std::uint64_t config_hash, const std::string& name) {
    detail::BinaryReader r(in, name);
    r.header(kEmbedMagic, config_hash);
    EmbeddingTable t;
    const auto prov = r.u32();
    if (prov > 1) r.fail("bad provenance tag");
    t.provenance_ = prov == 0 ? EmbeddingProvenance::trained : EmbeddingProvenance::loaded;
    t.dim_ = r.u64();
    const auto rows = r.u64();
    if (t.dim_ < 2 || rows > (1ull << 28) || t.dim_ > (1ull << 16)) r.fail("bad table shape");
    t.data_.resize(rows * t.dim_);
    for (double& x : t.data_) x = r.f64();
    return t;
}

std::span<const double> EmbeddingTable::vector(TokenId id) const {
    if (id >= size()) id = Vocabulary::kUnk;
    return {data_.data() + static_cast<std::size_t>(id) * dim_, dim_};
}

std::vector<std::vector<double>> EmbeddingTable::lookup(std::span<const TokenId> tokens) const {
    std::vector<std::vector<double>> out;
    out.reserve(tokens.size());
    for (TokenId t : tokens) {
        const auto v = vector(t);
        out.emplace_back(v.begin(), v.end());
    }
    return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size()) {
        throw Error(Errc::invalid_argument, "cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                                                std::to_string(v.size()) + ")");
    }
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        nu += u[i] * u[i];
        nv += v[i] * v[i];
    }
    if (nu == 0.0 || nv == 0.0) return 0.0;
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

}  // namespace cfe
