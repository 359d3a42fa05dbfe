#include <doctest.h>

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "cfedit/corpus.hpp"
#include "cfedit/embed.hpp"
#include "cfedit/error.hpp"
#include "cfedit/synthetic.hpp"

using namespace cfe;

namespace {

// Dense PPMI built by direct counting, factored by SVD (|eigenvalue| = singular
// value for a symmetric matrix). Returns normalized rows for content tokens.
Eigen::MatrixXd oracle_embeddings(const Corpus& corpus, std::size_t window, std::size_t dim) {
    const auto n = static_cast<Eigen::Index>(corpus.vocab().content_size());
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
    for (const auto& d : corpus.documents()) {
        for (std::size_t p = 0; p < d.tokens.size(); ++p) {
            for (std::size_t q = p + 1; q < d.tokens.size() && q <= p + window; ++q) {
                const auto a = d.tokens[p] - Vocabulary::kFirstContent;
                const auto b = d.tokens[q] - Vocabulary::kFirstContent;
                c(a, b) += 1.0;
                c(b, a) += 1.0;
            }
        }
    }
    const double total = c.sum();
    const Eigen::VectorXd rows = c.rowwise().sum();
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (c(i, j) > 0) m(i, j) = std::max(0.0, std::log(c(i, j) * total / (rows(i) * rows(j))));
        }
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(m, Eigen::ComputeFullU);
    const auto k = static_cast<Eigen::Index>(dim);
    Eigen::MatrixXd e = svd.matrixU().leftCols(k) * svd.singularValues().head(k).cwiseSqrt().asDiagonal();
    e.rowwise().normalize();
    return e;
}

Corpus small_corpus(std::uint64_t seed) {
    SyntheticOptions o;
    o.seed = seed;
    o.documents = 30;
    o.queries = 0;
    o.topics = 3;
    return Corpus::build(generate_synthetic(o).documents);
}

}  // namespace

TEST_CASE("trained vectors reproduce the dense PPMI factorization oracle") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        const auto corpus = small_corpus(seed);
        const std::size_t dim = 8;
        const auto table = EmbeddingTable::train(corpus, {.dim = dim, .window = 3, .seed = 0});
        const auto oracle = oracle_embeddings(corpus, 3, dim);
        const auto n = static_cast<Eigen::Index>(corpus.vocab().content_size());
        // Cosines between tokens are invariant to the per-component sign convention.
        double worst = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            for (Eigen::Index j = 0; j < n; ++j) {
                const double got = cosine(table.vector(static_cast<TokenId>(i + 3)),
                                          table.vector(static_cast<TokenId>(j + 3)));
                worst = std::max(worst, std::abs(got - oracle.row(i).dot(oracle.row(j))));
            }
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("vectors are unit length and specials share the UNK vector") {
    const auto corpus = small_corpus(4);
    const auto table = EmbeddingTable::train(corpus, {.dim = 6});
    CHECK(table.dim() == 6);
    CHECK(table.size() == corpus.vocab().size());
    for (TokenId id = 0; id < corpus.vocab().size(); ++id) {
        double norm = 0.0;
        for (double x : table.vector(id)) norm += x * x;
        CHECK(std::sqrt(norm) == doctest::Approx(1.0).epsilon(1e-12));
    }
    const auto unk = table.vector(Vocabulary::kUnk);
    const auto pad = table.vector(Vocabulary::kPad);
    CHECK(std::equal(unk.begin(), unk.end(), pad.begin()));
    const auto far = table.vector(999999);
    CHECK(std::equal(unk.begin(), unk.end(), far.begin()));
}

TEST_CASE("sign convention: largest-magnitude component of each factor is positive") {
    const auto corpus = small_corpus(5);
    const auto a = EmbeddingTable::train(corpus, {.dim = 4});
    const auto b = EmbeddingTable::train(corpus, {.dim = 4});
    CHECK(a == b);
}

TEST_CASE("dimension checks") {
    const auto corpus = Corpus::build(sample_corpus());
    CHECK_THROWS_AS(EmbeddingTable::train(corpus, {.dim = 1}), Error);
    CHECK_THROWS_AS(EmbeddingTable::train(corpus, {.dim = 8}), Error);
    const auto lonely = Corpus::build({{"a", "x"}, {"b", "y"}, {"c", "z w"}});
    try {
        (void)EmbeddingTable::train(lonely, {.dim = 3});
        FAIL("expected a rank error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("smaller dim") != std::string::npos);
    }
}

TEST_CASE("randomized solver agrees with the dense solver on a large vocabulary") {
    SyntheticOptions o;
    o.seed = 9;
    o.documents = 400;
    o.queries = 0;
    o.topics = 80;
    const auto corpus = Corpus::build(generate_synthetic(o).documents);
    REQUIRE(corpus.vocab().content_size() > EmbeddingTable::kDenseLimit);
    const std::size_t dim = 16;
    const auto table = EmbeddingTable::train(corpus, {.dim = dim, .window = 5, .seed = 1});
    CHECK(table == EmbeddingTable::train(corpus, {.dim = dim, .window = 5, .seed = 1}));
    const auto oracle = oracle_embeddings(corpus, 5, dim);
    double err = 0.0;
    std::size_t pairs = 0;
    for (Eigen::Index i = 0; i < 200; ++i) {
        for (Eigen::Index j = i + 1; j < 200; ++j) {
            const double got = cosine(table.vector(static_cast<TokenId>(i + 3)),
                                      table.vector(static_cast<TokenId>(j + 3)));
            err += std::abs(got - oracle.row(i).dot(oracle.row(j)));
            ++pairs;
        }
    }
    CHECK(err / static_cast<double>(pairs) < 0.02);
}

TEST_CASE("text vectors: header, normalization, missing tokens and errors") {
    const auto vocab = Vocabulary::from_content({"apple", "pie", "tart"});
    std::istringstream in("2 2\napple 3 4\npie 0 2\nother 1 0\n");
    const auto t = EmbeddingTable::load_text(in, vocab);
    CHECK(t.provenance() == EmbeddingProvenance::loaded);
    CHECK(t.vector(3)[0] == doctest::Approx(0.6));
    CHECK(t.vector(3)[1] == doctest::Approx(0.8));
    // tart is missing: it gets the normalized mean of apple and pie.
    const double mx = 0.6, my = 1.8, mn = std::hypot(mx, my);
    CHECK(t.vector(5)[0] == doctest::Approx(mx / mn));
    CHECK(t.vector(5)[1] == doctest::Approx(my / mn));

    std::istringstream mismatch("apple 1 2\npie 1 2 3\n");
    CHECK_THROWS_WITH_AS(EmbeddingTable::load_text(mismatch, vocab), "dimension mismatch: expected 2, got 3 @ line 2",
                         Error);
    std::istringstream zero("apple 0 0\n");
    CHECK_THROWS_AS(EmbeddingTable::load_text(zero, vocab), Error);
    std::istringstream nan("apple 1 nan\n");
    CHECK_THROWS_AS(EmbeddingTable::load_text(nan, vocab), Error);
}

TEST_CASE("binary round-trip and hash check") {
    const auto corpus = small_corpus(6);
    const auto table = EmbeddingTable::train(corpus, {.dim = 4});
    std::stringstream buf;
    table.save(buf, 7);
    CHECK(EmbeddingTable::load(buf, 7) == table);
    std::stringstream buf2;
    table.save(buf2, 7);
    CHECK_THROWS_AS(EmbeddingTable::load(buf2, 8), Error);
}

TEST_CASE("cosine") {
    const std::vector<double> a{1, 0}, b{0, 2}, z{0, 0}, c{1, 0, 0};
    CHECK(cosine(a, a) == 1.0);
    CHECK(cosine(a, b) == 0.0);
    CHECK(cosine(a, z) == 0.0);
    CHECK_THROWS_AS(cosine(a, c), Error);
}
