#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "cfedit/error.hpp"
#include "cfedit/lm.hpp"
#include "fixtures.hpp"

using namespace cfe;

TEST_CASE("add-k bigram probabilities by hand") {
    const auto vocab = Vocabulary::from_content({"a", "b"});
    const std::vector<TokenSeq> sents{{3, 4}, {3, 4}};
    const auto lm = NgramLM::train(sents, vocab, 2, 0.1);
    const TokenSeq a{3};
    CHECK(lm.prob(a, 4) == doctest::Approx(2.1 / 2.2).epsilon(1e-14));
    CHECK(lm.prob(a, 3) == doctest::Approx(0.1 / 2.2).epsilon(1e-14));
    // BOS context saw "a" twice.
    CHECK(lm.prob({}, 3) == doctest::Approx(2.1 / 2.2).epsilon(1e-14));
    // Unseen context: uniform.
    const TokenSeq b{4};
    CHECK(lm.prob(b, 3) == doctest::Approx(0.5));
    // Specials get the smoothing floor.
    CHECK(lm.prob(a, Vocabulary::kUnk) == doctest::Approx(0.1 / 2.2).epsilon(1e-14));
}

TEST_CASE("conditional distributions sum to one") {
    const auto w = testing::synthetic_world();
    std::vector<double> p;
    for (const auto& hist : {TokenSeq{}, TokenSeq{3}, TokenSeq{3, 4}, TokenSeq{9999}}) {
        w->lm.conditional(hist, p);
        CHECK(std::accumulate(p.begin(), p.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("perplexity matches the chain rule") {
    const auto w = testing::sample_world();
    const auto& v = w->corpus.vocab();
    const auto q = v.encode_text("banana recipe");
    const double expected = std::exp(-(std::log(1.1 / 3.7) + std::log(0.1 / 1.7)) / 2.0);
    CHECK(w->lm.perplexity(q) == doctest::Approx(expected).epsilon(1e-13));
    CHECK_THROWS_AS(w->lm.perplexity({}), Error);
}

TEST_CASE("masked prediction interpolates the n-gram and document unigram") {
    const auto w = testing::sample_world();
    const auto& v = w->corpus.vocab();
    const TokenSeq masked{Vocabulary::kMask, v.id("recipe")};
    const auto& d3 = w->corpus.at("d3");
    const auto full = masked_distribution(masked, d3, 0, w->lm, 0.5);
    CHECK(std::accumulate(full.begin(), full.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-12));

    const auto top = predict_masked(masked, d3, 0, 4, w->lm, 0.5);
    REQUIRE(top.entries.size() == 4);
    // apple and banana tie at 2.2/7.4; bread and recipe tie at 1.2/7.4.
    CHECK(top.entries[0].prob == doctest::Approx(2.2 / 7.4).epsilon(1e-12));
    CHECK(top.entries[1].prob == doctest::Approx(2.2 / 7.4).epsilon(1e-12));
    CHECK(std::set<TokenId>{top.entries[0].token, top.entries[1].token} ==
          std::set<TokenId>{v.id("apple"), v.id("banana")});
    CHECK(top.entries[2].token == v.id("recipe"));
    CHECK(top.entries[3].token == v.id("bread"));
    CHECK(top.entries[2].prob == doctest::Approx(1.2 / 7.4).epsilon(1e-12));
    CHECK(full[v.id("pie") - 3] == doctest::Approx(0.2 / 7.4).epsilon(1e-12));
    for (const auto& e : top.entries) CHECK_FALSE(Vocabulary::is_special(e.token));
}

TEST_CASE("a special token in the left context falls back to the document distribution") {
    const auto w = testing::sample_world();
    const auto& v = w->corpus.vocab();
    const TokenSeq masked{Vocabulary::kUnk, Vocabulary::kMask};
    const auto p = masked_distribution(masked, w->corpus.at("d3"), 1, w->lm, 0.5);
    CHECK(p[v.id("banana") - 3] == doctest::Approx(1.1 / 3.7).epsilon(1e-12));
    CHECK(p[v.id("apple") - 3] == doctest::Approx(0.1 / 3.7).epsilon(1e-12));
}

TEST_CASE("prediction argument checks") {
    const auto w = testing::sample_world();
    const auto& d = w->corpus.at("d3");
    const TokenSeq masked{Vocabulary::kMask, Vocabulary::kMask};
    CHECK_THROWS_AS(predict_masked(masked, d, 1, 3, w->lm, 0.5), Error);  // left slot unfilled
    CHECK_THROWS_AS(predict_masked(masked, d, 5, 3, w->lm, 0.5), Error);
    CHECK_THROWS_AS(predict_masked(masked, d, 0, 0, w->lm, 0.5), Error);
    CHECK_THROWS_AS(predict_masked(masked, d, 0, 3, w->lm, 1.5), Error);
    const TokenSeq filled{3, 4};
    CHECK_THROWS_AS(predict_masked(filled, d, 0, 3, w->lm, 0.5), Error);
}

TEST_CASE("lm round-trips through its binary form") {
    const auto w = testing::synthetic_world();
    std::stringstream buf;
    w->lm.save(buf, 11);
    const auto copy = NgramLM::load(buf, w->corpus.vocab(), 11);
    const auto q = w->corpus.vocab().encode_text(testing::synthetic_collection().queries[0].text);
    CHECK(copy.perplexity(q) == w->lm.perplexity(q));
    CHECK(copy.order() == 3);
    std::stringstream buf2;
    w->lm.save(buf2, 11);
    CHECK_THROWS_AS(NgramLM::load(buf2, w->corpus.vocab(), 12), Error);
}
