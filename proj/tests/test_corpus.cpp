#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "cfedit/corpus.hpp"
#include "cfedit/error.hpp"
#include "cfedit/synthetic.hpp"

using namespace cfe;

namespace {

// Straight transcription of the scoring formula over raw token lists.
double oracle_bm25(const std::vector<std::vector<std::string>>& docs, const std::vector<std::string>& q,
                   std::size_t d, double k1 = 1.2, double b = 0.75) {
    const double n = static_cast<double>(docs.size());
    double avgdl = 0.0;
    for (const auto& doc : docs) avgdl += static_cast<double>(doc.size());
    avgdl /= n;
    double score = 0.0;
    for (const auto& term : q) {
        double df = 0.0;
        for (const auto& doc : docs) df += std::count(doc.begin(), doc.end(), term) > 0 ? 1.0 : 0.0;
        if (df == 0.0) continue;
        const double tf = static_cast<double>(std::count(docs[d].begin(), docs[d].end(), term));
        const double idf = std::log(1.0 + (n - df + 0.5) / (df + 0.5));
        score += idf * tf * (k1 + 1.0) / (tf + k1 * (1.0 - b + b * static_cast<double>(docs[d].size()) / avgdl));
    }
    return score;
}

}  // namespace

TEST_CASE("sample corpus BM25 golden values") {
    const auto corpus = Corpus::build(sample_corpus());
    const Bm25 bm25(corpus);
    const auto q = corpus.vocab().encode_text("apple recipe");
    const double l16 = std::log(1.6);
    CHECK(bm25.idf(corpus.vocab().id("apple")) == doctest::Approx(l16).epsilon(1e-12));
    CHECK(bm25.idf(corpus.vocab().id("banana")) == doctest::Approx(std::log(8.0 / 3.0)).epsilon(1e-12));
    CHECK(std::abs(bm25.score(q, corpus.at("d1")) - 2.0 * l16) < 1e-9);
    CHECK(std::abs(bm25.score(q, corpus.at("d2")) - l16) < 1e-9);
    CHECK(std::abs(bm25.score(q, corpus.at("d3")) - l16) < 1e-9);

    const auto r = bm25.search(q, 3);
    REQUIRE(r.entries.size() == 3);
    CHECK(r.entries[0].doc_id == "d1");
    CHECK(r.entries[1].doc_id == "d2");
    CHECK(r.entries[2].doc_id == "d3");
}

TEST_CASE("BM25 matches the formula oracle on random corpora") {
    std::mt19937 rng(7);
    const std::vector<std::string> words{"a", "b", "c", "d", "e", "f", "g", "h"};
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<DocRecord> recs;
        std::vector<std::vector<std::string>> raw;
        for (int d = 0; d < 6; ++d) {
            std::vector<std::string> toks;
            std::string text;
            const int len = 1 + static_cast<int>(rng() % 9);
            for (int i = 0; i < len; ++i) {
                toks.push_back(words[rng() % words.size()]);
                text += toks.back() + " ";
            }
            raw.push_back(toks);
            recs.push_back({"x" + std::to_string(d), text});
        }
        const auto corpus = Corpus::build(recs);
        const Bm25 bm25(corpus);
        std::vector<std::string> q{words[rng() % 8], words[rng() % 8], words[rng() % 8]};
        const auto ids = corpus.vocab().encode(q);
        for (std::size_t d = 0; d < raw.size(); ++d) {
            CHECK(std::abs(bm25.score(ids, corpus.document(d)) - oracle_bm25(raw, q, d)) < 1e-9);
        }
    }
}

TEST_CASE("search orders ties by document id and fills with zero-score documents") {
    const auto corpus = Corpus::build({{"z", "alpha"}, {"m", "alpha"}, {"a", "beta"}, {"b", "gamma"}});
    const Bm25 bm25(corpus);
    const auto r = bm25.search(corpus.vocab().encode_text("alpha"), 4);
    REQUIRE(r.entries.size() == 4);
    CHECK(r.entries[0].doc_id == "m");
    CHECK(r.entries[1].doc_id == "z");
    CHECK(r.entries[2].doc_id == "a");
    CHECK(r.entries[3].doc_id == "b");
    CHECK(r.entries[2].score == 0.0);
    CHECK(bm25.search(corpus.vocab().encode_text("alpha"), 10).entries.size() == 4);
    CHECK_THROWS_AS(bm25.search(corpus.vocab().encode_text("alpha"), 0), Error);
}

TEST_CASE("special tokens never match") {
    const auto corpus = Corpus::build(sample_corpus());
    const Bm25 bm25(corpus);
    const TokenSeq q{Vocabulary::kPad, Vocabulary::kUnk, Vocabulary::kMask};
    for (const auto& d : corpus.documents()) CHECK(bm25.score(q, d) == 0.0);
    CHECK(bm25.representation(q).is_zero());
}

TEST_CASE("query terms count per occurrence") {
    const auto corpus = Corpus::build(sample_corpus());
    const Bm25 bm25(corpus);
    const auto once = bm25.score(corpus.vocab().encode_text("apple"), corpus.at("d1"));
    const auto twice = bm25.score(corpus.vocab().encode_text("apple apple"), corpus.at("d1"));
    CHECK(twice == doctest::Approx(2.0 * once));
}

TEST_CASE("representation is idf-weighted and unit length") {
    const auto corpus = Corpus::build(sample_corpus());
    const Bm25 bm25(corpus);
    const auto v = bm25.representation(corpus.vocab().encode_text("apple banana"));
    REQUIRE(v.entries.size() == 2);
    const double a = std::log(1.6), b = std::log(8.0 / 3.0);
    CHECK(v.entries[0].second == doctest::Approx(a / std::hypot(a, b)));
    CHECK(v.entries[1].second == doctest::Approx(b / std::hypot(a, b)));
    CHECK(sparse_cosine(v, v) == 1.0);
}

TEST_CASE("JSONL ingestion") {
    std::istringstream in(
        "{\"id\": \"a\", \"text\": \"hello world\"}\n\n{\"_id\": \"b\", \"title\": \"T\", \"text\": \"body\"}\n");
    const auto recs = read_doc_records(in);
    REQUIRE(recs.size() == 2);
    CHECK(recs[1].id == "b");
    CHECK(recs[1].text == "T. body");

    std::istringstream bad("{\"id\": \"a\"}\n");
    CHECK_THROWS_WITH_AS(read_doc_records(bad), "missing field: text @ line 1", Error);
    std::istringstream junk("{\"id\": \"a\", \"text\": \"x\"}\nnot json\n");
    CHECK_THROWS_WITH_AS(read_doc_records(junk), "malformed record @ line 2", Error);
    CHECK_THROWS_AS(Corpus::build({{"a", "x"}, {"a", "y"}}), Error);
    CHECK_THROWS_AS(Corpus::build({}), Error);
}

TEST_CASE("index round-trips and rejects a foreign config hash") {
    const auto corpus = Corpus::build(generate_synthetic({.seed = 3, .documents = 40, .queries = 0}).documents);
    std::stringstream buf;
    corpus.save(buf, 42);
    const auto copy = Corpus::load(buf, 42);
    CHECK(copy.size() == corpus.size());
    CHECK(copy.vocab() == corpus.vocab());
    CHECK(copy.avgdl() == corpus.avgdl());
    const Bm25 a(corpus), b(copy);
    const auto q = corpus.vocab().encode_text(corpus.document(5).text);
    CHECK(a.score(q, corpus.document(5)) == b.score(q, copy.document(5)));

    std::stringstream buf2;
    corpus.save(buf2, 42);
    try {
        (void)Corpus::load(buf2, 43);
        FAIL("expected a hash mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::precondition);
        CHECK(std::string(e.what()).find("index") != std::string::npos);
    }
    std::stringstream trunc(buf.str().substr(0, 10));
    CHECK_THROWS_AS(Corpus::load(trunc, 42), Error);
    CHECK_THROWS_AS(corpus.at("nope"), Error);
}
