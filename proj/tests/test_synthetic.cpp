#include <doctest.h>

#include <set>
#include <sstream>

#include "cfedit/corpus.hpp"
#include "cfedit/error.hpp"
#include "cfedit/synthetic.hpp"

using namespace cfe;

TEST_CASE("generation is seeded and sized") {
    const auto a = generate_synthetic({});
    const auto b = generate_synthetic({});
    REQUIRE(a.documents.size() == 300);
    REQUIRE(a.queries.size() == 60);
    for (std::size_t i = 0; i < a.documents.size(); ++i) CHECK(a.documents[i].text == b.documents[i].text);
    CHECK(a.documents[0].id == "doc0000");
    CHECK(a.queries[7].id == "q007");
    const auto c = generate_synthetic({.seed = 5});
    CHECK(c.documents[0].text != a.documents[0].text);
    std::set<std::string> ids;
    for (const auto& d : a.documents) ids.insert(d.id);
    CHECK(ids.size() == 300);
    for (const auto& q : a.queries) {
        const auto n = tokenize(q.text).size();
        CHECK(n >= 2);
        CHECK(n <= 4);
    }
    CHECK_THROWS_AS(generate_synthetic({.documents = 0}), Error);
}

TEST_CASE("documents have several sentences") {
    const auto col = generate_synthetic({.seed = 2, .documents = 20, .queries = 0});
    for (const auto& d : col.documents) {
        const auto s = split_sentences(d.text).size();
        CHECK(s >= 2);
        CHECK(s <= 4);
    }
}

TEST_CASE("JSONL round-trip for documents and queries") {
    const auto col = generate_synthetic({.seed = 1, .documents = 10, .queries = 5});
    std::stringstream docs, queries;
    write_doc_records(docs, col.documents);
    write_query_records(queries, col.queries);
    const auto d = read_doc_records(docs);
    const auto q = read_query_records(queries);
    REQUIRE(d.size() == 10);
    REQUIRE(q.size() == 5);
    CHECK(d[3].text == col.documents[3].text);
    CHECK(q[4].id == col.queries[4].id);

    std::istringstream anon("{\"text\": \"hello\"}\n\n{\"query\": \"world\"}\n");
    const auto qs = read_query_records(anon);
    CHECK(qs[0].id == "q1");
    CHECK(qs[1].id == "q3");
    std::istringstream bad("{\"nope\": 1}\n");
    CHECK_THROWS_AS(read_query_records(bad), Error);
}
