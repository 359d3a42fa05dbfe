#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cfedit/corpus.hpp"

namespace cfe {

struct QueryRecord {
    std::string id;
    std::string text;
};

/// Reads one JSON object per line with a string `query` (or `text`) and an
/// optional `id`; missing ids become q<line>.
std::vector<QueryRecord> read_query_records(std::istream& in);

struct SyntheticOptions {
    std::uint64_t seed = 0;
    std::size_t documents = 300;
    std::size_t queries = 60;
    std::size_t topics = 12;
};

struct SyntheticCollection {
    std::vector<DocRecord> documents;
    std::vector<QueryRecord> queries;
};

/// Topical pseudo-word collection: every document mixes function words with
/// words of its own topic (weighted toward a per-document focus set) and a
/// little cross-topic noise. Queries draw 2-4 distinct topic words anchored on
/// one document. Fully determined by the options.
SyntheticCollection generate_synthetic(const SyntheticOptions& options);

/// d1 "apple pie recipe", d2 "apple tree orchard", d3 "banana bread recipe".
std::vector<DocRecord> sample_corpus();

void write_doc_records(std::ostream& out, const std::vector<DocRecord>& docs);
void write_query_records(std::ostream& out, const std::vector<QueryRecord>& queries);

}  // namespace cfe
