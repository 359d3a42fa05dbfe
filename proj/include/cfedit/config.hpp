#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>

#include <json.hpp>

#include "cfedit/masker.hpp"
#include "cfedit/remote.hpp"

namespace cfe {

struct EndpointConfig {
    std::string url;
    int timeout_ms = 5000;
    int retries = 2;
    std::string token;

    bool operator==(const EndpointConfig&) const = default;
};

/// Everything a run needs. Serialized as nested JSON:
///   corpus, artifacts_dir, embeddings_source, min_count, seed, workers, output,
///   search{k1, b, top_k}, embed{dim, window}, lm{order, k}, masker,
///   editor{beam, lambda, max_masks}, backends{score|embed|predict|perplexity: {url, timeout_ms, retries, token}}
struct RunConfig {
    std::string corpus;
    std::string artifacts_dir = "artifacts";
    std::string embeddings_source;  // optional word-vector text file replacing training
    std::size_t min_count = 1;
    std::uint64_t seed = 0;
    std::size_t workers = 0;  // 0 = available parallelism
    std::string output = "report";

    double k1 = 1.2;
    double b_bm25 = 0.75;
    std::size_t top_k = 5;

    std::size_t dim = 64;
    std::size_t window = 5;

    std::size_t lm_order = 3;
    double lm_k = 0.1;

    MaskerKind masker = MaskerKind::maxsim;

    std::size_t beam = 10;
    double lambda = 0.5;
    std::size_t max_masks = 0;  // 0 = query length

    std::map<remote::Role, EndpointConfig> backends;

    bool operator==(const RunConfig&) const = default;

    nlohmann::json to_json() const;
    /// Missing keys keep their defaults. Unknown keys, wrong types and values
    /// violating an invariant raise Errc::invalid_argument naming the field.
    static RunConfig from_json(const nlohmann::json& j);
    void validate() const;

    /// FNV-1a over the fields that shape the built artifacts.
    std::uint64_t artifact_hash() const;

    std::string index_path() const;
    std::string embeddings_path() const;
    std::string lm_path() const;
};

}  // namespace cfe
