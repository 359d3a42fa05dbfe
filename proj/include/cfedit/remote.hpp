#pragma once

#include <cstddef>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "cfedit/corpus.hpp"
#include "cfedit/embed.hpp"
#include "cfedit/lm.hpp"

namespace cfe::remote {

inline constexpr int kProtoVersion = 1;

enum class Role { score, embed, predict, perplexity };

std::string_view role_name(Role role);
/// "/score", "/embed", "/predict", "/perplexity".
std::string_view role_path(Role role);

struct BackendEndpoint {
    std::string base;  // scheme://host:port[/prefix]
    Role role = Role::score;
    int timeout_ms = 5000;
    int retries = 2;
    int backoff_ms = 10;  // first retry delay, doubled per attempt
    std::string token;    // sent as "Authorization: Bearer <token>" when set
};

/// POSTs `request` (with proto_version added) to base + role path. Transport
/// failures, timeouts and 5xx responses are retried up to `retries` times;
/// exhaustion raises Errc::backend_unavailable. 4xx responses, unparsable
/// bodies and proto_version mismatches raise Errc::protocol. The returned body
/// is not yet validated against the role schema.
nlohmann::json call_backend(const BackendEndpoint& endpoint, const nlohmann::json& request);

// Role-schema validation. Each throws Errc::protocol naming the offending field.
double parse_score_response(const nlohmann::json& body);
std::vector<std::vector<double>> parse_embed_response(const nlohmann::json& body, std::size_t expected_count);
PredictionDistribution parse_predict_response(const nlohmann::json& body, const Vocabulary& vocab,
                                              std::size_t position, std::size_t top);
double parse_perplexity_response(const nlohmann::json& body);

/// rel(q, d) from a remote scorer: {query, doc_id} -> {score}.
class RemoteSearchModel final : public SearchModel {
public:
    RemoteSearchModel(BackendEndpoint endpoint, const Vocabulary& vocab);
    double score(std::span<const TokenId> query, const Document& doc) const override;

private:
    BackendEndpoint endpoint_;
    const Vocabulary& vocab_;
};

/// {tokens} -> {vectors}; vectors are re-normalized client-side when their
/// norm is off by more than 1e-12.
class RemoteTokenVectors final : public TokenVectors {
public:
    RemoteTokenVectors(BackendEndpoint endpoint, const Vocabulary& vocab);
    std::size_t dim() const override;
    std::vector<std::vector<double>> lookup(std::span<const TokenId> tokens) const override;

private:
    BackendEndpoint endpoint_;
    const Vocabulary& vocab_;
    mutable std::once_flag dim_once_;
    mutable std::size_t dim_ = 0;
};

/// {masked_query, doc, position, top} -> {tokens, probs}. Specials and
/// surfaces outside the vocabulary are dropped; entries are re-sorted when the
/// backend returns them out of order.
class RemotePredictor final : public MaskedPredictor {
public:
    RemotePredictor(BackendEndpoint endpoint, const Vocabulary& vocab);
    PredictionDistribution predict(std::span<const TokenId> masked_query, const Document& d_prime,
                                   std::size_t position, std::size_t top) const override;

private:
    BackendEndpoint endpoint_;
    const Vocabulary& vocab_;
};

/// {tokens} -> {ppl}.
class RemotePerplexity final : public PerplexityModel {
public:
    RemotePerplexity(BackendEndpoint endpoint, const Vocabulary& vocab);
    double perplexity(std::span<const TokenId> seq) const override;

private:
    BackendEndpoint endpoint_;
    const Vocabulary& vocab_;
};

}  // namespace cfe::remote
