#include "cfedit/remote.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>

#include "cfedit/error.hpp"

namespace cfe::remote {
namespace {

using nlohmann::json;

[[noreturn]] void protocol_error(const std::string& what) { throw Error(Errc::protocol, "protocol error: " + what); }

struct Target {
    std::string scheme_host_port;
    std::string path;
};

Target split_base(const BackendEndpoint& ep) {
    const auto scheme = ep.base.find("://");
    if (scheme == std::string::npos) throw Error(Errc::invalid_argument, "backend url needs a scheme: " + ep.base);
    if (ep.base.compare(0, scheme, "http") != 0) {
        throw Error(Errc::invalid_argument, "only http backends are supported: " + ep.base);
    }
    const auto slash = ep.base.find('/', scheme + 3);
    Target t;
    t.scheme_host_port = ep.base.substr(0, slash);
    std::string prefix = slash == std::string::npos ? "" : ep.base.substr(slash);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    t.path = prefix + std::string(role_path(ep.role));
    return t;
}

double finite_number(const json& body, const char* field) {
    auto it = body.find(field);
    if (it == body.end()) protocol_error("missing field '" + std::string(field) + "'");
    if (!it->is_number()) protocol_error("field '" + std::string(field) + "' is not a number");
    const double v = it->get<double>();
    if (!std::isfinite(v)) protocol_error("field '" + std::string(field) + "' is not finite");
    return v;
}

void require_object(const json& body) {
    if (!body.is_object()) protocol_error("response is not a JSON object");
}

json surfaces(const Vocabulary& vocab, std::span<const TokenId> ids) {
    json arr = json::array();
    for (TokenId t : ids) arr.push_back(vocab.surface(t));
    return arr;
}

}  // namespace

std::string_view role_name(Role role) {
    switch (role) {
    case Role::score: return "score";
    case Role::embed: return "embed";
    case Role::predict: return "predict";
    case Role::perplexity: return "perplexity";
    }
    return "unknown";
}

std::string_view role_path(Role role) {
    switch (role) {
    case Role::score: return "/score";
    case Role::embed: return "/embed";
    case Role::predict: return "/predict";
    case Role::perplexity: return "/perplexity";
    }
    return "/";
}

json call_backend(const BackendEndpoint& endpoint, const json& request) {
    if (endpoint.timeout_ms <= 0) throw Error(Errc::invalid_argument, "backend timeout must be > 0");
    if (endpoint.retries < 0) throw Error(Errc::invalid_argument, "backend retry budget must be >= 0");
    const auto target = split_base(endpoint);
    json payload = request;
    payload["proto_version"] = kProtoVersion;
    const std::string body = payload.dump();

    httplib::Headers headers;
    if (!endpoint.token.empty()) headers.emplace("Authorization", "Bearer " + endpoint.token);

    std::string last_failure;
    for (int attempt = 0; attempt <= endpoint.retries; ++attempt) {
        if (attempt > 0 && endpoint.backoff_ms > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(endpoint.backoff_ms) * (1 << std::min(attempt - 1, 16)));
        }
        httplib::Client client(target.scheme_host_port);
        const auto timeout = std::chrono::milliseconds(endpoint.timeout_ms);
        client.set_connection_timeout(timeout);
        client.set_read_timeout(timeout);
        client.set_write_timeout(timeout);
        auto res = client.Post(target.path, headers, body, "application/json");
        if (!res) {
            last_failure = httplib::to_string(res.error());
            continue;
        }
        if (res->status >= 500) {
            last_failure = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status < 200 || res->status >= 300) {
            protocol_error(std::string(role_name(endpoint.role)) + " backend answered HTTP " + std::to_string(res->status));
        }
        json parsed;
        try {
            parsed = json::parse(res->body);
        } catch (const json::parse_error&) {
            protocol_error("response body is not valid JSON");
        }
        require_object(parsed);
        if (auto v = parsed.find("proto_version"); v != parsed.end()) {
            if (!v->is_number_integer() || v->get<int>() != kProtoVersion) {
                protocol_error("field 'proto_version' must be " + std::to_string(kProtoVersion));
            }
        }
        return parsed;
    }
    throw Error(Errc::backend_unavailable, "backend unavailable: " + endpoint.base + std::string(role_path(endpoint.role)) +
                                               " (" + last_failure + ") after " +
                                               std::to_string(endpoint.retries + 1) + " attempts");
}

double parse_score_response(const json& body) {
    require_object(body);
    return finite_number(body, "score");
}

std::vector<std::vector<double>> parse_embed_response(const json& body, std::size_t expected_count) {
    require_object(body);
    auto it = body.find("vectors");
    if (it == body.end() || !it->is_array()) protocol_error("field 'vectors' must be an array");
    if (it->size() != expected_count) {
        protocol_error("field 'vectors' has " + std::to_string(it->size()) + " rows, expected " +
                       std::to_string(expected_count));
    }
    std::vector<std::vector<double>> out;
    std::size_t dim = 0;
    for (const auto& row : *it) {
        if (!row.is_array()) protocol_error("field 'vectors' rows must be arrays");
        std::vector<double> v;
        double norm = 0.0;
        for (const auto& x : row) {
            if (!x.is_number()) protocol_error("field 'vectors' holds a non-number");
            const double d = x.get<double>();
            if (!std::isfinite(d)) protocol_error("field 'vectors' holds a non-finite number");
            v.push_back(d);
            norm += d * d;
        }
        if (v.size() < 2) protocol_error("field 'vectors' rows need dim >= 2");
        if (dim == 0) dim = v.size();
        if (v.size() != dim) protocol_error("field 'vectors' rows differ in length");
        if (norm == 0.0) protocol_error("field 'vectors' holds a zero vector");
        norm = std::sqrt(norm);
        if (std::abs(norm - 1.0) > 1e-12) {
            for (double& d : v) d /= norm;
        }
        out.push_back(std::move(v));
    }
    return out;
}

PredictionDistribution parse_predict_response(const json& body, const Vocabulary& vocab, std::size_t position,
                                              std::size_t top) {
    require_object(body);
    auto toks = body.find("tokens");
    auto probs = body.find("probs");
    if (toks == body.end() || !toks->is_array()) protocol_error("field 'tokens' must be an array");
    if (probs == body.end() || !probs->is_array()) protocol_error("field 'probs' must be an array");
    if (toks->size() != probs->size()) protocol_error("fields 'tokens' and 'probs' differ in length");
    if (toks->empty() || toks->size() > top) {
        protocol_error("field 'tokens' must hold 1.." + std::to_string(top) + " entries");
    }
    PredictionDistribution dist;
    dist.position = position;
    for (std::size_t i = 0; i < toks->size(); ++i) {
        if (!(*toks)[i].is_string()) protocol_error("field 'tokens' holds a non-string");
        if (!(*probs)[i].is_number()) protocol_error("field 'probs' holds a non-number");
        const double p = (*probs)[i].get<double>();
        if (!std::isfinite(p)) protocol_error("field 'probs' holds a non-finite number");
        if (!(p > 0.0 && p <= 1.0)) protocol_error("field 'probs' must lie in (0, 1]");
        const auto surface = (*toks)[i].get<std::string>();
        if (!vocab.contains(surface)) continue;
        const TokenId id = vocab.id(surface);
        if (Vocabulary::is_special(id)) continue;
        dist.entries.push_back({id, p});
    }
    if (dist.entries.empty()) protocol_error("field 'tokens' holds no usable vocabulary token");
    const auto better = [](const PredictionEntry& a, const PredictionEntry& b) {
        if (a.prob != b.prob) return a.prob > b.prob;
        return a.token < b.token;
    };
    if (!std::is_sorted(dist.entries.begin(), dist.entries.end(), better)) {
        std::sort(dist.entries.begin(), dist.entries.end(), better);
    }
    return dist;
}

double parse_perplexity_response(const json& body) {
    require_object(body);
    const double ppl = finite_number(body, "ppl");
    if (!(ppl > 0.0)) protocol_error("field 'ppl' must be > 0");
    return ppl;
}

RemoteSearchModel::RemoteSearchModel(BackendEndpoint endpoint, const Vocabulary& vocab)
    : endpoint_(std::move(endpoint)), vocab_(vocab) {
    endpoint_.role = Role::score;
}

double RemoteSearchModel::score(std::span<const TokenId> query, const Document& doc) const {
    const json req = {{"query", vocab_.render(query)}, {"doc_id", doc.id}};
    return parse_score_response(call_backend(endpoint_, req));
}

RemoteTokenVectors::RemoteTokenVectors(BackendEndpoint endpoint, const Vocabulary& vocab)
    : endpoint_(std::move(endpoint)), vocab_(vocab) {
    endpoint_.role = Role::embed;
}

std::size_t RemoteTokenVectors::dim() const {
    std::call_once(dim_once_, [this] {
        const TokenId probe = Vocabulary::kUnk;
        dim_ = lookup(std::span<const TokenId>(&probe, 1)).front().size();
    });
    return dim_;
}

std::vector<std::vector<double>> RemoteTokenVectors::lookup(std::span<const TokenId> tokens) const {
    if (tokens.empty()) return {};
    const json req = {{"tokens", surfaces(vocab_, tokens)}};
    return parse_embed_response(call_backend(endpoint_, req), tokens.size());
}

RemotePredictor::RemotePredictor(BackendEndpoint endpoint, const Vocabulary& vocab)
    : endpoint_(std::move(endpoint)), vocab_(vocab) {
    endpoint_.role = Role::predict;
}

PredictionDistribution RemotePredictor::predict(std::span<const TokenId> masked_query, const Document& d_prime,
                                                std::size_t position, std::size_t top) const {
    if (position >= masked_query.size() || masked_query[position] != Vocabulary::kMask) {
        throw Error(Errc::invalid_argument, "position " + std::to_string(position) + " is not a masked slot");
    }
    const json req = {{"masked_query", surfaces(vocab_, masked_query)},
                      {"doc", d_prime.text},
                      {"position", position},
                      {"top", top}};
    return parse_predict_response(call_backend(endpoint_, req), vocab_, position, top);
}

RemotePerplexity::RemotePerplexity(BackendEndpoint endpoint, const Vocabulary& vocab)
    : endpoint_(std::move(endpoint)), vocab_(vocab) {
    endpoint_.role = Role::perplexity;
}

double RemotePerplexity::perplexity(std::span<const TokenId> seq) const {
    if (seq.empty()) throw Error(Errc::invalid_argument, "perplexity of an empty sequence");
    const json req = {{"tokens", surfaces(vocab_, seq)}};
    return parse_perplexity_response(call_backend(endpoint_, req));
}

}  // namespace cfe::remote
