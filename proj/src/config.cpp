#include "cfedit/config.hpp"

#include <filesystem>
#include <set>

#include "cfedit/error.hpp"

namespace cfe {
namespace {

using nlohmann::json;

[[noreturn]] void bad_field(const std::string& field, const std::string& why) {
    throw Error(Errc::invalid_argument, "invalid config field '" + field + "': " + why);
}

void reject_unknown(const json& obj, const std::string& prefix, std::initializer_list<const char*> known) {
    if (!obj.is_object()) bad_field(prefix.empty() ? "<root>" : prefix, "expected an object");
    const std::set<std::string> allowed(known.begin(), known.end());
    for (const auto& [key, value] : obj.items()) {
        if (!allowed.count(key)) bad_field(prefix.empty() ? key : prefix + "." + key, "unknown field");
    }
}

template <typename T>
void read(const json& obj, const char* key, const std::string& path, T& out) {
    auto it = obj.find(key);
    if (it == obj.end()) return;
    const std::string name = path.empty() ? key : path + "." + key;
    if constexpr (std::is_same_v<T, std::string>) {
        if (!it->is_string()) bad_field(name, "expected a string");
        out = it->get<std::string>();
    } else if constexpr (std::is_same_v<T, double>) {
        if (!it->is_number()) bad_field(name, "expected a number");
        out = it->get<double>();
    } else if constexpr (std::is_same_v<T, int>) {
        if (!it->is_number_integer()) bad_field(name, "expected an integer");
        out = it->get<int>();
    } else {
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
            bad_field(name, "expected a non-negative integer");
        }
        out = it->get<T>();
    }
}

const json& section(const json& j, const char* key) {
    static const json empty = json::object();
    auto it = j.find(key);
    return it == j.end() ? empty : *it;
}

std::string masker_name(MaskerKind m) { return m == MaskerKind::maxsim ? "maxsim" : "occlusion"; }

std::string join(const std::string& dir, const char* file) {
    return (std::filesystem::path(dir) / file).string();
}

}  // namespace

json RunConfig::to_json() const {
    json backends_json = json::object();
    for (const auto& [role, ep] : backends) {
        backends_json[std::string(remote::role_name(role))] = {
            {"url", ep.url}, {"timeout_ms", ep.timeout_ms}, {"retries", ep.retries}, {"token", ep.token}};
    }
    return {
        {"corpus", corpus},
        {"artifacts_dir", artifacts_dir},
        {"embeddings_source", embeddings_source},
        {"min_count", min_count},
        {"seed", seed},
        {"workers", workers},
        {"output", output},
        {"search", {{"k1", k1}, {"b", b_bm25}, {"top_k", top_k}}},
        {"embed", {{"dim", dim}, {"window", window}}},
        {"lm", {{"order", lm_order}, {"k", lm_k}}},
        {"masker", masker_name(masker)},
        {"editor", {{"beam", beam}, {"lambda", lambda}, {"max_masks", max_masks}}},
        {"backends", std::move(backends_json)},
    };
}

RunConfig RunConfig::from_json(const json& j) {
    reject_unknown(j, "", {"corpus", "artifacts_dir", "embeddings_source", "min_count", "seed", "workers", "output",
                           "search", "embed", "lm", "masker", "editor", "backends"});
    RunConfig c;
    read(j, "corpus", "", c.corpus);
    read(j, "artifacts_dir", "", c.artifacts_dir);
    read(j, "embeddings_source", "", c.embeddings_source);
    read(j, "min_count", "", c.min_count);
    read(j, "seed", "", c.seed);
    read(j, "workers", "", c.workers);
    read(j, "output", "", c.output);

    const auto& search = section(j, "search");
    reject_unknown(search, "search", {"k1", "b", "top_k"});
    read(search, "k1", "search", c.k1);
    read(search, "b", "search", c.b_bm25);
    read(search, "top_k", "search", c.top_k);

    const auto& embed = section(j, "embed");
    reject_unknown(embed, "embed", {"dim", "window"});
    read(embed, "dim", "embed", c.dim);
    read(embed, "window", "embed", c.window);

    const auto& lm = section(j, "lm");
    reject_unknown(lm, "lm", {"order", "k"});
    read(lm, "order", "lm", c.lm_order);
    read(lm, "k", "lm", c.lm_k);

    if (auto m = j.find("masker"); m != j.end()) {
        if (!m->is_string()) bad_field("masker", "expected a string");
        const auto name = m->get<std::string>();
        if (name == "maxsim") {
            c.masker = MaskerKind::maxsim;
        } else if (name == "occlusion") {
            c.masker = MaskerKind::occlusion;
        } else {
            bad_field("masker", "expected maxsim or occlusion, got " + name);
        }
    }

    const auto& editor = section(j, "editor");
    reject_unknown(editor, "editor", {"beam", "lambda", "max_masks"});
    read(editor, "beam", "editor", c.beam);
    read(editor, "lambda", "editor", c.lambda);
    read(editor, "max_masks", "editor", c.max_masks);

    const auto& backends = section(j, "backends");
    reject_unknown(backends, "backends", {"score", "embed", "predict", "perplexity"});
    for (auto role : {remote::Role::score, remote::Role::embed, remote::Role::predict, remote::Role::perplexity}) {
        const std::string name(remote::role_name(role));
        auto it = backends.find(name);
        if (it == backends.end() || it->is_null()) continue;
        const std::string path = "backends." + name;
        reject_unknown(*it, path, {"url", "timeout_ms", "retries", "token"});
        EndpointConfig ep;
        read(*it, "url", path, ep.url);
        read(*it, "timeout_ms", path, ep.timeout_ms);
        read(*it, "retries", path, ep.retries);
        read(*it, "token", path, ep.token);
        if (ep.url.empty()) bad_field(path + ".url", "required");
        c.backends[role] = ep;
    }
    c.validate();
    return c;
}

void RunConfig::validate() const {
    if (min_count < 1) bad_field("min_count", "must be >= 1");
    if (!(k1 > 0.0)) bad_field("search.k1", "must be > 0");
    if (!(b_bm25 >= 0.0 && b_bm25 <= 1.0)) bad_field("search.b", "must be in [0, 1]");
    if (top_k < 2) bad_field("search.top_k", "must be >= 2");
    if (dim < 2) bad_field("embed.dim", "must be >= 2");
    if (window < 1) bad_field("embed.window", "must be >= 1");
    if (lm_order < 1 || lm_order > 16) bad_field("lm.order", "must be in [1, 16]");
    if (!(lm_k > 0.0)) bad_field("lm.k", "must be > 0");
    if (beam < 1) bad_field("editor.beam", "must be >= 1");
    if (!(lambda >= 0.0 && lambda <= 1.0)) bad_field("editor.lambda", "must be in [0, 1]");
    for (const auto& [role, ep] : backends) {
        const std::string path = "backends." + std::string(remote::role_name(role));
        if (ep.timeout_ms <= 0) bad_field(path + ".timeout_ms", "must be > 0");
        if (ep.retries < 0) bad_field(path + ".retries", "must be >= 0");
    }
}

std::uint64_t RunConfig::artifact_hash() const {
    const json shaping = {
        {"embeddings_source", embeddings_source},
        {"min_count", min_count},
        {"seed", seed},
        {"embed", {{"dim", dim}, {"window", window}}},
        {"lm", {{"order", lm_order}, {"k", lm_k}}},
    };
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char ch : shaping.dump()) {
        h ^= ch;
        h *= 1099511628211ull;
    }
    return h;
}

std::string RunConfig::index_path() const { return join(artifacts_dir, "index.bin"); }
std::string RunConfig::embeddings_path() const { return join(artifacts_dir, "embeddings.bin"); }
std::string RunConfig::lm_path() const { return join(artifacts_dir, "lm.bin"); }

}  // namespace cfe
