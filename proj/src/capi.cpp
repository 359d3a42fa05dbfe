#include "cfedit/cfedit.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "cfedit/engine.hpp"
#include "cfedit/error.hpp"
#include "cfedit/synthetic.hpp"

struct cfe_engine {
    explicit cfe_engine(cfe::RunConfig config) : engine(std::move(config)) {}
    cfe::Engine engine;
};

namespace {

using nlohmann::json;

thread_local std::string last_error;

cfe_status to_status(cfe::Errc code) {
    switch (code) {
    case cfe::Errc::invalid_argument: return CFE_ERR_INVALID_ARGUMENT;
    case cfe::Errc::io: return CFE_ERR_IO;
    case cfe::Errc::format: return CFE_ERR_FORMAT;
    case cfe::Errc::not_found: return CFE_ERR_NOT_FOUND;
    case cfe::Errc::precondition: return CFE_ERR_PRECONDITION;
    case cfe::Errc::backend_unavailable: return CFE_ERR_BACKEND_UNAVAILABLE;
    case cfe::Errc::protocol: return CFE_ERR_PROTOCOL;
    case cfe::Errc::internal: return CFE_ERR_INTERNAL;
    }
    return CFE_ERR_INTERNAL;
}

template <typename F>
cfe_status guarded(F&& body) {
    try {
        body();
        last_error.clear();
        return CFE_OK;
    } catch (const cfe::Error& e) {
        last_error = e.what();
        return to_status(e.code());
    } catch (const json::exception& e) {
        last_error = std::string("invalid JSON: ") + e.what();
        return CFE_ERR_FORMAT;
    } catch (const std::filesystem::filesystem_error& e) {
        last_error = e.what();
        return CFE_ERR_IO;
    } catch (const std::bad_alloc&) {
        last_error = "out of memory";
        return CFE_ERR_INTERNAL;
    } catch (const std::exception& e) {
        last_error = e.what();
        return CFE_ERR_INTERNAL;
    } catch (...) {
        last_error = "unknown failure";
        return CFE_ERR_INTERNAL;
    }
}

char* dup(const std::string& s) {
    auto* out = static_cast<char*>(std::malloc(s.size() + 1));
    if (!out) throw std::bad_alloc();
    std::memcpy(out, s.c_str(), s.size() + 1);
    return out;
}

void need(const void* p, const char* name) {
    if (!p) throw cfe::Error(cfe::Errc::invalid_argument, std::string(name) + " must not be NULL");
}

cfe::RunConfig parse_config(const char* config_json) {
    if (!config_json || !*config_json) return cfe::RunConfig{};
    return cfe::RunConfig::from_json(json::parse(config_json));
}

std::vector<cfe::Method> parse_methods(const char* csv) {
    std::vector<cfe::Method> out;
    std::stringstream ss(csv && *csv ? csv : "cfe2,mask_only,max_flip");
    std::string name;
    while (std::getline(ss, name, ',')) {
        if (!name.empty()) out.push_back(cfe::parse_method(name));
    }
    return out;
}

json summary_json(const std::vector<cfe::EvalReport>& reports, const std::vector<std::string>& warnings,
                  const std::string& prefix, std::size_t triplets) {
    json methods = json::array();
    for (const auto& r : reports) {
        methods.push_back({{"method", r.method},
                           {"beam", r.beam_width},
                           {"flip_rate", r.overall.flip_rate},
                           {"nulls", r.overall.nulls},
                           {"runtime_seconds_per_edit", r.overall.runtime_seconds}});
    }
    return {{"triplets", triplets},
            {"methods", std::move(methods)},
            {"markdown", cfe::report_markdown(reports, true)},
            {"warnings", warnings},
            {"outputs", {prefix + ".json", prefix + ".md", prefix + ".timing.json"}}};
}

}  // namespace

extern "C" {

const char* cfe_version(void) { return "0.1.0"; }

const char* cfe_last_error(void) { return last_error.c_str(); }

void cfe_string_free(char* s) { std::free(s); }

cfe_status cfe_config_normalize(const char* config_json, char** out_json) {
    return guarded([&] {
        need(out_json, "out_json");
        *out_json = nullptr;
        *out_json = dup(parse_config(config_json).to_json().dump(2));
    });
}

cfe_status cfe_index(const char* config_json, char** out_summary_json) {
    return guarded([&] {
        const auto s = cfe::build_artifacts(parse_config(config_json));
        if (out_summary_json) {
            char hash[32];
            std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(s.config_hash));
            *out_summary_json = dup(
                json{{"documents", s.documents}, {"vocabulary", s.vocabulary}, {"dim", s.dim}, {"config_hash", hash}}
                    .dump());
        }
    });
}

cfe_status cfe_engine_open(const char* config_json, cfe_engine** out) {
    return guarded([&] {
        need(out, "out");
        *out = nullptr;
        *out = new cfe_engine(parse_config(config_json));
    });
}

void cfe_engine_close(cfe_engine* engine) { delete engine; }

cfe_status cfe_search(const cfe_engine* engine, const char* query, size_t k, char** out_json) {
    return guarded([&] {
        need(engine, "engine");
        need(query, "query");
        need(out_json, "out_json");
        if (k == 0) throw cfe::Error(cfe::Errc::invalid_argument, "k must be >= 1");
        const auto ranking = engine->engine.search(query, k);
        json results = json::array();
        std::size_t rank = 1;
        for (const auto& e : ranking.entries) {
            results.push_back({{"rank", rank++}, {"doc_id", e.doc_id}, {"score", e.score}});
        }
        *out_json = dup(json{{"query", engine->engine.corpus().vocab().render(ranking.query)},
                             {"results", std::move(results)}}
                            .dump(2));
    });
}

cfe_status cfe_edit(const cfe_engine* engine, const char* query, const char* doc_id, const char* counter_doc_id,
                    char** out_json) {
    return guarded([&] {
        need(engine, "engine");
        need(query, "query");
        need(doc_id, "doc_id");
        need(counter_doc_id, "counter_doc_id");
        need(out_json, "out_json");
        *out_json = dup(engine->engine.edit_json(query, doc_id, counter_doc_id).dump(2));
    });
}

cfe_status cfe_edit_batch(const cfe_engine* engine, const char* triplets_path, const char* out_path,
                          size_t* out_count) {
    return guarded([&] {
        need(engine, "engine");
        need(triplets_path, "triplets_path");
        need(out_path, "out_path");
        std::ifstream in(triplets_path, std::ios::binary);
        if (!in) throw cfe::Error(cfe::Errc::io, std::string("cannot open triplets: ") + triplets_path);
        std::ostringstream buffer;
        const auto n = engine->engine.edit_batch(in, buffer);
        std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
        out << buffer.str();
        out.flush();
        if (!out) throw cfe::Error(cfe::Errc::io, std::string("cannot write ") + out_path);
        if (out_count) *out_count = n;
    });
}

cfe_status cfe_eval(const cfe_engine* engine, const char* dataset_path, const char* methods,
                    const char* out_prefix, char** out_summary_json) {
    return guarded([&] {
        need(engine, "engine");
        need(dataset_path, "dataset_path");
        const auto& e = engine->engine;
        const std::string prefix = out_prefix && *out_prefix ? out_prefix : e.config().output;
        const auto ms = parse_methods(methods);
        std::vector<std::string> warnings;
        const auto dataset = e.load_dataset(dataset_path, &warnings);
        const auto reports = e.eval(dataset, ms);
        cfe::write_reports(reports, prefix, e.config().artifact_hash());
        if (out_summary_json) *out_summary_json = dup(summary_json(reports, warnings, prefix, dataset.size()).dump(2));
    });
}

cfe_status cfe_sweep_beam(const cfe_engine* engine, const char* dataset_path, const size_t* sizes, size_t n_sizes,
                          const char* out_prefix, char** out_summary_json) {
    return guarded([&] {
        need(engine, "engine");
        need(dataset_path, "dataset_path");
        if (n_sizes == 0) throw cfe::Error(cfe::Errc::invalid_argument, "no beam sizes given");
        need(sizes, "sizes");
        const auto& e = engine->engine;
        const std::string prefix = out_prefix && *out_prefix ? out_prefix : e.config().output;
        std::vector<std::string> warnings;
        const auto dataset = e.load_dataset(dataset_path, &warnings);
        const std::vector<std::size_t> widths(sizes, sizes + n_sizes);
        const auto reports = e.sweep(dataset, widths);
        cfe::write_reports(reports, prefix, e.config().artifact_hash());
        if (out_summary_json) *out_summary_json = dup(summary_json(reports, warnings, prefix, dataset.size()).dump(2));
    });
}

cfe_status cfe_synth(uint64_t seed, size_t documents, size_t queries, const char* corpus_path,
                     const char* queries_path) {
    return guarded([&] {
        need(corpus_path, "corpus_path");
        cfe::SyntheticOptions opts;
        opts.seed = seed;
        opts.documents = documents;
        opts.queries = queries;
        const auto col = cfe::generate_synthetic(opts);
        const auto write = [](const char* path, auto&& fn) {
            const auto parent = std::filesystem::path(path).parent_path();
            if (!parent.empty()) std::filesystem::create_directories(parent);
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            fn(out);
            out.flush();
            if (!out) throw cfe::Error(cfe::Errc::io, std::string("cannot write ") + path);
        };
        write(corpus_path, [&](std::ostream& o) { cfe::write_doc_records(o, col.documents); });
        if (queries_path) write(queries_path, [&](std::ostream& o) { cfe::write_query_records(o, col.queries); });
    });
}

}  // extern "C"
