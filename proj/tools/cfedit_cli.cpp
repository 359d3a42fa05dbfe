// Command-line front end. Talks to the library only through the C API.
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "cfedit/cfedit.h"

namespace {

using nlohmann::json;

struct Overrides {
    std::string config_path;
    std::optional<std::string> corpus, artifacts, embeddings, masker, output;
    std::optional<std::size_t> min_count, dim, window, order, top_k, beam, max_masks, workers;
    std::optional<double> k1, b, lm_k, lambda;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> backends;  // role=url
    std::optional<int> timeout_ms, retries;
};

int fail(cfe_status st) {
    std::fprintf(stderr, "error: %s\n", cfe_last_error());
    return static_cast<int>(st);
}

std::string build_config(const Overrides& o) {
    json j = json::object();
    if (!o.config_path.empty()) {
        std::ifstream in(o.config_path);
        if (!in) throw std::runtime_error("cannot open config: " + o.config_path);
        j = json::parse(in);
    }
    const auto set = [&](std::initializer_list<const char*> path, const auto& value) {
        if (!value) return;
        json* node = &j;
        const char* last = nullptr;
        for (const char* key : path) {
            if (last) node = &(*node)[last];
            last = key;
        }
        (*node)[last] = *value;
    };
    set({"corpus"}, o.corpus);
    set({"artifacts_dir"}, o.artifacts);
    set({"embeddings_source"}, o.embeddings);
    set({"masker"}, o.masker);
    set({"output"}, o.output);
    set({"min_count"}, o.min_count);
    set({"seed"}, o.seed);
    set({"workers"}, o.workers);
    set({"search", "k1"}, o.k1);
    set({"search", "b"}, o.b);
    set({"search", "top_k"}, o.top_k);
    set({"embed", "dim"}, o.dim);
    set({"embed", "window"}, o.window);
    set({"lm", "order"}, o.order);
    set({"lm", "k"}, o.lm_k);
    set({"editor", "beam"}, o.beam);
    set({"editor", "lambda"}, o.lambda);
    set({"editor", "max_masks"}, o.max_masks);
    for (const auto& arg : o.backends) {
        const auto eq = arg.find('=');
        if (eq == std::string::npos) throw std::runtime_error("--backend expects role=url, got " + arg);
        auto& ep = j["backends"][arg.substr(0, eq)];
        ep["url"] = arg.substr(eq + 1);
        if (o.timeout_ms) ep["timeout_ms"] = *o.timeout_ms;
        if (o.retries) ep["retries"] = *o.retries;
    }
    return j.dump();
}

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("-c,--config", o.config_path, "JSON config file; flags override its values");
    cmd->add_option("--artifacts", o.artifacts, "Artifact directory");
    // Artifact-shaping settings; later commands must repeat what `index` used.
    cmd->add_option("--corpus", o.corpus, "JSONL documents");
    cmd->add_option("--min-count", o.min_count);
    cmd->add_option("--dim", o.dim, "Embedding dimension");
    cmd->add_option("--window", o.window, "Co-occurrence window");
    cmd->add_option("--order", o.order, "n-gram order");
    cmd->add_option("--smoothing", o.lm_k, "Add-k constant");
    cmd->add_option("--seed", o.seed);
    cmd->add_option("--embeddings", o.embeddings, "Pretrained word vectors (text format) instead of training");
}

void add_run_options(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--top-k", o.top_k, "Retrieval depth for query datasets");
    cmd->add_option("--k1", o.k1);
    cmd->add_option("--b", o.b);
    cmd->add_option("--beam", o.beam, "Beam width");
    cmd->add_option("--lambda", o.lambda, "Weight of the counterfactual document in predictions");
    cmd->add_option("--max-masks", o.max_masks, "Mask budget; 0 means the query length");
    cmd->add_option("--masker", o.masker, "maxsim or occlusion");
    cmd->add_option("--workers", o.workers, "Parallel workers; 0 means all cores");
    cmd->add_option("--backend", o.backends, "Remote backend as role=url (score, embed, predict, perplexity)");
    cmd->add_option("--timeout-ms", o.timeout_ms, "Per-request timeout for remote backends");
    cmd->add_option("--retries", o.retries, "Retry budget for remote backends");
}

struct EngineHandle {
    cfe_engine* ptr = nullptr;
    ~EngineHandle() { cfe_engine_close(ptr); }
};

int print_owned(char* s) {
    std::fputs(s, stdout);
    std::fputc('\n', stdout);
    cfe_string_free(s);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Counterfactual query editing for ranked retrieval"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(cfe_version()));

    Overrides o;

    auto* index = app.add_subcommand("index", "Build the index, embeddings and language model");
    add_common(index, o);

    std::string query;
    std::size_t k = 5;
    auto* search = app.add_subcommand("search", "Rank documents for a query");
    add_common(search, o);
    search->add_option("-q,--query", query)->required();
    search->add_option("-k", k, "Number of results");
    search->add_option("--backend", o.backends, "Remote backend as role=url");

    std::string doc_id, counter_id, batch_in, batch_out;
    auto* edit = app.add_subcommand("edit", "Edit a query so the counterfactual document outranks the original");
    add_common(edit, o);
    add_run_options(edit, o);
    edit->add_option("-q,--query", query);
    edit->add_option("--doc", doc_id, "Currently higher-ranked document id");
    edit->add_option("--counter", counter_id, "Counterfactual document id");
    edit->add_option("--batch", batch_in, "JSONL triplets {query, doc_id, counter_doc_id}");
    edit->add_option("--out", batch_out, "Output JSONL for --batch");

    std::string dataset, methods = "cfe2,mask_only,max_flip";
    auto* eval = app.add_subcommand("eval", "Evaluate methods on a query or triplet dataset");
    add_common(eval, o);
    add_run_options(eval, o);
    eval->add_option("--dataset", dataset, "JSONL queries or triplets")->required();
    eval->add_option("--methods", methods, "Comma-separated: cfe2, mask_only, max_flip");
    eval->add_option("-o,--out", o.output, "Report prefix");

    std::vector<std::size_t> sizes{5, 10, 20};
    auto* sweep = app.add_subcommand("sweep-beam", "Run the editor at several beam widths");
    add_common(sweep, o);
    add_run_options(sweep, o);
    sweep->add_option("--dataset", dataset, "JSONL queries or triplets")->required();
    sweep->add_option("--sizes", sizes, "Beam widths")->delimiter(',');
    sweep->add_option("-o,--out", o.output, "Report prefix");

    std::uint64_t synth_seed = 0;
    std::size_t n_docs = 300, n_queries = 60;
    std::string corpus_out = "data/corpus.jsonl", queries_out = "data/queries.jsonl";
    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus and query set");
    synth->add_option("--seed", synth_seed);
    synth->add_option("--docs", n_docs);
    synth->add_option("--queries", n_queries);
    synth->add_option("--corpus-out", corpus_out);
    synth->add_option("--queries-out", queries_out);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) {
            const auto st = cfe_synth(synth_seed, n_docs, n_queries, corpus_out.c_str(), queries_out.c_str());
            if (st != CFE_OK) return fail(st);
            std::printf("wrote %s and %s\n", corpus_out.c_str(), queries_out.c_str());
            return 0;
        }

        const std::string config = build_config(o);
        if (index->parsed()) {
            char* summary = nullptr;
            const auto st = cfe_index(config.c_str(), &summary);
            if (st != CFE_OK) return fail(st);
            return print_owned(summary);
        }

        EngineHandle engine;
        if (auto st = cfe_engine_open(config.c_str(), &engine.ptr); st != CFE_OK) return fail(st);

        if (search->parsed()) {
            char* out = nullptr;
            if (auto st = cfe_search(engine.ptr, query.c_str(), k, &out); st != CFE_OK) return fail(st);
            return print_owned(out);
        }
        if (edit->parsed()) {
            if (!batch_in.empty()) {
                if (batch_out.empty()) {
                    std::fprintf(stderr, "error: --batch needs --out\n");
                    return CFE_ERR_INVALID_ARGUMENT;
                }
                std::size_t n = 0;
                if (auto st = cfe_edit_batch(engine.ptr, batch_in.c_str(), batch_out.c_str(), &n); st != CFE_OK) {
                    return fail(st);
                }
                std::printf("edited %zu triplets into %s\n", n, batch_out.c_str());
                return 0;
            }
            if (query.empty() || doc_id.empty() || counter_id.empty()) {
                std::fprintf(stderr, "error: edit needs --query, --doc and --counter (or --batch)\n");
                return CFE_ERR_INVALID_ARGUMENT;
            }
            char* out = nullptr;
            if (auto st = cfe_edit(engine.ptr, query.c_str(), doc_id.c_str(), counter_id.c_str(), &out);
                st != CFE_OK) {
                return fail(st);
            }
            return print_owned(out);
        }

        char* summary = nullptr;
        cfe_status st;
        if (eval->parsed()) {
            st = cfe_eval(engine.ptr, dataset.c_str(), methods.c_str(), nullptr, &summary);
        } else {
            st = cfe_sweep_beam(engine.ptr, dataset.c_str(), sizes.data(), sizes.size(), nullptr, &summary);
        }
        if (st != CFE_OK) return fail(st);
        const auto j = json::parse(summary);
        cfe_string_free(summary);
        for (const auto& w : j["warnings"]) std::fprintf(stderr, "warning: %s\n", w.get<std::string>().c_str());
        std::fputs(j["markdown"].get<std::string>().c_str(), stdout);
        for (const auto& p : j["outputs"]) std::printf("wrote %s\n", p.get<std::string>().c_str());
        return 0;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return CFE_ERR_INVALID_ARGUMENT;
    }
}
