#include "cfedit/engine.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "cfedit/error.hpp"
#include "cfedit/remote.hpp"

namespace cfe {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::ifstream open_in(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(Errc::io, std::string("cannot open ") + what + ": " + path);
    return in;
}

std::ifstream open_artifact(const std::string& path) {
    if (!fs::exists(path)) {
        throw Error(Errc::precondition, "missing artifact " + path + "; run `cfedit index` first");
    }
    return open_in(path, "artifact");
}

std::ofstream open_out(const std::string& path) {
    const auto parent = fs::path(path).parent_path();
    if (!parent.empty()) fs::create_directories(parent);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::io, "cannot write " + path);
    return out;
}

void commit(std::ofstream& out, const std::string& path) {
    out.flush();
    if (!out) throw Error(Errc::io, "write failed: " + path);
}

remote::BackendEndpoint endpoint(const EndpointConfig& ep, remote::Role role) {
    remote::BackendEndpoint out;
    out.base = ep.url;
    out.role = role;
    out.timeout_ms = ep.timeout_ms;
    out.retries = ep.retries;
    out.token = ep.token;
    return out;
}

std::string string_field(const json& j, const char* key, std::size_t line) {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string()) {
        throw Error(Errc::format, std::string("missing field: ") + key + " @ line " + std::to_string(line));
    }
    return it->get<std::string>();
}

}  // namespace

IndexSummary build_artifacts(const RunConfig& config) {
    config.validate();
    if (config.corpus.empty()) throw Error(Errc::invalid_argument, "invalid config field 'corpus': required");
    auto in = open_in(config.corpus, "corpus");
    const Corpus corpus = Corpus::ingest(in, config.min_count);
    const auto hash = config.artifact_hash();

    const EmbeddingTable table = [&] {
        if (!config.embeddings_source.empty()) {
            auto vin = open_in(config.embeddings_source, "embeddings source");
            return EmbeddingTable::load_text(vin, corpus.vocab());
        }
        EmbeddingOptions opts;
        opts.dim = config.dim;
        opts.window = config.window;
        opts.seed = config.seed;
        return EmbeddingTable::train(corpus, opts);
    }();
    const NgramLM lm = NgramLM::train(corpus, config.lm_order, config.lm_k);

    fs::create_directories(config.artifacts_dir);
    {
        auto out = open_out(config.index_path());
        corpus.save(out, hash);
        commit(out, config.index_path());
    }
    {
        auto out = open_out(config.embeddings_path());
        table.save(out, hash);
        commit(out, config.embeddings_path());
    }
    {
        auto out = open_out(config.lm_path());
        lm.save(out, hash);
        commit(out, config.lm_path());
    }
    return {corpus.size(), corpus.vocab().content_size(), table.dim(), hash};
}

struct Engine::State {
    std::optional<Corpus> corpus;
    std::unique_ptr<Bm25> bm25;
    std::unique_ptr<EmbeddingTable> table;
    std::unique_ptr<NgramLM> lm;
    std::unique_ptr<InterpolatedPredictor> local_predictor;

    std::unique_ptr<SearchModel> remote_search;
    std::unique_ptr<TokenVectors> remote_vectors;
    std::unique_ptr<MaskedPredictor> remote_predictor;
    std::unique_ptr<PerplexityModel> remote_perplexity;

    const SearchModel* search = nullptr;
    const TokenVectors* vectors = nullptr;
    const MaskedPredictor* predictor = nullptr;
    const PerplexityModel* perplexity = nullptr;
};

Engine::Engine(RunConfig config) : config_(std::move(config)), state_(std::make_unique<State>()) {
    config_.validate();
    const auto hash = config_.artifact_hash();
    auto& s = *state_;
    {
        auto in = open_artifact(config_.index_path());
        s.corpus.emplace(Corpus::load(in, hash, "index"));
    }
    {
        auto in = open_artifact(config_.embeddings_path());
        s.table = std::make_unique<EmbeddingTable>(EmbeddingTable::load(in, hash, "embeddings"));
    }
    {
        auto in = open_artifact(config_.lm_path());
        s.lm = std::make_unique<NgramLM>(NgramLM::load(in, s.corpus->vocab(), hash, "lm"));
    }
    s.bm25 = std::make_unique<Bm25>(*s.corpus, Bm25Params{config_.k1, config_.b_bm25});
    s.local_predictor = std::make_unique<InterpolatedPredictor>(*s.lm, config_.lambda);
    s.search = s.bm25.get();
    s.vectors = s.table.get();
    s.predictor = s.local_predictor.get();
    s.perplexity = s.lm.get();

    const auto& vocab = s.corpus->vocab();
    for (const auto& [role, ep] : config_.backends) {
        switch (role) {
        case remote::Role::score:
            s.remote_search = std::make_unique<remote::RemoteSearchModel>(endpoint(ep, role), vocab);
            s.search = s.remote_search.get();
            break;
        case remote::Role::embed:
            s.remote_vectors = std::make_unique<remote::RemoteTokenVectors>(endpoint(ep, role), vocab);
            s.vectors = s.remote_vectors.get();
            break;
        case remote::Role::predict:
            s.remote_predictor = std::make_unique<remote::RemotePredictor>(endpoint(ep, role), vocab);
            s.predictor = s.remote_predictor.get();
            break;
        case remote::Role::perplexity:
            s.remote_perplexity = std::make_unique<remote::RemotePerplexity>(endpoint(ep, role), vocab);
            s.perplexity = s.remote_perplexity.get();
            break;
        }
    }
}

Engine::~Engine() = default;

const Corpus& Engine::corpus() const { return *state_->corpus; }
const Bm25& Engine::bm25() const { return *state_->bm25; }

Backends Engine::backends() const {
    const auto& s = *state_;
    return {*s.corpus, *s.bm25, *s.search, *s.vectors, *s.predictor, *s.perplexity};
}

Ranking Engine::search(std::string_view query, std::size_t k) const {
    const auto q = corpus().vocab().encode_text(query);
    if (q.empty()) throw Error(Errc::invalid_argument, "query has no tokens");
    return bm25().search(q, k);
}

Triplet Engine::triplet(std::string_view query, std::string_view doc_id, std::string_view counter_id) const {
    auto q = corpus().vocab().encode_text(query);
    if (q.empty()) throw Error(Errc::invalid_argument, "query has no tokens");
    if (doc_id == counter_id) throw Error(Errc::invalid_argument, "doc_id and counter_doc_id are the same document");
    auto t = make_triplet(std::move(q), corpus().at(doc_id), corpus().at(counter_id), *state_->search);
    t.id = std::string(doc_id) + ">" + std::string(counter_id);
    t.query_id = t.id;
    return t;
}

EvalOptions Engine::eval_options() const {
    EvalOptions opts;
    opts.editor.beam_width = config_.beam;
    opts.editor.max_masks = config_.max_masks;
    opts.masker = config_.masker;
    opts.workers = config_.workers;
    return opts;
}

EditResult Engine::edit(const Triplet& t) const {
    const auto b = backends();
    const auto start = std::chrono::steady_clock::now();
    const auto importance = config_.masker == MaskerKind::maxsim ? maxsim_importance(t.query, *t.doc, b.vectors)
                                                                 : occlusion_importance(t.query, *t.doc, b.search);
    auto result = cfe::edit(t, b.search, importance, b.predictor, b.perplexity, eval_options().editor);
    result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

json Engine::edit_json(std::string_view query, std::string_view doc_id, std::string_view counter_id) const {
    const auto t = triplet(query, doc_id, counter_id);
    return edit_result_json(edit(t), t, corpus().vocab());
}

std::size_t Engine::edit_batch(std::istream& in, std::ostream& out) const {
    std::string line;
    std::size_t line_no = 0;
    std::size_t count = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw Error(Errc::format, "malformed triplet record @ line " + std::to_string(line_no));
        }
        if (!j.is_object()) throw Error(Errc::format, "malformed triplet record @ line " + std::to_string(line_no));
        auto result = edit_json(string_field(j, "query", line_no), string_field(j, "doc_id", line_no),
                                string_field(j, "counter_doc_id", line_no));
        if (auto id = j.find("id"); id != j.end() && id->is_string()) result["id"] = *id;
        out << result.dump() << '\n';
        ++count;
    }
    return count;
}

std::vector<Triplet> Engine::load_dataset(const std::string& path, std::vector<std::string>* warnings) const {
    auto in = open_in(path, "dataset");
    const auto warn = [&](std::string msg) {
        if (warnings) warnings->push_back(std::move(msg));
    };
    const auto& vocab = corpus().vocab();
    const auto& lexical = *state_->bm25;
    const SearchModel& search = *state_->search;
    const bool remote_scorer = state_->remote_search != nullptr;

    std::vector<Triplet> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::parse_error&) {
            throw Error(Errc::format, "malformed dataset record @ line " + std::to_string(line_no));
        }
        if (!j.is_object()) throw Error(Errc::format, "malformed dataset record @ line " + std::to_string(line_no));
        std::string id;
        if (auto it = j.find("id"); it != j.end() && it->is_string()) {
            id = it->get<std::string>();
        } else if (auto it2 = j.find("_id"); it2 != j.end() && it2->is_string()) {
            id = it2->get<std::string>();
        } else {
            id = "q" + std::to_string(line_no);
        }
        const char* text_key = j.contains("query") ? "query" : "text";
        auto q = vocab.encode_text(string_field(j, text_key, line_no));
        if (q.empty()) {
            warn("skipping " + id + ": query has no tokens");
            continue;
        }

        if (j.contains("counter_doc_id")) {
            const auto doc_id = string_field(j, "doc_id", line_no);
            const auto counter_id = string_field(j, "counter_doc_id", line_no);
            try {
                auto t = make_triplet(std::move(q), corpus().at(doc_id), corpus().at(counter_id), search);
                t.id = id;
                t.query_id = id;
                if (auto r = j.find("rank"); r != j.end() && r->is_number_unsigned()) t.rank = r->get<std::size_t>();
                out.push_back(std::move(t));
            } catch (const Error& e) {
                if (e.code() != Errc::precondition) throw;
                warn("skipping " + id + ": " + e.what());
            }
            continue;
        }

        const auto ranking = lexical.search(q, config_.top_k);
        auto triplets = build_triplets(ranking, corpus(), id, warnings);
        for (auto& t : triplets) {
            if (remote_scorer) {
                try {
                    auto checked = make_triplet(t.query, *t.doc, *t.counter, search);
                    checked.id = t.id;
                    checked.query_id = t.query_id;
                    checked.rank = t.rank;
                    t = std::move(checked);
                } catch (const Error& e) {
                    if (e.code() != Errc::precondition) throw;
                    warn("skipping " + t.id + ": " + e.what());
                    continue;
                }
            }
            out.push_back(std::move(t));
        }
    }
    if (out.empty()) throw Error(Errc::invalid_argument, "dataset yields no valid triplets: " + path);
    return out;
}

std::vector<EvalReport> Engine::eval(std::span<const Triplet> dataset, std::span<const Method> methods) const {
    if (methods.empty()) throw Error(Errc::invalid_argument, "no methods to evaluate");
    std::vector<EvalReport> out;
    for (auto m : methods) out.push_back(evaluate(dataset, m, backends(), eval_options()));
    return out;
}

std::vector<EvalReport> Engine::sweep(std::span<const Triplet> dataset, std::span<const std::size_t> sizes) const {
    return beam_sweep(dataset, sizes, backends(), eval_options());
}

void write_reports(std::span<const EvalReport> reports, const std::string& prefix, std::uint64_t config_hash) {
    char hash[32];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
    auto body = report_json(reports);
    body["config_hash"] = hash;
    auto timing = timing_json(reports);
    timing["config_hash"] = hash;

    const std::string json_path = prefix + ".json";
    const std::string md_path = prefix + ".md";
    const std::string timing_path = prefix + ".timing.json";
    {
        auto out = open_out(json_path);
        out << body.dump(2) << '\n';
        commit(out, json_path);
    }
    {
        auto out = open_out(md_path);
        out << report_markdown(reports, false);
        commit(out, md_path);
    }
    {
        auto out = open_out(timing_path);
        out << timing.dump(2) << '\n';
        commit(out, timing_path);
    }
}

}  // namespace cfe
