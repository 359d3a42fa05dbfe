#pragma once

#include <cstddef>
#include <iosfwd>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cfedit/config.hpp"
#include "cfedit/editor.hpp"
#include "cfedit/eval.hpp"

namespace cfe {

struct IndexSummary {
    std::size_t documents = 0;
    std::size_t vocabulary = 0;
    std::size_t dim = 0;
    std::uint64_t config_hash = 0;
};

/// Builds index.bin, embeddings.bin and lm.bin under config.artifacts_dir.
IndexSummary build_artifacts(const RunConfig& config);

/// Loaded artifacts plus the backends selected by the config. Read-only after
/// construction; every member is safe to call from several threads.
class Engine {
public:
    /// Throws Errc::precondition naming the missing artifact when `index` has
    /// not been run, or when an artifact was built under another config.
    explicit Engine(RunConfig config);
    ~Engine();
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    const RunConfig& config() const { return config_; }
    const Corpus& corpus() const;
    const Bm25& bm25() const;
    Backends backends() const;

    Ranking search(std::string_view query, std::size_t k) const;

    Triplet triplet(std::string_view query, std::string_view doc_id, std::string_view counter_id) const;
    EditResult edit(const Triplet& triplet) const;
    nlohmann::json edit_json(std::string_view query, std::string_view doc_id, std::string_view counter_id) const;

    /// JSONL {query, doc_id, counter_doc_id} in, one edit_json object per line out.
    std::size_t edit_batch(std::istream& in, std::ostream& out) const;

    /// A dataset file holds either query records ({id?, query}) expanded through
    /// top-k retrieval, or explicit triplets ({id?, query, doc_id, counter_doc_id}).
    /// Triplets failing the precondition under the active scorer are skipped
    /// with a warning.
    std::vector<Triplet> load_dataset(const std::string& path, std::vector<std::string>* warnings) const;

    EvalOptions eval_options() const;
    std::vector<EvalReport> eval(std::span<const Triplet> dataset, std::span<const Method> methods) const;
    std::vector<EvalReport> sweep(std::span<const Triplet> dataset, std::span<const std::size_t> sizes) const;

private:
    struct State;
    RunConfig config_;
    std::unique_ptr<State> state_;
};

/// Writes <prefix>.json, <prefix>.md and <prefix>.timing.json.
void write_reports(std::span<const EvalReport> reports, const std::string& prefix, std::uint64_t config_hash);

}  // namespace cfe
