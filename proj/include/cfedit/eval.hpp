#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "cfedit/corpus.hpp"
#include "cfedit/editor.hpp"
#include "cfedit/embed.hpp"
#include "cfedit/lm.hpp"
#include "cfedit/masker.hpp"

namespace cfe {

/// Models an evaluation runs against. `lexical` supplies the sparse query
/// representation for CosSim and must index the same corpus as `search`.
struct Backends {
    const Corpus& corpus;
    const Bm25& lexical;
    const SearchModel& search;
    const TokenVectors& vectors;
    const MaskedPredictor& predictor;
    const PerplexityModel& perplexity;
};

enum class Method { cfe2, mask_only, max_flip };

std::string_view method_name(Method m);
/// Throws Errc::invalid_argument naming the unknown method.
Method parse_method(std::string_view name);

/// Top-1 document against each lower-ranked one, tagged with ranks 2..k.
/// Entries tied with rank 1 are skipped with a warning; fewer than two entries
/// yields an empty list with a warning.
std::vector<Triplet> build_triplets(const Ranking& ranking, const Corpus& corpus, std::string_view query_id,
                                    std::vector<std::string>* warnings = nullptr);

struct CosSim {
    double value = 0.0;
    bool zero_vector = false;
};

/// Cosine of the search model's query representations, clamped to [0, 1].
CosSim cos_sim_metric(std::span<const TokenId> q, std::span<const TokenId> q_prime, const Bm25& lexical);

/// Greedy-matching F1 with similarities mapped to [0, 1] by (s + 1) / 2.
double bertscore_f1(std::span<const TokenId> q, std::span<const TokenId> q_prime, const TokenVectors& vectors);

/// ppl(q') / ppl(q).
double fluency_metric(std::span<const TokenId> q, std::span<const TokenId> q_prime, const PerplexityModel& lm);

/// Replaces the top-i important tokens with PAD for i = 1..|q|; the first
/// flipping i wins.
EditResult baseline_mask_only(const Triplet& triplet, const ImportanceScores& importance, const SearchModel& search);

/// Lowest-perplexity sentence of d' that itself ranks d' above d.
EditResult baseline_max_flip(const Triplet& triplet, const Vocabulary& vocab, const PerplexityModel& lm,
                             const SearchModel& search);

struct EvalOptions {
    EditorConfig editor;
    MaskerKind masker = MaskerKind::maxsim;
    /// 0 means std::thread::hardware_concurrency().
    std::size_t workers = 1;
};

struct EvalRecord {
    std::string triplet_id;
    std::string query_id;
    std::size_t rank = 0;
    std::string query;
    std::string doc_id;
    std::string counter_id;
    std::optional<std::string> counterfactual;
    std::size_t masks_used = 0;
    bool flipped = false;
    std::optional<double> cos_sim;
    bool cos_zero_vector = false;
    std::optional<double> bertscore_f1;
    std::optional<double> fluency;
    double elapsed_seconds = 0.0;
    /// Iteration traces for edit methods; kept for audit, not serialized in reports.
    std::vector<IterationTrace> trace;
};

struct Summary {
    std::size_t count = 0;
    std::size_t flipped = 0;
    std::size_t nulls = 0;
    double flip_rate = 0.0;
    std::optional<double> cos_sim;
    std::optional<double> bertscore_f1;
    std::optional<double> fluency;
    double runtime_seconds = 0.0;
};

struct EvalReport {
    std::string method;
    std::size_t beam_width = 0;
    std::vector<EvalRecord> records;
    Summary overall;
    std::map<std::size_t, Summary> by_rank;
};

/// Throws on an empty record list.
double flip_rate(std::span<const EvalRecord> records);

/// Similarity and fluency means cover non-Null outcomes only.
Summary summarize(std::span<const EvalRecord> records);

/// Runs `method` on every triplet and assembles the report. Record order
/// follows the dataset regardless of the worker count.
EvalReport evaluate(std::span<const Triplet> dataset, Method method, const Backends& backends,
                    const EvalOptions& options);

/// One CFE2 report per beam width.
std::vector<EvalReport> beam_sweep(std::span<const Triplet> dataset, std::span<const std::size_t> sizes,
                                   const Backends& backends, const EvalOptions& options);

/// Deterministic report body: no wall-clock values.
nlohmann::json report_json(std::span<const EvalReport> reports);
/// Wall-clock timings, per method and per record.
nlohmann::json timing_json(std::span<const EvalReport> reports);
/// Metric rows by method columns, then one per-rank table per method.
/// Runtime is included only when `with_runtime` is set.
std::string report_markdown(std::span<const EvalReport> reports, bool with_runtime = false);

nlohmann::json edit_result_json(const EditResult& result, const Triplet& triplet, const Vocabulary& vocab);

}  // namespace cfe
