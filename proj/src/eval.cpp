#include "cfedit/eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <mutex>
#include <thread>

#include "cfedit/error.hpp"

namespace cfe {

std::string_view method_name(Method m) {
    switch (m) {
    case Method::cfe2: return "cfe2";
    case Method::mask_only: return "mask_only";
    case Method::max_flip: return "max_flip";
    }
    return "unknown";
}

Method parse_method(std::string_view name) {
    if (name == "cfe2") return Method::cfe2;
    if (name == "mask_only") return Method::mask_only;
    if (name == "max_flip") return Method::max_flip;
    throw Error(Errc::invalid_argument, "unknown method: " + std::string(name) + " (expected cfe2, mask_only, max_flip)");
}

std::vector<Triplet> build_triplets(const Ranking& ranking, const Corpus& corpus, std::string_view query_id,
                                    std::vector<std::string>* warnings) {
    std::vector<Triplet> out;
    const auto warn = [&](std::string msg) {
        if (warnings) warnings->push_back(std::move(msg));
    };
    if (ranking.entries.size() < 2) {
        warn("query " + std::string(query_id) + ": fewer than 2 results, no triplets");
        return out;
    }
    const auto& top = ranking.entries.front();
    for (std::size_t r = 1; r < ranking.entries.size(); ++r) {
        const auto& e = ranking.entries[r];
        if (!(top.score > e.score)) {
            warn("query " + std::string(query_id) + ": rank " + std::to_string(r + 1) + " (" + e.doc_id +
                 ") ties rank 1, skipped");
            continue;
        }
        Triplet t;
        t.query_id = std::string(query_id);
        t.id = t.query_id + "#" + std::to_string(r + 1);
        t.query = ranking.query;
        t.doc = &corpus.document(top.doc);
        t.counter = &corpus.document(e.doc);
        t.rel_doc = top.score;
        t.rel_counter = e.score;
        t.rank = r + 1;
        out.push_back(std::move(t));
    }
    return out;
}

CosSim cos_sim_metric(std::span<const TokenId> q, std::span<const TokenId> q_prime, const Bm25& lexical) {
    if (q.empty() || q_prime.empty()) throw Error(Errc::invalid_argument, "cos_sim: empty query");
    const auto u = lexical.representation(q);
    const auto v = lexical.representation(q_prime);
    CosSim out;
    out.zero_vector = u.is_zero() || v.is_zero();
    out.value = std::clamp(sparse_cosine(u, v), 0.0, 1.0);
    return out;
}

double bertscore_f1(std::span<const TokenId> q, std::span<const TokenId> q_prime, const TokenVectors& vectors) {
    if (q.empty() || q_prime.empty()) throw Error(Errc::invalid_argument, "bertscore: empty query");
    TokenSeq all(q.begin(), q.end());
    all.insert(all.end(), q_prime.begin(), q_prime.end());
    const auto vecs = vectors.lookup(all);
    const std::size_t l = q.size();
    const auto sim = [&](std::size_t i, std::size_t j) {
        if (q[i] == q_prime[j]) return 1.0;
        const auto& a = vecs[i];
        const auto& b = vecs[l + j];
        double s = 0.0;
        for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
        return (std::clamp(s, -1.0, 1.0) + 1.0) / 2.0;
    };
    double precision = 0.0;
    for (std::size_t j = 0; j < q_prime.size(); ++j) {
        double best = 0.0;
        for (std::size_t i = 0; i < l; ++i) best = std::max(best, sim(i, j));
        precision += best;
    }
    precision /= static_cast<double>(q_prime.size());
    double recall = 0.0;
    for (std::size_t i = 0; i < l; ++i) {
        double best = 0.0;
        for (std::size_t j = 0; j < q_prime.size(); ++j) best = std::max(best, sim(i, j));
        recall += best;
    }
    recall /= static_cast<double>(l);
    if (precision + recall == 0.0) return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

double fluency_metric(std::span<const TokenId> q, std::span<const TokenId> q_prime, const PerplexityModel& lm) {
    if (q.empty() || q_prime.empty()) throw Error(Errc::invalid_argument, "fluency: empty query");
    return lm.perplexity(q_prime) / lm.perplexity(q);
}

EditResult baseline_mask_only(const Triplet& triplet, const ImportanceScores& importance, const SearchModel& search) {
    const auto start = std::chrono::steady_clock::now();
    const auto& q = triplet.query;
    if (q.empty()) throw Error(Errc::invalid_argument, "mask_only: empty query");
    if (importance.query != q) throw Error(Errc::invalid_argument, "mask_only: importance scores belong to a different query");
    if (!(search.score(q, *triplet.doc) > search.score(q, *triplet.counter))) {
        throw Error(Errc::precondition, "not a valid counterfactual target: " + triplet.doc->id +
                                            " does not outrank " + triplet.counter->id);
    }
    EditResult result;
    for (std::size_t i = 1; i <= q.size(); ++i) {
        IterationTrace iter;
        iter.masks = i;
        iter.positions.assign(importance.order.begin(), importance.order.begin() + static_cast<std::ptrdiff_t>(i));
        std::sort(iter.positions.begin(), iter.positions.end());
        TokenSeq padded = q;
        for (auto p : iter.positions) padded[p] = Vocabulary::kPad;
        const bool flipped = check_flip(padded, triplet, search);
        iter.candidates.push_back({padded, 0.0, flipped});
        result.trace.push_back(std::move(iter));
        result.masks_used = i;
        if (flipped) {
            result.outcome = std::move(padded);
            break;
        }
    }
    result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

EditResult baseline_max_flip(const Triplet& triplet, const Vocabulary& vocab, const PerplexityModel& lm,
                             const SearchModel& search) {
    const auto start = std::chrono::steady_clock::now();
    EditResult result;
    IterationTrace iter;
    std::vector<TokenSeq> flipping;
    for (const auto& sentence : split_sentences(triplet.counter->text)) {
        auto ids = vocab.encode_text(sentence);
        if (ids.empty()) continue;
        const bool flipped = check_flip(ids, triplet, search);
        if (flipped) flipping.push_back(ids);
        iter.candidates.push_back({std::move(ids), 0.0, flipped});
    }
    result.trace.push_back(std::move(iter));
    if (!flipping.empty()) result.outcome = select_final(flipping, lm);
    result.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

double flip_rate(std::span<const EvalRecord> records) {
    if (records.empty()) throw Error(Errc::invalid_argument, "flip_rate: no records");
    const auto flipped = std::count_if(records.begin(), records.end(), [](const EvalRecord& r) { return r.flipped; });
    return static_cast<double>(flipped) / static_cast<double>(records.size());
}

Summary summarize(std::span<const EvalRecord> records) {
    Summary s;
    s.count = records.size();
    double cos = 0.0, bert = 0.0, flu = 0.0, runtime = 0.0;
    std::size_t scored = 0;
    for (const auto& r : records) {
        runtime += r.elapsed_seconds;
        if (!r.flipped) continue;
        ++s.flipped;
        if (r.cos_sim && r.bertscore_f1 && r.fluency) {
            cos += *r.cos_sim;
            bert += *r.bertscore_f1;
            flu += *r.fluency;
            ++scored;
        }
    }
    s.nulls = s.count - s.flipped;
    if (s.count > 0) {
        s.flip_rate = static_cast<double>(s.flipped) / static_cast<double>(s.count);
        s.runtime_seconds = runtime / static_cast<double>(s.count);
    }
    if (scored > 0) {
        const auto n = static_cast<double>(scored);
        s.cos_sim = cos / n;
        s.bertscore_f1 = bert / n;
        s.fluency = flu / n;
    }
    return s;
}

namespace {

EvalRecord run_one(const Triplet& t, Method method, const Backends& b, const EvalOptions& options) {
    const auto& vocab = b.corpus.vocab();
    EvalRecord rec;
    rec.triplet_id = t.id;
    rec.query_id = t.query_id;
    rec.rank = t.rank;
    rec.query = vocab.render(t.query);
    rec.doc_id = t.doc->id;
    rec.counter_id = t.counter->id;

    const auto start = std::chrono::steady_clock::now();
    EditResult result;
    if (method == Method::max_flip) {
        result = baseline_max_flip(t, vocab, b.perplexity, b.search);
    } else {
        const auto importance = options.masker == MaskerKind::maxsim
                                    ? maxsim_importance(t.query, *t.doc, b.vectors)
                                    : occlusion_importance(t.query, *t.doc, b.search);
        result = method == Method::cfe2
                     ? edit(t, b.search, importance, b.predictor, b.perplexity, options.editor)
                     : baseline_mask_only(t, importance, b.search);
    }
    rec.elapsed_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    rec.masks_used = result.masks_used;
    rec.trace = std::move(result.trace);
    if (result.outcome) {
        const auto& qp = *result.outcome;
        rec.flipped = true;
        rec.counterfactual = vocab.render(qp);
        const auto cs = cos_sim_metric(t.query, qp, b.lexical);
        rec.cos_sim = cs.value;
        rec.cos_zero_vector = cs.zero_vector;
        rec.bertscore_f1 = bertscore_f1(t.query, qp, b.vectors);
        rec.fluency = fluency_metric(t.query, qp, b.perplexity);
    }
    return rec;
}

}  // namespace

EvalReport evaluate(std::span<const Triplet> dataset, Method method, const Backends& backends,
                    const EvalOptions& options) {
    if (dataset.empty()) throw Error(Errc::invalid_argument, "evaluate: empty dataset");
    EvalReport report;
    report.method = std::string(method_name(method));
    report.beam_width = method == Method::cfe2 ? options.editor.beam_width : 0;
    report.records.resize(dataset.size());

    std::size_t workers = options.workers == 0 ? std::max(1u, std::thread::hardware_concurrency()) : options.workers;
    workers = std::min(workers, dataset.size());
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    const auto work = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= dataset.size()) return;
            try {
                report.records[i] = run_one(dataset[i], method, backends, options);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = dataset.size();
                return;
            }
        }
    };
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    }
    if (failure) std::rethrow_exception(failure);

    report.overall = summarize(report.records);
    std::map<std::size_t, std::vector<EvalRecord>> grouped;
    for (const auto& r : report.records) {
        if (r.rank > 0) grouped[r.rank].push_back(r);
    }
    for (const auto& [rank, recs] : grouped) report.by_rank[rank] = summarize(recs);
    return report;
}

std::vector<EvalReport> beam_sweep(std::span<const Triplet> dataset, std::span<const std::size_t> sizes,
                                   const Backends& backends, const EvalOptions& options) {
    if (sizes.empty()) throw Error(Errc::invalid_argument, "beam_sweep: no beam sizes");
    std::vector<EvalReport> out;
    for (auto b : sizes) {
        if (b < 1) throw Error(Errc::invalid_argument, "beam_sweep: beam size must be >= 1");
        EvalOptions opts = options;
        opts.editor.beam_width = b;
        out.push_back(evaluate(dataset, Method::cfe2, backends, opts));
    }
    return out;
}

namespace {

nlohmann::json optional_number(const std::optional<double>& v) {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

nlohmann::json summary_json(const Summary& s) {
    return {
        {"count", s.count},
        {"flipped", s.flipped},
        {"nulls", s.nulls},
        {"flip_rate", s.flip_rate},
        {"cos_sim", optional_number(s.cos_sim)},
        {"bertscore_f1", optional_number(s.bertscore_f1)},
        {"fluency", optional_number(s.fluency)},
    };
}

std::string cell(const std::optional<double>& v) {
    if (!v) return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

}  // namespace

nlohmann::json report_json(std::span<const EvalReport> reports) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& rep : reports) {
        nlohmann::json records = nlohmann::json::array();
        for (const auto& r : rep.records) {
            records.push_back({
                {"id", r.triplet_id},
                {"query_id", r.query_id},
                {"rank", r.rank},
                {"query", r.query},
                {"doc_id", r.doc_id},
                {"counter_doc_id", r.counter_id},
                {"counterfactual", r.counterfactual ? nlohmann::json(*r.counterfactual) : nlohmann::json(nullptr)},
                {"masks_used", r.masks_used},
                {"flipped", r.flipped},
                {"cos_sim", optional_number(r.cos_sim)},
                {"cos_zero_vector", r.cos_zero_vector},
                {"bertscore_f1", optional_number(r.bertscore_f1)},
                {"fluency", optional_number(r.fluency)},
            });
        }
        nlohmann::json by_rank = nlohmann::json::array();
        for (const auto& [rank, s] : rep.by_rank) {
            auto row = summary_json(s);
            row["rank"] = rank;
            by_rank.push_back(std::move(row));
        }
        methods.push_back({
            {"method", rep.method},
            {"beam", rep.beam_width},
            {"summary", summary_json(rep.overall)},
            {"by_rank", std::move(by_rank)},
            {"records", std::move(records)},
        });
    }
    return {
        {"format", "cfedit-eval-report"},
        {"version", 1},
        {"null_handling", "Null outcomes count as non-flips; similarity and fluency means cover non-Null outcomes"},
        {"bertscore_scaling", "token cosine s mapped to (s+1)/2"},
        {"methods", std::move(methods)},
    };
}

nlohmann::json timing_json(std::span<const EvalReport> reports) {
    nlohmann::json methods = nlohmann::json::array();
    for (const auto& rep : reports) {
        nlohmann::json per = nlohmann::json::object();
        for (const auto& r : rep.records) per[r.triplet_id] = r.elapsed_seconds;
        methods.push_back({{"method", rep.method},
                           {"beam", rep.beam_width},
                           {"runtime_seconds_per_edit", rep.overall.runtime_seconds},
                           {"records", std::move(per)}});
    }
    return {{"format", "cfedit-eval-timing"}, {"version", 1}, {"methods", std::move(methods)}};
}

std::string report_markdown(std::span<const EvalReport> reports, bool with_runtime) {
    std::string md;
    const auto label = [](const EvalReport& r) {
        return r.beam_width > 0 ? r.method + " (b=" + std::to_string(r.beam_width) + ")" : r.method;
    };
    md += "| Metric |";
    for (const auto& r : reports) md += " " + label(r) + " |";
    md += "\n|---|";
    for (std::size_t i = 0; i < reports.size(); ++i) md += "---:|";
    md += "\n";
    const auto row = [&](const char* name, auto get) {
        md += std::string("| ") + name + " |";
        for (const auto& r : reports) md += " " + get(r.overall) + " |";
        md += "\n";
    };
    row("Flip Rate", [](const Summary& s) { return cell(s.flip_rate); });
    row("CosSim", [](const Summary& s) { return cell(s.cos_sim); });
    row("BERTScore-F1", [](const Summary& s) { return cell(s.bertscore_f1); });
    row("Fluency", [](const Summary& s) { return cell(s.fluency); });
    row("Nulls", [](const Summary& s) { return std::to_string(s.nulls) + "/" + std::to_string(s.count); });
    if (with_runtime) {
        row("Runtime (s/edit)", [](const Summary& s) {
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.2e", s.runtime_seconds);
            return std::string(buf);
        });
    }

    for (const auto& r : reports) {
        if (r.by_rank.empty()) continue;
        md += "\n### " + label(r) + " by counterfactual rank\n\n| Counter. Doc. Rank |";
        for (const auto& [rank, s] : r.by_rank) md += " " + std::to_string(rank) + " |";
        md += "\n|---|";
        for (std::size_t i = 0; i < r.by_rank.size(); ++i) md += "---:|";
        md += "\n";
        const auto rank_row = [&](const char* name, auto get) {
            md += std::string("| ") + name + " |";
            for (const auto& [rank, s] : r.by_rank) md += " " + get(s) + " |";
            md += "\n";
        };
        rank_row("Flip Rate", [](const Summary& s) { return cell(s.flip_rate); });
        rank_row("CosSim", [](const Summary& s) { return cell(s.cos_sim); });
        rank_row("BERTScore-F1", [](const Summary& s) { return cell(s.bertscore_f1); });
        rank_row("Fluency", [](const Summary& s) { return cell(s.fluency); });
    }
    return md;
}

nlohmann::json edit_result_json(const EditResult& result, const Triplet& triplet, const Vocabulary& vocab) {
    nlohmann::json iterations = nlohmann::json::array();
    for (const auto& it : result.trace) {
        nlohmann::json cands = nlohmann::json::array();
        for (const auto& c : it.candidates) {
            cands.push_back({{"query", vocab.render(c.tokens)}, {"log_prob", c.log_prob}, {"flipped", c.flipped}});
        }
        iterations.push_back({{"masks", it.masks}, {"positions", it.positions}, {"candidates", std::move(cands)}});
    }
    return {
        {"query", vocab.render(triplet.query)},
        {"doc_id", triplet.doc->id},
        {"counter_doc_id", triplet.counter->id},
        {"counterfactual", result.outcome ? nlohmann::json(vocab.render(*result.outcome)) : nlohmann::json(nullptr)},
        {"masks_used", result.masks_used},
        {"elapsed_seconds", result.elapsed_seconds},
        {"iterations", std::move(iterations)},
    };
}

}  // namespace cfe
