// One line per criterion; exit status is the number of failures.
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "cfedit/editor.hpp"
#include "cfedit/engine.hpp"
#include "cfedit/eval.hpp"
#include "fixtures.hpp"
#include "stub_backend.hpp"
#include "toy_predictor.hpp"

using namespace cfe;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void run(int n, const char* title, const std::function<Outcome()>& body) {
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::printf("[%s] criterion %d: %s (%s)\n", o.pass ? "PASS" : "FAIL", n, title, o.detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream s;
    s.precision(digits);
    s << std::fixed << v;
    return s.str();
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

// The synthetic evaluation shared by criteria 4 to 9.
struct SyntheticRun {
    std::unique_ptr<testing::World> world = testing::synthetic_world();
    std::vector<Triplet> triplets = testing::synthetic_triplets(*world);
    std::vector<EvalReport> reports;

    SyntheticRun() {
        EvalOptions opts;
        for (Method m : {Method::cfe2, Method::mask_only, Method::max_flip}) {
            reports.push_back(evaluate(triplets, m, world->backends(), opts));
        }
    }
    const EvalReport& report(Method m) const { return reports[static_cast<std::size_t>(m)]; }
};

const SyntheticRun& synthetic_run() {
    static const SyntheticRun r;
    return r;
}

// Token sequence behind a record's counterfactual: the flipping trace candidate
// when there is one, else the re-encoded text.
TokenSeq counterfactual_tokens(const EvalRecord& r, const Vocabulary& vocab) {
    for (auto it = r.trace.rbegin(); it != r.trace.rend(); ++it) {
        for (const auto& c : it->candidates) {
            if (c.flipped && vocab.render(c.tokens) == *r.counterfactual) return c.tokens;
        }
    }
    return vocab.encode_text(*r.counterfactual);
}

const Triplet& triplet_of(const EvalRecord& r, const std::vector<Triplet>& ts) {
    for (const auto& t : ts) {
        if (t.id == r.triplet_id) return t;
    }
    throw std::runtime_error("unknown triplet " + r.triplet_id);
}

struct TempDir {
    TempDir() : path(fs::temp_directory_path() / ("cfedit_accept_" + std::to_string(::getpid()))) {
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    fs::path path;
};

}  // namespace

int main() {
    run(1, "beam search equals exhaustive enumeration on toy instances", [] {
        std::mt19937_64 rng(2024);
        const Document dummy;
        const auto t0 = std::chrono::steady_clock::now();
        std::size_t matched = 0;
        const std::size_t instances = 30;
        for (std::size_t inst = 0; inst < instances; ++inst) {
            const std::size_t n = 2 + rng() % 7;
            const std::size_t len = 1 + rng() % 4;
            TokenSeq q(len);
            for (auto& t : q) t = static_cast<TokenId>(3 + rng() % n);
            const std::size_t slots = std::min<std::size_t>(len, 1 + rng() % 2);
            std::vector<std::size_t> pos(len);
            std::iota(pos.begin(), pos.end(), 0);
            std::shuffle(pos.begin(), pos.end(), rng);
            for (std::size_t s = 0; s < slots; ++s) q[pos[s]] = Vocabulary::kMask;
            const testing::ToyPredictor p(n, rng(), inst % 2 == 0);
            const auto beam = decode(q, dummy, p, n * n);
            const auto oracle = testing::enumerate_fillings(p, q, n);
            bool same = beam.candidates.size() == oracle.size();
            for (std::size_t i = 0; same && i < oracle.size(); ++i) {
                same = beam.candidates[i].tokens == oracle[i].tokens &&
                       std::abs(beam.candidates[i].log_prob - std::log(oracle[i].prob)) < 1e-12;
            }
            matched += same;
        }
        const double secs = elapsed_since(t0);
        return Outcome{matched == instances && secs < 1.0,
                       std::to_string(matched) + "/" + std::to_string(instances) + " exact, " + fmt(secs) + " s"};
    });

    run(2, "BM25 golden values on the sample corpus", [] {
        const auto corpus = Corpus::build(sample_corpus());
        const Bm25 bm25(corpus);
        const auto q = corpus.vocab().encode_text("apple recipe");
        const double a = std::log(1.6);
        const double want[] = {2.0 * a, a, a};
        const char* ids[] = {"d1", "d2", "d3"};
        double worst = 0.0;
        for (int i = 0; i < 3; ++i) worst = std::max(worst, std::abs(bm25.score(q, corpus.at(ids[i])) - want[i]));
        worst = std::max(worst, std::abs(bm25.idf(corpus.vocab().id("banana")) - std::log(8.0 / 3.0)));
        const auto r = bm25.search(q, 3);
        const bool order = r.entries.size() == 3 && r.entries[0].doc_id == "d1" && r.entries[1].doc_id == "d2" &&
                           r.entries[2].doc_id == "d3";
        return Outcome{worst <= 1e-9 && order, "max error " + std::to_string(worst) + ", order d1 d2 d3"};
    });

    run(3, "metric identities on 100 sampled synthetic queries", [] {
        const auto col = generate_synthetic({.seed = 0, .documents = 300, .queries = 100});
        const testing::World w(col.documents);
        std::size_t exact = 0;
        for (const auto& qr : col.queries) {
            const auto q = w.corpus.vocab().encode_text(qr.text);
            exact += fluency_metric(q, q, w.lm) == 1.0 && cos_sim_metric(q, q, w.bm25).value == 1.0 &&
                     bertscore_f1(q, q, w.table) == 1.0;
        }
        return Outcome{exact == 100 && col.queries.size() == 100, std::to_string(exact) + "/100 exact"};
    });

    run(4, "every non-Null edit flips under recomputed relevance", [] {
        const auto& r = synthetic_run();
        const auto& vocab = r.world->corpus.vocab();
        std::size_t edits = 0, violations = 0;
        for (const auto& rep : r.reports) {
            for (const auto& rec : rep.records) {
                if (!rec.counterfactual) continue;
                ++edits;
                const auto& t = triplet_of(rec, r.triplets);
                const auto qp = counterfactual_tokens(rec, vocab);
                if (!(r.world->bm25.score(qp, *t.counter) > r.world->bm25.score(qp, *t.doc))) ++violations;
            }
        }
        const bool sized = r.world->corpus.size() >= 200 && testing::synthetic_collection().queries.size() >= 50 &&
                           r.triplets.size() >= 200;
        return Outcome{sized && violations == 0, std::to_string(r.triplets.size()) + " triplets, " +
                                                     std::to_string(edits) + " edits, " +
                                                     std::to_string(violations) + " violations"};
    });

    run(5, "no flipping candidate before masks_used", [] {
        const auto& r = synthetic_run();
        std::size_t checked = 0, violations = 0;
        for (Method m : {Method::cfe2, Method::mask_only}) {
            for (const auto& rec : r.report(m).records) {
                if (!rec.counterfactual) continue;
                ++checked;
                const auto& t = triplet_of(rec, r.triplets);
                bool ok = rec.trace.size() == rec.masks_used;
                for (const auto& it : rec.trace) {
                    if (it.masks >= rec.masks_used) continue;
                    for (const auto& c : it.candidates) {
                        if (c.flipped || check_flip(c.tokens, t, r.world->bm25)) ok = false;
                    }
                }
                violations += !ok;
            }
        }
        return Outcome{violations == 0, std::to_string(checked) + " edits, " + std::to_string(violations) +
                                            " violations"};
    });

    run(6, "CFE2 >= Mask-only flip rate and CFE2 >= MaxFlip CosSim", [] {
        const auto& r = synthetic_run();
        const auto& c = r.report(Method::cfe2).overall;
        const auto& m = r.report(Method::mask_only).overall;
        const auto& f = r.report(Method::max_flip).overall;
        const bool ok = c.flip_rate >= m.flip_rate && c.cos_sim && f.cos_sim && *c.cos_sim >= *f.cos_sim;
        return Outcome{ok, "flip " + fmt(c.flip_rate) + " vs " + fmt(m.flip_rate) + ", CosSim " +
                               fmt(c.cos_sim.value_or(0)) + " vs " + fmt(f.cos_sim.value_or(0))};
    });

    run(7, "CFE2 CosSim non-increasing from rank 2 to 5 (tolerance 0.01)", [] {
        const auto& by_rank = synthetic_run().report(Method::cfe2).by_rank;
        std::string detail;
        bool ok = true;
        std::optional<double> prev;
        for (std::size_t rank = 2; rank <= 5; ++rank) {
            const auto it = by_rank.find(rank);
            if (it == by_rank.end() || !it->second.cos_sim) {
                ok = false;
                detail += " r" + std::to_string(rank) + "=n/a";
                continue;
            }
            const double v = *it->second.cos_sim;
            if (prev && v > *prev + 0.01) ok = false;
            prev = v;
            detail += " r" + std::to_string(rank) + "=" + fmt(v);
        }
        return Outcome{ok, detail.substr(1)};
    });

    run(8, "runtime grows with beam size, flip rate stable within 0.05", [] {
        const auto& r = synthetic_run();
        const std::vector<std::size_t> sizes{5, 10, 20};
        std::vector<std::vector<double>> runtimes(sizes.size());
        std::vector<double> flips(sizes.size());
        for (int rep = 0; rep < 15; ++rep) {
            const auto reps = beam_sweep(r.triplets, sizes, r.world->backends(), EvalOptions{});
            for (std::size_t i = 0; i < sizes.size(); ++i) {
                runtimes[i].push_back(reps[i].overall.runtime_seconds);
                flips[i] = reps[i].overall.flip_rate;
            }
        }
        std::vector<double> med;
        for (auto& v : runtimes) {
            std::sort(v.begin(), v.end());
            med.push_back(v[v.size() / 2]);
        }
        const bool grows = med[0] < med[1] && med[1] < med[2];
        const double spread =
            *std::max_element(flips.begin(), flips.end()) - *std::min_element(flips.begin(), flips.end());
        std::string detail;
        for (std::size_t i = 0; i < sizes.size(); ++i) {
            detail += "b=" + std::to_string(sizes[i]) + " " + fmt(med[i] * 1e3, 3) + " ms/edit flip " +
                      fmt(flips[i]) + "; ";
        }
        return Outcome{grows && spread <= 0.05, detail + "spread " + fmt(spread)};
    });

    run(9, "mean runtime per edit <= 0.1 s at b=10", [] {
        const double secs = synthetic_run().report(Method::cfe2).overall.runtime_seconds;
        return Outcome{secs <= 0.1, fmt(secs * 1e3, 3) + " ms/edit"};
    });

    run(10, "repeated eval runs write byte-identical reports", [] {
        TempDir tmp;
        const auto col = generate_synthetic({});
        {
            std::ofstream c(tmp.path / "corpus.jsonl"), q(tmp.path / "queries.jsonl");
            write_doc_records(c, col.documents);
            write_query_records(q, col.queries);
        }
        RunConfig cfg;
        cfg.corpus = (tmp.path / "corpus.jsonl").string();
        cfg.artifacts_dir = (tmp.path / "artifacts").string();
        build_artifacts(cfg);
        const std::vector<Method> methods{Method::cfe2, Method::mask_only, Method::max_flip};
        const auto run_once = [&](std::size_t workers, const std::string& name) {
            auto c = cfg;
            c.workers = workers;
            const Engine engine(c);
            const auto ds = engine.load_dataset((tmp.path / "queries.jsonl").string(), nullptr);
            write_reports(engine.eval(ds, methods), (tmp.path / name).string(), c.artifact_hash());
        };
        run_once(1, "a");
        run_once(1, "b");
        run_once(4, "c");
        bool same = true;
        for (const char* ext : {".json", ".md"}) {
            const auto a = slurp(tmp.path / (std::string("a") + ext));
            same = same && !a.empty() && a == slurp(tmp.path / (std::string("b") + ext)) &&
                   a == slurp(tmp.path / (std::string("c") + ext));
        }
        return Outcome{same, "serial, serial and 4 workers compared on .json and .md"};
    });

    run(11, "stub backend over the wire reproduces in-process reports", [] {
        const auto& r = synthetic_run();
        const auto& w = *r.world;
        testing::StubBackend stub(w.corpus, w.bm25, w.table, w.predictor, w.lm);
        const auto endpoint = [&](remote::Role role) {
            remote::BackendEndpoint e;
            e.base = stub.url();
            e.role = role;
            return e;
        };
        const auto& vocab = w.corpus.vocab();
        const remote::RemoteSearchModel search(endpoint(remote::Role::score), vocab);
        const remote::RemoteTokenVectors vectors(endpoint(remote::Role::embed), vocab);
        const remote::RemotePredictor predictor(endpoint(remote::Role::predict), vocab);
        const remote::RemotePerplexity perplexity(endpoint(remote::Role::perplexity), vocab);
        const Backends remote_backends{w.corpus, w.bm25, search, vectors, predictor, perplexity};
        EvalOptions opts;
        opts.workers = 4;
        std::vector<EvalReport> remote_reports;
        for (Method m : {Method::cfe2, Method::mask_only, Method::max_flip}) {
            remote_reports.push_back(evaluate(r.triplets, m, remote_backends, opts));
        }
        const bool json_same = report_json(remote_reports).dump() == report_json(r.reports).dump();
        const bool md_same = report_markdown(remote_reports) == report_markdown(r.reports);
        return Outcome{json_same && md_same && stub.requests() > 0,
                       std::to_string(stub.requests()) + " requests, json " + (json_same ? "equal" : "differs") +
                           ", markdown " + (md_same ? "equal" : "differs")};
    });

    return failures;
}
