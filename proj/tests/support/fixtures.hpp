#pragma once

#include <memory>
#include <vector>

#include "cfedit/corpus.hpp"
#include "cfedit/embed.hpp"
#include "cfedit/eval.hpp"
#include "cfedit/lm.hpp"
#include "cfedit/synthetic.hpp"

namespace cfe::testing {

/// In-process models over one corpus, wired like the engine's local backends.
struct World {
    World(std::vector<DocRecord> records, const EmbeddingOptions& embed = {}, std::size_t order = 3, double k = 0.1,
          double lambda = 0.5)
        : corpus(Corpus::build(std::move(records))),
          bm25(corpus),
          table(EmbeddingTable::train(corpus, embed)),
          lm(NgramLM::train(corpus, order, k)),
          predictor(lm, lambda) {}

    Backends backends() const { return {corpus, bm25, bm25, table, predictor, lm}; }

    Corpus corpus;
    Bm25 bm25;
    EmbeddingTable table;
    NgramLM lm;
    InterpolatedPredictor predictor;
};

inline std::unique_ptr<World> sample_world() {
    EmbeddingOptions opts;
    opts.dim = 2;
    opts.window = 2;
    return std::make_unique<World>(sample_corpus(), opts);
}

/// Default-sized synthetic collection (300 documents, 60 queries).
inline const SyntheticCollection& synthetic_collection() {
    static const SyntheticCollection col = generate_synthetic(SyntheticOptions{});
    return col;
}

inline std::unique_ptr<World> synthetic_world() { return std::make_unique<World>(synthetic_collection().documents); }

inline std::vector<Triplet> synthetic_triplets(const World& w, std::size_t top_k = 5) {
    std::vector<Triplet> out;
    for (const auto& q : synthetic_collection().queries) {
        const auto ids = w.corpus.vocab().encode_text(q.text);
        if (ids.empty()) continue;
        for (auto& t : build_triplets(w.bm25.search(ids, top_k), w.corpus, q.id)) out.push_back(std::move(t));
    }
    return out;
}

}  // namespace cfe::testing
