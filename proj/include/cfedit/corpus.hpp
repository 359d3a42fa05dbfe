#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "cfedit/text.hpp"

namespace cfe {

struct Document {
    std::string id;
    std::string text;
    TokenSeq tokens;
    /// (term, tf) for indexed terms, ascending term id.
    std::vector<std::pair<TokenId, std::uint32_t>> term_freqs;

    std::size_t length() const { return tokens.size(); }
    std::uint32_t tf(TokenId term) const;
};

struct Posting {
    std::uint32_t doc;  // position in Corpus::documents()
    std::uint32_t tf;
};

struct DocRecord {
    std::string id;
    std::string text;
};

/// Parses one JSON object per line with string fields `id` and `text`. BEIR
/// style `_id` is accepted for `id`, and a non-empty `title` is prepended to
/// the text. Blank lines are skipped.
std::vector<DocRecord> read_doc_records(std::istream& in);

/// The searchable collection: documents, vocabulary, collection statistics and
/// the inverted index. Immutable once built.
class Corpus {
public:
    static Corpus build(std::vector<DocRecord> records, std::size_t min_count = 1);
    static Corpus ingest(std::istream& jsonl, std::size_t min_count = 1);

    void save(std::ostream& out, std::uint64_t config_hash) const;
    static Corpus load(std::istream& in, std::uint64_t config_hash, const std::string& name = "index");

    const Vocabulary& vocab() const { return vocab_; }
    std::span<const Document> documents() const { return docs_; }
    std::size_t size() const { return docs_.size(); }
    const Document& document(std::size_t index) const { return docs_.at(index); }
    std::optional<std::size_t> find(std::string_view id) const;
    /// Throws Errc::not_found naming the id.
    const Document& at(std::string_view id) const;

    double avgdl() const { return avgdl_; }
    std::size_t df(TokenId term) const { return term < postings_.size() ? postings_[term].size() : 0; }
    std::span<const Posting> postings(TokenId term) const;
    /// Document positions sorted by ascending document id string.
    std::span<const std::uint32_t> id_order() const { return id_order_; }

private:
    Corpus() = default;
    void finalize();

    Vocabulary vocab_;
    std::vector<Document> docs_;
    std::vector<std::vector<Posting>> postings_;  // indexed by term id
    std::vector<std::uint32_t> id_order_;
    double avgdl_ = 0.0;
};

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

struct RankEntry {
    std::string doc_id;
    std::uint32_t doc = 0;
    double score = 0.0;
};

struct Ranking {
    TokenSeq query;
    std::vector<RankEntry> entries;
};

/// Sparse vector with entries sorted by term id.
struct SparseVector {
    std::vector<std::pair<TokenId, double>> entries;
    bool is_zero() const { return entries.empty(); }
};

double sparse_cosine(const SparseVector& u, const SparseVector& v);

/// The relevance function rel(q, d) plus anything a search model can expose.
class SearchModel {
public:
    virtual ~SearchModel() = default;
    virtual double score(std::span<const TokenId> query, const Document& doc) const = 0;
};

/// Okapi BM25 over a Corpus, Robertson IDF ln(1 + (N - df + 0.5)/(df + 0.5)).
/// Query terms are summed per occurrence; special tokens never match.
class Bm25 final : public SearchModel {
public:
    explicit Bm25(const Corpus& corpus, Bm25Params params = {});

    double score(std::span<const TokenId> query, const Document& doc) const override;
    double idf(TokenId term) const;

    /// Top-k by score, ties by ascending document id. Throws on an empty corpus
    /// or k < 1.
    Ranking search(std::span<const TokenId> query, std::size_t k) const;

    /// idf(t) * tf_q(t), L2-normalized; zero vector when no content term.
    SparseVector representation(std::span<const TokenId> query) const;

    const Corpus& corpus() const { return corpus_; }
    const Bm25Params& params() const { return params_; }

private:
    const Corpus& corpus_;
    Bm25Params params_;
};

}  // namespace cfe
