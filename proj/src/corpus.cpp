#include "cfedit/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <unordered_set>

#include <json.hpp>

#include "binary_io.hpp"
#include "cfedit/error.hpp"

namespace cfe {

namespace {
constexpr std::string_view kIndexMagic = "CFEIDX01";

std::string line_suffix(std::size_t line) { return " @ line " + std::to_string(line); }
}  // namespace

std::uint32_t Document::tf(TokenId term) const {
    auto it = std::lower_bound(term_freqs.begin(), term_freqs.end(), term,
                               [](const auto& e, TokenId t) { return e.first < t; });
    return (it != term_freqs.end() && it->first == term) ? it->second : 0;
}

std::vector<DocRecord> read_doc_records(std::istream& in) {
    std::vector<DocRecord> records;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw Error(Errc::format, "malformed record" + line_suffix(line_no));
        }
        if (!j.is_object()) throw Error(Errc::format, "malformed record" + line_suffix(line_no));
        const char* id_key = j.contains("id") ? "id" : (j.contains("_id") ? "_id" : nullptr);
        if (!id_key) throw Error(Errc::format, "missing field: id" + line_suffix(line_no));
        if (!j.contains("text")) throw Error(Errc::format, "missing field: text" + line_suffix(line_no));
        if (!j[id_key].is_string()) throw Error(Errc::format, "field id is not a string" + line_suffix(line_no));
        if (!j["text"].is_string()) throw Error(Errc::format, "field text is not a string" + line_suffix(line_no));
        DocRecord rec{j[id_key].get<std::string>(), j["text"].get<std::string>()};
        if (auto t = j.find("title"); t != j.end() && t->is_string() && !t->get<std::string>().empty()) {
            rec.text = t->get<std::string>() + ". " + rec.text;
        }
        records.push_back(std::move(rec));
    }
    return records;
}

Corpus Corpus::build(std::vector<DocRecord> records, std::size_t min_count) {
    if (records.empty()) throw Error(Errc::invalid_argument, "empty corpus");
    std::unordered_set<std::string> seen;
    for (const auto& r : records) {
        if (!seen.insert(r.id).second) throw Error(Errc::format, "duplicate id: " + r.id);
    }

    std::vector<std::vector<std::string>> tokenized;
    tokenized.reserve(records.size());
    for (const auto& r : records) tokenized.push_back(tokenize(r.text));

    Corpus c;
    c.vocab_ = Vocabulary::build(tokenized, min_count);
    c.docs_.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        Document d;
        d.id = std::move(records[i].id);
        d.text = std::move(records[i].text);
        d.tokens = c.vocab_.encode(tokenized[i]);
        c.docs_.push_back(std::move(d));
    }

    c.postings_.assign(c.vocab_.size(), {});
    for (std::uint32_t di = 0; di < c.docs_.size(); ++di) {
        std::map<TokenId, std::uint32_t> tf;
        for (TokenId t : c.docs_[di].tokens) {
            if (!Vocabulary::is_special(t)) ++tf[t];
        }
        for (auto [t, n] : tf) c.postings_[t].push_back({di, n});
    }
    c.finalize();
    return c;
}

Corpus Corpus::ingest(std::istream& jsonl, std::size_t min_count) {
    return build(read_doc_records(jsonl), min_count);
}

void Corpus::finalize() {
    std::size_t total = 0;
    for (auto& d : docs_) {
        total += d.length();
        std::map<TokenId, std::uint32_t> tf;
        for (TokenId t : d.tokens) {
            if (!Vocabulary::is_special(t)) ++tf[t];
        }
        d.term_freqs.assign(tf.begin(), tf.end());
    }
    avgdl_ = docs_.empty() ? 0.0 : static_cast<double>(total) / static_cast<double>(docs_.size());

    id_order_.resize(docs_.size());
    for (std::uint32_t i = 0; i < docs_.size(); ++i) id_order_[i] = i;
    std::sort(id_order_.begin(), id_order_.end(),
              [this](std::uint32_t a, std::uint32_t b) { return docs_[a].id < docs_[b].id; });
}

std::optional<std::size_t> Corpus::find(std::string_view id) const {
    auto it = std::lower_bound(id_order_.begin(), id_order_.end(), id,
                               [this](std::uint32_t d, std::string_view key) { return docs_[d].id < key; });
    if (it != id_order_.end() && docs_[*it].id == id) return *it;
    return std::nullopt;
}

const Document& Corpus::at(std::string_view id) const {
    auto idx = find(id);
    if (!idx) throw Error(Errc::not_found, "unknown document id: " + std::string(id));
    return docs_[*idx];
}

std::span<const Posting> Corpus::postings(TokenId term) const {
    if (term >= postings_.size()) return {};
    return postings_[term];
}

void Corpus::save(std::ostream& out, std::uint64_t config_hash) const {
    detail::BinaryWriter w(out);
    w.header(kIndexMagic, config_hash);
    const auto content = vocab_.content();
    w.u64(content.size());
    for (const auto& s : content) w.str(s);
    w.u64(docs_.size());
    for (const auto& d : docs_) {
        w.str(d.id);
        w.str(d.text);
        w.u64(d.tokens.size());
        for (TokenId t : d.tokens) w.u32(t);
    }
    w.u64(postings_.size());
    for (const auto& list : postings_) {
        w.u64(list.size());
        for (const auto& p : list) {
            w.u32(p.doc);
            w.u32(p.tf);
        }
    }
    w.finish();
}

Corpus Corpus::load(std::istream& in, std::uint64_t config_hash, const std::string& name) {
    detail::BinaryReader r(in, name);
    r.header(kIndexMagic, config_hash);
    Corpus c;
    const auto vocab_n = r.u64();
    std::vector<std::string> content;
    content.reserve(vocab_n);
    for (std::uint64_t i = 0; i < vocab_n; ++i) content.push_back(r.str());
    c.vocab_ = Vocabulary::from_content(std::move(content));

    const auto doc_n = r.u64();
    c.docs_.reserve(doc_n);
    for (std::uint64_t i = 0; i < doc_n; ++i) {
        Document d;
        d.id = r.str();
        d.text = r.str();
        const auto n = r.u64();
        d.tokens.resize(n);
        for (auto& t : d.tokens) {
            t = r.u32();
            if (t >= c.vocab_.size()) r.fail("token id out of range");
        }
        c.docs_.push_back(std::move(d));
    }
    const auto terms = r.u64();
    if (terms != c.vocab_.size()) r.fail("postings table size does not match vocabulary");
    c.postings_.resize(terms);
    for (auto& list : c.postings_) {
        const auto n = r.u64();
        list.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            list[i].doc = r.u32();
            list[i].tf = r.u32();
            if (list[i].doc >= c.docs_.size() || list[i].tf == 0) r.fail("invalid posting");
            if (i > 0 && list[i].doc <= list[i - 1].doc) r.fail("postings not sorted");
        }
    }
    c.finalize();
    return c;
}

double sparse_cosine(const SparseVector& u, const SparseVector& v) {
    if (u.is_zero() || v.is_zero()) return 0.0;
    if (u.entries == v.entries) return 1.0;
    double dot = 0.0, nu = 0.0, nv = 0.0;
    for (const auto& [t, w] : u.entries) nu += w * w;
    for (const auto& [t, w] : v.entries) nv += w * w;
    std::size_t i = 0, j = 0;
    while (i < u.entries.size() && j < v.entries.size()) {
        if (u.entries[i].first < v.entries[j].first) {
            ++i;
        } else if (v.entries[j].first < u.entries[i].first) {
            ++j;
        } else {
            dot += u.entries[i].second * v.entries[j].second;
            ++i;
            ++j;
        }
    }
    return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

Bm25::Bm25(const Corpus& corpus, Bm25Params params) : corpus_(corpus), params_(params) {
    if (!(params_.k1 > 0.0)) throw Error(Errc::invalid_argument, "bm25 k1 must be > 0");
    if (!(params_.b >= 0.0 && params_.b <= 1.0)) throw Error(Errc::invalid_argument, "bm25 b must be in [0, 1]");
}

double Bm25::idf(TokenId term) const {
    const auto n = static_cast<double>(corpus_.size());
    const auto df = static_cast<double>(corpus_.df(term));
    return std::log(1.0 + (n - df + 0.5) / (df + 0.5));
}

double Bm25::score(std::span<const TokenId> query, const Document& doc) const {
    const double avgdl = corpus_.avgdl() > 0.0 ? corpus_.avgdl() : 1.0;
    const double norm = params_.k1 * (1.0 - params_.b + params_.b * static_cast<double>(doc.length()) / avgdl);
    double total = 0.0;
    for (TokenId t : query) {
        if (Vocabulary::is_special(t)) continue;
        const auto tf = doc.tf(t);
        if (tf == 0) continue;
        const double f = static_cast<double>(tf);
        total += idf(t) * f * (params_.k1 + 1.0) / (f + norm);
    }
    return total;
}

Ranking Bm25::search(std::span<const TokenId> query, std::size_t k) const {
    if (k < 1) throw Error(Errc::invalid_argument, "k must be >= 1");
    if (corpus_.size() == 0) throw Error(Errc::precondition, "empty corpus");

    std::vector<std::uint32_t> matched;
    for (TokenId t : query) {
        if (Vocabulary::is_special(t)) continue;
        for (const auto& p : corpus_.postings(t)) matched.push_back(p.doc);
    }
    std::sort(matched.begin(), matched.end());
    matched.erase(std::unique(matched.begin(), matched.end()), matched.end());

    Ranking ranking;
    ranking.query.assign(query.begin(), query.end());
    ranking.entries.reserve(std::min(k, corpus_.size()));
    std::vector<RankEntry> scored;
    scored.reserve(matched.size());
    for (auto d : matched) {
        const auto& doc = corpus_.document(d);
        scored.push_back({doc.id, d, score(query, doc)});
    }
    const auto by_rank = [](const RankEntry& a, const RankEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.doc_id < b.doc_id;
    };
    const auto top = std::min(k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top), scored.end(), by_rank);
    ranking.entries.assign(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(top));

    // Matched documents always score > 0 (idf > 0), so the zero-score tail is
    // every unmatched document in id order.
    if (ranking.entries.size() < k) {
        for (auto d : corpus_.id_order()) {
            if (ranking.entries.size() >= k) break;
            if (std::binary_search(matched.begin(), matched.end(), d)) continue;
            ranking.entries.push_back({corpus_.document(d).id, d, 0.0});
        }
    }
    return ranking;
}

SparseVector Bm25::representation(std::span<const TokenId> query) const {
    std::map<TokenId, double> tf;
    for (TokenId t : query) {
        if (!Vocabulary::is_special(t)) tf[t] += 1.0;
    }
    SparseVector v;
    double norm = 0.0;
    for (auto [t, n] : tf) {
        const double w = idf(t) * n;
        v.entries.emplace_back(t, w);
        norm += w * w;
    }
    if (norm > 0.0) {
        norm = std::sqrt(norm);
        for (auto& e : v.entries) e.second /= norm;
    } else {
        v.entries.clear();
    }
    return v;
}

}  // namespace cfe
