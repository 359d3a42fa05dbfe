#include "cfedit/synthetic.hpp"

#include <algorithm>
#include <array>
#include <istream>
#include <ostream>
#include <random>
#include <set>

#include <json.hpp>

#include "cfedit/error.hpp"

namespace cfe {
namespace {

constexpr std::array kFunctionWords = {
    "the", "of", "and", "in", "to", "a", "is", "for", "with", "on", "by", "as", "from", "that", "are",
    "at", "this", "was", "be", "or", "an", "which", "its", "into", "were", "has", "than", "after", "over", "between",
};

constexpr std::array kOnsets = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "tr", "st", "pl"};
constexpr std::array kVowels = {"a", "e", "i", "o", "u", "ai", "ou"};
constexpr std::array kCodas = {"", "n", "r", "s", "l", "m", "x", "th"};

// Raw mt19937_64 output is fully specified, unlike the standard distributions.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    std::size_t between(std::size_t lo, std::size_t hi) { return lo + below(hi - lo + 1); }

    // Rank r drawn with weight 1/(r+1).
    std::size_t zipf(std::size_t n) {
        double total = 0.0;
        for (std::size_t r = 0; r < n; ++r) total += 1.0 / static_cast<double>(r + 1);
        double x = unit() * total;
        for (std::size_t r = 0; r < n; ++r) {
            x -= 1.0 / static_cast<double>(r + 1);
            if (x < 0.0) return r;
        }
        return n - 1;
    }

private:
    std::mt19937_64 engine_;
};

std::vector<std::string> make_words(Rng& rng, std::size_t count, std::set<std::string>& taken) {
    std::vector<std::string> out;
    while (out.size() < count) {
        std::string w;
        const auto syllables = rng.between(2, 3);
        for (std::size_t s = 0; s < syllables; ++s) {
            w += kOnsets[rng.below(kOnsets.size())];
            w += kVowels[rng.below(kVowels.size())];
        }
        w += kCodas[rng.below(kCodas.size())];
        if (taken.insert(w).second) out.push_back(std::move(w));
    }
    return out;
}

}  // namespace

std::vector<QueryRecord> read_query_records(std::istream& in) {
    std::vector<QueryRecord> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::parse_error&) {
            throw Error(Errc::format, "malformed query record @ line " + std::to_string(line_no));
        }
        const char* key = j.contains("query") ? "query" : (j.contains("text") ? "text" : nullptr);
        if (!j.is_object() || !key || !j[key].is_string()) {
            throw Error(Errc::format, "missing field: query @ line " + std::to_string(line_no));
        }
        QueryRecord q;
        q.text = j[key].get<std::string>();
        if (auto id = j.find("id"); id != j.end() && id->is_string()) {
            q.id = id->get<std::string>();
        } else if (auto id2 = j.find("_id"); id2 != j.end() && id2->is_string()) {
            q.id = id2->get<std::string>();
        } else {
            q.id = "q" + std::to_string(line_no);
        }
        out.push_back(std::move(q));
    }
    return out;
}

SyntheticCollection generate_synthetic(const SyntheticOptions& options) {
    if (options.documents < 1 || options.topics < 1) {
        throw Error(Errc::invalid_argument, "synthetic collection needs at least one document and topic");
    }
    Rng rng(options.seed);
    std::set<std::string> taken(kFunctionWords.begin(), kFunctionWords.end());
    constexpr std::size_t kTopicWords = 24;
    constexpr std::size_t kFocusWords = 6;
    std::vector<std::vector<std::string>> topics;
    for (std::size_t t = 0; t < options.topics; ++t) topics.push_back(make_words(rng, kTopicWords, taken));

    SyntheticCollection out;
    std::vector<std::vector<std::string>> focus(options.documents);
    std::vector<std::size_t> doc_topic(options.documents);
    for (std::size_t d = 0; d < options.documents; ++d) {
        const std::size_t t = d % options.topics;
        doc_topic[d] = t;
        const auto& words = topics[t];
        while (focus[d].size() < kFocusWords) {
            const auto& w = words[rng.zipf(words.size())];
            if (std::find(focus[d].begin(), focus[d].end(), w) == focus[d].end()) focus[d].push_back(w);
        }
        std::string text;
        const auto sentences = rng.between(2, 4);
        for (std::size_t s = 0; s < sentences; ++s) {
            const auto len = rng.between(5, 10);
            std::string sentence;
            for (std::size_t k = 0; k < len; ++k) {
                const double u = rng.unit();
                std::string w;
                if (u < 0.35) {
                    w = kFunctionWords[rng.zipf(kFunctionWords.size())];
                } else if (u < 0.80) {
                    w = focus[d][rng.below(focus[d].size())];
                } else if (u < 0.92) {
                    w = words[rng.zipf(words.size())];
                } else {
                    const auto& other = topics[rng.below(options.topics)];
                    w = other[rng.zipf(other.size())];
                }
                if (k == 0) w[0] = static_cast<char>(w[0] - 'a' + 'A');
                if (k) sentence += ' ';
                sentence += w;
            }
            if (s) text += ' ';
            text += sentence + ".";
        }
        char id[32];
        std::snprintf(id, sizeof id, "doc%04zu", d);
        out.documents.push_back({id, std::move(text)});
    }

    for (std::size_t q = 0; q < options.queries; ++q) {
        const std::size_t anchor = rng.below(options.documents);
        const auto& words = topics[doc_topic[anchor]];
        const auto len = rng.between(2, 4);
        std::vector<std::string> terms;
        std::size_t guard = 0;
        while (terms.size() < len && guard++ < 1000) {
            const std::string w = rng.unit() < 0.6 ? focus[anchor][rng.below(focus[anchor].size())]
                                                   : words[rng.zipf(words.size())];
            if (std::find(terms.begin(), terms.end(), w) == terms.end()) terms.push_back(w);
        }
        char id[32];
        std::snprintf(id, sizeof id, "q%03zu", q);
        out.queries.push_back({id, detokenize(terms)});
    }
    return out;
}

std::vector<DocRecord> sample_corpus() {
    return {{"d1", "apple pie recipe"}, {"d2", "apple tree orchard"}, {"d3", "banana bread recipe"}};
}

void write_doc_records(std::ostream& out, const std::vector<DocRecord>& docs) {
    for (const auto& d : docs) out << nlohmann::json{{"id", d.id}, {"text", d.text}}.dump() << '\n';
}

void write_query_records(std::ostream& out, const std::vector<QueryRecord>& queries) {
    for (const auto& q : queries) out << nlohmann::json{{"id", q.id}, {"query", q.text}}.dump() << '\n';
}

}  // namespace cfe
