#include "cfedit/text.hpp"

#include <algorithm>
#include <map>

#include "cfedit/error.hpp"

namespace cfe {
namespace {

// Decodes one code point starting at text[i]; returns the byte length consumed
// (>= 1). Malformed sequences yield U+FFFD with length 1.
std::size_t decode_utf8(std::string_view text, std::size_t i, char32_t& cp) {
    const auto b0 = static_cast<unsigned char>(text[i]);
    if (b0 < 0x80) {
        cp = b0;
        return 1;
    }
    std::size_t len = 0;
    char32_t value = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        value = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        value = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        value = b0 & 0x07;
    } else {
        cp = 0xFFFD;
        return 1;
    }
    if (i + len > text.size()) {
        cp = 0xFFFD;
        return 1;
    }
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(text[i + k]);
        if ((b & 0xC0) != 0x80) {
            cp = 0xFFFD;
            return 1;
        }
        value = (value << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (value < kMin[len] || value > 0x10FFFF || (value >= 0xD800 && value <= 0xDFFF)) {
        cp = 0xFFFD;
        return 1;
    }
    cp = value;
    return len;
}

void append_utf8(std::string& out, char32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

bool is_word_char(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 'a' && cp <= 'z') || (cp >= 'A' && cp <= 'Z') || (cp >= '0' && cp <= '9');
    }
    if (cp == 0xFFFD) return false;
    if (cp <= 0xBF) return false;  // C1 controls, NBSP, Latin-1 punctuation and symbols
    if (cp == 0xD7 || cp == 0xF7) return false;
    if (cp >= 0x2000 && cp <= 0x206F) return false;  // general punctuation
    if (cp >= 0x20A0 && cp <= 0x20CF) return false;  // currency
    if (cp >= 0x2100 && cp <= 0x2BFF) return false;  // letterlike, arrows, math, boxes
    if (cp >= 0x3000 && cp <= 0x303F) return false;  // CJK punctuation
    if (cp >= 0xFE30 && cp <= 0xFE4F) return false;
    if (cp >= 0xFF00 && cp <= 0xFF0F) return false;  // fullwidth punctuation
    if (cp >= 0xFF1A && cp <= 0xFF20) return false;
    if (cp >= 0xFF3B && cp <= 0xFF40) return false;
    if (cp >= 0xFF5B && cp <= 0xFF65) return false;
    if (cp >= 0x1F000 && cp <= 0x1FAFF) return false;  // emoji and pictographs
    return true;
}

char32_t to_lower(char32_t cp) {
    if (cp >= 'A' && cp <= 'Z') return cp + 0x20;
    if (cp >= 0xC0 && cp <= 0xDE && cp != 0xD7) return cp + 0x20;
    if (cp >= 0x391 && cp <= 0x3A9 && cp != 0x3A2) return cp + 0x20;
    if (cp >= 0x410 && cp <= 0x42F) return cp + 0x20;
    if (cp >= 0x400 && cp <= 0x40F) return cp + 0x50;
    return cp;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> out;
    std::string current;
    std::size_t i = 0;
    while (i < text.size()) {
        char32_t cp = 0;
        i += decode_utf8(text, i, cp);
        if (is_word_char(cp)) {
            append_utf8(current, to_lower(cp));
        } else if (!current.empty()) {
            out.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) out.push_back(std::move(current));
    return out;
}

std::string detokenize(std::span<const std::string> tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i) out.push_back(' ');
        out += tokens[i];
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view text) {
    const auto is_space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; };
    std::vector<std::string> out;
    const auto emit = [&](std::size_t begin, std::size_t end) {
        while (begin < end && is_space(text[begin])) ++begin;
        while (end > begin && is_space(text[end - 1])) --end;
        if (end > begin) out.emplace_back(text.substr(begin, end - begin));
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if ((c == '.' || c == '!' || c == '?') && i + 1 < text.size() && is_space(text[i + 1])) {
            emit(start, i + 1);
            start = i + 1;
        }
    }
    emit(start, text.size());
    return out;
}

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(std::vector<std::string> content) {
    surfaces_.reserve(content.size() + kFirstContent);
    surfaces_.emplace_back(kPadSurface);
    surfaces_.emplace_back(kUnkSurface);
    surfaces_.emplace_back(kMaskSurface);
    for (auto& s : content) surfaces_.push_back(std::move(s));
    ids_.reserve(surfaces_.size());
    for (TokenId id = 0; id < surfaces_.size(); ++id) {
        if (surfaces_[id].empty()) throw Error(Errc::format, "empty token surface in vocabulary");
        if (!ids_.emplace(surfaces_[id], id).second) {
            throw Error(Errc::format, "duplicate token surface in vocabulary: " + surfaces_[id]);
        }
    }
}

Vocabulary Vocabulary::build(const std::vector<std::vector<std::string>>& corpus,
                             std::size_t min_count) {
    if (min_count < 1) throw Error(Errc::invalid_argument, "min_count must be >= 1");
    std::map<std::string, std::size_t> counts;
    std::size_t total = 0;
    for (const auto& doc : corpus) {
        for (const auto& tok : doc) {
            ++counts[tok];
            ++total;
        }
    }
    if (total == 0) throw Error(Errc::invalid_argument, "empty corpus");

    std::vector<std::pair<std::string, std::size_t>> kept;
    for (auto& [surface, count] : counts) {
        if (count >= min_count) kept.emplace_back(surface, count);
    }
    // counts is already lexicographic, so a stable sort on frequency suffices.
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });
    std::vector<std::string> content;
    content.reserve(kept.size());
    for (auto& [surface, count] : kept) content.push_back(surface);
    return Vocabulary(std::move(content));
}

Vocabulary Vocabulary::from_content(std::vector<std::string> content) {
    return Vocabulary(std::move(content));
}

TokenId Vocabulary::id(std::string_view surface) const {
    auto it = ids_.find(std::string(surface));
    return it == ids_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view surface) const {
    return ids_.find(std::string(surface)) != ids_.end();
}

const std::string& Vocabulary::surface(TokenId id) const {
    if (id >= surfaces_.size()) {
        throw Error(Errc::invalid_argument, "token id out of range: " + std::to_string(id));
    }
    return surfaces_[id];
}

TokenSeq Vocabulary::encode(std::span<const std::string> tokens) const {
    TokenSeq out;
    out.reserve(tokens.size());
    for (const auto& t : tokens) out.push_back(id(t));
    return out;
}

TokenSeq Vocabulary::encode_text(std::string_view text) const {
    const auto tokens = tokenize(text);
    return encode(tokens);
}

std::vector<std::string> Vocabulary::decode(std::span<const TokenId> ids) const {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (TokenId t : ids) out.push_back(surface(t));
    return out;
}

std::string Vocabulary::render(std::span<const TokenId> ids) const {
    const auto surfaces = decode(ids);
    return detokenize(surfaces);
}

TokenSeq Vocabulary::parse_rendered(std::string_view rendered) const {
    TokenSeq out;
    std::size_t i = 0;
    while (i < rendered.size()) {
        while (i < rendered.size() && (rendered[i] == ' ' || rendered[i] == '\t' || rendered[i] == '\n')) ++i;
        std::size_t j = i;
        while (j < rendered.size() && rendered[j] != ' ' && rendered[j] != '\t' && rendered[j] != '\n') ++j;
        if (j > i) out.push_back(id(rendered.substr(i, j - i)));
        i = j;
    }
    return out;
}

}  // namespace cfe
