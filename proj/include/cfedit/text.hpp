#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace cfe {

using TokenId = std::uint32_t;
using TokenSeq = std::vector<TokenId>;

/// Lowercases, splits on word boundaries and drops punctuation. Word
/// characters are ASCII letters/digits and any non-ASCII code point outside
/// the common punctuation and symbol blocks. Invalid UTF-8 bytes act as
/// separators.
std::vector<std::string> tokenize(std::string_view text);

/// Joins surfaces with single spaces; tokenize(detokenize(ts)) == ts for any
/// ts produced by tokenize().
std::string detokenize(std::span<const std::string> tokens);

/// Splits raw text after '.', '!' or '?' when followed by whitespace. Pieces
/// are trimmed; empty pieces are dropped.
std::vector<std::string> split_sentences(std::string_view text);

class Vocabulary {
public:
    static constexpr TokenId kPad = 0;
    static constexpr TokenId kUnk = 1;
    static constexpr TokenId kMask = 2;
    static constexpr TokenId kFirstContent = 3;

    static constexpr std::string_view kPadSurface = "[PAD]";
    static constexpr std::string_view kUnkSurface = "[UNK]";
    static constexpr std::string_view kMaskSurface = "[MASK]";

    Vocabulary();

    /// Keeps every surface with total frequency >= min_count, ordered by
    /// frequency descending then lexicographically. Throws on an empty corpus.
    static Vocabulary build(const std::vector<std::vector<std::string>>& corpus,
                            std::size_t min_count);

    /// Rebuilds a vocabulary from its content surfaces in id order.
    static Vocabulary from_content(std::vector<std::string> content);

    /// Id of `surface`, or kUnk when absent. Special surfaces resolve to their ids.
    TokenId id(std::string_view surface) const;
    bool contains(std::string_view surface) const;
    const std::string& surface(TokenId id) const;

    std::size_t size() const { return surfaces_.size(); }
    std::size_t content_size() const { return surfaces_.size() - kFirstContent; }
    static bool is_special(TokenId id) { return id < kFirstContent; }

    TokenSeq encode(std::span<const std::string> tokens) const;
    TokenSeq encode_text(std::string_view text) const;
    std::vector<std::string> decode(std::span<const TokenId> ids) const;
    /// Space-joined surfaces, specials rendered as their bracketed surfaces.
    std::string render(std::span<const TokenId> ids) const;
    /// Inverse of render(): whitespace split, exact surface lookup.
    TokenSeq parse_rendered(std::string_view rendered) const;

    std::span<const std::string> content() const {
        return std::span<const std::string>(surfaces_).subspan(kFirstContent);
    }

    bool operator==(const Vocabulary& other) const { return surfaces_ == other.surfaces_; }

private:
    explicit Vocabulary(std::vector<std::string> content);

    std::vector<std::string> surfaces_;
    std::unordered_map<std::string, TokenId> ids_;
};

}  // namespace cfe
