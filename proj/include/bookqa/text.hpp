#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <iterator>
#include <string>
#include <string_view>
#include <vector>

#include "detail/unicode_tables.hpp"

namespace bookqa {

using Token = std::string;

/// Byte range [begin, end) into the UTF-8 text a token was cut from.
struct ByteSpan {
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const ByteSpan&, const ByteSpan&) = default;
};

/// Ordered tokens, optionally carrying source offsets (one per token when present).
struct TokenSeq {
    std::vector<Token> tokens;
    std::vector<ByteSpan> offsets;

    TokenSeq() = default;
    explicit TokenSeq(std::vector<Token> toks) : tokens(std::move(toks)) {}

    std::size_t size() const noexcept { return tokens.size(); }
    bool empty() const noexcept { return tokens.empty(); }
    bool has_offsets() const noexcept { return offsets.size() == tokens.size(); }
    const Token& operator[](std::size_t i) const { return tokens[i]; }
    auto begin() const noexcept { return tokens.begin(); }
    auto end() const noexcept { return tokens.end(); }

    friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

namespace detail {

template <std::size_t N>
constexpr bool in_ranges(const CodepointRange (&table)[N], char32_t cp) {
    auto it = std::upper_bound(std::begin(table), std::end(table), cp,
                               [](char32_t c, const CodepointRange& r) { return c < r.first; });
    if (it == std::begin(table)) {
        return false;
    }
    --it;
    return cp <= it->last;
}

/// Decodes one code point starting at `pos` and advances `pos`. Malformed
/// sequences decode to U+FFFD and consume a single byte.
inline char32_t decode_utf8(std::string_view s, std::size_t& pos) {
    const auto byte = [&](std::size_t i) { return static_cast<unsigned char>(s[i]); };
    const unsigned char lead = byte(pos);
    if (lead < 0x80) {
        ++pos;
        return lead;
    }
    int extra = 0;
    char32_t cp = 0;
    if ((lead & 0xE0) == 0xC0) {
        extra = 1;
        cp = lead & 0x1F;
    } else if ((lead & 0xF0) == 0xE0) {
        extra = 2;
        cp = lead & 0x0F;
    } else if ((lead & 0xF8) == 0xF0) {
        extra = 3;
        cp = lead & 0x07;
    } else {
        ++pos;
        return 0xFFFD;
    }
    if (pos + extra >= s.size()) {
        ++pos;
        return 0xFFFD;
    }
    for (int i = 1; i <= extra; ++i) {
        const unsigned char c = byte(pos + i);
        if ((c & 0xC0) != 0x80) {
            ++pos;
            return 0xFFFD;
        }
        cp = (cp << 6) | (c & 0x3F);
    }
    pos += extra + 1;
    return cp;
}

inline void encode_utf8(char32_t cp, std::string& out) {
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

/// Start byte of the last code point in a non-empty string.
inline std::size_t last_codepoint_start(std::string_view s) {
    std::size_t i = s.size() - 1;
    while (i > 0 && (static_cast<unsigned char>(s[i]) & 0xC0) == 0x80 && s.size() - i < 4) {
        --i;
    }
    return i;
}

// English clitics split off the end of a word; matched case-insensitively.
inline constexpr std::array<std::string_view, 14> kClitics = {
    "n't", "'s", "'re", "'ve", "'ll", "'d", "'m",
    "n’t", "’s", "’re", "’ve", "’ll", "’d", "’m",
};

}  // namespace detail

inline bool is_punctuation(char32_t cp) { return detail::in_ranges(detail::kPunctuationRanges, cp); }

inline bool is_whitespace(char32_t cp) { return detail::in_ranges(detail::kWhitespaceRanges, cp); }

inline char32_t to_lower(char32_t cp) {
    if (cp < 0x80) {
        return (cp >= 'A' && cp <= 'Z') ? cp + 32 : cp;
    }
    const auto& map = detail::kLowercaseMap;
    auto it = std::lower_bound(std::begin(map), std::end(map), cp,
                               [](const detail::CaseMapping& m, char32_t c) { return m.from < c; });
    return (it != std::end(map) && it->from == cp) ? it->to : cp;
}

inline bool is_valid_utf8(std::string_view s) {
    std::size_t i = 0;
    while (i < s.size()) {
        const auto lead = static_cast<unsigned char>(s[i]);
        int extra = 0;
        char32_t min = 0;
        if (lead < 0x80) {
            ++i;
            continue;
        } else if ((lead & 0xE0) == 0xC0) {
            extra = 1;
            min = 0x80;
        } else if ((lead & 0xF0) == 0xE0) {
            extra = 2;
            min = 0x800;
        } else if ((lead & 0xF8) == 0xF0) {
            extra = 3;
            min = 0x10000;
        } else {
            return false;
        }
        if (i + extra >= s.size()) {
            return false;
        }
        char32_t cp = lead & (0x3F >> extra);
        for (int k = 1; k <= extra; ++k) {
            const auto c = static_cast<unsigned char>(s[i + k]);
            if ((c & 0xC0) != 0x80) {
                return false;
            }
            cp = (cp << 6) | (c & 0x3F);
        }
        if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
            return false;
        }
        i += extra + 1;
    }
    return true;
}

inline std::string lowercase(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    std::size_t pos = 0;
    while (pos < s.size()) {
        detail::encode_utf8(to_lower(detail::decode_utf8(s, pos)), out);
    }
    return out;
}

/// True when every code point of `s` is punctuation (false for the empty string).
inline bool is_punctuation_only(std::string_view s) {
    if (s.empty()) {
        return false;
    }
    std::size_t pos = 0;
    while (pos < s.size()) {
        if (!is_punctuation(detail::decode_utf8(s, pos))) {
            return false;
        }
    }
    return true;
}

namespace detail {

inline std::size_t clitic_suffix_length(std::string_view word) {
    for (auto clitic : kClitics) {
        if (word.size() >= clitic.size() &&
            lowercase(word.substr(word.size() - clitic.size())) == clitic) {
            return clitic.size();
        }
    }
    return 0;
}

inline bool is_clitic(std::string_view word) {
    const auto n = clitic_suffix_length(word);
    return n != 0 && n == word.size();
}

// Splits one whitespace-free chunk. Equivalent to the recursive rule:
//   clitic            -> [chunk]
//   punct + rest      -> [punct] ++ split(rest)
//   init + punct      -> split(init) ++ [punct]
//   stem + clitic     -> split(stem) ++ [clitic]
//   otherwise         -> [chunk]
inline void split_chunk(std::string_view text, std::size_t b, std::size_t e, TokenSeq& out) {
    std::vector<ByteSpan> tail;
    const auto emit = [&](std::size_t from, std::size_t to) {
        out.tokens.emplace_back(text.substr(from, to - from));
        out.offsets.push_back({from, to});
    };
    while (b < e) {
        const std::string_view view = text.substr(b, e - b);
        if (is_clitic(view)) {
            emit(b, e);
            b = e;
            break;
        }
        std::size_t next = b;
        if (is_punctuation(decode_utf8(text, next))) {
            emit(b, next);
            b = next;
            continue;
        }
        const std::size_t last = b + last_codepoint_start(view);
        std::size_t probe = last;
        if (is_punctuation(decode_utf8(text, probe))) {
            tail.push_back({last, e});
            e = last;
            continue;
        }
        if (const auto n = clitic_suffix_length(view); n != 0 && n < view.size()) {
            tail.push_back({e - n, e});
            e -= n;
            continue;
        }
        emit(b, e);
        b = e;
    }
    for (auto it = tail.rbegin(); it != tail.rend(); ++it) {
        emit(it->begin, it->end);
    }
}

}  // namespace detail

/// Rule-based tokenizer: whitespace split, then leading/trailing punctuation
/// and English clitics ("n't", "'s", ...) become separate tokens.
/// Offsets are byte offsets into `text`.
inline TokenSeq tokenize(std::string_view text) {
    TokenSeq out;
    std::size_t pos = 0;
    std::size_t chunk_begin = std::string_view::npos;
    while (pos < text.size()) {
        const std::size_t at = pos;
        const char32_t cp = detail::decode_utf8(text, pos);
        if (is_whitespace(cp)) {
            if (chunk_begin != std::string_view::npos) {
                detail::split_chunk(text, chunk_begin, at, out);
                chunk_begin = std::string_view::npos;
            }
        } else if (chunk_begin == std::string_view::npos) {
            chunk_begin = at;
        }
    }
    if (chunk_begin != std::string_view::npos) {
        detail::split_chunk(text, chunk_begin, text.size(), out);
    }
    return out;
}

/// Space-joined surface form; tokenize(join(t)) reproduces t's tokens.
inline std::string join(const TokenSeq& seq) {
    std::string out;
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (i) {
            out.push_back(' ');
        }
        out += seq[i];
    }
    return out;
}

/// Lowercases and drops punctuation-only tokens; offsets are carried along.
inline TokenSeq normalize_tokens(const TokenSeq& seq) {
    TokenSeq out;
    const bool offsets = seq.offsets.size() == seq.tokens.size();
    for (std::size_t i = 0; i < seq.size(); ++i) {
        if (is_punctuation_only(seq[i])) {
            continue;
        }
        out.tokens.push_back(lowercase(seq[i]));
        if (offsets) {
            out.offsets.push_back(seq.offsets[i]);
        }
    }
    return out;
}

/// Evaluation normalization for Bleu/Meteor/Rouge-L and indexing.
inline TokenSeq normalize_eval(std::string_view text) { return normalize_tokens(tokenize(text)); }

/// SQuAD v1.1 answer normalization: lowercase, delete punctuation characters,
/// drop the articles a/an/the, split on whitespace. Used only by EM and F1.
inline TokenSeq normalize_squad(std::string_view text) {
    TokenSeq out;
    std::string current;
    const auto flush = [&] {
        if (!current.empty() && current != "a" && current != "an" && current != "the") {
            out.tokens.push_back(std::move(current));
        }
        current.clear();
    };
    std::size_t pos = 0;
    while (pos < text.size()) {
        const char32_t cp = detail::decode_utf8(text, pos);
        if (is_whitespace(cp)) {
            flush();
        } else if (!is_punctuation(cp)) {
            detail::encode_utf8(to_lower(cp), current);
        }
    }
    flush();
    return out;
}

}  // namespace bookqa
