#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace rhetorica::text {

// Decodes one UTF-8 code point starting at byte `pos`. Invalid bytes are
// returned as-is (one byte, treated as an opaque symbol) so malformed input
// never throws.
inline char32_t decode_utf8(std::string_view s, std::size_t pos, std::size_t& len) {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) { len = 1; return b0; }
    auto cont = [&](std::size_t i) {
        return pos + i < s.size() &&
               (static_cast<unsigned char>(s[pos + i]) & 0xC0) == 0x80;
    };
    if ((b0 & 0xE0) == 0xC0 && cont(1)) {
        len = 2;
        return ((b0 & 0x1Fu) << 6) | (static_cast<unsigned char>(s[pos + 1]) & 0x3Fu);
    }
    if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
        len = 3;
        return ((b0 & 0x0Fu) << 12) | ((static_cast<unsigned char>(s[pos + 1]) & 0x3Fu) << 6) |
               (static_cast<unsigned char>(s[pos + 2]) & 0x3Fu);
    }
    if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
        len = 4;
        return ((b0 & 0x07u) << 18) | ((static_cast<unsigned char>(s[pos + 1]) & 0x3Fu) << 12) |
               ((static_cast<unsigned char>(s[pos + 2]) & 0x3Fu) << 6) |
               (static_cast<unsigned char>(s[pos + 3]) & 0x3Fu);
    }
    len = 1;
    return b0;
}

// Letter or combining-mark code point. Covers Basic Latin, Latin-1/Extended,
// Greek, Cyrillic and combining diacritics; emojis and other symbols are
// deliberately outside the class so they separate words.
inline bool is_letter_or_mark(char32_t cp) {
    if ((cp >= U'A' && cp <= U'Z') || (cp >= U'a' && cp <= U'z')) return true;
    if (cp == 0xAA || cp == 0xB5 || cp == 0xBA) return true;
    if (cp >= 0xC0 && cp <= 0x24F) return cp != 0xD7 && cp != 0xF7;
    if (cp >= 0x0300 && cp <= 0x036F) return true;  // combining marks
    if (cp >= 0x0370 && cp <= 0x03FF) return true;  // Greek
    if (cp >= 0x0400 && cp <= 0x04FF) return true;  // Cyrillic
    return false;
}

// Word-continuation class used by the extraction pattern guards:
// letters, marks, underscore and hyphen glue words together.
inline bool is_word_glue(char32_t cp) {
    return is_letter_or_mark(cp) || cp == U'_' || cp == U'-';
}

inline bool is_ascii_space(char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
}

inline bool is_ascii_punct(char c) {
    const auto u = static_cast<unsigned char>(c);
    return (u >= '!' && u <= '/') || (u >= ':' && u <= '@') ||
           (u >= '[' && u <= '`') || (u >= '{' && u <= '~');
}

inline bool is_ascii_digit(char c) { return c >= '0' && c <= '9'; }

inline char ascii_lower(char c) {
    return (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
}

inline std::string to_lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = ascii_lower(c);
    return out;
}

inline bool iequals(std::string_view a, std::string_view b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (ascii_lower(a[i]) != ascii_lower(b[i])) return false;
    return true;
}

// Case-insensitive substring search (ASCII folding).
inline bool icontains(std::string_view hay, std::string_view needle) {
    if (needle.empty()) return true;
    if (needle.size() > hay.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= hay.size(); ++i) {
        std::size_t j = 0;
        while (j < needle.size() && ascii_lower(hay[i + j]) == ascii_lower(needle[j])) ++j;
        if (j == needle.size()) return true;
    }
    return false;
}

inline std::string_view trim_ws(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && is_ascii_space(s[b])) ++b;
    while (e > b && is_ascii_space(s[e - 1])) --e;
    return s.substr(b, e - b);
}

// Strips leading/trailing [[:punct:][:space:]] runs, the way the extraction
// pipeline cleans split segments.
inline std::string_view trim_punct_space(std::string_view s) {
    std::size_t b = 0, e = s.size();
    while (b < e && (is_ascii_space(s[b]) || is_ascii_punct(s[b]))) ++b;
    while (e > b && (is_ascii_space(s[e - 1]) || is_ascii_punct(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

// True when the code point just before byte `pos` is a word-glue character.
inline bool glue_before(std::string_view s, std::size_t pos) {
    if (pos == 0) return false;
    std::size_t start = pos;
    do { --start; } while (start > 0 && (static_cast<unsigned char>(s[start]) & 0xC0) == 0x80);
    std::size_t len = 0;
    const char32_t cp = decode_utf8(s, start, len);
    return start + len == pos ? is_word_glue(cp) : false;
}

// True when the code point starting at byte `pos` is a word-glue character.
inline bool glue_at(std::string_view s, std::size_t pos) {
    if (pos >= s.size()) return false;
    std::size_t len = 0;
    return is_word_glue(decode_utf8(s, pos, len));
}

// Splits on ASCII whitespace runs, reporting byte offsets.
struct WordSpan {
    std::size_t begin = 0;
    std::size_t end = 0;
};

inline std::vector<WordSpan> split_words(std::string_view s) {
    std::vector<WordSpan> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_ascii_space(s[i])) ++i;
        if (i >= s.size()) break;
        std::size_t b = i;
        while (i < s.size() && !is_ascii_space(s[i])) ++i;
        out.push_back({b, i});
    }
    return out;
}

inline bool all_ascii_alpha(std::string_view w) {
    if (w.empty()) return false;
    for (char c : w)
        if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z'))) return false;
    return true;
}

}  // namespace rhetorica::text
