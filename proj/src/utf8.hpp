#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace curate::text {

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes one scalar starting at `pos` and advances it. Invalid or truncated
// sequences decode to U+FFFD and consume a single byte.
char32_t next_scalar_multibyte(std::string_view s, std::size_t& pos) noexcept;
inline char32_t next_scalar(std::string_view s, std::size_t& pos) noexcept {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    if (b0 < 0x80) {
        ++pos;
        return b0;
    }
    if ((b0 & 0xE0) == 0xC0 && b0 >= 0xC2 && pos + 1 < s.size()) {
        const auto b1 = static_cast<unsigned char>(s[pos + 1]);
        if ((b1 & 0xC0) == 0x80) {
            pos += 2;
            return (static_cast<char32_t>(b0 & 0x1F) << 6) | (b1 & 0x3F);
        }
    }
    return next_scalar_multibyte(s, pos);
}

std::u32string decode(std::string_view s);
void append_utf8_multibyte(std::string& out, char32_t c);
inline void append_utf8(std::string& out, char32_t c) {
    if (c < 0x80) {
        out.push_back(static_cast<char>(c));
    } else {
        append_utf8_multibyte(out, c);
    }
}
std::string encode(std::u32string_view s);

std::size_t scalar_count(std::string_view s) noexcept;

bool is_space_nonascii(char32_t c) noexcept;
inline bool is_space(char32_t c) noexcept {
    if (c < 0x80) return c == ' ' || (c >= 0x09 && c <= 0x0D);
    if (c < 0x1680) return c == 0x85 || c == 0xA0;
    return is_space_nonascii(c);
}

// Letters (general category L*) over the scripts that show up in web text.
// Combining marks such as Arabic harakat are not letters.
bool is_alpha_nonascii(char32_t c) noexcept;
inline bool is_alpha(char32_t c) noexcept {
    if (c < 0x80) return (c | 0x20) >= 'a' && (c | 0x20) <= 'z';
    return is_alpha_nonascii(c);
}

// Arabic script blocks: base, supplement, extended-A and both presentation
// form blocks.
bool in_arabic_block(char32_t c) noexcept;

// Simple case folding for Latin, Greek, Cyrillic and Armenian.
char32_t to_lower(char32_t c) noexcept;

std::string ascii_lower(std::string_view s);

// Trims Unicode whitespace from both ends.
std::string_view trim(std::string_view s) noexcept;

// Trims, then collapses every internal whitespace run to one ASCII space.
std::string collapse_whitespace(std::string_view s);

// Last non-whitespace scalar, or 0 when there is none.
char32_t last_non_space(std::string_view s) noexcept;

// Stops counting once `stop_at` words have been seen.
std::size_t count_words(std::string_view s, std::size_t stop_at = static_cast<std::size_t>(-1)) noexcept;

} // namespace curate::text
