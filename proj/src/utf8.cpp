#include "utf8.hpp"

#include <algorithm>
#include <array>

namespace curate::text {

namespace {

struct Range {
    char32_t lo;
    char32_t hi;
};

// Sorted, non-overlapping. Coarse outside the Latin, Greek, Cyrillic and
// Arabic blocks, where only the letter/non-letter split matters here.
constexpr std::array kLetterRanges = {
    Range{0x0041, 0x005A}, Range{0x0061, 0x007A}, Range{0x00AA, 0x00AA},
    Range{0x00B5, 0x00B5}, Range{0x00BA, 0x00BA}, Range{0x00C0, 0x00D6},
    Range{0x00D8, 0x00F6}, Range{0x00F8, 0x02C1}, Range{0x02C6, 0x02D1},
    Range{0x02E0, 0x02E4}, Range{0x0370, 0x0374}, Range{0x0376, 0x0377},
    Range{0x037A, 0x037D}, Range{0x037F, 0x037F}, Range{0x0386, 0x0386},
    Range{0x0388, 0x03F5}, Range{0x03F7, 0x0481}, Range{0x048A, 0x052F},
    Range{0x0531, 0x0556}, Range{0x0561, 0x0587}, Range{0x05D0, 0x05EA},
    Range{0x05EF, 0x05F2},
    // Arabic
    Range{0x0620, 0x064A}, Range{0x066E, 0x066F}, Range{0x0671, 0x06D3},
    Range{0x06D5, 0x06D5}, Range{0x06E5, 0x06E6}, Range{0x06EE, 0x06EF},
    Range{0x06FA, 0x06FC}, Range{0x06FF, 0x06FF},
    // Syriac, Arabic Supplement, Thaana, NKo, Samaritan, Mandaic
    Range{0x0710, 0x072F}, Range{0x074D, 0x07A5}, Range{0x07B1, 0x07B1},
    Range{0x07CA, 0x07EA}, Range{0x0800, 0x0815}, Range{0x0840, 0x0858},
    Range{0x0860, 0x086A},
    // Arabic Extended-B/A
    Range{0x0870, 0x0887}, Range{0x0889, 0x088E}, Range{0x08A0, 0x08C9},
    // Indic blocks, letters only approximately
    Range{0x0904, 0x0939}, Range{0x093D, 0x093D}, Range{0x0950, 0x0950},
    Range{0x0958, 0x0961}, Range{0x0971, 0x0980}, Range{0x0985, 0x09B9},
    Range{0x0A05, 0x0A39}, Range{0x0A85, 0x0AB9}, Range{0x0B05, 0x0B39},
    Range{0x0B85, 0x0BB9}, Range{0x0C05, 0x0C39}, Range{0x0C85, 0x0CB9},
    Range{0x0D05, 0x0D3A}, Range{0x0D85, 0x0DC6},
    // Thai, Lao, Tibetan, Myanmar, Georgian, Hangul Jamo, Ethiopic
    Range{0x0E01, 0x0E30}, Range{0x0E40, 0x0E46}, Range{0x0E81, 0x0EB0},
    Range{0x0F40, 0x0F6C}, Range{0x1000, 0x102A}, Range{0x10A0, 0x10FF},
    Range{0x1100, 0x11FF}, Range{0x1200, 0x135A},
    Range{0x1E00, 0x1FBC}, Range{0x2C00, 0x2CE4},
    // Kana, CJK, Hangul syllables
    Range{0x3041, 0x3096}, Range{0x30A1, 0x30FA}, Range{0x3400, 0x4DBF},
    Range{0x4E00, 0x9FFF}, Range{0xAC00, 0xD7A3}, Range{0xF900, 0xFAFF},
    // Latin ligatures, Hebrew presentation forms
    Range{0xFB00, 0xFB06}, Range{0xFB1D, 0xFB4F},
    // Arabic Presentation Forms-A
    Range{0xFB50, 0xFBB1}, Range{0xFBD3, 0xFD3D}, Range{0xFD50, 0xFD8F},
    Range{0xFD92, 0xFDC7}, Range{0xFDF0, 0xFDFB},
    // Arabic Presentation Forms-B
    Range{0xFE70, 0xFE74}, Range{0xFE76, 0xFEFC},
    // Fullwidth Latin
    Range{0xFF21, 0xFF3A}, Range{0xFF41, 0xFF5A},
    Range{0x20000, 0x2FFFF},
};

bool in_ranges(char32_t c) noexcept {
    auto it = std::upper_bound(kLetterRanges.begin(), kLetterRanges.end(), c,
                               [](char32_t v, const Range& r) { return v < r.lo; });
    if (it == kLetterRanges.begin()) return false;
    --it;
    return c <= it->hi;
}

} // namespace

char32_t next_scalar_multibyte(std::string_view s, std::size_t& pos) noexcept {
    const auto b0 = static_cast<unsigned char>(s[pos]);
    std::size_t len = 0;
    char32_t cp = 0;
    char32_t min = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
        min = 0x80;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
        min = 0x800;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
        min = 0x10000;
    } else {
        ++pos;
        return kReplacement;
    }
    if (pos + len > s.size()) {
        ++pos;
        return kReplacement;
    }
    for (std::size_t i = 1; i < len; ++i) {
        const auto b = static_cast<unsigned char>(s[pos + i]);
        if ((b & 0xC0) != 0x80) {
            ++pos;
            return kReplacement;
        }
        cp = (cp << 6) | (b & 0x3F);
    }
    if (cp < min || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
        ++pos;
        return kReplacement;
    }
    pos += len;
    return cp;
}

std::u32string decode(std::string_view s) {
    std::u32string out;
    out.reserve(s.size());
    for (std::size_t pos = 0; pos < s.size();) out.push_back(next_scalar(s, pos));
    return out;
}

void append_utf8_multibyte(std::string& out, char32_t c) {
    if (c < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (c >> 6)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else if (c < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (c >> 12)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (c >> 18)));
        out.push_back(static_cast<char>(0x80 | ((c >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((c >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (c & 0x3F)));
    }
}

std::string encode(std::u32string_view s) {
    std::string out;
    out.reserve(s.size() * 2);
    for (char32_t c : s) append_utf8(out, c);
    return out;
}

std::size_t scalar_count(std::string_view s) noexcept {
    std::size_t n = 0;
    for (std::size_t pos = 0; pos < s.size(); ++n) next_scalar(s, pos);
    return n;
}

bool is_space_nonascii(char32_t c) noexcept {
    switch (c) {
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
        return true;
    default:
        return c >= 0x2000 && c <= 0x200A;
    }
}

bool is_alpha_nonascii(char32_t c) noexcept { return in_ranges(c); }

bool in_arabic_block(char32_t c) noexcept {
    return (c >= 0x0600 && c <= 0x06FF) || (c >= 0x0750 && c <= 0x077F) ||
           (c >= 0x08A0 && c <= 0x08FF) || (c >= 0xFB50 && c <= 0xFDFF) ||
           (c >= 0xFE70 && c <= 0xFEFF);
}

char32_t to_lower(char32_t c) noexcept {
    if (c < 0x80) return (c >= 'A' && c <= 'Z') ? c + 32 : c;
    if ((c >= 0xC0 && c <= 0xDE && c != 0xD7)) return c + 32;
    if (c >= 0x100 && c <= 0x17F && c != 0x130 && c != 0x138 && c != 0x149 && c != 0x178) {
        // Latin Extended-A alternates upper/lower, with a phase shift in 0x139..0x148
        // and 0x179..0x17E.
        if ((c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E)) return (c & 1) ? c + 1 : c;
        return (c & 1) ? c : c + 1;
    }
    if (c == 0x178) return 0xFF;
    if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 32;
    if (c >= 0x410 && c <= 0x42F) return c + 32;
    if (c >= 0x400 && c <= 0x40F) return c + 80;
    if (c >= 0x531 && c <= 0x556) return c + 48;
    if (c >= 0xFF21 && c <= 0xFF3A) return c + 32;
    return c;
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& ch : out) {
        if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch + 32);
    }
    return out;
}

std::string_view trim(std::string_view s) noexcept {
    std::size_t begin = 0;
    while (begin < s.size()) {
        std::size_t p = begin;
        if (!is_space(next_scalar(s, p))) break;
        begin = p;
    }
    std::size_t end = begin;
    for (std::size_t pos = begin; pos < s.size();) {
        if (!is_space(next_scalar(s, pos))) end = pos;
    }
    return s.substr(begin, end - begin);
}

std::string collapse_whitespace(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (std::size_t pos = 0; pos < s.size();) {
        const std::size_t start = pos;
        const char32_t c = next_scalar(s, pos);
        if (is_space(c)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.append(s.substr(start, pos - start));
    }
    return out;
}

char32_t last_non_space(std::string_view s) noexcept {
    char32_t last = 0;
    for (std::size_t pos = 0; pos < s.size();) {
        const char32_t c = next_scalar(s, pos);
        if (!is_space(c)) last = c;
    }
    return last;
}

std::size_t count_words(std::string_view s, std::size_t stop_at) noexcept {
    std::size_t words = 0;
    bool in_word = false;
    for (std::size_t pos = 0; pos < s.size() && words < stop_at;) {
        const bool space = is_space(next_scalar(s, pos));
        if (!space && !in_word) ++words;
        in_word = !space;
    }
    return words;
}

} // namespace curate::text
