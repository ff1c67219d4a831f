#include "cotc/text.hpp"

#include <algorithm>

namespace cotc {

namespace {

struct Decoded {
    char32_t cp;
    std::size_t len;
};

// Decodes one codepoint at `i`. Malformed sequences decode as a single byte.
Decoded decode_at(std::string_view s, std::size_t i) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    if (b0 < 0x80) return {b0, 1};
    std::size_t len = 0;
    char32_t cp = 0;
    if ((b0 & 0xE0) == 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    } else if ((b0 & 0xF0) == 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if ((b0 & 0xF8) == 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else {
        return {0xFFFD, 1};
    }
    if (i + len > s.size()) return {0xFFFD, 1};
    for (std::size_t k = 1; k < len; ++k) {
        const auto b = static_cast<unsigned char>(s[i + k]);
        if ((b & 0xC0) != 0x80) return {0xFFFD, 1};
        cp = (cp << 6) | (b & 0x3F);
    }
    static constexpr char32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return {0xFFFD, 1};
    return {cp, len};
}

}  // namespace

std::string_view trim(std::string_view s) {
    constexpr std::string_view ws = " \t\n\r\f\v";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::string to_lower_ascii(std::string_view s) {
    std::string out(s);
    for (char& c : out) {
        if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    return out;
}

bool contains_ci(std::string_view haystack, std::string_view needle) {
    if (needle.empty()) return false;
    return to_lower_ascii(haystack).find(to_lower_ascii(needle)) != std::string::npos;
}

bool is_valid_utf8(std::string_view s) {
    for (std::size_t i = 0; i < s.size();) {
        const auto d = decode_at(s, i);
        if (d.cp == 0xFFFD && d.len == 1 && static_cast<unsigned char>(s[i]) >= 0x80) return false;
        i += d.len;
    }
    return true;
}

bool is_cjk(char32_t cp) {
    return (cp >= 0x3000 && cp <= 0x303F)      // CJK symbols and punctuation
           || (cp >= 0x3040 && cp <= 0x30FF)   // hiragana, katakana
           || (cp >= 0x3400 && cp <= 0x4DBF)   // ext A
           || (cp >= 0x4E00 && cp <= 0x9FFF)   // unified ideographs
           || (cp >= 0xAC00 && cp <= 0xD7AF)   // hangul syllables
           || (cp >= 0xF900 && cp <= 0xFAFF)   // compatibility ideographs
           || (cp >= 0xFF00 && cp <= 0xFFEF)   // half/full-width forms
           || (cp >= 0x20000 && cp <= 0x3134F);  // ext B..G
}

bool is_token_space(char32_t cp) {
    switch (cp) {
        case ' ': case '\t': case '\n': case '\r': case '\f': case '\v':
        case 0x00A0: case 0x1680: case 0x2028: case 0x2029:
        case 0x202F: case 0x205F: case 0x3000:
            return true;
        default:
            return cp >= 0x2000 && cp <= 0x200A;
    }
}

std::vector<std::string_view> tokenize(std::string_view text) {
    std::vector<std::string_view> out;
    std::size_t run_start = std::string_view::npos;
    std::size_t i = 0;
    while (i < text.size()) {
        const auto d = decode_at(text, i);
        if (is_token_space(d.cp)) {
            if (run_start != std::string_view::npos) {
                out.push_back(text.substr(run_start, i - run_start));
                run_start = std::string_view::npos;
            }
        } else if (is_cjk(d.cp)) {
            if (run_start != std::string_view::npos) {
                out.push_back(text.substr(run_start, i - run_start));
                run_start = std::string_view::npos;
            }
            out.push_back(text.substr(i, d.len));
        } else if (run_start == std::string_view::npos) {
            run_start = i;
        }
        i += d.len;
    }
    if (run_start != std::string_view::npos) out.push_back(text.substr(run_start));
    return out;
}

std::size_t count_tokens(std::string_view text) { return tokenize(text).size(); }

}  // namespace cotc
