#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace cotc {

std::string_view trim(std::string_view s);
std::string to_lower_ascii(std::string_view s);
bool contains_ci(std::string_view haystack, std::string_view needle);
bool is_valid_utf8(std::string_view s);

// Han, kana, Hangul syllables and CJK symbols/punctuation.
bool is_cjk(char32_t cp);

// Whitespace set used by the tokenizer: ASCII whitespace plus the Unicode
// space separators (NBSP, U+2000..U+200A, U+2028/2029, U+202F, U+205F, U+3000).
bool is_token_space(char32_t cp);

// Pipeline tokenizer. Tokens are maximal runs of non-whitespace codepoints;
// every CJK codepoint is a token on its own. Invalid UTF-8 bytes are treated
// as ordinary non-whitespace single-byte codepoints.
std::vector<std::string_view> tokenize(std::string_view text);

std::size_t count_tokens(std::string_view text);

}  // namespace cotc
