#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ocrfix {

// Raised for input that is empty after whitespace normalization.
class EmptyInputError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

// UTF-8 <-> UTF-32 at scalar-value granularity. Malformed bytes decode to
// U+FFFD; no normalization is applied (a long s stays a long s).
std::u32string utf8_decode(std::string_view s);
std::string utf8_encode(std::u32string_view s);
std::string utf8_encode(char32_t c);

// Number of code points in a UTF-8 string.
std::size_t utf8_length(std::string_view s);

bool is_space(char32_t c);

// Collapses whitespace runs to one ' ' and trims both ends.
std::string normalize_whitespace(std::string_view s);
std::u32string normalize_whitespace(std::u32string_view s);

std::vector<std::string> split_tokens(std::string_view s);
std::vector<std::u32string> split_tokens(std::u32string_view s);

std::string join_tokens(const std::vector<std::string>& tokens,
                        std::size_t begin, std::size_t end);
inline std::string join_tokens(const std::vector<std::string>& tokens) {
    return join_tokens(tokens, 0, tokens.size());
}

// Splits on '/' when the text contains one, otherwise returns the text as a
// single segment. Empty segments are dropped.
std::vector<std::string> split_sentences(std::string_view line);

}  // namespace ocrfix
