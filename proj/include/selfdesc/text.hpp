#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace selfdesc::text {

// All positions exposed by the library count Unicode scalar values. Strings
// are stored as UTF-8; these helpers convert between the two views.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view codepoints);

// Number of scalar values in a UTF-8 string.
std::size_t length(std::string_view utf8);

// Slice [start, end) measured in scalar values.
std::string slice(std::string_view utf8, std::size_t start, std::size_t end);

// First occurrence of needle at or after `from`, in scalar values.
std::optional<std::size_t> find(std::u32string_view haystack,
                                std::u32string_view needle,
                                std::size_t from = 0);

bool is_space(char32_t c);
bool is_alnum(char32_t c);  // non-ASCII scalars count as word characters
bool is_upper_or_digit(char32_t c);

std::string_view trim(std::string_view s);

// Lower-cases ASCII letters, collapses whitespace runs to one space and
// trims the ends.
std::string normalize_identifier(std::string_view s, bool fold_case);

std::vector<std::string> split_whitespace(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

bool contains(std::string_view haystack, std::string_view needle);
bool ends_with(std::string_view s, std::string_view suffix);
bool starts_with(std::string_view s, std::string_view prefix);

}  // namespace selfdesc::text
