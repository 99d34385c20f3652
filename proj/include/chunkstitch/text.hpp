#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace chunkstitch {

/// Locale-independent decimal form. precision 0 gives the shortest string
/// that parses back to the same value; otherwise that many significant
/// digits. Negative zero prints as "0".
std::string format_real(double v, int precision = 0);

/// Strict parsers: the whole (trimmed) field must be consumed. Throw
/// ParseError quoting the text and `what`.
double parse_real(std::string_view text, std::string_view what);
std::int64_t parse_int(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);

std::string_view trim(std::string_view s);
/// Whitespace-separated fields.
std::vector<std::string_view> split_fields(std::string_view s);

}  // namespace chunkstitch
