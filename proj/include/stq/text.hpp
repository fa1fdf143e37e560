#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace stq {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);

/// Strict full-string parse; rejects trailing garbage, NaN and infinities.
std::optional<double> parse_double(std::string_view text);
std::optional<std::int64_t> parse_int64(std::string_view text);

/// Splits on every occurrence of `sep`; an empty input yields one empty field.
std::vector<std::string_view> split(std::string_view text, char sep);

/// Splits blob contents into lines, dropping the terminating newline and
/// any trailing '\r'. An empty blob has no lines.
std::vector<std::string_view> split_lines(std::string_view text);

std::string_view trim(std::string_view text);

} // namespace stq
