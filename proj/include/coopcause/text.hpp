#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace coopcause::text {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);

/// Shortest representation that reads back to the same double.
std::string format_double(double v);
/// Fixed-point with the given number of decimals.
std::string format_fixed(double v, int decimals);

std::optional<double> parse_double(std::string_view s);
std::optional<long long> parse_int(std::string_view s);

/// Quotes a CSV field when it contains a comma, quote or newline.
std::string csv_field(std::string_view s);
/// Splits one CSV line, honouring double-quoted fields.
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace coopcause::text
