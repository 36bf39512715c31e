#pragma once

// Small text helpers shared by the CSV readers and writers.

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "wifislam/error.hpp"

namespace wifislam::csv {

std::vector<std::string_view> split(std::string_view line, char sep = ',');

std::string_view trim(std::string_view s);

/// Shortest representation that round-trips exactly.
std::string format_double(double v);

/// Fixed-point with `digits` decimals, for human-facing reports.
std::string format_fixed(double v, int digits);

// Strict parsers: the whole token must be consumed. `where` is folded into the
// error message, e.g. "line 12".
double parse_double(std::string_view token, const std::string& where);
long long parse_int(std::string_view token, const std::string& where);

}  // namespace wifislam::csv
