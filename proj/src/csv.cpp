#include "csv.hpp"

#include <array>
#include <cmath>
#include <cstdio>
#include <limits>

namespace wifislam::csv {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' ||
                        s.front() == '\r' || s.front() == '\n')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // folds -0 into 0
  std::array<char, 64> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

std::string format_fixed(double v, int digits) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  std::snprintf(buf.data(), buf.size(), "%.*f", digits, v);
  std::string s(buf.data());
  if (s.rfind("-0.", 0) == 0 && std::stod(s) == 0.0) s.erase(0, 1);
  return s;
}

double parse_double(std::string_view token, const std::string& where) {
  token = trim(token);
  if (token == "inf" || token == "Inf" || token == "INF") {
    return std::numeric_limits<double>::infinity();
  }
  double v = 0.0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (token.empty() || ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kParse,
                where + ": expected a number, got '" + std::string(token) + "'");
  }
  return v;
}

long long parse_int(std::string_view token, const std::string& where) {
  token = trim(token);
  long long v = 0;
  const auto* end = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(token.data(), end, v);
  if (token.empty() || ec != std::errc() || ptr != end) {
    throw Error(ErrorCode::kParse, where + ": expected an integer, got '" +
                                       std::string(token) + "'");
  }
  return v;
}

}  // namespace wifislam::csv
