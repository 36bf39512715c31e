#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <utility>
#include <vector>

#include "wifislam/error.hpp"
#include "wifislam/signature.hpp"

namespace testing {

inline wifislam::ApId ap(std::uint64_t n) {
  return wifislam::ApId::from_masked(0x020000000000ULL + (n << 4));
}

inline wifislam::Signature sig(std::initializer_list<std::pair<std::uint64_t, double>> e,
                               double t = 0.0, int pause = 0) {
  std::vector<wifislam::Signature::Entry> entries;
  for (const auto& [n, s] : e) entries.emplace_back(ap(n), s);
  return wifislam::Signature(std::move(entries), t, pause);
}

template <typename F>
std::optional<wifislam::ErrorCode> thrown(F&& f) {
  try {
    f();
  } catch (const wifislam::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace testing
