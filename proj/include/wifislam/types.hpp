#pragma once

#include <cstdint>

namespace wifislam {

using KeyframeId = std::int64_t;
using ClusterId = std::int32_t;
using WordId = std::int32_t;

inline constexpr KeyframeId kNoKeyframe = -1;

}  // namespace wifislam
