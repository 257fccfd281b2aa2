#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>

namespace loopscope {

/// Simulated time. Integer nanoseconds keep timeline arithmetic exact.
using SimDuration = std::chrono::duration<std::int64_t, std::nano>;

inline SimDuration from_seconds(double s) {
  return SimDuration{static_cast<std::int64_t>(std::llround(s * 1e9))};
}

inline double to_seconds(SimDuration d) { return static_cast<double>(d.count()) / 1e9; }

}  // namespace loopscope
