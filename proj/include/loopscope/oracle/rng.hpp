#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace loopscope {

/// splitmix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Counter-based generator: every draw is a pure function of its key, so
/// results do not depend on evaluation order.
class CounterRng {
 public:
  explicit constexpr CounterRng(std::uint64_t seed) : seed_(seed) {}

  constexpr std::uint64_t bits(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return splitmix64(splitmix64(splitmix64(seed_ ^ splitmix64(a)) ^ b) ^ c);
  }
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return static_cast<double>(bits(a, b, c) >> 11) * 0x1.0p-53;
  }
  /// Standard normal via Box-Muller on two keyed uniforms.
  double normal(std::uint64_t a, std::uint64_t b = 0) const {
    const double u1 = 1.0 - uniform(a, b, 1);  // (0, 1]
    const double u2 = uniform(a, b, 2);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n, std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return static_cast<std::uint64_t>(uniform(a, b, c) * static_cast<double>(n)) % n;
  }

  constexpr std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
};

/// Stable 64-bit key for a stream name.
constexpr std::uint64_t stream_key(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : name) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed of trial `i` under `master`.
constexpr std::uint64_t trial_seed(std::uint64_t master, std::uint64_t i) {
  return splitmix64(splitmix64(master) ^ splitmix64(i + 0x632be59bd9b4e019ULL));
}

}  // namespace loopscope
