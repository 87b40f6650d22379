#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace zsc {

// Identifies one deterministic random stream. The effective stream seed is a
// pure function of (base_seed, job_index), so jobs may run in any order or in
// parallel without changing results.
struct SeedSpec {
  std::uint64_t base_seed = 0;
  std::uint64_t job_index = 0;
};

namespace detail {
inline std::uint64_t mix64(std::uint64_t x) {
  // splitmix64 finalizer
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}
}  // namespace detail

inline std::uint64_t stream_seed(SeedSpec spec) {
  return detail::mix64(spec.base_seed ^ detail::mix64(spec.job_index + 0x632be59bd9b4e019ull));
}

// Counter-based splitmix64 stream. All sampling primitives are implemented
// here rather than via <random> distributions, whose output is not specified
// by the standard; this keeps byte-identical outputs across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}
  explicit Rng(SeedSpec spec) : state_(stream_seed(spec)) {}

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ull;
    std::uint64_t x = state_;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
  }

  // Unbiased draw in [0, n) by rejection.
  std::uint64_t bounded(std::uint64_t n) {
    const std::uint64_t threshold = -n % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[bounded(i)]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace zsc
