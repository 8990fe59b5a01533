#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace kbe {

/// The single seedable generator used for every stochastic step.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The derived draws below avoid the standard distributions (their
/// algorithms are implementation-defined) so results replay across platforms:
///   uniform01()  = (next() >> 11) * 2^-53
///   below(n)     = rejection sampling on the top of the 64-bit range
///   shuffle      = Fisher-Yates from the back, using below(i + 1)
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next();
    } while (x >= limit);
    return x % n;
  }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace kbe
