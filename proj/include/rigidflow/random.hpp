#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace rigidflow {

/// Stateless generator: every draw is a hash of (seed, stream, index, draw),
/// so values do not depend on evaluation order or thread count.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t bits(std::uint64_t stream, std::uint64_t index, std::uint64_t draw) const {
    std::uint64_t h = mix(seed_ ^ 0x9e3779b97f4a7c15ULL);
    h = mix(h ^ stream);
    h = mix(h ^ index);
    return mix(h ^ draw);
  }

  /// Uniform in the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t index, std::uint64_t draw) const {
    return (static_cast<double>(bits(stream, index, draw) >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(std::uint64_t stream, std::uint64_t index, std::uint64_t draw, double lo,
                 double hi) const {
    return lo + (hi - lo) * uniform(stream, index, draw);
  }

  /// Standard normal via Box-Muller on draws (2k, 2k+1).
  double normal(std::uint64_t stream, std::uint64_t index, std::uint64_t draw) const {
    const double u1 = uniform(stream, index, 2 * draw);
    const double u2 = uniform(stream, index, 2 * draw + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  // splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
};

}  // namespace rigidflow
