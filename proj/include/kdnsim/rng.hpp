#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace kdnsim {

/// Deterministic random stream.
///
/// Wraps std::mt19937_64, whose output sequence is fixed by the standard, and
/// derives doubles and indices from raw 64-bit words with explicit arithmetic
/// instead of the implementation-defined std:: distributions. The same seed
/// therefore produces the same numbers on every platform and in any client
/// that reimplements the two helpers below.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform index in [0, n); n must be positive.
  std::size_t index(std::size_t n) {
    auto i = static_cast<std::size_t>(uniform01() * static_cast<double>(n));
    return i < n ? i : n - 1;
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Well-known stream tags used to split one master seed into sub-streams.
enum class Stream : std::uint64_t {
  Mobility = 1,
  Agent = 2,
  Episode = 3,
  Evaluation = 4,
  Traffic = 5,
};

/// Sub-seed for (master, stream, index). Pure function of its arguments.
constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(master ^ mix64(static_cast<std::uint64_t>(stream))) +
               index);
}

}  // namespace kdnsim
