#pragma once

// Counter-based Gaussian noise. Every draw is a pure function of
// (seed, stream, counter), so streams never shift each other and results do
// not depend on the standard library's distribution implementations.

#include <cstdint>

namespace mef {

enum class NoiseStream : std::uint64_t {
  kGyro = 0x67797230ULL,
  kVector = 0x76656330ULL,
};

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  /// 64 random bits for (stream, counter).
  std::uint64_t bits(NoiseStream stream, std::uint64_t counter) const;
  /// Uniform in the open interval (0, 1).
  double uniform(NoiseStream stream, std::uint64_t counter) const;
  /// Standard normal via Box-Muller on counters 2k and 2k+1.
  double normal(NoiseStream stream, std::uint64_t index) const;

 private:
  std::uint64_t seed_;
};

}  // namespace mef
