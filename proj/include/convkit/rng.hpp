#pragma once

#include <cstdint>

namespace convkit {

/// SplitMix64, used only to expand a 64-bit seed into generator state.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next();

 private:
  std::uint64_t state_;
};

/// xoshiro256** seeded from four consecutive SplitMix64 outputs.
///
/// The draw sequence is part of the verification contract: uniform_pm1()
/// takes the top 53 bits of next() as u in [0, 1) and returns float(2u - 1).
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();
  double uniform01();
  float uniform_pm1();
  /// Standard normal via Box-Muller (two uniform01 draws per call).
  double normal();
  /// Uniform integer in [lo, hi].
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);

 private:
  std::uint64_t s_[4];
};

}  // namespace convkit
