#pragma once

#include <cstdint>

namespace aerovision {

/// Counter-based SplitMix64 generator.
///
/// Draw i (0-based) of a stream with seed s is mix64(s + (i + 1) * 0x9E3779B97F4A7C15),
/// where mix64 is the SplitMix64 finalizer. Output depends only on (seed, counter),
/// so sequences are identical on every platform and any draw can be replayed.
class CounterRng {
 public:
  static constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

  explicit CounterRng(std::uint64_t seed, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  static std::uint64_t mix64(std::uint64_t z);

  /// Independent stream for a sub-task (e.g. one sample of a dataset).
  CounterRng fork(std::uint64_t stream) const;

  std::uint64_t next_u64();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  /// Uniform integer in [lo, hi] by rejection sampling (unbiased).
  std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi);
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Standard normal via Box-Muller; consumes two draws per call.
  double normal();

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace aerovision
