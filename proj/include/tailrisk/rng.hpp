#pragma once

#include <cstdint>

namespace tailrisk {

/// Counter-based pseudo-random stream.
///
/// Output i of stream (seed, stream) is a pure function of (seed, stream, i),
/// so independent jobs can draw from their own streams and reproduce the same
/// numbers regardless of scheduling. The mixer is SplitMix64; normals use the
/// inverse-CDF transform so sequences are identical across platforms.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  /// Standard normal via inverse CDF.
  double normal();
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace tailrisk
