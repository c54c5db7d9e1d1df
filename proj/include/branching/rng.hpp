#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <span>

namespace branching {

/// A reproducible random stream. Replicate r of a study seeded with `seed`
/// draws from Stream(seed, r); distinct (seed, replicate) pairs give
/// independently seeded engines.
class Stream {
 public:
  using result_type = std::uint64_t;

  explicit Stream(std::uint64_t seed, std::uint64_t replicate = 0);

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  /// Uniform on (0, 1].
  double uniform_positive() { return 1.0 - uniform(); }
  double exponential(double rate);
  /// Index i with probability proportional to cumulative[i] - cumulative[i-1].
  std::size_t categorical(std::span<const double> cumulative);

 private:
  std::mt19937_64 engine_;
};

/// Deterministic derived seed for sub-studies (splitmix64 finalizer).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace branching
