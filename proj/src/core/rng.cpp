#include "branching/rng.hpp"

#include <algorithm>
#include <cmath>

namespace branching {

Stream::Stream(std::uint64_t seed, std::uint64_t replicate) {
  // seed_seq's mixing is fixed by the standard, so streams are portable.
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(replicate),
                    static_cast<std::uint32_t>(replicate >> 32),
                    0x6a09e667u};
  engine_.seed(seq);
}

double Stream::exponential(double rate) {
  return -std::log(uniform_positive()) / rate;
}

std::size_t Stream::categorical(std::span<const double> cumulative) {
  const double u = uniform() * cumulative.back();
  auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
  if (it == cumulative.end()) --it;
  return static_cast<std::size_t>(it - cumulative.begin());
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ull * (salt + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

}  // namespace branching
