#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace recal {

// SplitMix64 output function.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Key of the child stream `index` of `seed`. Distinct (seed, index) pairs give
// unrelated keys, so particle i of a run can be simulated independently of
// every other particle.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return splitmix64(seed ^ splitmix64(index ^ 0x5851f42d4c957f2dULL));
}

/// xoshiro256** engine keyed by a (seed, stream) pair.
///
/// Satisfies UniformRandomBitGenerator so std distributions can draw from it.
/// Normal draws go through a per-engine std::normal_distribution, which keeps
/// the whole stream a pure function of the key.
class Rng {
public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept;

  // Uniform on the open interval (0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  double normal();
  double gamma(double shape, double rate);
  std::uint64_t poisson(double mean);

private:
  std::uint64_t s_[4];
  std::normal_distribution<double> normal_{0.0, 1.0};
};

} // namespace recal
