#include "recal/rng.hpp"

#include <bit>

namespace recal {

Rng::Rng(std::uint64_t seed, std::uint64_t stream) noexcept {
  std::uint64_t key = derive_seed(seed, stream);
  for (auto& word : s_) {
    key += 0x9e3779b97f4a7c15ULL;
    word = splitmix64(key);
  }
}

Rng::result_type Rng::operator()() noexcept {
  const std::uint64_t result = std::rotl(s_[1] * 5, 7) * 9;
  const std::uint64_t t = s_[1] << 17;
  s_[2] ^= s_[0];
  s_[3] ^= s_[1];
  s_[1] ^= s_[2];
  s_[0] ^= s_[3];
  s_[2] ^= t;
  s_[3] = std::rotl(s_[3], 45);
  return result;
}

double Rng::uniform() noexcept {
  // 53 random mantissa bits, shifted by half a step off zero.
  return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() { return normal_(*this); }

double Rng::gamma(double shape, double rate) {
  std::gamma_distribution<double> dist(shape, 1.0 / rate);
  return dist(*this);
}

std::uint64_t Rng::poisson(double mean) {
  if (mean <= 0.0) return 0;
  std::poisson_distribution<std::uint64_t> dist(mean);
  return dist(*this);
}

} // namespace recal
