#pragma once

#include <span>
#include <string>
#include <vector>

#include "recal/rng.hpp"
#include "recal/types.hpp"

namespace recal {

enum class MarginFamily { normal, gamma, uniform };

// How the declared distribution relates to the parameter. `square` means the
// distribution is declared on theta^2 and the parameter itself is the positive
// root (a Gamma prior on sigma^2 for a model parameterised in sigma).
enum class MarginTransform { identity, square };

/// One independent prior margin.
///
/// Hyperparameters: normal(mean, sd), gamma(shape, rate), uniform(lo, hi).
struct Margin {
  MarginFamily family = MarginFamily::normal;
  double a = 0.0;
  double b = 1.0;
  MarginTransform transform = MarginTransform::identity;

  static Margin normal(double mean, double sd);
  static Margin gamma(double shape, double rate);
  static Margin uniform(double lo, double hi);
  // Same distribution, declared on the square of the parameter.
  Margin on_square() const;

  void validate() const; // throws ConfigError
  double sample(Rng& rng) const;
  // Log-density in parameter units, Jacobian included; -inf off support.
  double logpdf(double theta) const;
  double cdf(double theta) const;
  double lower() const;
  double upper() const;
  std::string describe() const;
};

class PriorSpec {
public:
  PriorSpec() = default;
  explicit PriorSpec(std::vector<Margin> margins);

  std::size_t dim() const { return margins_.size(); }
  const std::vector<Margin>& margins() const { return margins_; }
  const Margin& margin(std::size_t j) const { return margins_.at(j); }

  Vector sample(Rng& rng) const;
  double logpdf(std::span<const double> theta) const;

private:
  std::vector<Margin> margins_;
};

// n independent prior draws, one row each, all from a single stream.
Matrix sample_prior(const PriorSpec& prior, std::size_t n, Rng& rng);

} // namespace recal
