#pragma once

#include "recal/model.hpp"

namespace recal {

/// Deterministic model y = theta_1 + theta_2^2 with independent N(0, 1)
/// priors; the single observation is its own summary.
class TwistedNormalModel final : public SimulatorModel {
public:
  TwistedNormalModel();

  std::string name() const override { return "twisted-normal"; }
  std::size_t dim_theta() const override { return 2; }
  std::size_t dim_summary() const override { return 1; }
  const PriorSpec& prior() const override { return prior_; }
  DataSet simulate(std::span<const double> theta, Rng& rng) const override;
  std::optional<Vector> summarize(const DataSet& y) const override;

private:
  PriorSpec prior_;
};

double simulate_twisted(std::span<const double> theta);

// Unnormalised density of theta_2 on the level set theta_1 + theta_2^2 = y.
double twisted_level_density(double t, double y = 1.0);

// Exact draws (theta_1, theta_2) from the h -> 0 posterior at y, by rejection
// from the N(0, 1) prior on theta_2.
Matrix sample_twisted_posterior(std::size_t n, Rng& rng, double y = 1.0);

} // namespace recal
