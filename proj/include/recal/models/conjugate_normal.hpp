#pragma once

#include "recal/model.hpp"
#include "recal/recalibration.hpp"

namespace recal {

/// y_k ~ N(theta, 1), k = 1..n, theta ~ N(0, 1), summary s = mean(y).
/// The posterior is N(n s / (n + 1), 1 / (n + 1)).
class ConjugateNormalModel final : public SimulatorModel {
public:
  explicit ConjugateNormalModel(std::size_t n = 1);

  std::string name() const override { return "conjugate-normal"; }
  std::size_t dim_theta() const override { return 1; }
  std::size_t dim_summary() const override { return 1; }
  const PriorSpec& prior() const override { return prior_; }
  DataSet simulate(std::span<const double> theta, Rng& rng) const override;
  std::optional<Vector> summarize(const DataSet& y) const override;

  std::size_t n() const { return n_; }
  double posterior_mean(double s) const;
  double posterior_sd() const;

private:
  std::size_t n_;
  PriorSpec prior_;
};

// Exact posterior marginal as an auxiliary estimator (optionally with a
// scaled sd or shifted mean, for power checks of the diagnostics).
class ConjugateNormalPosterior final : public AuxiliaryEstimator {
public:
  explicit ConjugateNormalPosterior(const ConjugateNormalModel& model, double sd_scale = 1.0, double shift_sd = 0.0);
  std::string name() const override { return "conjugate-normal"; }
  MarginalSet marginals(std::span<const double> s) const override;

private:
  const ConjugateNormalModel& model_;
  double sd_scale_;
  double shift_sd_;
};

} // namespace recal
