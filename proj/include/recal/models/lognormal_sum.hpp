#pragma once

#include <array>

#include "recal/model.hpp"
#include "recal/recalibration.hpp"

namespace recal {

struct FentonWilkinson {
  double alpha = 0.0;
  double beta_sq = 0.0;
};

// Moment-matched lognormal for a sum of L iid LogNormal(mu, sigma^2) terms.
// Throws DomainError when sigma^2 > 700.
FentonWilkinson fenton_wilkinson(double mu, double sigma, std::size_t L);

struct LognormalSumParams {
  std::size_t L = 10;
  std::size_t n = 10;
};

/// Laplace approximation N2(theta*, Sigma) of the Fenton-Wilkinson posterior
/// with mu ~ N(0, 1), sigma^2 ~ Gamma(1, 1).
struct AuxGaussianPosterior {
  Eigen::Vector2d mean;
  Eigen::Matrix2d cov;
  std::size_t iterations = 0;
};

/// Log posterior of (mu, sigma) under the Fenton-Wilkinson likelihood, kept
/// as sufficient statistics of log y so evaluation is O(1).
class FentonWilkinsonPosterior {
public:
  FentonWilkinsonPosterior(std::span<const double> y, std::size_t L);

  double log_density(double mu, double sigma) const;
  Eigen::Vector2d gradient(double mu, double sigma) const;
  // Lognormal fit to y, mapped back through the Fenton-Wilkinson formulas.
  Eigen::Vector2d moment_start() const;

private:
  double n_, s1_, s2_, L_;
};

// BFGS from five starts, then Newton steps if the best end point is not yet
// stationary. Throws FitFailure when no stationary point is reached or the
// Hessian at the mode is not positive definite.
AuxGaussianPosterior laplace_aux(std::span<const double> y, std::size_t L);

DataSet simulate_lognormal_sum(double mu, double sigma, const LognormalSumParams& params, Rng& rng);

/// Summaries s = (mu*, sigma*, Sigma_11, Sigma_12, Sigma_22) of the Laplace fit.
class LognormalSumModel final : public SimulatorModel {
public:
  explicit LognormalSumModel(LognormalSumParams params = {});

  std::string name() const override { return "lognormal-sum"; }
  std::size_t dim_theta() const override { return 2; }
  std::size_t dim_summary() const override { return 5; }
  const PriorSpec& prior() const override { return prior_; }
  DataSet simulate(std::span<const double> theta, Rng& rng) const override;
  std::optional<Vector> summarize(const DataSet& y) const override;
  std::vector<std::string> parameter_names() const override { return {"mu", "sigma"}; }
  std::vector<bool> positive_parameters() const override { return {false, true}; }

  const LognormalSumParams& params() const { return params_; }

private:
  LognormalSumParams params_;
  PriorSpec prior_;
};

// Marginals N(s_1, sqrt(s_3)) and N(s_2, sqrt(s_5)) read off the summaries.
class LaplaceAuxiliary final : public AuxiliaryEstimator {
public:
  std::string name() const override { return "laplace"; }
  MarginalSet marginals(std::span<const double> s) const override;
};

} // namespace recal
