#pragma once

#include <span>
#include <vector>

#include "recal/recalibration.hpp"
#include "recal/types.hpp"

namespace recal {

/// Penalised cubic regression spline minimising
///   sum_i w_i (y_i - f(x_i))^2 + lambda * int f''(x)^2 dx
/// on a B-spline basis with knots at quantiles of x. lambda is chosen by
/// generalised cross-validation over a 30-point grid of the smoothing
/// parameter spar, lambda = r * 256^(3 spar - 1) with r = tr(B'WB) / tr(Omega).
/// Beyond the data range the fit is extended linearly.
class SmoothingSpline {
public:
  SmoothingSpline(std::span<const double> x, std::span<const double> y, std::span<const double> w = {});

  double operator()(double x) const;
  double lambda() const { return lambda_; }
  double edf() const { return edf_; }
  double gcv() const { return gcv_; }
  // True when GCV was flat and lambda was set for ~20 effective df instead.
  bool gcv_fallback() const { return fallback_; }
  const std::vector<double>& residuals() const { return residuals_; }
  // Weighted standard deviation of the residuals.
  double residual_sd() const { return residual_sd_; }

private:
  double eval_unit(double u) const;

  double x_lo_ = 0.0, x_range_ = 1.0;
  Eigen::Array<double, 1, Eigen::Dynamic> knots_;
  Vector coef_;
  double lambda_ = 0.0, edf_ = 0.0, gcv_ = 0.0;
  bool fallback_ = false;
  std::vector<double> residuals_;
  double residual_sd_ = 0.0;
  double f_lo_ = 0.0, d_lo_ = 0.0, f_hi_ = 0.0, d_hi_ = 0.0;
};

/// F~_{j,s}(theta_j) = Phi(theta_j; theta+_j(s_{pair(j)}), sd_j) with theta+_j
/// a smoothing spline of theta_j on one summary coordinate.
class SplineGaussianAuxiliary final : public AuxiliaryEstimator {
public:
  // pairing[j] is the summary column that margin j is smoothed on. Rows with
  // zero weight are ignored; at least 100 must remain.
  SplineGaussianAuxiliary(const Matrix& thetas, const Matrix& summaries, std::span<const double> weights,
                          std::vector<std::size_t> pairing);

  std::string name() const override { return "spline-gaussian"; }
  MarginalSet marginals(std::span<const double> s) const override;

  const std::vector<SmoothingSpline>& splines() const { return splines_; }
  bool any_fallback() const;

private:
  std::vector<SmoothingSpline> splines_;
  std::vector<std::size_t> pairing_;
};

} // namespace recal
