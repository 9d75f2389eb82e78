#pragma once

#include <span>
#include <vector>

#include "recal/abc.hpp"
#include "recal/types.hpp"

namespace recal {

/// Weighted least-squares fit of responses = alpha + beta * predictors.
struct LocalLinearFit {
  Vector intercept;  // d
  Matrix slope;      // d x q; zero for columns dropped as collinear
  Vector weights;    // n, as supplied
  Matrix residuals;  // n x d, for every row (zero-weight rows included)
  Eigen::Index rank = 0;
  bool rank_deficient = false;

  // Fitted slope applied to one predictor row.
  Vector predict_shift(std::span<const double> predictor) const;
};

// Solves the weighted normal equations through a column-pivoted Householder QR
// on sqrt(w)-scaled rows. Predictors are centred at their weighted mean
// internally so collinear columns, never the intercept, are the ones dropped.
// Throws InsufficientDataError with fewer than q + 1 positive weights.
LocalLinearFit fit_weighted_linear(const Matrix& responses, const Matrix& predictors,
                                   std::span<const double> weights);

// Beaumont-style adjustment theta* = theta - beta (s - s_center), fitted on
// the rows with positive weight. Margins flagged in `log_scale` are fitted and
// shifted on log(theta). Returns all rows; zero-weight rows are unchanged.
Matrix adjust_theta_rows(const Matrix& thetas, const Matrix& summaries, std::span<const double> weights,
                         const Vector& s_center, const std::vector<bool>& log_scale);

// Regression-adjusts the accepted particles of an ABC approximation.
ParticleSet adjust_theta(const ABCApproximation& approx, const std::vector<bool>& log_scale = {});

inline constexpr double kPClamp = 1e-9;

double logit(double p);
double expit(double x);

// Logistic-link adjustment of realised p-values:
// p* = expit(logit(p) - beta_j (s - s_obs)), margin by margin, with p clamped
// to [eps, 1 - eps] before the link and after the inverse link.
Matrix adjust_p(const Matrix& p, const Matrix& summaries, const Vector& s_obs, std::span<const double> weights);

} // namespace recal
