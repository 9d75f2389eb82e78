#include "recal/regression.hpp"

#include <algorithm>
#include <cmath>

#include "recal/error.hpp"

namespace recal {

Vector LocalLinearFit::predict_shift(std::span<const double> predictor) const {
  const Eigen::Map<const Vector> x(predictor.data(), static_cast<Eigen::Index>(predictor.size()));
  return slope * x;
}

LocalLinearFit fit_weighted_linear(const Matrix& responses, const Matrix& predictors,
                                   std::span<const double> weights) {
  const Eigen::Index n = responses.rows();
  const Eigen::Index d = responses.cols();
  const Eigen::Index q = predictors.cols();
  if (predictors.rows() != n || static_cast<Eigen::Index>(weights.size()) != n)
    throw ContractViolation("fit_weighted_linear: row counts differ");

  std::vector<Eigen::Index> rows;
  double wsum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = weights[static_cast<std::size_t>(i)];
    if (w < 0.0 || std::isnan(w)) throw ContractViolation("fit_weighted_linear: invalid weight");
    if (w > 0.0) {
      rows.push_back(i);
      wsum += w;
    }
  }
  const auto p = static_cast<Eigen::Index>(rows.size());
  if (p < q + 1)
    throw InsufficientDataError("fit_weighted_linear: " + std::to_string(p) + " positive weights for " +
                                std::to_string(q + 1) + " coefficients");

  Eigen::RowVectorXd xbar = Eigen::RowVectorXd::Zero(q);
  for (Eigen::Index i : rows) xbar += weights[static_cast<std::size_t>(i)] * predictors.row(i);
  xbar /= wsum;

  Eigen::MatrixXd design(p, q + 1);
  Eigen::MatrixXd rhs(p, d);
  for (Eigen::Index r = 0; r < p; ++r) {
    const Eigen::Index i = rows[static_cast<std::size_t>(r)];
    const double sw = std::sqrt(weights[static_cast<std::size_t>(i)]);
    design(r, 0) = sw;
    design.row(r).tail(q) = sw * (predictors.row(i) - xbar);
    rhs.row(r) = sw * responses.row(i);
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  const Eigen::MatrixXd coef = qr.solve(rhs); // (q+1) x d; dropped columns solve to zero

  LocalLinearFit fit;
  fit.rank = qr.rank();
  fit.rank_deficient = fit.rank < q + 1;
  fit.slope = coef.bottomRows(q).transpose();
  fit.intercept = coef.row(0).transpose() - fit.slope * xbar.transpose();
  fit.weights = Eigen::Map<const Vector>(weights.data(), n);
  fit.residuals = responses - predictors * fit.slope.transpose();
  fit.residuals.rowwise() -= fit.intercept.transpose();
  return fit;
}

Matrix adjust_theta_rows(const Matrix& thetas, const Matrix& summaries, std::span<const double> weights,
                         const Vector& s_center, const std::vector<bool>& log_scale) {
  const Eigen::Index d = thetas.cols();
  if (!log_scale.empty() && static_cast<Eigen::Index>(log_scale.size()) != d)
    throw ContractViolation("adjust_theta: log_scale length differs from dimension");
  auto is_log = [&](Eigen::Index j) { return !log_scale.empty() && log_scale[static_cast<std::size_t>(j)]; };

  Matrix responses = thetas;
  for (Eigen::Index j = 0; j < d; ++j) {
    if (!is_log(j)) continue;
    for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
      const double v = thetas(i, j);
      if (weights[static_cast<std::size_t>(i)] > 0.0 && !(v > 0.0))
        throw ContractViolation("adjust_theta: log-scale margin has a nonpositive value");
      responses(i, j) = v > 0.0 ? std::log(v) : 0.0;
    }
  }
  Matrix centred = summaries.rowwise() - s_center.transpose();
  const LocalLinearFit fit = fit_weighted_linear(responses, centred, weights);

  const Matrix shift = centred * fit.slope.transpose();
  Matrix out = thetas;
  for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
    if (!(weights[static_cast<std::size_t>(i)] > 0.0)) continue;
    for (Eigen::Index j = 0; j < d; ++j)
      out(i, j) = is_log(j) ? std::exp(responses(i, j) - shift(i, j)) : thetas(i, j) - shift(i, j);
  }
  return out;
}

ParticleSet adjust_theta(const ABCApproximation& approx, const std::vector<bool>& log_scale) {
  ParticleSet out = approx.particles;
  out.thetas = adjust_theta_rows(approx.particles.thetas, approx.particles.summaries,
                                 as_span(approx.particles.weights), approx.s_obs, log_scale);
  return out;
}

double logit(double p) {
  const double c = std::clamp(p, kPClamp, 1.0 - kPClamp);
  return std::log(c / (1.0 - c));
}

double expit(double x) {
  const double p = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  return std::clamp(p, kPClamp, 1.0 - kPClamp);
}

Matrix adjust_p(const Matrix& p, const Matrix& summaries, const Vector& s_obs, std::span<const double> weights) {
  if (summaries.rows() != p.rows()) throw ContractViolation("adjust_p: row counts differ");
  Matrix eta(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) {
      if (!(p(i, j) > 0.0 && p(i, j) < 1.0)) throw ContractViolation("adjust_p: p outside (0, 1)");
      eta(i, j) = logit(p(i, j));
    }
  const Matrix centred = summaries.rowwise() - s_obs.transpose();
  const LocalLinearFit fit = fit_weighted_linear(eta, centred, weights);
  const Matrix shift = centred * fit.slope.transpose();
  Matrix out(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i)
    for (Eigen::Index j = 0; j < p.cols(); ++j) out(i, j) = expit(eta(i, j) - shift(i, j));
  return out;
}

} // namespace recal
