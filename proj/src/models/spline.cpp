#include "recal/models/spline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <unsupported/Eigen/Splines>

#include "recal/error.hpp"

namespace recal {

namespace {

using Cubic = Eigen::Spline<double, 1, 3>;
constexpr int kDegree = 3;
constexpr int kSparGrid = 30;
constexpr double kSparLo = -1.5, kSparHi = 1.5;
constexpr double kFallbackEdf = 20.0;

// Number of interior-plus-boundary knots for n distinct x values
// (the usual smoothing-spline schedule).
std::size_t knot_count(std::size_t n) {
  if (n < 50) return n;
  const double a1 = std::log2(50.0), a2 = std::log2(100.0), a3 = std::log2(140.0), a4 = std::log2(200.0);
  const double nn = static_cast<double>(n);
  double k;
  if (n < 200)
    k = std::exp2(a1 + (a2 - a1) * (nn - 50.0) / 150.0);
  else if (n < 800)
    k = std::exp2(a2 + (a3 - a2) * (nn - 200.0) / 600.0);
  else if (n < 3200)
    k = std::exp2(a3 + (a4 - a3) * (nn - 800.0) / 2400.0);
  else
    k = 200.0 + std::pow(nn - 3200.0, 0.2);
  return static_cast<std::size_t>(std::trunc(k));
}

struct Basis {
  Eigen::Index first = 0;
  Eigen::Array<double, 3, 4> values; // rows: derivative order 0..2
};

Basis basis_at(double u, const Cubic::KnotVectorType& kv) {
  Basis b;
  const Eigen::Index span = Cubic::Span(u, kDegree, kv);
  b.first = span - kDegree;
  b.values = Cubic::BasisFunctionDerivatives(u, 2, kDegree, kv);
  return b;
}

struct Solution {
  Vector coef;
  double edf = 0.0;
  double gcv = 0.0;
  double rss = 0.0;
};

} // namespace

SmoothingSpline::SmoothingSpline(std::span<const double> x, std::span<const double> y, std::span<const double> w) {
  if (x.size() != y.size() || (!w.empty() && w.size() != x.size()))
    throw ContractViolation("SmoothingSpline: length mismatch");
  std::vector<double> xs, ys, ws;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    if (!(wi > 0.0)) continue;
    if (!std::isfinite(x[i]) || !std::isfinite(y[i])) throw ContractViolation("SmoothingSpline: non-finite input");
    xs.push_back(x[i]);
    ys.push_back(y[i]);
    ws.push_back(wi);
  }
  const std::size_t n = xs.size();
  if (n < 4) throw FitFailure("SmoothingSpline: need at least 4 weighted points");
  double wsum = 0.0;
  for (double v : ws) wsum += v;
  for (double& v : ws) v *= static_cast<double>(n) / wsum;

  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  x_lo_ = *lo;
  x_range_ = *hi - *lo;
  if (!(x_range_ > 0.0)) throw FitFailure("SmoothingSpline: predictor is constant");
  std::vector<double> u(n);
  for (std::size_t i = 0; i < n; ++i) u[i] = (xs[i] - x_lo_) / x_range_;

  std::vector<double> ux = u;
  std::sort(ux.begin(), ux.end());
  ux.erase(std::unique(ux.begin(), ux.end()), ux.end());
  const std::size_t nk = std::max<std::size_t>(2, std::min(knot_count(ux.size()), ux.size()));
  std::vector<double> inner(nk);
  for (std::size_t k = 0; k < nk; ++k) {
    const double pos = static_cast<double>(k) * static_cast<double>(ux.size() - 1) / static_cast<double>(nk - 1);
    inner[k] = ux[static_cast<std::size_t>(std::llround(pos))];
  }
  inner.front() = 0.0;
  inner.back() = 1.0;
  knots_.resize(static_cast<Eigen::Index>(nk + 6));
  for (int k = 0; k < 3; ++k) {
    knots_[k] = 0.0;
    knots_[knots_.size() - 1 - k] = 1.0;
  }
  for (std::size_t k = 0; k < nk; ++k) knots_[static_cast<Eigen::Index>(k + 3)] = inner[k];
  const auto nb = static_cast<Eigen::Index>(nk + 2);

  Eigen::MatrixXd xtwx = Eigen::MatrixXd::Zero(nb, nb);
  Vector xtwy = Vector::Zero(nb);
  std::vector<Basis> bases(n);
  for (std::size_t i = 0; i < n; ++i) {
    bases[i] = basis_at(u[i], knots_);
    const auto& b = bases[i];
    for (int r = 0; r < 4; ++r) {
      xtwy[b.first + r] += ws[i] * b.values(0, r) * ys[i];
      for (int c = 0; c < 4; ++c) xtwx(b.first + r, b.first + c) += ws[i] * b.values(0, r) * b.values(0, c);
    }
  }

  // Exact penalty: B'' is linear on each knot interval, so two Gauss points suffice.
  Eigen::MatrixXd omega = Eigen::MatrixXd::Zero(nb, nb);
  const double g = 0.5 / std::sqrt(3.0);
  for (std::size_t k = 0; k + 1 < nk; ++k) {
    const double a = inner[k], b = inner[k + 1];
    if (!(b > a)) continue;
    for (double node : {0.5 - g, 0.5 + g}) {
      const Basis bs = basis_at(a + node * (b - a), knots_);
      const double wq = 0.5 * (b - a);
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) omega(bs.first + r, bs.first + c) += wq * bs.values(2, r) * bs.values(2, c);
    }
  }

  const double ratio = xtwx.trace() / omega.trace();
  auto solve = [&](double lam) {
    Solution s;
    const Eigen::MatrixXd m = xtwx + lam * omega;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
    s.coef = ldlt.solve(xtwy);
    s.edf = ldlt.solve(xtwx).trace();
    for (std::size_t i = 0; i < n; ++i) {
      const auto& b = bases[i];
      double f = 0.0;
      for (int r = 0; r < 4; ++r) f += b.values(0, r) * s.coef[b.first + r];
      s.rss += ws[i] * (ys[i] - f) * (ys[i] - f);
    }
    const double nn = static_cast<double>(n);
    const double denom = 1.0 - s.edf / nn;
    s.gcv = denom > 0.0 ? (s.rss / nn) / (denom * denom) : std::numeric_limits<double>::infinity();
    return s;
  };
  auto lambda_of = [&](double spar) { return ratio * std::pow(256.0, 3.0 * spar - 1.0); };

  Solution best;
  best.gcv = std::numeric_limits<double>::infinity();
  double best_lambda = 0.0;
  double gcv_min = std::numeric_limits<double>::infinity(), gcv_max = 0.0;
  for (int k = 0; k < kSparGrid; ++k) {
    const double spar = kSparLo + (kSparHi - kSparLo) * k / (kSparGrid - 1);
    const double lam = lambda_of(spar);
    Solution s = solve(lam);
    if (!std::isfinite(s.gcv)) continue;
    gcv_min = std::min(gcv_min, s.gcv);
    gcv_max = std::max(gcv_max, s.gcv);
    if (s.gcv < best.gcv) {
      best = std::move(s);
      best_lambda = lam;
    }
  }
  if (!std::isfinite(gcv_min) || gcv_max - gcv_min <= 1e-10 * std::max(gcv_max, 1e-300)) {
    fallback_ = true;
    double a = kSparLo, b = kSparHi;
    for (int it = 0; it < 60; ++it) {
      const double mid = 0.5 * (a + b);
      if (solve(lambda_of(mid)).edf > kFallbackEdf)
        a = mid;
      else
        b = mid;
    }
    best_lambda = lambda_of(0.5 * (a + b));
    best = solve(best_lambda);
  }
  coef_ = best.coef;
  lambda_ = best_lambda;
  edf_ = best.edf;
  gcv_ = best.gcv;

  residuals_.resize(n);
  double rmean = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    residuals_[i] = ys[i] - eval_unit(u[i]);
    rmean += ws[i] * residuals_[i];
  }
  rmean /= static_cast<double>(n);
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) var += ws[i] * (residuals_[i] - rmean) * (residuals_[i] - rmean);
  residual_sd_ = std::sqrt(var / static_cast<double>(n));

  const Basis b0 = basis_at(0.0, knots_), b1 = basis_at(1.0, knots_);
  f_lo_ = d_lo_ = f_hi_ = d_hi_ = 0.0;
  for (int r = 0; r < 4; ++r) {
    f_lo_ += b0.values(0, r) * coef_[b0.first + r];
    d_lo_ += b0.values(1, r) * coef_[b0.first + r];
    f_hi_ += b1.values(0, r) * coef_[b1.first + r];
    d_hi_ += b1.values(1, r) * coef_[b1.first + r];
  }
}

double SmoothingSpline::eval_unit(double u) const {
  if (u < 0.0) return f_lo_ + d_lo_ * u;
  if (u > 1.0) return f_hi_ + d_hi_ * (u - 1.0);
  const Basis b = basis_at(u, knots_);
  double f = 0.0;
  for (int r = 0; r < 4; ++r) f += b.values(0, r) * coef_[b.first + r];
  return f;
}

double SmoothingSpline::operator()(double x) const { return eval_unit((x - x_lo_) / x_range_); }

SplineGaussianAuxiliary::SplineGaussianAuxiliary(const Matrix& thetas, const Matrix& summaries,
                                                 std::span<const double> weights, std::vector<std::size_t> pairing)
    : pairing_(std::move(pairing)) {
  if (pairing_.size() != static_cast<std::size_t>(thetas.cols()))
    throw ContractViolation("spline auxiliary: one summary column per margin");
  std::size_t positive = 0;
  for (double w : weights) positive += w > 0.0;
  if (positive < 100) throw InsufficientDataError("spline auxiliary: fewer than 100 weighted particles");
  for (std::size_t j = 0; j < pairing_.size(); ++j) {
    if (pairing_[j] >= static_cast<std::size_t>(summaries.cols()))
      throw ContractViolation("spline auxiliary: pairing column out of range");
    const Vector xj = summaries.col(static_cast<Eigen::Index>(pairing_[j]));
    const Vector yj = thetas.col(static_cast<Eigen::Index>(j));
    splines_.emplace_back(as_span(xj), as_span(yj), weights);
  }
}

MarginalSet SplineGaussianAuxiliary::marginals(std::span<const double> s) const {
  MarginalSet out;
  for (std::size_t j = 0; j < splines_.size(); ++j) {
    const double sd = splines_[j].residual_sd();
    if (!(sd > 0.0)) throw FitFailure("spline auxiliary: zero residual sd");
    out.push_back(std::make_shared<GaussianMarginal>(splines_[j](s[pairing_[j]]), sd));
  }
  return out;
}

bool SplineGaussianAuxiliary::any_fallback() const {
  return std::any_of(splines_.begin(), splines_.end(), [](const SmoothingSpline& s) { return s.gcv_fallback(); });
}

} // namespace recal
