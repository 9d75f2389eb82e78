#include "recal/marginal.hpp"

#include <algorithm>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "recal/error.hpp"

namespace recal {

WeightedECDF::WeightedECDF(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size()) throw ContractViolation("build_ecdf: length mismatch");
  std::vector<std::size_t> idx;
  idx.reserve(values.size());
  double total = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (std::isnan(values[i]) || std::isnan(weights[i])) throw ContractViolation("build_ecdf: NaN input");
    if (weights[i] < 0.0) throw ContractViolation("build_ecdf: negative weight");
    if (weights[i] > 0.0) {
      idx.push_back(i);
      total += weights[i];
    }
  }
  if (idx.empty() || !(total > 0.0))
    throw DegenerateError("build_ecdf: no positive weight (bandwidth too small?)");
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> mass;
  for (std::size_t i : idx) {
    if (!points_.empty() && values[i] == points_.back()) {
      mass.back() += weights[i];
    } else {
      points_.push_back(values[i]);
      mass.push_back(weights[i]);
    }
  }
  cum_.resize(points_.size());
  mid_.resize(points_.size());
  double running = 0.0;
  for (std::size_t k = 0; k < points_.size(); ++k) {
    const double w = mass[k] / total;
    mid_[k] = running + 0.5 * w;
    running += w;
    cum_[k] = running;
  }
  cum_.back() = 1.0;
}

double WeightedECDF::cdf(double x) const {
  if (x <= points_.front()) return mid_.front();
  if (x >= points_.back()) return mid_.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(points_.begin(), points_.end(), x) - points_.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - points_[lo]) / (points_[hi] - points_[lo]);
  return mid_[lo] + t * (mid_[hi] - mid_[lo]);
}

double WeightedECDF::quantile(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("ecdf quantile: p outside [0, 1]");
  if (p <= mid_.front()) return points_.front();
  if (p >= mid_.back()) return points_.back();
  const auto hi = static_cast<std::size_t>(std::upper_bound(mid_.begin(), mid_.end(), p) - mid_.begin());
  const std::size_t lo = hi - 1;
  const double t = (p - mid_[lo]) / (mid_[hi] - mid_[lo]);
  return points_[lo] + t * (points_[hi] - points_[lo]);
}

double smoothed_cdf_at(std::span<const double> values, std::span<const double> weights, double x) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const std::size_t n = values.size();
  const double* v = values.data();
  const double* w = weights.data();
  // Pass 1: masses and the nearest support points on either side of x.
  double total = 0.0, at_or_below = 0.0;
  double lo = -kInf, hi = kInf;
  for (std::size_t k = 0; k < n; ++k) {
    const double wk = w[k] > 0.0 ? w[k] : 0.0;
    const bool live = w[k] > 0.0;
    const bool below = v[k] <= x;
    total += wk;
    at_or_below += below ? wk : 0.0;
    lo = (live && below && v[k] > lo) ? v[k] : lo;
    hi = (live && !below && v[k] < hi) ? v[k] : hi;
  }
  if (!(total > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  // Pass 2: merged mass at those two points.
  double lo_mass = 0.0, hi_mass = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double wk = w[k] > 0.0 ? w[k] : 0.0;
    lo_mass += v[k] == lo ? wk : 0.0;
    hi_mass += v[k] == hi ? wk : 0.0;
  }
  if (lo == -kInf) return 0.5 * hi_mass / total;
  const double c_lo = (at_or_below - 0.5 * lo_mass) / total;
  if (hi == kInf) return c_lo;
  const double c_hi = (at_or_below + 0.5 * hi_mass) / total;
  return c_lo + (x - lo) / (hi - lo) * (c_hi - c_lo);
}

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie strictly inside (0, 1)");
  return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

GaussianMarginal::GaussianMarginal(double mean, double sd) : mean_(mean), sd_(sd) {
  if (!(sd > 0.0) || !std::isfinite(sd) || !std::isfinite(mean))
    throw ConfigError("GaussianMarginal: need finite mean and sd > 0");
}

double GaussianMarginal::cdf(double x) const { return normal_cdf((x - mean_) / sd_); }

double GaussianMarginal::quantile(double p) const { return mean_ + sd_ * normal_quantile(p); }

} // namespace recal
