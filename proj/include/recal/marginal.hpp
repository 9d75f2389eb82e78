#pragma once

#include <memory>
#include <span>
#include <vector>

namespace recal {

/// A univariate posterior marginal F~_{j,s}: a distribution function and its
/// inverse.
class MarginalPosterior {
public:
  virtual ~MarginalPosterior() = default;
  virtual double cdf(double x) const = 0;
  virtual double quantile(double p) const = 0;
};

using MarginalPtr = std::shared_ptr<const MarginalPosterior>;
using MarginalSet = std::vector<MarginalPtr>;

/// Weighted empirical CDF smoothed by midpoint interpolation.
///
/// After merging duplicate values, point k carries mass w_k and is assigned
/// the plotting position c_k = W_{k-1} + w_k / 2, where W is the cumulative
/// mass. cdf() interpolates linearly between consecutive (x_k, c_k) and is
/// flat at c_1 below the data and at c_K above it, so it never returns 0 or 1.
/// quantile() inverts the interpolant on [c_1, c_K] and clamps to the sample
/// range outside it.
class WeightedECDF final : public MarginalPosterior {
public:
  // Zero-weight entries are dropped. Throws DegenerateError if no weight is
  // positive, ContractViolation on NaN or mismatched lengths.
  WeightedECDF(std::span<const double> values, std::span<const double> weights);

  double cdf(double x) const override;
  double quantile(double p) const override;

  const std::vector<double>& points() const { return points_; }
  const std::vector<double>& cumweights() const { return cum_; }
  // Interior range on which quantile() inverts cdf() exactly.
  double p_min() const { return mid_.front(); }
  double p_max() const { return mid_.back(); }

private:
  std::vector<double> points_;
  std::vector<double> cum_;
  std::vector<double> mid_;
};

// Smoothed weighted ECDF of (values, weights) evaluated at a single x, in one
// pass and without sorting. Agrees with WeightedECDF(values, weights).cdf(x)
// up to summation order. Returns NaN if no weight is positive.
double smoothed_cdf_at(std::span<const double> values, std::span<const double> weights, double x);

// Standard normal distribution function and its inverse. normal_quantile
// throws DomainError unless 0 < p < 1.
double normal_cdf(double z);
double normal_quantile(double p);

class GaussianMarginal final : public MarginalPosterior {
public:
  GaussianMarginal(double mean, double sd); // throws ConfigError unless sd > 0

  double cdf(double x) const override;
  double quantile(double p) const override;
  double mean() const { return mean_; }
  double sd() const { return sd_; }

private:
  double mean_;
  double sd_;
};

} // namespace recal
