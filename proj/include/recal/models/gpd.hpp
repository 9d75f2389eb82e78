#pragma once

#include <span>

#include "recal/rng.hpp"

namespace recal {

struct GPDParams {
  double sigma = 1.0;
  double xi = 0.0;
  double v0 = 0.0;
};

// |xi| below this uses the exponential limit.
inline constexpr double kGpdXiZero = 1e-8;

double gpd_cdf(double v, const GPDParams& p);
double gpd_quantile(double u, const GPDParams& p);
double gpd_sample(const GPDParams& p, Rng& rng);
// Log-likelihood of values above v0; -inf outside the support.
double gpd_loglik(std::span<const double> values, const GPDParams& p);

struct GPDFit {
  double sigma = 0.0;
  double xi = 0.0;
  double loglik = 0.0;
};

// Maximum likelihood over sigma > 0, xi > -1 through the profile in
// theta = xi / sigma. Throws FitFailure with fewer than 5 exceedances or
// when they are all equal.
GPDFit gpd_mle(std::span<const double> values, double v0);

} // namespace recal
