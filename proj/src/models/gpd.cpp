#include "recal/models/gpd.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "recal/error.hpp"

namespace recal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check(const GPDParams& p) {
  if (!(p.sigma > 0.0)) throw ConfigError("GPD scale must be positive");
}

/// Profile log-likelihood of exceedances x as a function of theta = xi / sigma.
struct Profile {
  std::vector<double> x;
  double xmax = 0.0;
  double median = 0.0;
  double mean = 0.0;

  // Monotone map from the real line onto the admissible theta > -1/xmax.
  double theta_of(double r) const { return r < 0.0 ? -(-std::expm1(r)) / xmax : std::expm1(r) / median; }

  double xi_of(double theta) const {
    double s = 0.0;
    for (double v : x) s += std::log1p(theta * v);
    return s / static_cast<double>(x.size());
  }

  double sigma_of(double theta, double xi) const {
    if (std::abs(theta) * xmax < 1e-10) return mean;
    return xi / theta;
  }

  double value(double r) const {
    const double theta = theta_of(r);
    if (!(1.0 + theta * xmax > 0.0)) return kNegInf;
    const double xi = xi_of(theta);
    if (!(xi > -1.0)) return kNegInf;
    const double sigma = sigma_of(theta, xi);
    if (!(sigma > 0.0) || !std::isfinite(sigma)) return kNegInf;
    return -static_cast<double>(x.size()) * (std::log(sigma) + 1.0 + xi);
  }
};

} // namespace

double gpd_cdf(double v, const GPDParams& p) {
  check(p);
  if (!(v > p.v0)) return 0.0;
  const double z = (v - p.v0) / p.sigma;
  if (std::abs(p.xi) < kGpdXiZero) return -std::expm1(-z);
  const double t = p.xi * z;
  if (!(t > -1.0)) return 1.0;
  return -std::expm1(-std::log1p(t) / p.xi);
}

double gpd_quantile(double u, const GPDParams& p) {
  check(p);
  if (!(u >= 0.0 && u < 1.0)) throw DomainError("gpd_quantile: u must lie in [0, 1)");
  const double l = std::log1p(-u);
  if (std::abs(p.xi) < kGpdXiZero) return p.v0 - p.sigma * l;
  return p.v0 + p.sigma * std::expm1(-p.xi * l) / p.xi;
}

double gpd_sample(const GPDParams& p, Rng& rng) { return gpd_quantile(rng.uniform(), p); }

double gpd_loglik(std::span<const double> values, const GPDParams& p) {
  check(p);
  double ll = 0.0;
  for (double v : values) {
    const double z = (v - p.v0) / p.sigma;
    if (!(z >= 0.0)) return kNegInf;
    if (std::abs(p.xi) < kGpdXiZero) {
      ll += -std::log(p.sigma) - z;
    } else {
      const double t = p.xi * z;
      if (!(t > -1.0)) return kNegInf;
      ll += -std::log(p.sigma) - (1.0 + 1.0 / p.xi) * std::log1p(t);
    }
  }
  return ll;
}

GPDFit gpd_mle(std::span<const double> values, double v0) {
  Profile prof;
  prof.x.reserve(values.size());
  for (double v : values)
    if (v > v0) prof.x.push_back(v - v0);
  if (prof.x.size() < 5) throw FitFailure("gpd_mle: fewer than 5 exceedances");
  const auto [lo, hi] = std::minmax_element(prof.x.begin(), prof.x.end());
  if (*hi - *lo <= 1e-12 * *hi) throw FitFailure("gpd_mle: all exceedances equal");
  prof.xmax = *hi;
  std::vector<double> tmp = prof.x;
  std::nth_element(tmp.begin(), tmp.begin() + static_cast<std::ptrdiff_t>(tmp.size() / 2), tmp.end());
  prof.median = tmp[tmp.size() / 2];
  double sum = 0.0;
  for (double v : prof.x) sum += v;
  prof.mean = sum / static_cast<double>(prof.x.size());

  constexpr int kGrid = 30;
  constexpr double r_lo = -25.0, r_hi = 20.0;
  const double step = (r_hi - r_lo) / (kGrid - 1);
  int best = -1;
  double best_val = kNegInf;
  for (int k = 0; k < kGrid; ++k) {
    const double v = prof.value(r_lo + step * k);
    if (v > best_val) {
      best_val = v;
      best = k;
    }
  }
  if (best < 0) throw FitFailure("gpd_mle: profile likelihood undefined everywhere");
  const double a = r_lo + step * std::max(best - 1, 0);
  const double b = r_lo + step * std::min(best + 1, kGrid - 1);
  std::uintmax_t iters = 200;
  const auto res = boost::math::tools::brent_find_minima(
      [&](double r) {
        const double v = prof.value(r);
        return std::isfinite(v) ? -v : std::numeric_limits<double>::max();
      },
      a, b, 40, iters);
  double r = res.first;
  if (!(-res.second >= best_val)) r = r_lo + step * best;

  const double theta = prof.theta_of(r);
  GPDFit fit;
  fit.xi = prof.xi_of(theta);
  fit.sigma = prof.sigma_of(theta, fit.xi);
  fit.loglik = prof.value(r);
  if (!std::isfinite(fit.sigma) || !std::isfinite(fit.xi) || !(fit.sigma > 0.0))
    throw FitFailure("gpd_mle: non-finite estimate");
  return fit;
}

} // namespace recal
