#include "recal/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "recal/error.hpp"
#include "recal/kernels.hpp"
#include "recal/parallel.hpp"

namespace recal {

double kolmogorov_pvalue(double d, std::size_t n) {
  if (n == 0) throw ContractViolation("kolmogorov_pvalue: n must be positive");
  const double lambda = std::sqrt(static_cast<double>(n)) * d;
  if (!(lambda > 0.0)) return 1.0;
  double p = 0.0;
  if (lambda < 1.0) {
    // Dual (theta-function) form of the same series; the alternating form
    // converges too slowly here.
    const double c = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int k = 1; k < 1000; ++k) {
      const double t = std::exp(-static_cast<double>((2 * k - 1) * (2 * k - 1)) * c);
      s += t;
      if (t < 1e-12) break;
    }
    p = 1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s;
  } else {
    for (int k = 1; k < 1000; ++k) {
      const double t = 2.0 * std::exp(-2.0 * k * k * lambda * lambda);
      p += (k % 2 == 1) ? t : -t;
      if (t < 1e-12) break;
    }
  }
  return std::clamp(p, 0.0, 1.0);
}

KsResult ks_uniform(std::span<const double> sample) {
  if (sample.empty()) throw ContractViolation("ks_uniform: empty sample");
  std::vector<double> x(sample.begin(), sample.end());
  for (double v : x)
    if (!(v >= 0.0 && v <= 1.0)) throw ContractViolation("ks_uniform: value outside [0, 1]");
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double d = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double lo = static_cast<double>(i) / n;
    const double hi = static_cast<double>(i + 1) / n;
    d = std::max({d, hi - x[i], x[i] - lo});
  }
  return {d, kolmogorov_pvalue(d, x.size())};
}

UniformityReport uniformity_report(std::span<const double> sample) {
  const KsResult ks = ks_uniform(sample);
  UniformityReport r;
  r.ks = ks.statistic;
  r.p_value = ks.p_value;
  r.n = sample.size();
  for (double v : sample) {
    auto bin = static_cast<std::size_t>(v * kHistogramBins);
    r.histogram[std::min(bin, kHistogramBins - 1)] += 1;
  }
  const double n = static_cast<double>(r.n);
  r.mean = std::accumulate(sample.begin(), sample.end(), 0.0) / n;
  double m2 = 0.0, m3 = 0.0;
  for (double v : sample) {
    const double c = v - r.mean;
    m2 += c * c;
    m3 += c * c * c;
  }
  m2 /= n;
  m3 /= n;
  r.skewness = m2 > 0.0 ? m3 / std::pow(m2, 1.5) : 0.0;
  return r;
}

namespace {

struct WeightedPoint {
  double x;
  double w;
};

std::vector<WeightedPoint> normalised_points(std::span<const double> v, std::span<const double> w) {
  if (v.empty()) throw ContractViolation("ks_distance: empty sample");
  if (!w.empty() && w.size() != v.size()) throw ContractViolation("ks_distance: weight length differs");
  std::vector<WeightedPoint> out;
  out.reserve(v.size());
  double total = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    if (wi > 0.0) {
      out.push_back({v[i], wi});
      total += wi;
    }
  }
  if (!(total > 0.0)) throw DegenerateError("ks_distance: no positive weight");
  for (auto& p : out) p.w /= total;
  std::sort(out.begin(), out.end(), [](const WeightedPoint& a, const WeightedPoint& b) { return a.x < b.x; });
  return out;
}

} // namespace

double ks_distance(std::span<const double> a, std::span<const double> wa, std::span<const double> b,
                   std::span<const double> wb) {
  const auto pa = normalised_points(a, wa);
  const auto pb = normalised_points(b, wb);
  std::size_t i = 0, j = 0;
  double fa = 0.0, fb = 0.0, d = 0.0;
  while (i < pa.size() || j < pb.size()) {
    double x;
    if (j >= pb.size() || (i < pa.size() && pa[i].x <= pb[j].x))
      x = pa[i].x;
    else
      x = pb[j].x;
    while (i < pa.size() && pa[i].x == x) fa += pa[i++].w;
    while (j < pb.size() && pb[j].x == x) fb += pb[j++].w;
    d = std::max(d, std::abs(fa - fb));
  }
  return d;
}

double ks_distance(std::span<const double> a, std::span<const double> wa, const MarginalPosterior& g) {
  const auto pa = normalised_points(a, wa);
  double f = 0.0, d = 0.0;
  for (std::size_t i = 0; i < pa.size();) {
    const double x = pa[i].x;
    const double gx = g.cdf(x);
    d = std::max(d, std::abs(f - gx));
    while (i < pa.size() && pa[i].x == x) f += pa[i++].w;
    d = std::max(d, std::abs(f - gx));
  }
  return d;
}

CoverageReport coverage_diagnostic(const SimulatorModel& model, const InferenceProcedure& procedure,
                                   const CoverageOptions& options) {
  if (options.n_reps < 50) throw ConfigError("coverage diagnostic needs at least 50 replicates");
  if (!(options.neighborhood_frac > 0.0 && options.neighborhood_frac <= 1.0))
    throw ConfigError("neighborhood fraction must lie in (0, 1]");
  if (options.neighborhood_frac < 1.0 && !options.s_obs)
    throw ConfigError("neighborhood restriction needs s_obs");
  const std::size_t n = options.n_reps;
  const std::size_t d = model.dim_theta();
  const auto di = static_cast<Eigen::Index>(d);

  Matrix p(static_cast<Eigen::Index>(n), di);
  Matrix theta0(static_cast<Eigen::Index>(n), di);
  Matrix s0(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(model.dim_summary()));
  std::vector<char> ok(n, 0);

  parallel_for(n, options.threads, [&](std::size_t r) {
    const auto row = static_cast<Eigen::Index>(r);
    Rng rng(options.seed, r);
    const Vector theta = model.prior().sample(rng);
    theta0.row(row) = theta.transpose();
    const auto summary = model.summarize(model.simulate(as_span(theta), rng));
    if (!summary) return;
    s0.row(row) = summary->transpose();
    try {
      const MarginalSet margins = procedure(*summary, derive_seed(options.seed ^ 0x9e3779b97f4a7c15ULL, r));
      if (margins.size() != d) throw ContractViolation("procedure returned the wrong number of marginals");
      for (Eigen::Index j = 0; j < di; ++j) p(row, j) = margins[static_cast<std::size_t>(j)]->cdf(theta[j]);
      ok[r] = 1;
    } catch (const FitFailure&) {
    } catch (const DegenerateError&) {
    } catch (const InsufficientDataError&) {
    } catch (const DomainError&) {
    }
  });

  CoverageReport report;
  report.n_reps = n;
  std::vector<Eigen::Index> keep;
  for (std::size_t r = 0; r < n; ++r)
    if (ok[r]) keep.push_back(static_cast<Eigen::Index>(r));
  report.n_failed = n - keep.size();
  if (report.n_failed * 10 > n)
    throw DegenerateError("coverage diagnostic: " + std::to_string(report.n_failed) + " of " + std::to_string(n) +
                          " replicates failed");

  if (options.neighborhood_frac < 1.0) {
    Matrix kept_s(static_cast<Eigen::Index>(keep.size()), s0.cols());
    for (std::size_t k = 0; k < keep.size(); ++k) kept_s.row(static_cast<Eigen::Index>(k)) = s0.row(keep[k]);
    const Vector dist = distances_to(kept_s, as_span(*options.s_obs), DistanceSpec::from_mad(kept_s));
    std::vector<std::size_t> order(keep.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dist[static_cast<Eigen::Index>(a)] < dist[static_cast<Eigen::Index>(b)];
    });
    const auto m = std::max<std::size_t>(1, static_cast<std::size_t>(
        std::ceil(options.neighborhood_frac * static_cast<double>(keep.size()))));
    order.resize(m);
    std::sort(order.begin(), order.end());
    std::vector<Eigen::Index> restricted;
    for (std::size_t k : order) restricted.push_back(keep[k]);
    keep = std::move(restricted);
  }

  const auto k = static_cast<Eigen::Index>(keep.size());
  report.p.resize(k, di);
  report.theta0.resize(k, di);
  for (Eigen::Index r = 0; r < k; ++r) {
    report.p.row(r) = p.row(keep[static_cast<std::size_t>(r)]);
    report.theta0.row(r) = theta0.row(keep[static_cast<std::size_t>(r)]);
  }
  const double tail = 0.5 * (1.0 - options.interval);
  for (Eigen::Index j = 0; j < di; ++j) {
    std::vector<double> col(static_cast<std::size_t>(k));
    std::size_t inside = 0;
    for (Eigen::Index r = 0; r < k; ++r) {
      col[static_cast<std::size_t>(r)] = report.p(r, j);
      if (report.p(r, j) >= tail && report.p(r, j) <= 1.0 - tail) ++inside;
    }
    report.margins.push_back(uniformity_report(col));
    report.coverage.push_back(static_cast<double>(inside) / static_cast<double>(k));
  }
  return report;
}

} // namespace recal
