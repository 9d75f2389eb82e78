#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "recal/diagnostics.hpp"
#include "recal/error.hpp"
#include "recal/models/conjugate_normal.hpp"
#include "recal/rng.hpp"

using namespace recal;

namespace {

// Step ECDF of a weighted sample at x, by direct summation.
double step_cdf(const std::vector<double>& v, const std::vector<double>& w, double x) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const double wi = w.empty() ? 1.0 : w[i];
    den += wi;
    if (v[i] <= x) num += wi;
  }
  return num / den;
}

double brute_ks(const std::vector<double>& a, const std::vector<double>& wa, const std::vector<double>& b,
                const std::vector<double>& wb) {
  std::vector<double> pts = a;
  pts.insert(pts.end(), b.begin(), b.end());
  double d = 0;
  for (double x : pts) d = std::max(d, std::abs(step_cdf(a, wa, x) - step_cdf(b, wb, x)));
  return d;
}

InferenceProcedure gaussian_procedure(const ConjugateNormalModel& model, double sd_scale, double shift_sd) {
  return [&model, sd_scale, shift_sd](const Vector& s, std::uint64_t) {
    return ConjugateNormalPosterior(model, sd_scale, shift_sd).marginals(as_span(s));
  };
}

} // namespace

TEST_CASE("KS statistic examples") {
  const std::vector<double> one = {0.5};
  CHECK(ks_uniform(one).statistic == doctest::Approx(0.5));
  std::vector<double> grid;
  for (int i = 1; i <= 9; ++i) grid.push_back(i / 10.0);
  CHECK(ks_uniform(grid).statistic == doctest::Approx(0.1));
  CHECK_THROWS_AS(ks_uniform(std::vector<double>{}), ContractViolation);
  CHECK_THROWS_AS(ks_uniform(std::vector<double>{1.5}), ContractViolation);
}

TEST_CASE("Kolmogorov survival function against reference values") {
  const std::vector<std::pair<double, double>> ref = {
      {0.3, 0.9999906941986655}, {0.5, 0.9639452436648751},     {0.8, 0.5441424115741981},
      {1.0, 0.26999967167735456}, {1.5, 0.022217962616525127}, {2.0, 0.0006709252557796953}};
  for (const auto& [lambda, q] : ref) CHECK(kolmogorov_pvalue(lambda, 1) == doctest::Approx(q).epsilon(1e-10));
  // sqrt(n) scaling
  CHECK(kolmogorov_pvalue(0.01, 10000) == doctest::Approx(0.26999967167735456).epsilon(1e-10));
  CHECK(kolmogorov_pvalue(0.0, 5) == 1.0);
  CHECK(kolmogorov_pvalue(10.0, 100) == 0.0);
  // continuous across the switch between the two series
  CHECK(kolmogorov_pvalue(1.0 - 1e-9, 1) == doctest::Approx(kolmogorov_pvalue(1.0, 1)).epsilon(1e-7));
}

TEST_CASE("uniform samples pass the KS test") {
  int passed = 0;
  for (std::uint64_t t = 0; t < 100; ++t) {
    Rng rng(77, t);
    std::vector<double> u(10000);
    for (auto& x : u) x = rng.uniform();
    passed += ks_uniform(u).p_value > 0.001;
  }
  CHECK(passed >= 99);
}

TEST_CASE("uniformity report") {
  std::vector<double> u;
  for (int i = 0; i < 2000; ++i) u.push_back((i + 0.5) / 2000.0);
  const auto r = uniformity_report(u);
  CHECK(r.n == 2000);
  CHECK(r.mean == doctest::Approx(0.5));
  CHECK(std::abs(r.skewness) < 1e-9);
  for (auto c : r.histogram) CHECK(c == 100);
  CHECK(r.p_value > 0.99);
}

TEST_CASE("two-sample KS distance matches direct evaluation (property)") {
  Rng rng(19);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t na = 1 + static_cast<std::size_t>(rng.uniform() * 60);
    const std::size_t nb = 1 + static_cast<std::size_t>(rng.uniform() * 60);
    std::vector<double> a(na), b(nb), wa(na), wb(nb);
    for (std::size_t i = 0; i < na; ++i) {
      a[i] = std::round(rng.normal() * 4) / 4;
      wa[i] = rng.uniform();
    }
    for (std::size_t i = 0; i < nb; ++i) {
      b[i] = std::round((rng.normal() + 0.3) * 4) / 4;
      wb[i] = rng.uniform();
    }
    CHECK(ks_distance(a, wa, b, wb) == doctest::Approx(brute_ks(a, wa, b, wb)).epsilon(1e-12));
    CHECK(ks_distance(a, {}, b, {}) == doctest::Approx(brute_ks(a, {}, b, {})).epsilon(1e-12));
    CHECK(ks_distance(a, wa, a, wa) == doctest::Approx(0.0));
  }
}

TEST_CASE("KS distance to a continuous distribution") {
  std::vector<double> x;
  for (int i = 1; i <= 999; ++i) x.push_back(normal_quantile(i / 1000.0));
  const GaussianMarginal g(0.0, 1.0);
  CHECK(ks_distance(x, {}, g) < 0.0011);
  const GaussianMarginal shifted(1.0, 1.0);
  CHECK(ks_distance(x, {}, shifted) == doctest::Approx(2 * normal_cdf(0.5) - 1).epsilon(0.01));
}

TEST_CASE("coverage of the exact posterior") {
  ConjugateNormalModel model(5);
  CoverageOptions opt;
  opt.n_reps = 1000;
  opt.seed = 3;
  const auto report = coverage_diagnostic(model, gaussian_procedure(model, 1.0, 0.0), opt);
  CHECK(report.n_failed == 0);
  CHECK(report.margins[0].p_value > 0.01);
  CHECK(std::abs(report.coverage[0] - 0.9) <= 0.03);
  CHECK(report.p.rows() == 1000);
}

TEST_CASE("prior as posterior passes") {
  ConjugateNormalModel model(5);
  CoverageOptions opt;
  opt.n_reps = 1000;
  opt.seed = 4;
  const InferenceProcedure prior = [](const Vector&, std::uint64_t) {
    return MarginalSet{std::make_shared<GaussianMarginal>(0.0, 1.0)};
  };
  CHECK(coverage_diagnostic(model, prior, opt).margins[0].p_value > 0.01);
}

TEST_CASE("an overconfident posterior is rejected") {
  ConjugateNormalModel model(5);
  int rejected = 0;
  std::array<std::size_t, kHistogramBins> hist{};
  for (std::uint64_t k = 0; k < 100; ++k) {
    CoverageOptions opt;
    opt.n_reps = 1000;
    opt.seed = 1000 + k;
    const auto r = coverage_diagnostic(model, gaussian_procedure(model, 0.5, 0.0), opt);
    rejected += r.margins[0].p_value < 0.01;
    for (std::size_t b = 0; b < kHistogramBins; ++b) hist[b] += r.margins[0].histogram[b];
  }
  CHECK(rejected >= 99);
  // U shape: both end bins well above every central bin
  const auto central = *std::max_element(hist.begin() + 5, hist.end() - 5);
  CHECK(hist.front() > 2 * central);
  CHECK(hist.back() > 2 * central);
}

TEST_CASE("a biased posterior is rejected") {
  ConjugateNormalModel model(5);
  int rejected = 0;
  for (std::uint64_t k = 0; k < 100; ++k) {
    CoverageOptions opt;
    opt.n_reps = 1000;
    opt.seed = 5000 + k;
    rejected += coverage_diagnostic(model, gaussian_procedure(model, 1.0, 1.0), opt).margins[0].p_value < 0.01;
  }
  CHECK(rejected >= 99);
}

TEST_CASE("coverage neighbourhood restriction and validation") {
  ConjugateNormalModel model(5);
  CoverageOptions opt;
  opt.n_reps = 400;
  opt.neighborhood_frac = 0.25;
  Vector s(1);
  s << 0.0;
  opt.s_obs = s;
  const auto r = coverage_diagnostic(model, gaussian_procedure(model, 1.0, 0.0), opt);
  CHECK(r.p.rows() == 100);
  CoverageOptions bad;
  bad.n_reps = 10;
  CHECK_THROWS_AS(coverage_diagnostic(model, gaussian_procedure(model, 1.0, 0.0), bad), ConfigError);
  bad.n_reps = 100;
  bad.neighborhood_frac = 0.5;
  CHECK_THROWS_AS(coverage_diagnostic(model, gaussian_procedure(model, 1.0, 0.0), bad), ConfigError);
}

TEST_CASE("coverage is deterministic across thread counts") {
  ConjugateNormalModel model(5);
  CoverageOptions a, b;
  a.n_reps = b.n_reps = 200;
  b.threads = 3;
  const auto ra = coverage_diagnostic(model, gaussian_procedure(model, 1.0, 0.0), a);
  const auto rb = coverage_diagnostic(model, gaussian_procedure(model, 1.0, 0.0), b);
  CHECK(ra.p == rb.p);
}
