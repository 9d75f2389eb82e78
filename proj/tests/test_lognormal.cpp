#include <cmath>
#include <vector>

#include "doctest.h"

#include "recal/error.hpp"
#include "recal/models/lognormal_sum.hpp"
#include "recal/rng.hpp"

using namespace recal;

namespace {

// Log posterior written out directly from the lognormal density.
double direct_log_posterior(const std::vector<double>& y, std::size_t L, double mu, double sigma) {
  const double Ld = static_cast<double>(L);
  const double m1 = Ld * std::exp(mu + 0.5 * sigma * sigma);
  const double var = Ld * (std::exp(sigma * sigma) - 1.0) * std::exp(2 * mu + sigma * sigma);
  const double b2 = std::log(1.0 + var / (m1 * m1));
  const double a = std::log(m1) - 0.5 * b2;
  double lp = 0;
  for (double v : y) {
    const double z = std::log(v) - a;
    lp += -std::log(v) - 0.5 * std::log(2 * M_PI * b2) - z * z / (2 * b2);
  }
  lp += -0.5 * std::log(2 * M_PI) - 0.5 * mu * mu;
  lp += std::log(2 * sigma) - sigma * sigma;
  return lp;
}

} // namespace

TEST_CASE("Fenton-Wilkinson matches the first two moments of the sum") {
  for (double mu : {-2.0, 0.0, 0.7, 3.0})
    for (double sigma : {0.01, 0.3, 1.0, 2.5, 5.0})
      for (std::size_t L : {1, 2, 10, 100}) {
        const auto fw = fenton_wilkinson(mu, sigma, L);
        const double Ld = static_cast<double>(L);
        const double s2 = sigma * sigma;
        // compare logs so large sigma does not overflow
        const double log_mean = std::log(Ld) + mu + 0.5 * s2;
        const double log_var = std::log(Ld) + std::log(std::expm1(s2)) + 2 * mu + s2;
        CHECK(fw.alpha + 0.5 * fw.beta_sq == doctest::Approx(log_mean).epsilon(1e-10));
        CHECK(std::log(std::expm1(fw.beta_sq)) + 2 * fw.alpha + fw.beta_sq == doctest::Approx(log_var).epsilon(1e-10));
      }
  const auto one = fenton_wilkinson(0.4, 1.3, 1);
  CHECK(one.alpha == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(one.beta_sq == doctest::Approx(1.69).epsilon(1e-12));
  CHECK_THROWS_AS(fenton_wilkinson(0.0, 30.0, 10), DomainError);
}

TEST_CASE("Fenton-Wilkinson moments agree with simulation") {
  Rng rng(3);
  const LognormalSumParams params{10, 200000};
  const auto y = simulate_lognormal_sum(0.2, 0.6, params, rng);
  double m = 0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  const auto fw = fenton_wilkinson(0.2, 0.6, 10);
  CHECK(m == doctest::Approx(std::exp(fw.alpha + 0.5 * fw.beta_sq)).epsilon(0.005));
}

TEST_CASE("log posterior against direct evaluation") {
  Rng rng(7);
  const auto y = simulate_lognormal_sum(0.0, 1.0, {10, 10}, rng);
  const FentonWilkinsonPosterior post(y, 10);
  for (double mu : {-1.0, 0.0, 0.5})
    for (double sigma : {0.2, 1.0, 1.8})
      CHECK(post.log_density(mu, sigma) == doctest::Approx(direct_log_posterior(y, 10, mu, sigma)).epsilon(1e-10));
  CHECK(post.log_density(0.0, -1.0) == -std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(FentonWilkinsonPosterior(std::vector<double>{1.0, -2.0}, 10), FitFailure);
}

TEST_CASE("analytic gradient against finite differences (property)") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const double mu0 = rng.normal(), s0 = 0.3 + rng.uniform() * 1.5;
    const auto y = simulate_lognormal_sum(mu0, s0, {10, 10}, rng);
    const FentonWilkinsonPosterior post(y, 10);
    const double mu = rng.normal(), sigma = 0.2 + 2 * rng.uniform();
    const auto g = post.gradient(mu, sigma);
    const double h = 1e-5;
    const double dmu = (post.log_density(mu + h, sigma) - post.log_density(mu - h, sigma)) / (2 * h);
    const double dsig = (post.log_density(mu, sigma + h) - post.log_density(mu, sigma - h)) / (2 * h);
    CHECK(g[0] == doctest::Approx(dmu).epsilon(1e-6).scale(1.0));
    CHECK(g[1] == doctest::Approx(dsig).epsilon(1e-6).scale(1.0));
  }
}

TEST_CASE("Laplace mode is stationary (property)") {
  int fits = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(seed);
    const double mu = rng.normal();
    const double sigma = std::sqrt(rng.gamma(1.0, 1.0));
    const auto y = simulate_lognormal_sum(mu, sigma, {10, 10}, rng);
    AuxGaussianPosterior aux;
    try {
      aux = laplace_aux(y, 10);
    } catch (const FitFailure&) {
      continue;
    }
    ++fits;
    const FentonWilkinsonPosterior post(y, 10);
    const auto g = post.gradient(aux.mean[0], aux.mean[1]);
    CHECK(g.lpNorm<Eigen::Infinity>() < 1e-6);
    CHECK(aux.cov(0, 0) > 0.0);
    CHECK(aux.cov.determinant() > 0.0);
    CHECK(aux.cov(0, 1) == aux.cov(1, 0));
    // a mode: small moves only lower the density
    const double top = post.log_density(aux.mean[0], aux.mean[1]);
    for (int k = 0; k < 8; ++k) {
      const double a = k * M_PI / 4;
      CHECK(post.log_density(aux.mean[0] + 1e-3 * std::cos(a), aux.mean[1] + 1e-3 * std::sin(a)) <= top);
    }
  }
  CHECK(fits >= 198);
}

TEST_CASE("Laplace covariance matches the curvature") {
  Rng rng(5);
  const auto y = simulate_lognormal_sum(0.0, 1.0, {10, 10}, rng);
  const auto aux = laplace_aux(y, 10);
  const FentonWilkinsonPosterior post(y, 10);
  // second differences of the log density, step large enough to avoid noise
  const double h = 1e-3, m = aux.mean[0], s = aux.mean[1];
  const double f0 = post.log_density(m, s);
  Eigen::Matrix2d H;
  H(0, 0) = (post.log_density(m + h, s) - 2 * f0 + post.log_density(m - h, s)) / (h * h);
  H(1, 1) = (post.log_density(m, s + h) - 2 * f0 + post.log_density(m, s - h)) / (h * h);
  H(0, 1) = H(1, 0) = (post.log_density(m + h, s + h) - post.log_density(m + h, s - h) - post.log_density(m - h, s + h) +
                       post.log_density(m - h, s - h)) /
                      (4 * h * h);
  const Eigen::Matrix2d cov = (-H).inverse();
  CHECK((cov - aux.cov).cwiseAbs().maxCoeff() < 1e-4 * aux.cov.cwiseAbs().maxCoeff() + 1e-8);
}

TEST_CASE("Laplace fit concentrates near the truth with much data") {
  Rng rng(9);
  const auto y = simulate_lognormal_sum(0.3, 0.8, {10, 5000}, rng);
  const auto aux = laplace_aux(y, 10);
  CHECK(std::abs(aux.mean[0] - 0.3) < 4 * std::sqrt(aux.cov(0, 0)) + 0.05);
  CHECK(std::abs(aux.mean[1] - 0.8) < 4 * std::sqrt(aux.cov(1, 1)) + 0.05);
}

TEST_CASE("lognormal model summaries and auxiliary marginals") {
  LognormalSumModel model;
  Rng rng(1);
  const std::vector<double> theta = {0.0, 1.0};
  const auto y = model.simulate(theta, rng);
  CHECK(y.size() == 10);
  const auto s = model.summarize(y);
  REQUIRE(s.has_value());
  CHECK(s->size() == 5);
  const auto margins = LaplaceAuxiliary{}.marginals(as_span(*s));
  CHECK(margins[0]->quantile(0.5) == doctest::Approx((*s)[0]));
  CHECK(margins[1]->cdf((*s)[1] + std::sqrt((*s)[4])) == doctest::Approx(normal_cdf(1.0)));
  Vector bad = *s;
  bad[2] = -1.0;
  CHECK_THROWS_AS(LaplaceAuxiliary{}.marginals(as_span(bad)), FitFailure);
}
