#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <vector>

#include "doctest.h"

#include "recal/abc.hpp"
#include "recal/csv.hpp"
#include "recal/error.hpp"
#include "recal/kernels.hpp"
#include "recal/marginal.hpp"
#include "recal/models/conjugate_normal.hpp"
#include "recal/particles.hpp"
#include "recal/prior.hpp"
#include "recal/rng.hpp"

using namespace recal;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

} // namespace

TEST_CASE("rng streams are reproducible and distinct") {
  Rng a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  bool differs_c = false, differs_d = false;
  for (int k = 0; k < 100; ++k) {
    const auto x = a();
    CHECK(x == b());
    differs_c |= x != c();
    differs_d |= x != d();
  }
  CHECK(differs_c);
  CHECK(differs_d);
  CHECK(derive_seed(1, 2) != derive_seed(2, 1));
}

TEST_CASE("rng draws have the right moments") {
  Rng rng(11);
  const int n = 200000;
  double su = 0, sz = 0, sz2 = 0, sg = 0, sp = 0;
  double umin = 1, umax = 0;
  for (int i = 0; i < n; ++i) {
    const double u = rng.uniform();
    umin = std::min(umin, u);
    umax = std::max(umax, u);
    su += u;
    const double z = rng.normal();
    sz += z;
    sz2 += z * z;
    sg += rng.gamma(3.0, 2.0);
    sp += static_cast<double>(rng.poisson(4.5));
  }
  CHECK(umin > 0.0);
  CHECK(umax < 1.0);
  CHECK(su / n == doctest::Approx(0.5).epsilon(0.01));
  CHECK(std::abs(sz / n) < 0.01);
  CHECK(sz2 / n == doctest::Approx(1.0).epsilon(0.01));
  CHECK(sg / n == doctest::Approx(1.5).epsilon(0.01));
  CHECK(sp / n == doctest::Approx(4.5).epsilon(0.01));
}

TEST_CASE("normal cdf and quantile against reference values") {
  CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
  CHECK(normal_cdf(-3.0) == doctest::Approx(0.0013498980316300933).epsilon(1e-12));
  CHECK(normal_cdf(0.0) == 0.5);
  CHECK_THROWS_AS(normal_quantile(0.0), DomainError);
  CHECK_THROWS_AS(normal_quantile(1.0), DomainError);
  for (double p : {1e-12, 1e-6, 0.01, 0.3, 0.5, 0.77, 0.999, 1 - 1e-9})
    CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-10));
}

TEST_CASE("prior margins") {
  const Margin g = Margin::gamma(1.0, 1.0).on_square();
  // sigma^2 ~ Exp(1) gives P(sigma <= t) = 1 - exp(-t^2)
  for (double t : {0.1, 0.5, 1.0, 2.0}) CHECK(g.cdf(t) == doctest::Approx(1.0 - std::exp(-t * t)).epsilon(1e-12));
  CHECK(g.cdf(-1.0) == 0.0);
  CHECK(g.logpdf(-1.0) == -kInf);
  Rng rng(5);
  double s = 0;
  for (int i = 0; i < 100000; ++i) {
    const double x = g.sample(rng);
    s += x * x;
  }
  CHECK(s / 100000 == doctest::Approx(1.0).epsilon(0.02));
  const Margin u = Margin::uniform(-1.0, 2.0);
  CHECK(u.cdf(0.5) == doctest::Approx(0.5));
  CHECK(std::exp(u.logpdf(0.0)) == doctest::Approx(1.0 / 3.0));
  CHECK_THROWS_AS(Margin::normal(0.0, -1.0).validate(), ConfigError);
}

TEST_CASE("kernel weights") {
  const KernelSpec epa{KernelFamily::epanechnikov, 2.0};
  CHECK(kernel_weight(0.0, epa) == 1.0);
  CHECK(kernel_weight(1.0, epa) == doctest::Approx(0.75));
  CHECK(kernel_weight(2.0, epa) == 0.0);
  const KernelSpec uni{KernelFamily::uniform, 1.0};
  CHECK(kernel_weight(0.999, uni) == 1.0);
  CHECK(kernel_weight(1.0, uni) == 0.0);
  const KernelSpec gau{KernelFamily::gaussian, 1.0};
  CHECK(kernel_weight(1.0, gau) == doctest::Approx(std::exp(-0.5)));
  CHECK(kernel_weight(1e9, KernelSpec{}) == 1.0);
  CHECK_THROWS_AS(parse_kernel_family("box"), ConfigError);
}

TEST_CASE("bandwidth for a target count") {
  const std::vector<double> d = {0.4, 0.1, 0.3, 0.2};
  auto b = bandwidth_for_count(d, 2);
  CHECK(b.h == doctest::Approx(0.25));
  CHECK(b.count == 2);
  const std::vector<double> tied = {0.1, 0.2, 0.2, 0.4};
  b = bandwidth_for_count(tied, 2);
  CHECK(b.count == 3);
  CHECK(b.h == doctest::Approx(0.3));
  const std::vector<double> all_tied = {0.1, 0.2, 0.2};
  b = bandwidth_for_count(all_tied, 2);
  CHECK(b.h == kInf);
  CHECK_THROWS_AS(bandwidth_for_count(d, 0), ConfigError);
  CHECK_THROWS_AS(bandwidth_for_count(d, 4), ConfigError);
}

TEST_CASE("bandwidth admits exactly the m closest (property)") {
  Rng rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10 + static_cast<std::size_t>(rng.uniform() * 200);
    std::vector<double> d(n);
    for (auto& x : d) x = std::abs(rng.normal());
    const std::size_t m = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - 1));
    const auto b = bandwidth_for_count(d, m);
    const auto inside = static_cast<std::size_t>(std::count_if(d.begin(), d.end(), [&](double x) { return x < b.h; }));
    CHECK(inside == m);
    CHECK(b.count == m);
  }
}

TEST_CASE("MAD scaling") {
  Matrix s(5, 2);
  s << 1, 3, 2, 3, 3, 3, 4, 3, 100, 3;
  const auto spec = DistanceSpec::from_mad(s);
  CHECK(spec.scales[0] == doctest::Approx(1.0));
  CHECK(spec.scales[1] == 1.0); // zero MAD falls back to 1
  const std::vector<double> a = {3, 3}, o = {1, 5};
  CHECK(distance(a, o, spec) == doctest::Approx(std::sqrt(8.0)));
}

TEST_CASE("scalar window agrees with the generic neighbourhood (property)") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Index n = 50 + static_cast<Eigen::Index>(rng.uniform() * 300);
    Matrix s1(n, 1), s2(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      // rounded values force ties in the distances
      s1(i, 0) = trial % 2 ? std::round(rng.normal() * 20) / 20 : rng.normal();
      s2(i, 0) = s1(i, 0);
      s2(i, 1) = 0.0;
    }
    const auto scale1 = DistanceSpec::from_mad(s1);
    DistanceSpec scale2;
    scale2.scales = Vector::Ones(2);
    scale2.scales[0] = scale1.scales[0];
    NeighborFinder f1(s1, scale1), f2(s2, scale2);
    REQUIRE(f1.sorted());
    REQUIRE_FALSE(f2.sorted());
    NeighborFinder::Neighborhood a, b;
    NeighborFinder::Window w;
    for (KernelFamily fam : {KernelFamily::epanechnikov, KernelFamily::uniform}) {
      for (int q = 0; q < 10; ++q) {
        const auto i = static_cast<std::size_t>(rng.uniform() * static_cast<double>(n));
        const auto m = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(n - 1));
        f1.query(i, m, fam, a);
        f2.query(i, m, fam, b);
        CHECK((a.h == b.h || a.h == doctest::Approx(b.h)));
        std::vector<std::pair<std::size_t, double>> pa, pb, pw;
        for (std::size_t k = 0; k < a.index.size(); ++k) pa.emplace_back(a.index[k], a.weight[k]);
        for (std::size_t k = 0; k < b.index.size(); ++k) pb.emplace_back(b.index[k], b.weight[k]);
        f1.window(i, m, fam, w);
        for (std::size_t r = w.first; r < w.last; ++r)
          if (w.weight[r - w.first] > 0) pw.emplace_back(f1.order()[r], w.weight[r - w.first]);
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        std::sort(pw.begin(), pw.end());
        REQUIRE(pa.size() == pb.size());
        REQUIRE(pw.size() == pb.size());
        CHECK(pa.size() >= std::min<std::size_t>(m, static_cast<std::size_t>(n - 1)));
        for (std::size_t k = 0; k < pa.size(); ++k) {
          CHECK(pa[k].first == pb[k].first);
          CHECK(pw[k].first == pb[k].first);
          CHECK(pa[k].second == doctest::Approx(pb[k].second).epsilon(1e-12));
          CHECK(pw[k].second == doctest::Approx(pb[k].second).epsilon(1e-12));
          CHECK(pa[k].first != i);
        }
      }
    }
  }
}

TEST_CASE("weighted ECDF plotting positions") {
  const std::vector<double> v = {3, 1, 2};
  WeightedECDF f(v, std::vector<double>{1, 1, 1});
  CHECK(f.cdf(2.0) == doctest::Approx(0.5));
  CHECK(f.cdf(1.0) == doctest::Approx(1.0 / 6));
  CHECK(f.cdf(1.5) == doctest::Approx(1.0 / 3));
  CHECK(f.cdf(-10.0) == doctest::Approx(1.0 / 6));
  CHECK(f.cdf(10.0) == doctest::Approx(5.0 / 6));
  CHECK(f.quantile(0.5) == doctest::Approx(2.0));
  CHECK(f.quantile(1.0 / 3) == doctest::Approx(1.5));
  CHECK(f.quantile(0.01) == 1.0);
  CHECK(f.quantile(0.99) == 3.0);

  // duplicates merge into one point
  WeightedECDF g(std::vector<double>{1, 1, 2}, std::vector<double>{1, 1, 1});
  CHECK(g.points().size() == 2);
  CHECK(g.cdf(1.0) == doctest::Approx(1.0 / 3));
  CHECK(g.cdf(2.0) == doctest::Approx(5.0 / 6));

  // zero weights drop out
  WeightedECDF h(std::vector<double>{1, 5, 2}, std::vector<double>{1, 0, 1});
  CHECK(h.points().size() == 2);
  CHECK_THROWS_AS(WeightedECDF(std::vector<double>{1.0}, std::vector<double>{0.0}), DegenerateError);
  CHECK_THROWS_AS(WeightedECDF(std::vector<double>{NAN}, std::vector<double>{1.0}), ContractViolation);
  CHECK_THROWS_AS(WeightedECDF(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), ContractViolation);
}

TEST_CASE("weighted ECDF inversion and single-pass evaluation (property)") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(rng.uniform() * 100);
    std::vector<double> v(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      v[i] = trial % 3 == 0 ? std::round(rng.normal() * 3) : rng.normal();
      w[i] = rng.uniform() < 0.2 ? 0.0 : rng.uniform();
    }
    w[0] = 1.0;
    WeightedECDF f(v, w);
    const auto& pts = f.points();
    for (int k = 0; k < 20; ++k) {
      const double x = pts.front() + rng.uniform() * (pts.back() - pts.front());
      CHECK(f.quantile(f.cdf(x)) == doctest::Approx(x).epsilon(1e-10));
      CHECK(smoothed_cdf_at(v, w, x) == doctest::Approx(f.cdf(x)).epsilon(1e-12));
      const double p = f.p_min() + rng.uniform() * (f.p_max() - f.p_min());
      CHECK(f.cdf(f.quantile(p)) == doctest::Approx(p).epsilon(1e-10));
    }
    double prev = 0;
    for (double x = pts.front() - 1; x < pts.back() + 1; x += 0.05) {
      const double c = f.cdf(x);
      CHECK(c > 0.0);
      CHECK(c < 1.0);
      CHECK(c >= prev);
      prev = c;
    }
  }
  CHECK(std::isnan(smoothed_cdf_at(std::vector<double>{1.0}, std::vector<double>{0.0}, 1.0)));
}

TEST_CASE("weight_particles accepts the requested count") {
  ConjugateNormalModel model;
  const auto bank = simulate_bank(model, 2000, 4).particles;
  Vector s_obs(1);
  s_obs << 0.7;
  const auto a = weight_particles(bank, s_obs, {KernelFamily::epanechnikov, kInf, 150});
  CHECK(a.accepted.size() == 150);
  CHECK(a.particles.weights.sum() == doctest::Approx(1.0));
  CHECK(std::is_sorted(a.accepted.begin(), a.accepted.end()));
  double max_in = 0, min_out = kInf;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.distances[static_cast<Eigen::Index>(i)];
    if (a.particles.weights[static_cast<Eigen::Index>(i)] > 0) max_in = std::max(max_in, d);
    else min_out = std::min(min_out, d);
  }
  CHECK(max_in < a.kernel.h);
  CHECK(min_out >= a.kernel.h);

  const auto all = weight_particles(bank, s_obs, {KernelFamily::uniform, kInf, 0});
  CHECK(all.accepted.size() == 2000);
  CHECK(all.particles.weights[5] == doctest::Approx(1.0 / 2000));

  CHECK_THROWS_AS(weight_particles(bank, s_obs, {KernelFamily::uniform, 0.0, 0}), ConfigError);
  Vector far(1);
  far << 1e6;
  CHECK_THROWS_AS(weight_particles(bank, far, {KernelFamily::uniform, 1e-3, 0}), DegenerateError);
}

TEST_CASE("run_abc is deterministic and thread-count invariant") {
  ConjugateNormalModel model(5);
  Vector s_obs(1);
  s_obs << 0.3;
  const WeightingSpec w{KernelFamily::epanechnikov, kInf, 100};
  const auto a = run_abc(model, s_obs, 3000, w, 17, 1);
  const auto b = run_abc(model, s_obs, 3000, w, 17, 3);
  const auto c = run_abc(model, s_obs, 3000, w, 18, 1);
  CHECK(a.particles.thetas == b.particles.thetas);
  CHECK(a.particles.weights == b.particles.weights);
  CHECK(a.accepted == b.accepted);
  CHECK(a.particles.thetas != c.particles.thetas);
  // accepted thetas approximate the exact posterior mean
  const auto f = marginal_of(a, 0);
  CHECK(std::abs(f.quantile(0.5) - model.posterior_mean(0.3)) < 0.15);
}

TEST_CASE("particle CSV round trip is exact") {
  ConjugateNormalModel model;
  auto bank = simulate_bank(model, 50, 2).particles;
  bank.weights[3] = 0.0;
  bank.weights[4] = 1.0 / 3.0;
  const auto path = std::filesystem::temp_directory_path() / "recal_particles_rt.csv";
  write_particles_csv(path, bank);
  const auto back = read_particles_csv(path);
  CHECK(back.thetas == bank.thetas);
  CHECK(back.summaries == bank.summaries);
  CHECK(back.weights == bank.weights);
  const auto table = read_csv(path);
  CHECK(table.header == std::vector<std::string>{"theta_1", "s_1", "weight"});
  CHECK_THROWS_AS(table.column("nope"), ContractViolation);
  std::filesystem::remove(path);

  Rng rng(1);
  for (int i = 0; i < 1000; ++i) {
    const double x = rng.normal() * std::pow(10.0, rng.uniform(-30, 30));
    CHECK(std::stod(format_double(x)) == x);
  }
}

TEST_CASE("particle set validation") {
  ParticleSet p;
  p.thetas = Matrix::Zero(3, 1);
  p.summaries = Matrix::Zero(3, 1);
  p.weights = Vector::Zero(3);
  CHECK_THROWS_AS(p.normalize_weights(), DegenerateError);
  p.weights[1] = -1;
  CHECK_THROWS_AS(p.validate(), ContractViolation);
  p.weights = Vector::Ones(2);
  CHECK_THROWS_AS(p.validate(), ContractViolation);
}
