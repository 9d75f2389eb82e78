#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"

#include "recal/abc.hpp"
#include "recal/error.hpp"
#include "recal/models/conjugate_normal.hpp"
#include "recal/particles.hpp"
#include "recal/recalibration.hpp"
#include "recal/regression.hpp"

using namespace recal;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

ParticleSet make_bank(const Matrix& thetas, const Matrix& summaries) {
  ParticleSet p;
  p.thetas = thetas;
  p.summaries = summaries;
  p.weights = Vector::Ones(thetas.rows());
  return p;
}

// Brute-force p for particle i: all leave-one-out distances, the bandwidth
// rule, optional linear adjustment and a fresh weighted ECDF.
std::vector<double> brute_force_p(const ABCApproximation& a, std::size_t i, std::size_t m,
                                  const LocalProcedure& proc) {
  const auto& ps = a.particles;
  const auto n = static_cast<Eigen::Index>(a.size());
  std::vector<double> d;
  std::vector<Eigen::Index> others;
  for (Eigen::Index k = 0; k < n; ++k) {
    if (k == static_cast<Eigen::Index>(i)) continue;
    others.push_back(k);
    d.push_back(distance(row_span(ps.summaries, k), row_span(ps.summaries, static_cast<Eigen::Index>(i)), a.scaling));
  }
  const double h = m >= d.size() ? kInf : bandwidth_for_count(d, m).h;
  const KernelSpec kernel{a.kernel.family, h};
  std::vector<double> w;
  for (double x : d) w.push_back(kernel_weight(x, kernel));
  const auto k = static_cast<Eigen::Index>(others.size());
  Matrix th(k, ps.thetas.cols()), su(k, ps.summaries.cols());
  for (Eigen::Index r = 0; r < k; ++r) {
    th.row(r) = ps.thetas.row(others[static_cast<std::size_t>(r)]);
    su.row(r) = ps.summaries.row(others[static_cast<std::size_t>(r)]);
  }
  if (proc.theta_adjust == ThetaAdjust::linear) {
    try {
      th = adjust_theta_rows(th, su, w, ps.summaries.row(static_cast<Eigen::Index>(i)).transpose(), proc.log_scale);
    } catch (const InsufficientDataError&) {
      return std::vector<double>(static_cast<std::size_t>(th.cols()), std::numeric_limits<double>::quiet_NaN());
    }
  }
  std::vector<double> out;
  for (Eigen::Index j = 0; j < th.cols(); ++j) {
    std::vector<double> col(static_cast<std::size_t>(k));
    for (Eigen::Index r = 0; r < k; ++r) col[static_cast<std::size_t>(r)] = th(r, j);
    out.push_back(WeightedECDF(col, w).cdf(ps.thetas(static_cast<Eigen::Index>(i), j)));
  }
  return out;
}

void check_against_brute_force(const ABCApproximation& a, std::size_t m, const LocalProcedure& proc,
                               double tol = 1e-10) {
  const PMatrix p = compute_p(a, m, proc);
  REQUIRE(p.rows() == a.accepted.size());
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto ref = brute_force_p(a, p.particle[r], m, proc);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (p.flagged[r]) {
        CHECK_FALSE((ref[j] > 0.0 && ref[j] < 1.0 && std::isfinite(ref[j])));
        continue;
      }
      CHECK(p.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) == doctest::Approx(ref[j]).epsilon(tol));
    }
  }
}

/// Same marginals at every s: the local and target marginals coincide.
class FixedEstimator final : public AuxiliaryEstimator {
public:
  std::string name() const override { return "fixed"; }
  MarginalSet marginals(std::span<const double>) const override {
    return {std::make_shared<GaussianMarginal>(0.3, 1.7), std::make_shared<GaussianMarginal>(-2.0, 0.5)};
  }
};

} // namespace

TEST_CASE("local marginal of the middle particle") {
  Matrix th(3, 1), s(3, 1);
  th << 1, 2, 3;
  s << 1, 2, 3;
  const auto a = weight_particles(make_bank(th, s), s.row(1).transpose(), {KernelFamily::uniform, kInf, 0});
  const auto local = local_marginals(a, 1, 2);
  REQUIRE(local.size() == 1);
  const auto* e = dynamic_cast<const WeightedECDF*>(local[0].get());
  REQUIRE(e != nullptr);
  CHECK(e->points() == std::vector<double>{1.0, 3.0});
  CHECK(e->cdf(1.0) == doctest::Approx(0.25));
  CHECK(e->cdf(3.0) == doctest::Approx(0.75));
  // theta at the median of its local marginal
  const auto p = compute_p(a, 2);
  CHECK(p.values(1, 0) == doctest::Approx(0.5));
}

TEST_CASE("single-point local marginal gives one half") {
  Matrix th(3, 1), s(3, 1);
  th << 1, 2, 4;
  s << 1, 2, 4;
  const auto a = weight_particles(make_bank(th, s), s.row(0).transpose(), {KernelFamily::uniform, kInf, 0});
  const auto p = compute_p(a, 1);
  CHECK(p.values(0, 0) == doctest::Approx(0.5));
  const auto local = local_marginals(a, 0, 1);
  CHECK(local[0]->cdf(-100.0) == doctest::Approx(0.5));
}

TEST_CASE("zero-weight particles have no local marginal") {
  Matrix th(4, 1), s(4, 1);
  th << 1, 2, 3, 4;
  s << 1, 2, 3, 4;
  const auto a = weight_particles(make_bank(th, s), s.row(0).transpose(), {KernelFamily::uniform, kInf, 2});
  CHECK_THROWS_AS(local_marginals(a, 3, 1), ContractViolation);
  CHECK_THROWS_AS(local_marginals(a, 9, 1), ContractViolation);
}

TEST_CASE("compute_p matches a brute-force oracle (property)") {
  ConjugateNormalModel model(3);
  Vector s_obs(1);
  s_obs << 0.4;
  const auto bank = simulate_bank(model, 600, 12).particles;

  SUBCASE("scalar summaries, compact kernels") {
    for (KernelFamily fam : {KernelFamily::epanechnikov, KernelFamily::uniform})
      for (std::size_t m : {1, 5, 40, 150}) {
        const auto a = weight_particles(bank, s_obs, {fam, kInf, 80});
        check_against_brute_force(a, m, {});
        check_against_brute_force(a, m, {ThetaAdjust::linear, {}});
      }
  }
  SUBCASE("every other particle") {
    const auto a = weight_particles(bank, s_obs, {KernelFamily::epanechnikov, kInf, 0});
    check_against_brute_force(a, 599, {});
    check_against_brute_force(a, 5000, {});
    check_against_brute_force(a, 599, {ThetaAdjust::linear, {}});
  }
  SUBCASE("gaussian kernel") {
    const auto a = weight_particles(bank, s_obs, {KernelFamily::gaussian, kInf, 80});
    check_against_brute_force(a, 60, {});
    check_against_brute_force(a, 60, {ThetaAdjust::linear, {}});
  }
  SUBCASE("tied scalar summaries") {
    ParticleSet tied = bank;
    for (Eigen::Index i = 0; i < tied.summaries.rows(); ++i)
      tied.summaries(i, 0) = std::round(tied.summaries(i, 0) * 10) / 10;
    const auto a = weight_particles(tied, s_obs, {KernelFamily::epanechnikov, kInf, 100});
    check_against_brute_force(a, 30, {});
    // weights near 1e-16 beside unit weights leave the slope ill-conditioned
    check_against_brute_force(a, 30, {ThetaAdjust::linear, {}}, 1e-8);
  }
  SUBCASE("two summaries, two parameters, log scale") {
    Rng rng(5);
    const Eigen::Index n = 400;
    Matrix th(n, 2), s(n, 2);
    for (Eigen::Index i = 0; i < n; ++i) {
      th(i, 0) = rng.normal();
      th(i, 1) = std::exp(0.3 * rng.normal());
      s(i, 0) = th(i, 0) + 0.5 * rng.normal();
      s(i, 1) = std::log(th(i, 1)) + 0.3 * rng.normal();
    }
    Vector so(2);
    so << 0.1, 0.0;
    const auto a = weight_particles(make_bank(th, s), so, {KernelFamily::epanechnikov, kInf, 60});
    check_against_brute_force(a, 50, {});
    check_against_brute_force(a, 50, {ThetaAdjust::linear, {false, true}});
  }
}

TEST_CASE("recalibration of p = 1/2 gives the target median") {
  ConjugateNormalModel model;
  Vector s_obs(1);
  s_obs << 1.0;
  const auto a = run_abc(model, s_obs, 2000, {KernelFamily::epanechnikov, kInf, 200}, 3);
  PMatrix p;
  p.particle = a.accepted;
  p.values = Matrix::Constant(static_cast<Eigen::Index>(a.accepted.size()), 1, 0.5);
  p.flagged.assign(a.accepted.size(), 0);
  const auto targets = target_marginals(a);
  const auto res = recalibrate(a, p, targets);
  const double median = targets[0]->quantile(0.5);
  CHECK(res.recalibrated_thetas.cwiseAbs().maxCoeff() > 0.0);
  for (Eigen::Index r = 0; r < res.recalibrated_thetas.rows(); ++r) CHECK(res.recalibrated_thetas(r, 0) == median);
}

TEST_CASE("recalibration is the identity when local and target marginals coincide") {
  ConjugateNormalModel model;
  Vector s_obs(1);
  s_obs << 0.2;
  const auto a = run_abc(model, s_obs, 3000, {KernelFamily::epanechnikov, kInf, 300}, 8);
  const auto targets = target_marginals(a);
  const auto* f = dynamic_cast<const WeightedECDF*>(targets[0].get());
  PMatrix p;
  p.particle = a.accepted;
  p.values.resize(static_cast<Eigen::Index>(a.accepted.size()), 1);
  p.flagged.assign(a.accepted.size(), 0);
  for (std::size_t r = 0; r < a.accepted.size(); ++r)
    p.values(static_cast<Eigen::Index>(r), 0) = f->cdf(a.particles.thetas(static_cast<Eigen::Index>(a.accepted[r]), 0));
  const auto res = recalibrate(a, p, targets);
  for (std::size_t r = 0; r < a.accepted.size(); ++r) {
    const double th = a.particles.thetas(static_cast<Eigen::Index>(a.accepted[r]), 0);
    CHECK(std::abs(res.recalibrated_thetas(static_cast<Eigen::Index>(r), 0) - th) < 1e-10);
  }

  // auxiliary path with s-independent marginals
  Matrix th(500, 2), s(500, 1);
  Rng rng(2);
  for (Eigen::Index i = 0; i < 500; ++i) {
    th(i, 0) = 0.3 + 1.7 * rng.normal();
    th(i, 1) = -2.0 + 0.5 * rng.normal();
    s(i, 0) = rng.normal();
  }
  Vector so(1);
  so << 0.0;
  const auto b = weight_particles(make_bank(th, s), so, {KernelFamily::uniform, kInf, 0});
  const auto aux = recalibrate_auxiliary(b, FixedEstimator{});
  CHECK(aux.provenance.n_excluded == 0);
  CHECK((aux.recalibrated_thetas - th).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("recalibration preserves the order of p (property)") {
  ConjugateNormalModel model;
  Vector s_obs(1);
  s_obs << -0.5;
  const auto a = run_abc(model, s_obs, 2000, {KernelFamily::epanechnikov, kInf, 400}, 5);
  const auto res = recalibrate_abc(a, {});
  std::vector<std::size_t> idx;
  for (std::size_t r = 0; r < res.p.rows(); ++r)
    if (!res.p.flagged[r]) idx.push_back(r);
  std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) {
    return res.p.values(static_cast<Eigen::Index>(x), 0) < res.p.values(static_cast<Eigen::Index>(y), 0);
  });
  for (std::size_t k = 1; k < idx.size(); ++k)
    CHECK(res.recalibrated_thetas(static_cast<Eigen::Index>(idx[k]), 0) >=
          res.recalibrated_thetas(static_cast<Eigen::Index>(idx[k - 1]), 0));
}

TEST_CASE("auxiliary recalibration with the exact posterior") {
  ConjugateNormalModel model(4);
  ConjugateNormalPosterior exact(model);
  Vector s_obs(1);
  s_obs << 0.8;
  const auto a = run_abc(model, s_obs, 5000, {KernelFamily::uniform, kInf, 0}, 21);
  const auto res = recalibrate_auxiliary(a, exact);
  // F_s_obs^-1(F_s(theta)) = theta - n/(n+1) (s - s_obs)
  double mean = 0, m2 = 0;
  for (std::size_t r = 0; r < res.particle.size(); ++r) {
    const auto i = static_cast<Eigen::Index>(res.particle[r]);
    const double want = a.particles.thetas(i, 0) - 0.8 * (a.particles.summaries(i, 0) - 0.8);
    const double got = res.recalibrated_thetas(static_cast<Eigen::Index>(r), 0);
    CHECK(got == doctest::Approx(want).epsilon(1e-8));
    mean += got;
    m2 += got * got;
  }
  const double n = static_cast<double>(res.particle.size());
  mean /= n;
  const double sd = std::sqrt(m2 / n - mean * mean);
  CHECK(mean == doctest::Approx(model.posterior_mean(0.8)).epsilon(0.05));
  CHECK(sd == doctest::Approx(model.posterior_sd()).epsilon(0.05));
}

TEST_CASE("p adjustment on a PMatrix keeps flagged rows") {
  ConjugateNormalModel model;
  Vector s_obs(1);
  s_obs << 0.0;
  const auto a = run_abc(model, s_obs, 2000, {KernelFamily::epanechnikov, kInf, 300}, 6);
  auto p = compute_p(a, 0);
  p.flagged[3] = 1;
  p.values.row(3).setConstant(std::numeric_limits<double>::quiet_NaN());
  const auto adj = adjust_p(p, a);
  CHECK(std::isnan(adj.values(3, 0)));
  for (std::size_t r = 0; r < adj.rows(); ++r) {
    if (r == 3) continue;
    CHECK(adj.values(static_cast<Eigen::Index>(r), 0) > 0.0);
    CHECK(adj.values(static_cast<Eigen::Index>(r), 0) < 1.0);
  }
  const auto res = recalibrate(a, adj, target_marginals(a));
  CHECK(res.recalibrated_thetas(3, 0) == a.particles.thetas(static_cast<Eigen::Index>(a.accepted[3]), 0));
  CHECK(res.provenance.n_flagged == 1);
}

TEST_CASE("recalibration is deterministic across thread counts") {
  ConjugateNormalModel model(2);
  Vector s_obs(1);
  s_obs << 0.5;
  const auto a = run_abc(model, s_obs, 4000, {KernelFamily::epanechnikov, kInf, 300}, 9);
  RecalibrationOptions o1, o3;
  o3.threads = 3;
  o1.procedure.theta_adjust = o3.procedure.theta_adjust = ThetaAdjust::linear;
  o1.p_adjust = o3.p_adjust = PAdjust::logit_regression;
  const auto r1 = recalibrate_abc(a, o1);
  const auto r3 = recalibrate_abc(a, o3);
  const auto again = recalibrate_abc(a, o1);
  CHECK(r1.recalibrated_thetas == r3.recalibrated_thetas);
  CHECK(r1.recalibrated_thetas == again.recalibrated_thetas);
  CHECK(r1.p.values == r3.p.values);
  CHECK(r1.provenance.local_accept_count == 300);
}

TEST_CASE("recalibration improves a wide ABC posterior") {
  // At a large h the accepted sample is much wider than the exact posterior;
  // recalibration should move its spread towards the truth.
  ConjugateNormalModel model(10);
  Vector s_obs(1);
  s_obs << 0.5;
  const auto a = run_abc(model, s_obs, 20000, {KernelFamily::epanechnikov, kInf, 4000}, 31);
  const auto res = recalibrate_abc(a, {});
  auto wsd = [](const Matrix& m, const Vector& w) {
    const double mu = (m.col(0).array() * w.array()).sum() / w.sum();
    return std::sqrt(((m.col(0).array() - mu).square() * w.array()).sum() / w.sum());
  };
  Matrix acc(static_cast<Eigen::Index>(a.accepted.size()), 1);
  Vector w(static_cast<Eigen::Index>(a.accepted.size()));
  for (std::size_t r = 0; r < a.accepted.size(); ++r) {
    acc(static_cast<Eigen::Index>(r), 0) = a.particles.thetas(static_cast<Eigen::Index>(a.accepted[r]), 0);
    w[static_cast<Eigen::Index>(r)] = a.particles.weights[static_cast<Eigen::Index>(a.accepted[r])];
  }
  const double exact = model.posterior_sd();
  CHECK(std::abs(wsd(res.recalibrated_thetas, res.weights) - exact) < std::abs(wsd(acc, w) - exact));
}
