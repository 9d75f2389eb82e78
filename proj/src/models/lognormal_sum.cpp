#include "recal/models/lognormal_sum.hpp"

#include <cmath>
#include <limits>
#include <optional>

#include "recal/error.hpp"

namespace recal {

namespace {

constexpr double kMaxSigmaSq = 700.0;
constexpr double kGradTol = 1e-8;
constexpr std::size_t kMaxIter = 200;
constexpr int kNewtonIter = 20;
constexpr double kHalfLog2Pi = 0.91893853320467274178;

struct FitOutcome {
  Eigen::Vector2d theta;
  double value = -std::numeric_limits<double>::infinity();
  std::size_t iterations = 0;
  bool converged = false;
};

// BFGS on u = (mu, log sigma), minimising the negative log posterior.
FitOutcome bfgs(const FentonWilkinsonPosterior& post, Eigen::Vector2d start) {
  auto objective = [&](const Eigen::Vector2d& u) {
    if (2.0 * u[1] > std::log(kMaxSigmaSq)) return std::numeric_limits<double>::infinity();
    const double v = -post.log_density(u[0], std::exp(u[1]));
    return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
  };
  auto grad_theta = [&](const Eigen::Vector2d& u) { return post.gradient(u[0], std::exp(u[1])); };
  auto grad_u = [&](const Eigen::Vector2d& u, const Eigen::Vector2d& g) {
    return Eigen::Vector2d(-g[0], -std::exp(u[1]) * g[1]);
  };

  FitOutcome out;
  if (!(start[1] > 0.0)) return out;
  Eigen::Vector2d u(start[0], std::log(start[1]));
  double f = objective(u);
  if (!std::isfinite(f)) return out;
  Eigen::Vector2d gt = grad_theta(u);
  Eigen::Vector2d g = grad_u(u, gt);
  Eigen::Matrix2d hinv = Eigen::Matrix2d::Identity() / std::max(1.0, g.norm());
  bool fresh = true;

  for (std::size_t it = 0; it < kMaxIter; ++it) {
    out.iterations = it;
    if (gt.lpNorm<Eigen::Infinity>() < kGradTol) {
      out.converged = true;
      break;
    }
    Eigen::Vector2d dir = -hinv * g;
    if (dir.dot(g) >= 0.0) {
      hinv = Eigen::Matrix2d::Identity() / std::max(1.0, g.norm());
      dir = -hinv * g;
    }
    double step = 1.0;
    Eigen::Vector2d u_new;
    double f_new = 0.0;
    bool moved = false;
    for (int ls = 0; ls < 60; ++ls) {
      u_new = u + step * dir;
      f_new = objective(u_new);
      if (f_new < f && f_new <= f + 1e-4 * step * dir.dot(g)) {
        moved = true;
        break;
      }
      step *= 0.5;
    }
    if (!moved && !fresh) {
      // Stale curvature: restart from a scaled steepest-descent step.
      hinv = Eigen::Matrix2d::Identity() / std::max(1.0, g.norm());
      fresh = true;
      continue;
    }
    if (!moved) {
      // No further descent in floating point: accept if stationary relative
      // to the objective's magnitude.
      out.converged = gt.lpNorm<Eigen::Infinity>() < kGradTol * std::max(1.0, std::abs(f));
      break;
    }
    const Eigen::Vector2d gt_new = grad_theta(u_new);
    const Eigen::Vector2d g_new = grad_u(u_new, gt_new);
    const Eigen::Vector2d sv = u_new - u;
    const Eigen::Vector2d yv = g_new - g;
    const double sy = sv.dot(yv);
    if (sy > 1e-300) {
      const double rho = 1.0 / sy;
      const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
      hinv = (I - rho * sv * yv.transpose()) * hinv * (I - rho * yv * sv.transpose()) + rho * sv * sv.transpose();
    }
    u = u_new;
    f = f_new;
    g = g_new;
    gt = gt_new;
    fresh = false;
  }
  out.theta = Eigen::Vector2d(u[0], std::exp(u[1]));
  out.value = -f;
  return out;
}

// Hessian of the log posterior in (mu, sigma), central differences of the
// analytic gradient.
std::optional<Eigen::Matrix2d> fd_hessian(const FentonWilkinsonPosterior& post, const Eigen::Vector2d& theta) {
  Eigen::Matrix2d hess;
  for (int k = 0; k < 2; ++k) {
    const double h = 1e-4 * (1.0 + std::abs(theta[k]));
    Eigen::Vector2d up = theta, dn = theta;
    up[k] += h;
    dn[k] -= h;
    if (!(dn[1] > 0.0)) return std::nullopt;
    hess.col(k) = (post.gradient(up[0], up[1]) - post.gradient(dn[0], dn[1])) / (2.0 * h);
  }
  return Eigen::Matrix2d(0.5 * (hess + hess.transpose()));
}

// Newton steps from a BFGS end point until the gradient test passes.
void newton_polish(const FentonWilkinsonPosterior& post, FitOutcome& fit) {
  Eigen::Vector2d theta = fit.theta;
  double value = post.log_density(theta[0], theta[1]);
  Eigen::Vector2d g = post.gradient(theta[0], theta[1]);
  for (int it = 0; it < kNewtonIter; ++it) {
    if (g.lpNorm<Eigen::Infinity>() < kGradTol) {
      fit.converged = true;
      break;
    }
    const auto hess = fd_hessian(post, theta);
    if (!hess) break;
    const Eigen::Matrix2d neg = -*hess;
    Eigen::LLT<Eigen::Matrix2d> llt(neg);
    if (llt.info() != Eigen::Success) break;
    const Eigen::Vector2d step = llt.solve(g);
    double t = 1.0;
    bool moved = false;
    for (int ls = 0; ls < 30; ++ls) {
      const Eigen::Vector2d cand = theta + t * step;
      const double v = cand[1] > 0.0 ? post.log_density(cand[0], cand[1]) : -std::numeric_limits<double>::infinity();
      const Eigen::Vector2d gc = cand[1] > 0.0 ? post.gradient(cand[0], cand[1]) : g;
      if (v >= value - 1e-12 * std::max(1.0, std::abs(value)) && gc.lpNorm<Eigen::Infinity>() < g.lpNorm<Eigen::Infinity>()) {
        theta = cand;
        value = std::max(value, v);
        g = gc;
        moved = true;
        break;
      }
      t *= 0.5;
    }
    if (!moved) break;
  }
  if (!fit.converged) fit.converged = g.lpNorm<Eigen::Infinity>() < kGradTol * std::max(1.0, std::abs(value));
  fit.theta = theta;
  fit.value = value;
}

} // namespace

FentonWilkinson fenton_wilkinson(double mu, double sigma, std::size_t L) {
  if (!(sigma >= 0.0) || L < 1) throw ConfigError("fenton_wilkinson: need sigma >= 0 and L >= 1");
  const double s2 = sigma * sigma;
  if (s2 > kMaxSigmaSq) throw DomainError("fenton_wilkinson: sigma^2 > 700 overflows");
  FentonWilkinson fw;
  fw.beta_sq = std::log1p(std::expm1(s2) / static_cast<double>(L));
  fw.alpha = mu + std::log(static_cast<double>(L)) + 0.5 * (s2 - fw.beta_sq);
  return fw;
}

FentonWilkinsonPosterior::FentonWilkinsonPosterior(std::span<const double> y, std::size_t L)
    : n_(static_cast<double>(y.size())), s1_(0.0), s2_(0.0), L_(static_cast<double>(L)) {
  if (L < 1) throw ConfigError("lognormal-sum: L must be >= 1");
  for (double v : y) {
    if (!(v > 0.0)) throw FitFailure("lognormal-sum: nonpositive observation");
    const double z = std::log(v);
    s1_ += z;
    s2_ += z * z;
  }
}

double FentonWilkinsonPosterior::log_density(double mu, double sigma) const {
  if (!(sigma > 0.0) || sigma * sigma > kMaxSigmaSq) return -std::numeric_limits<double>::infinity();
  const FentonWilkinson fw = fenton_wilkinson(mu, sigma, static_cast<std::size_t>(L_));
  const double q = s2_ - 2.0 * fw.alpha * s1_ + n_ * fw.alpha * fw.alpha;
  const double loglik = -s1_ - n_ * kHalfLog2Pi - 0.5 * n_ * std::log(fw.beta_sq) - 0.5 * q / fw.beta_sq;
  const double logprior = -kHalfLog2Pi - 0.5 * mu * mu + std::log(2.0 * sigma) - sigma * sigma;
  return loglik + logprior;
}

Eigen::Vector2d FentonWilkinsonPosterior::gradient(double mu, double sigma) const {
  const double s2 = sigma * sigma;
  const FentonWilkinson fw = fenton_wilkinson(mu, sigma, static_cast<std::size_t>(L_));
  const double b = fw.beta_sq;
  const double dbeta = (std::exp(s2) * 2.0 * sigma / L_) / (1.0 + std::expm1(s2) / L_);
  const double dalpha_dsigma = sigma - 0.5 * dbeta;
  const double q = s2_ - 2.0 * fw.alpha * s1_ + n_ * fw.alpha * fw.alpha;
  const double dl_dalpha = (s1_ - n_ * fw.alpha) / b;
  const double dl_dbeta = -0.5 * n_ / b + 0.5 * q / (b * b);
  return {dl_dalpha - mu, dl_dalpha * dalpha_dsigma + dl_dbeta * dbeta + 1.0 / sigma - 2.0 * sigma};
}

Eigen::Vector2d FentonWilkinsonPosterior::moment_start() const {
  const double a = s1_ / n_;
  const double b = std::max(s2_ / n_ - a * a, 1e-6);
  const double s2 = std::log1p(L_ * std::expm1(b));
  const double sigma = std::sqrt(std::min(s2, 50.0));
  const double mu = a - std::log(L_) - 0.5 * (sigma * sigma - b);
  return {mu, sigma};
}

AuxGaussianPosterior laplace_aux(std::span<const double> y, std::size_t L) {
  if (y.size() < 2) throw FitFailure("laplace_aux: need at least two observations");
  const FentonWilkinsonPosterior post(y, L);
  const std::array<Eigen::Vector2d, 5> starts = {post.moment_start(), Eigen::Vector2d(0.0, 1.0),
                                                 Eigen::Vector2d(1.0, 0.5), Eigen::Vector2d(-1.0, 1.5),
                                                 Eigen::Vector2d(0.0, 0.3)};
  FitOutcome best;
  for (const auto& s : starts) {
    const FitOutcome r = bfgs(post, s);
    if (std::isfinite(r.value) && r.value > best.value) best = r;
  }
  if (!std::isfinite(best.value)) throw FitFailure("laplace_aux: no start reached a finite posterior value");
  if (!best.converged) newton_polish(post, best);
  if (!best.converged) throw FitFailure("laplace_aux: no start converged");

  const auto hess = fd_hessian(post, best.theta);
  if (!hess) throw FitFailure("laplace_aux: mode too close to sigma = 0");
  const Eigen::Matrix2d neg = -*hess;
  Eigen::LLT<Eigen::Matrix2d> llt(neg);
  if (llt.info() != Eigen::Success || !(neg(0, 0) > 0.0) || !(neg.determinant() > 0.0))
    throw FitFailure("laplace_aux: Hessian not positive definite");
  AuxGaussianPosterior out;
  out.mean = best.theta;
  out.cov = neg.inverse();
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  out.iterations = best.iterations;
  return out;
}

DataSet simulate_lognormal_sum(double mu, double sigma, const LognormalSumParams& params, Rng& rng) {
  DataSet y(params.n);
  for (double& v : y) {
    double s = 0.0;
    for (std::size_t l = 0; l < params.L; ++l) s += std::exp(mu + sigma * rng.normal());
    v = s;
  }
  return y;
}

LognormalSumModel::LognormalSumModel(LognormalSumParams params)
    : params_(params), prior_({Margin::normal(0.0, 1.0), Margin::gamma(1.0, 1.0).on_square()}) {
  if (params.L < 1 || params.n < 2) throw ConfigError("lognormal-sum: need L >= 1 and n >= 2");
}

DataSet LognormalSumModel::simulate(std::span<const double> theta, Rng& rng) const {
  return simulate_lognormal_sum(theta[0], theta[1], params_, rng);
}

std::optional<Vector> LognormalSumModel::summarize(const DataSet& y) const {
  try {
    const AuxGaussianPosterior aux = laplace_aux(y, params_.L);
    Vector s(5);
    s << aux.mean[0], aux.mean[1], aux.cov(0, 0), aux.cov(0, 1), aux.cov(1, 1);
    return s;
  } catch (const FitFailure&) {
    return std::nullopt;
  }
}

MarginalSet LaplaceAuxiliary::marginals(std::span<const double> s) const {
  if (s.size() < 5) throw ContractViolation("laplace auxiliary: need 5 summaries");
  if (!(s[2] > 0.0) || !(s[4] > 0.0)) throw FitFailure("laplace auxiliary: nonpositive variance");
  return {std::make_shared<GaussianMarginal>(s[0], std::sqrt(s[2])),
          std::make_shared<GaussianMarginal>(s[1], std::sqrt(s[4]))};
}

} // namespace recal
