#include "recal/recalibration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "recal/error.hpp"
#include "recal/parallel.hpp"
#include "recal/regression.hpp"

namespace recal {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Auxiliary CDFs can underflow to exactly 0 or 1 in the far tails.
constexpr double kAuxPClamp = 1e-12;

struct LocalWorkspace {
  NeighborFinder::Neighborhood nb;
  NeighborFinder::Window win;
  std::vector<std::vector<double>> cols; // neighbour thetas, one vector per margin
  std::vector<double> x;
  std::vector<const double*> src;
  std::vector<std::vector<double>> gathered;
  Matrix thetas;
  Matrix summaries;
};

std::size_t resolve_local_count(const ABCApproximation& approx, std::size_t m_local) {
  if (m_local > 0) return m_local;
  return approx.target_count > 0 ? approx.target_count : approx.accepted.size();
}

void check_accepted(const ABCApproximation& approx, std::size_t i) {
  if (i >= approx.size()) throw ContractViolation("particle index out of range");
  if (!(approx.particles.weights[static_cast<Eigen::Index>(i)] > 0.0))
    throw ContractViolation("local marginals requested for a zero-weight particle");
}

// Weighted least squares with one predictor, in closed form. Same fit as
// adjust_theta_rows: slope zero when the predictor is collinear with the
// intercept, false when fewer than two weights are positive. Reads
// src[j][0..k) and writes the adjusted values to cols[j].
bool adjust_scalar(const double* x, std::span<const double> w, double centre, const std::vector<const double*>& src,
                   const std::vector<bool>& log_scale, std::vector<std::vector<double>>& cols) {
  const std::size_t k = w.size();
  double sw = 0.0, swx = 0.0;
  std::size_t positive = 0;
  for (std::size_t r = 0; r < k; ++r) {
    positive += w[r] > 0.0;
    sw += w[r];
    swx += w[r] * (x[r] - centre);
  }
  if (positive < 2) return false;
  const double xbar = swx / sw;
  double sxx = 0.0;
  for (std::size_t r = 0; r < k; ++r) {
    const double dx = x[r] - centre - xbar;
    sxx += w[r] * dx * dx;
  }
  const bool collinear = std::sqrt(sxx) <= 1e-10 * std::max(std::sqrt(sw), std::sqrt(sxx));
  cols.resize(src.size());
  for (std::size_t j = 0; j < src.size(); ++j) {
    auto& c = cols[j];
    c.assign(src[j], src[j] + k);
    const bool is_log = !log_scale.empty() && log_scale[j];
    if (is_log)
      for (std::size_t r = 0; r < k; ++r) {
        if (w[r] > 0.0 && !(c[r] > 0.0)) throw ContractViolation("adjust_theta: log-scale margin has a nonpositive value");
        c[r] = c[r] > 0.0 ? std::log(c[r]) : 0.0;
      }
    double sxy = 0.0;
    if (!collinear)
      for (std::size_t r = 0; r < k; ++r) sxy += w[r] * (x[r] - centre - xbar) * c[r];
    const double slope = collinear ? 0.0 : sxy / sxx;
    if (is_log)
      for (std::size_t r = 0; r < k; ++r) c[r] = std::exp(c[r] - slope * (x[r] - centre));
    else
      for (std::size_t r = 0; r < k; ++r) c[r] -= slope * (x[r] - centre);
  }
  return true;
}

// Leave-one-out smoothed ECDF with unit weights, evaluated at one of the
// sample's own values x. `sorted` holds the whole sample, x included.
double loo_cdf_sorted(const std::vector<double>& sorted, double x) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  const auto [lower, upper] = std::equal_range(sorted.begin(), sorted.end(), x);
  const auto ties = static_cast<double>(upper - lower) - 1.0; // others equal to x
  const double total = static_cast<double>(sorted.size()) - 1.0;
  const double at_or_below = static_cast<double>(upper - sorted.begin()) - 1.0;
  double lo = -kInf, lo_mass = 0.0;
  if (ties > 0.0) {
    lo = x;
    lo_mass = ties;
  } else if (lower != sorted.begin()) {
    lo = *(lower - 1);
    lo_mass = static_cast<double>(lower - std::lower_bound(sorted.begin(), lower, lo));
  }
  double hi = kInf, hi_mass = 0.0;
  if (upper != sorted.end()) {
    hi = *upper;
    hi_mass = static_cast<double>(std::upper_bound(upper, sorted.end(), hi) - upper);
  }
  if (!(total > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  if (lo == -kInf) return 0.5 * hi_mass / total;
  const double c_lo = (at_or_below - 0.5 * lo_mass) / total;
  if (hi == kInf) return c_lo;
  const double c_hi = (at_or_below + 0.5 * hi_mass) / total;
  return c_lo + (x - lo) / (hi - lo) * (c_hi - c_lo);
}

// Neighbourhood of particle i with theta optionally adjusted towards s^(i).
// Leaves the (possibly adjusted) neighbour thetas in ws.cols. Returns false
// when the local estimator is degenerate.
bool local_sample(const ABCApproximation& approx, const NeighborFinder& finder, std::size_t i, std::size_t m,
                  const LocalProcedure& proc, LocalWorkspace& ws) {
  finder.query(i, m, approx.kernel.family, ws.nb);
  const auto& idx = ws.nb.index;
  if (idx.empty()) return false;
  const std::size_t k = idx.size();
  const auto& ps = approx.particles;
  const auto d = static_cast<std::size_t>(ps.thetas.cols());
  ws.cols.resize(d);
  for (std::size_t j = 0; j < d; ++j) {
    auto& c = ws.cols[j];
    c.resize(k);
    for (std::size_t r = 0; r < k; ++r) c[r] = ps.thetas(static_cast<Eigen::Index>(idx[r]), static_cast<Eigen::Index>(j));
  }
  if (proc.theta_adjust == ThetaAdjust::none) return true;

  if (ps.summaries.cols() == 1) {
    ws.x.resize(k);
    for (std::size_t r = 0; r < k; ++r) ws.x[r] = ps.summaries(static_cast<Eigen::Index>(idx[r]), 0);
    ws.src.resize(d);
    ws.gathered = ws.cols;
    for (std::size_t j = 0; j < d; ++j) ws.src[j] = ws.gathered[j].data();
    return adjust_scalar(ws.x.data(), ws.nb.weight, ps.summaries(static_cast<Eigen::Index>(i), 0), ws.src,
                         proc.log_scale, ws.cols);
  }

  const auto kk = static_cast<Eigen::Index>(k);
  ws.thetas.resize(kk, ps.thetas.cols());
  ws.summaries.resize(kk, ps.summaries.cols());
  for (Eigen::Index r = 0; r < kk; ++r) {
    ws.thetas.row(r) = ps.thetas.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]));
    ws.summaries.row(r) = ps.summaries.row(static_cast<Eigen::Index>(idx[static_cast<std::size_t>(r)]));
  }
  const Vector centre = ps.summaries.row(static_cast<Eigen::Index>(i)).transpose();
  try {
    ws.thetas = adjust_theta_rows(ws.thetas, ws.summaries, ws.nb.weight, centre, proc.log_scale);
  } catch (const InsufficientDataError&) {
    return false;
  }
  for (std::size_t j = 0; j < d; ++j)
    for (std::size_t r = 0; r < k; ++r) ws.cols[j][r] = ws.thetas(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j));
  return true;
}

std::vector<double> column(const Matrix& m, Eigen::Index j) {
  std::vector<double> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index i = 0; i < m.rows(); ++i) out[static_cast<std::size_t>(i)] = m(i, j);
  return out;
}

} // namespace

ThetaAdjust parse_theta_adjust(const std::string& name) {
  if (name == "none") return ThetaAdjust::none;
  if (name == "linear") return ThetaAdjust::linear;
  throw ConfigError("unknown theta adjustment '" + name + "' (none|linear)");
}

PAdjust parse_p_adjust(const std::string& name) {
  if (name == "none") return PAdjust::none;
  if (name == "logit-regression") return PAdjust::logit_regression;
  throw ConfigError("unknown p adjustment '" + name + "' (none|logit-regression)");
}

std::string to_string(ThetaAdjust a) { return a == ThetaAdjust::none ? "none" : "linear"; }
std::string to_string(PAdjust a) { return a == PAdjust::none ? "none" : "logit-regression"; }

std::size_t PMatrix::n_flagged() const {
  return static_cast<std::size_t>(std::count(flagged.begin(), flagged.end(), char{1}));
}

MarginalSet local_marginals(const ABCApproximation& approx, std::size_t i, std::size_t m_local,
                            const LocalProcedure& procedure) {
  check_accepted(approx, i);
  const std::size_t m = resolve_local_count(approx, m_local);
  const NeighborFinder finder(approx.particles.summaries, approx.scaling);
  LocalWorkspace ws;
  if (!local_sample(approx, finder, i, m, procedure, ws))
    throw DegenerateError("local marginal of particle " + std::to_string(i) + " is degenerate");
  MarginalSet out;
  for (const auto& c : ws.cols) out.push_back(std::make_shared<WeightedECDF>(c, ws.nb.weight));
  return out;
}

MarginalSet target_marginals(const ABCApproximation& approx, const LocalProcedure& procedure) {
  const auto& ps = approx.particles;
  Matrix thetas = ps.thetas;
  if (procedure.theta_adjust == ThetaAdjust::linear)
    thetas = adjust_theta_rows(ps.thetas, ps.summaries, as_span(ps.weights), approx.s_obs, procedure.log_scale);
  MarginalSet out;
  for (Eigen::Index j = 0; j < thetas.cols(); ++j) {
    const auto values = column(thetas, j);
    out.push_back(std::make_shared<WeightedECDF>(values, as_span(ps.weights)));
  }
  return out;
}

PMatrix compute_p(const ABCApproximation& approx, std::size_t m_local, const LocalProcedure& procedure,
                  unsigned threads) {
  if (approx.accepted.empty()) throw ContractViolation("compute_p: no accepted particles");
  const std::size_t m = resolve_local_count(approx, m_local);
  const NeighborFinder finder(approx.particles.summaries, approx.scaling);
  const auto d = static_cast<Eigen::Index>(approx.dim_theta());
  const std::size_t rows = approx.accepted.size();

  PMatrix out;
  out.particle = approx.accepted;
  out.values.resize(static_cast<Eigen::Index>(rows), d);
  out.flagged.assign(rows, 0);

  // Scalar summaries and a compact kernel: neighbourhoods are windows of the
  // sorted bank, so the theta columns are laid out in that order once.
  const bool windowed = finder.sorted() && approx.kernel.family != KernelFamily::gaussian;
  std::vector<std::vector<double>> sorted_thetas;
  std::vector<double> sorted_x;
  if (windowed) {
    const auto& order = finder.order();
    sorted_thetas.assign(static_cast<std::size_t>(d), std::vector<double>(order.size()));
    sorted_x.resize(order.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
      const auto src = static_cast<Eigen::Index>(order[r]);
      sorted_x[r] = approx.particles.summaries(src, 0);
      for (Eigen::Index j = 0; j < d; ++j) sorted_thetas[static_cast<std::size_t>(j)][r] = approx.particles.thetas(src, j);
    }
  }

  // Every other particle with unit weight: the local marginal is the bank's
  // ECDF minus particle i, evaluated by binary search.
  const bool everything = approx.size() >= 2 && m >= approx.size() - 1 && procedure.theta_adjust == ThetaAdjust::none;
  std::vector<std::vector<double>> by_value;
  if (everything)
    for (Eigen::Index j = 0; j < d; ++j) {
      auto& v = by_value.emplace_back(static_cast<std::size_t>(approx.size()));
      for (std::size_t r = 0; r < v.size(); ++r) v[r] = approx.particles.thetas(static_cast<Eigen::Index>(r), j);
      std::sort(v.begin(), v.end());
    }

  const std::size_t blocks = std::max<std::size_t>(1, std::min<std::size_t>(threads, rows));
  const std::size_t per_block = (rows + blocks - 1) / blocks;
  parallel_for(blocks, threads, [&](std::size_t b) {
    LocalWorkspace ws;
    if (everything) {
      const std::size_t end = std::min(rows, (b + 1) * per_block);
      for (std::size_t r = b * per_block; r < end; ++r) {
        const auto i = static_cast<Eigen::Index>(approx.accepted[r]);
        bool ok = true;
        for (Eigen::Index j = 0; j < d; ++j) {
          const double p = loo_cdf_sorted(by_value[static_cast<std::size_t>(j)], approx.particles.thetas(i, j));
          ok = ok && p > 0.0 && p < 1.0;
          out.values(static_cast<Eigen::Index>(r), j) = p;
        }
        if (!ok) {
          out.flagged[r] = 1;
          out.values.row(static_cast<Eigen::Index>(r)).setConstant(kNaN);
        }
      }
      return;
    }
    const std::size_t end = std::min(rows, (b + 1) * per_block);
    for (std::size_t r = b * per_block; r < end; ++r) {
      const std::size_t i = approx.accepted[r];
      const auto row = static_cast<Eigen::Index>(r);
      bool ok = true;
      std::span<const double> weights;
      const bool adjusted = procedure.theta_adjust != ThetaAdjust::none;
      if (windowed) {
        finder.window(i, m, approx.kernel.family, ws.win);
        weights = ws.win.weight;
        const auto first = static_cast<std::ptrdiff_t>(ws.win.first);
        if (adjusted) {
          ws.src.resize(static_cast<std::size_t>(d));
          for (std::size_t j = 0; j < ws.src.size(); ++j) ws.src[j] = sorted_thetas[j].data() + first;
          ok = adjust_scalar(sorted_x.data() + first, ws.win.weight,
                             approx.particles.summaries(static_cast<Eigen::Index>(i), 0), ws.src, procedure.log_scale,
                             ws.cols);
        }
      } else {
        ok = local_sample(approx, finder, i, m, procedure, ws);
        weights = ws.nb.weight;
      }
      for (Eigen::Index j = 0; ok && j < d; ++j) {
        const auto jj = static_cast<std::size_t>(j);
        std::span<const double> values = ws.cols.empty() ? std::span<const double>() : std::span<const double>(ws.cols[jj]);
        if (windowed && !adjusted)
          values = std::span<const double>(sorted_thetas[jj]).subspan(ws.win.first, ws.win.last - ws.win.first);
        const double p = smoothed_cdf_at(values, weights, approx.particles.thetas(static_cast<Eigen::Index>(i), j));
        if (!(p > 0.0 && p < 1.0)) ok = false;
        out.values(row, j) = p;
      }
      if (!ok) {
        out.flagged[r] = 1;
        out.values.row(row).setConstant(kNaN);
      }
    }
  });
  return out;
}

PMatrix adjust_p(const PMatrix& p, const ABCApproximation& approx) {
  std::vector<Eigen::Index> keep;
  for (std::size_t r = 0; r < p.rows(); ++r)
    if (!p.flagged[r]) keep.push_back(static_cast<Eigen::Index>(r));
  const auto k = static_cast<Eigen::Index>(keep.size());
  Matrix values(k, p.values.cols());
  Matrix summaries(k, approx.particles.summaries.cols());
  std::vector<double> weights(static_cast<std::size_t>(k));
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto src = keep[static_cast<std::size_t>(r)];
    const auto i = static_cast<Eigen::Index>(p.particle[static_cast<std::size_t>(src)]);
    values.row(r) = p.values.row(src);
    summaries.row(r) = approx.particles.summaries.row(i);
    weights[static_cast<std::size_t>(r)] = approx.particles.weights[i];
  }
  const Matrix adjusted = recal::adjust_p(values, summaries, approx.s_obs, weights);
  PMatrix out = p;
  for (Eigen::Index r = 0; r < k; ++r) out.values.row(keep[static_cast<std::size_t>(r)]) = adjusted.row(r);
  return out;
}

RecalibrationResult recalibrate(const ABCApproximation& approx, const PMatrix& p, const MarginalSet& targets) {
  const auto d = static_cast<Eigen::Index>(approx.dim_theta());
  if (static_cast<Eigen::Index>(targets.size()) != d)
    throw ContractViolation("recalibrate: need one target marginal per parameter");
  RecalibrationResult result;
  result.p = p;
  result.particle = p.particle;
  const auto rows = static_cast<Eigen::Index>(p.rows());
  result.recalibrated_thetas.resize(rows, d);
  result.weights.resize(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto i = static_cast<Eigen::Index>(p.particle[static_cast<std::size_t>(r)]);
    result.weights[r] = approx.particles.weights[i];
    if (p.flagged[static_cast<std::size_t>(r)]) {
      result.recalibrated_thetas.row(r) = approx.particles.thetas.row(i);
      continue;
    }
    for (Eigen::Index j = 0; j < d; ++j)
      result.recalibrated_thetas(r, j) = targets[static_cast<std::size_t>(j)]->quantile(p.values(r, j));
  }
  auto& prov = result.provenance;
  prov.kernel = approx.kernel;
  prov.accepted = approx.accepted.size();
  prov.n_flagged = p.n_flagged();
  prov.n_excluded = approx.n_failed;
  prov.seed = approx.particles.seed;
  return result;
}

RecalibrationResult recalibrate_abc(const ABCApproximation& approx, const RecalibrationOptions& options) {
  const std::size_t m = resolve_local_count(approx, options.local_accept_count);
  PMatrix p = compute_p(approx, m, options.procedure, options.threads);
  if (options.p_adjust == PAdjust::logit_regression) p = adjust_p(p, approx);
  RecalibrationResult result = recalibrate(approx, p, target_marginals(approx, options.procedure));
  result.provenance.theta_adjust = options.procedure.theta_adjust;
  result.provenance.p_adjust = options.p_adjust;
  result.provenance.local_accept_count = m;
  return result;
}

RecalibrationResult recalibrate_auxiliary(const ABCApproximation& approx, const AuxiliaryEstimator& aux,
                                          PAdjust p_adjust) {
  const MarginalSet targets = aux.marginals(as_span(approx.s_obs));
  const auto d = static_cast<Eigen::Index>(approx.dim_theta());
  if (static_cast<Eigen::Index>(targets.size()) != d)
    throw ContractViolation("auxiliary estimator returned the wrong number of marginals");

  PMatrix p;
  std::vector<double> rows;
  std::size_t excluded = 0;
  for (std::size_t i : approx.accepted) {
    MarginalSet local;
    try {
      local = aux.marginals(row_span(approx.particles.summaries, static_cast<Eigen::Index>(i)));
    } catch (const FitFailure&) {
      ++excluded;
      continue;
    } catch (const ConfigError&) {
      ++excluded;
      continue;
    }
    p.particle.push_back(i);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double pj = local[static_cast<std::size_t>(j)]->cdf(approx.particles.thetas(static_cast<Eigen::Index>(i), j));
      rows.push_back(std::clamp(pj, kAuxPClamp, 1.0 - kAuxPClamp));
    }
  }
  if (p.particle.empty()) throw DegenerateError("auxiliary recalibration: every particle was excluded");
  p.values = Eigen::Map<const Matrix>(rows.data(), static_cast<Eigen::Index>(p.particle.size()), d);
  p.flagged.assign(p.particle.size(), 0);
  if (p_adjust == PAdjust::logit_regression) p = adjust_p(p, approx);

  RecalibrationResult result = recalibrate(approx, p, targets);
  result.provenance.estimator = "aux:" + aux.name();
  result.provenance.p_adjust = p_adjust;
  result.provenance.n_excluded = approx.n_failed + excluded;
  return result;
}

RecalibrationResult recalibrate_with_auxiliary(const SimulatorModel& model, const AuxiliaryEstimator& aux,
                                               const Vector& s_obs, std::size_t n, const WeightingSpec& weighting,
                                               std::uint64_t seed, unsigned threads) {
  const ABCApproximation approx = run_abc(model, s_obs, n, weighting, seed, threads);
  return recalibrate_auxiliary(approx, aux);
}

} // namespace recal
