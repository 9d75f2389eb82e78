#include "recal/experiments/twisted.hpp"

#include <algorithm>
#include <cmath>

#include "recal/abc.hpp"
#include "recal/csv.hpp"
#include "recal/error.hpp"
#include "recal/experiments/output.hpp"
#include "recal/models/twisted.hpp"
#include "recal/models/twisted_oracle.hpp"
#include "recal/parallel.hpp"
#include "recal/recalibration.hpp"
#include "recal/regression.hpp"

namespace recal {

namespace {

enum Pipeline : int {
  kRejection,
  kRegression,
  kRecalRejection,
  kRecalRejectionPadj,
  kRecalRegression,
  kRecalRegressionPadj,
  kExact,
  kPipelineCount
};

double weighted_difference(const Matrix& thetas, const Vector& weights) {
  double num = 0.0, den = 0.0;
  for (Eigen::Index i = 0; i < thetas.rows(); ++i) {
    num += weights[i] * (thetas(i, 0) - thetas(i, 1));
    den += weights[i];
  }
  return num / den;
}

double recalibrated_difference(const ABCApproximation& approx, const PMatrix& p, const MarginalSet& targets) {
  const RecalibrationResult r = recalibrate(approx, p, targets);
  return weighted_difference(r.recalibrated_thetas, r.weights);
}

} // namespace

TwistedExperimentConfig TwistedExperimentConfig::from_json(const nlohmann::json& j) {
  TwistedExperimentConfig c;
  if (j.is_null()) return c;
  c.n_particles = j.value("n_particles", c.n_particles);
  c.grid = j.value("grid", c.grid);
  c.replicates = j.value("replicates", c.replicates);
  c.y_obs = j.value("y_obs", c.y_obs);
  return c;
}

nlohmann::json TwistedExperimentConfig::to_json() const {
  return {{"n_particles", n_particles}, {"grid", grid}, {"replicates", replicates}, {"y_obs", y_obs}};
}

const std::vector<std::string>& twisted_pipelines() {
  static const std::vector<std::string> names = {"rejection",
                                                 "regression",
                                                 "recal-rejection",
                                                 "recal-rejection-padj",
                                                 "recal-regression",
                                                 "recal-regression-padj",
                                                 "exact"};
  return names;
}

double TwistedExperimentResult::at(const std::string& pipeline, std::size_t accept_count) const {
  const auto p = std::find(pipelines.begin(), pipelines.end(), pipeline);
  const auto g = std::find(grid.begin(), grid.end(), accept_count);
  if (p == pipelines.end() || g == grid.end()) throw ContractViolation("no MSE cell for " + pipeline);
  return mse(p - pipelines.begin(), g - grid.begin());
}

std::pair<double, std::size_t> TwistedExperimentResult::optimum(const std::string& pipeline) const {
  const auto p = std::find(pipelines.begin(), pipelines.end(), pipeline);
  if (p == pipelines.end()) throw ContractViolation("unknown pipeline " + pipeline);
  Eigen::Index best = 0;
  const double v = mse.row(p - pipelines.begin()).minCoeff(&best);
  return {v, grid[static_cast<std::size_t>(best)]};
}

TwistedExperimentResult run_twisted_experiment(const TwistedExperimentConfig& cfg,
                                               const std::optional<std::filesystem::path>& out) {
  if (cfg.grid.empty()) throw ConfigError("twisted experiment: empty accept-count grid");
  for (std::size_t m : cfg.grid)
    if (m < 3 || m > cfg.n_particles) throw ConfigError("twisted experiment: accept counts must lie in [3, N]");
  if (cfg.replicates < 1) throw ConfigError("twisted experiment: need at least one replicate");
  if (cfg.y_obs != 1.0) throw ConfigError("twisted experiment: the stored oracle is for y_obs = 1");

  const TwistedNormalModel model;
  const auto g = static_cast<Eigen::Index>(cfg.grid.size());
  TwistedExperimentResult res;
  res.pipelines = twisted_pipelines();
  res.grid = cfg.grid;
  res.oracle = twisted_oracle::kPosteriorMean;
  res.estimates.resize(static_cast<Eigen::Index>(cfg.replicates) * g, kPipelineCount);
  Vector s_obs(1);
  s_obs[0] = cfg.y_obs;
  const LocalProcedure none{};
  const LocalProcedure linear{ThetaAdjust::linear, {}};

  // Replicates run in parallel; each is single-threaded inside.
  parallel_for(cfg.replicates, cfg.threads, [&](std::size_t r) {
    const std::uint64_t rep_seed = derive_seed(cfg.seed, r);
    const SimulationBank bank = simulate_bank(model, cfg.n_particles, rep_seed, 1);
    const DistanceSpec scaling = DistanceSpec::from_mad(bank.particles.summaries);
    Rng exact_rng(rep_seed, cfg.n_particles + 1);
    for (Eigen::Index k = 0; k < g; ++k) {
      const std::size_t m = cfg.grid[static_cast<std::size_t>(k)];
      WeightingSpec w;
      w.family = KernelFamily::epanechnikov;
      w.accept_count = m;
      const ABCApproximation approx = weight_particles(bank.particles, s_obs, w, scaling);
      auto est = res.estimates.row(static_cast<Eigen::Index>(r) * g + k);

      est[kRejection] = weighted_difference(approx.particles.thetas, approx.particles.weights);
      const Matrix adjusted = adjust_theta_rows(approx.particles.thetas, approx.particles.summaries,
                                                as_span(approx.particles.weights), s_obs, {});
      est[kRegression] = weighted_difference(adjusted, approx.particles.weights);

      const PMatrix p_rej = compute_p(approx, m, none);
      const MarginalSet t_rej = target_marginals(approx, none);
      est[kRecalRejection] = recalibrated_difference(approx, p_rej, t_rej);
      est[kRecalRejectionPadj] = recalibrated_difference(approx, adjust_p(p_rej, approx), t_rej);

      const PMatrix p_reg = compute_p(approx, m, linear);
      const MarginalSet t_reg = target_marginals(approx, linear);
      est[kRecalRegression] = recalibrated_difference(approx, p_reg, t_reg);
      est[kRecalRegressionPadj] = recalibrated_difference(approx, adjust_p(p_reg, approx), t_reg);

      const Matrix exact = sample_twisted_posterior(m, exact_rng, cfg.y_obs);
      est[kExact] = (exact.col(0) - exact.col(1)).mean();
    }
  });

  res.mse = Matrix::Zero(kPipelineCount, g);
  for (std::size_t r = 0; r < cfg.replicates; ++r)
    for (Eigen::Index k = 0; k < g; ++k)
      for (int p = 0; p < kPipelineCount; ++p) {
        const double e = res.estimates(static_cast<Eigen::Index>(r) * g + k, p) - res.oracle;
        res.mse(p, k) += e * e;
      }
  res.mse /= static_cast<double>(cfg.replicates);

  if (out) {
    ensure_directory(*out);
    Manifest manifest("experiment twisted", cfg.to_json(), cfg.seed);
    manifest.data()["oracle"] = res.oracle;
    manifest.data()["kernel"] = "epanechnikov";
    manifest.data()["scaling"] = "MAD of each replicate bank";
    manifest.data()["pipelines"] = res.pipelines;
    CsvWriter csv(*out / "twisted_mse.csv", {"pipeline", "accept_count", "mse", "log10_mse"});
    for (int p = 0; p < kPipelineCount; ++p)
      for (Eigen::Index k = 0; k < g; ++k)
        csv.row(std::vector<std::string>{res.pipelines[static_cast<std::size_t>(p)],
                                         std::to_string(cfg.grid[static_cast<std::size_t>(k)]),
                                         format_double(res.mse(p, k)), format_double(std::log10(res.mse(p, k)))});
    manifest.write(*out / "twisted_manifest.json");
  }
  return res;
}

} // namespace recal
