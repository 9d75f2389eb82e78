#include "recal/experiments/lognormal.hpp"

#include <cmath>
#include <stdexcept>

#include "recal/abc.hpp"
#include "recal/csv.hpp"
#include "recal/diagnostics.hpp"
#include "recal/error.hpp"
#include "recal/experiments/output.hpp"

namespace recal {

namespace {

template <class F>
auto stage(const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const std::exception& e) {
    throw std::runtime_error(std::string("lognormal experiment, stage ") + name + ": " + e.what());
  }
}

} // namespace

LognormalExperimentConfig LognormalExperimentConfig::from_json(const nlohmann::json& j) {
  LognormalExperimentConfig c;
  if (j.is_null()) return c;
  c.model.L = j.value("L", c.model.L);
  c.model.n = j.value("n", c.model.n);
  c.truth = j.value("truth", c.truth);
  c.n_particles = j.value("n_particles", c.n_particles);
  c.n_reference = j.value("n_reference", c.n_reference);
  c.reference_keep = j.value("reference_keep", c.reference_keep);
  return c;
}

nlohmann::json LognormalExperimentConfig::to_json() const {
  return {{"L", model.L},
          {"n", model.n},
          {"truth", truth},
          {"n_particles", n_particles},
          {"n_reference", n_reference},
          {"reference_keep", reference_keep}};
}

LognormalExperimentResult run_lognormal_experiment(const LognormalExperimentConfig& cfg,
                                                   const std::optional<std::filesystem::path>& out) {
  if (!(cfg.reference_keep > 0.0 && cfg.reference_keep < 1.0)) throw ConfigError("reference_keep must lie in (0, 1)");
  const LognormalSumModel model(cfg.model);
  LognormalExperimentResult res;

  Rng obs_rng(cfg.seed, 0);
  const DataSet y_obs = simulate_lognormal_sum(cfg.truth[0], cfg.truth[1], cfg.model, obs_rng);
  res.aux = stage("observed fit", [&] { return laplace_aux(y_obs, cfg.model.L); });
  Vector s_obs(5);
  s_obs << res.aux.mean[0], res.aux.mean[1], res.aux.cov(0, 0), res.aux.cov(0, 1), res.aux.cov(1, 1);

  const LaplaceAuxiliary aux;
  const ABCApproximation approx = stage("simulation", [&] {
    WeightingSpec w;
    w.family = KernelFamily::uniform;
    return run_abc(model, s_obs, cfg.n_particles, w, derive_seed(cfg.seed, 1), cfg.threads);
  });
  res.recalibrated = stage("recalibration", [&] { return recalibrate_auxiliary(approx, aux); });
  res.n_failed_fits = res.recalibrated.provenance.n_excluded;

  const ABCApproximation ref = stage("reference", [&] {
    SimulationBank bank = simulate_bank(model, cfg.n_reference, derive_seed(cfg.seed, 2), cfg.threads);
    res.n_failed_fits += bank.n_failed;
    ParticleSet ps = std::move(bank.particles);
    ps.summaries = Matrix(ps.summaries.leftCols(2));
    WeightingSpec w;
    w.family = KernelFamily::uniform;
    w.accept_count = static_cast<std::size_t>(std::llround(cfg.reference_keep * static_cast<double>(ps.size())));
    return weight_particles(std::move(ps), s_obs.head(2), w);
  });
  res.reference.resize(static_cast<Eigen::Index>(ref.accepted.size()), 2);
  for (std::size_t k = 0; k < ref.accepted.size(); ++k)
    res.reference.row(static_cast<Eigen::Index>(k)) = ref.particles.thetas.row(static_cast<Eigen::Index>(ref.accepted[k]));

  const MarginalSet aux_marg = aux.marginals(as_span(s_obs));
  for (Eigen::Index j = 0; j < 2; ++j) {
    const Vector ref_col = res.reference.col(j);
    const Vector rec_col = res.recalibrated.recalibrated_thetas.col(j);
    const auto k = static_cast<std::size_t>(j);
    res.ks_recal_ref[k] = ks_distance(as_span(rec_col), as_span(res.recalibrated.weights), as_span(ref_col), {});
    res.ks_aux_ref[k] = ks_distance(as_span(ref_col), {}, *aux_marg[k]);
    res.reference_mean[k] = ref_col.mean();
    res.recal_mean[k] = rec_col.dot(res.recalibrated.weights) / res.recalibrated.weights.sum();
  }

  if (out) {
    ensure_directory(*out);
    Manifest manifest("experiment lognormal", cfg.to_json(), cfg.seed);
    auto& m = manifest.data();
    m["recalibration"] = to_json(res.recalibrated.provenance);
    m["reference"] = {{"kernel", to_json(ref.kernel)},
                      {"accepted", ref.accepted.size()},
                      {"summaries", "theta* (2 columns)"},
                      {"scaling", std::vector<double>(ref.scaling.scales.data(),
                                                      ref.scaling.scales.data() + ref.scaling.scales.size())}};
    m["n_failed_fits"] = res.n_failed_fits;
    m["aux"] = {{"mean", {res.aux.mean[0], res.aux.mean[1]}},
                {"cov", {res.aux.cov(0, 0), res.aux.cov(0, 1), res.aux.cov(1, 1)}}};
    m["ks"] = {{"recal_vs_reference", res.ks_recal_ref}, {"aux_vs_reference", res.ks_aux_ref}};

    // Draws from the auxiliary N2 for density overlays.
    Matrix aux_draws(static_cast<Eigen::Index>(cfg.n_particles), 2);
    const Eigen::Matrix2d chol = res.aux.cov.llt().matrixL();
    Rng draw_rng(cfg.seed, 3);
    for (Eigen::Index r = 0; r < aux_draws.rows(); ++r) {
      const Eigen::Vector2d z(draw_rng.normal(), draw_rng.normal());
      aux_draws.row(r) = (res.aux.mean + chol * z).transpose();
    }
    write_samples_csv(*out / "lognormal_samples.csv", {"mu", "sigma"},
                      {{"aux", &aux_draws, nullptr},
                       {"recalibrated", &res.recalibrated.recalibrated_thetas, &res.recalibrated.weights},
                       {"reference", &res.reference, nullptr}});
    write_p_csv(*out / "lognormal_p.csv", res.recalibrated.p);
    CsvWriter ks(*out / "lognormal_ks.csv", {"margin", "ks_recal_ref", "ks_aux_ref"});
    ks.row(std::vector<std::string>{"mu", format_double(res.ks_recal_ref[0]), format_double(res.ks_aux_ref[0])});
    ks.row(std::vector<std::string>{"sigma", format_double(res.ks_recal_ref[1]), format_double(res.ks_aux_ref[1])});
    manifest.write(*out / "lognormal_manifest.json");
  }
  return res;
}

} // namespace recal
