#include "recal/experiments/stereo.hpp"

#include "recal/abc.hpp"
#include "recal/csv.hpp"
#include "recal/error.hpp"
#include "recal/experiments/output.hpp"
#include "recal/models/spline.hpp"
#include "recal/recalibration.hpp"
#include "recal/regression.hpp"

namespace recal {

namespace {

constexpr Eigen::Index kXi = 2;

template <std::size_t K>
Matrix select_columns(const Matrix& m, const std::array<std::size_t, K>& cols) {
  Matrix out(m.rows(), static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) out.col(static_cast<Eigen::Index>(k)) = m.col(static_cast<Eigen::Index>(cols[k]));
  return out;
}

template <std::size_t K>
Vector select_entries(const Vector& v, const std::array<std::size_t, K>& cols) {
  Vector out(static_cast<Eigen::Index>(K));
  for (std::size_t k = 0; k < K; ++k) out[static_cast<Eigen::Index>(k)] = v[static_cast<Eigen::Index>(cols[k])];
  return out;
}

// Accepted rows of margin xi and their weights.
void accepted_xi(const ABCApproximation& approx, const Matrix& thetas, Vector& xi, Vector& w) {
  const auto k = static_cast<Eigen::Index>(approx.accepted.size());
  xi.resize(k);
  w.resize(k);
  for (Eigen::Index r = 0; r < k; ++r) {
    const auto i = static_cast<Eigen::Index>(approx.accepted[static_cast<std::size_t>(r)]);
    xi[r] = thetas(i, kXi);
    w[r] = approx.particles.weights[i];
  }
}

double weighted_mean(const Vector& x, const Vector& w) { return x.dot(w) / w.sum(); }

StereoShapeResult run_shape(const StereoExperimentConfig& cfg, InclusionShape shape, std::uint64_t seed,
                            nlohmann::json& log) {
  StereoConfig mc = cfg.model;
  mc.shape = shape;
  const StereoModel model(mc, StereoSummaryKind::combined);
  StereoShapeResult res;
  res.shape = shape;

  Rng obs_rng(seed, 0);
  const auto& t = mc.truth;
  const DataSet y_obs = simulate_stereo(mc, t[0], t[1], t[2], obs_rng);
  const auto s_obs = model.summarize(y_obs);
  if (!s_obs) throw DegenerateError("stereo: GPD fit to the observed data failed");

  SimulationBank bank = simulate_bank(model, cfg.n_sims, derive_seed(seed, 1), cfg.threads);
  res.n_failed = bank.n_failed;
  if (bank.n_failed * 5 > cfg.n_sims) throw DegenerateError("stereo: more than 20% of simulations flagged");
  const std::vector<bool> log_scale = model.positive_parameters();
  WeightingSpec w;
  w.family = KernelFamily::epanechnikov;
  w.accept_count = cfg.keep;
  const std::size_t m_local = cfg.local_keep ? cfg.local_keep : cfg.keep;

  // (a), (b): quantile summaries
  ParticleSet std_bank = bank.particles;
  std_bank.summaries = select_columns(bank.particles.summaries, kStereoStandardColumns);
  const ABCApproximation approx_a =
      weight_particles(std::move(std_bank), select_entries(*s_obs, kStereoStandardColumns), w);
  const ParticleSet adj_a = adjust_theta(approx_a, log_scale);
  accepted_xi(approx_a, adj_a.thetas, res.xi_a, res.w_a);

  RecalibrationOptions opts;
  opts.local_accept_count = m_local;
  opts.procedure = {ThetaAdjust::linear, log_scale};
  opts.threads = cfg.threads;
  const RecalibrationResult rec_b = recalibrate_abc(approx_a, opts);
  res.xi_b = rec_b.recalibrated_thetas.col(kXi);
  res.w_b = rec_b.weights;
  res.n_flagged = rec_b.provenance.n_flagged;
  if (res.n_flagged * 5 > rec_b.p.rows()) throw DegenerateError("stereo: more than 20% of particles flagged");
  for (std::size_t r = 0; r < rec_b.p.rows(); ++r)
    if (!rec_b.p.flagged[r]) res.p_xi.push_back(rec_b.p.values(static_cast<Eigen::Index>(r), kXi));
  res.p_xi_report = uniformity_report(res.p_xi);

  // (c), (d): (n', sigma~, xi~)
  ParticleSet aux_bank = std::move(bank.particles);
  aux_bank.summaries = select_columns(aux_bank.summaries, kStereoAuxColumns);
  const ABCApproximation approx_c =
      weight_particles(std::move(aux_bank), select_entries(*s_obs, kStereoAuxColumns), w);
  const ParticleSet adj_c = adjust_theta(approx_c, log_scale);
  accepted_xi(approx_c, adj_c.thetas, res.xi_c, res.w_c);

  const SplineGaussianAuxiliary spline(approx_c.particles.thetas, approx_c.particles.summaries,
                                       as_span(approx_c.particles.weights), {0, 1, 2});
  res.spline_fallback = spline.any_fallback();
  const RecalibrationResult rec_d = recalibrate_auxiliary(approx_c, spline);
  res.xi_d = rec_d.recalibrated_thetas.col(kXi);
  res.w_d = rec_d.weights;
  res.n_excluded = rec_d.provenance.n_excluded;

  res.xi_mean = {weighted_mean(res.xi_a, res.w_a), weighted_mean(res.xi_b, res.w_b),
                 weighted_mean(res.xi_c, res.w_c), weighted_mean(res.xi_d, res.w_d)};

  nlohmann::json& j = log[to_string(shape)];
  j["n_observed"] = y_obs.size();
  j["s_obs"] = std::vector<double>(s_obs->data(), s_obs->data() + s_obs->size());
  j["kernel_a"] = to_json(approx_a.kernel);
  j["kernel_c"] = to_json(approx_c.kernel);
  j["log_scale"] = {"lambda", "sigma"};
  j["recalibration_b"] = to_json(rec_b.provenance);
  j["recalibration_d"] = to_json(rec_d.provenance);
  j["spline_gcv_fallback"] = res.spline_fallback;
  j["n_failed_simulations"] = res.n_failed;
  j["p_xi"] = to_json(res.p_xi_report);
  j["xi_mean"] = {{"a", res.xi_mean[0]}, {"b", res.xi_mean[1]}, {"c", res.xi_mean[2]}, {"d", res.xi_mean[3]}};
  return res;
}

} // namespace

StereoExperimentConfig StereoExperimentConfig::from_json(const nlohmann::json& j) {
  StereoExperimentConfig c;
  if (j.is_null()) return c;
  c.model.v0 = j.value("v0", c.model.v0);
  c.model.slab = j.value("slab", 50.0 * c.model.v0);
  c.model.truth = j.value("truth", c.model.truth);
  if (j.contains("prior")) {
    const auto b = j.at("prior").get<std::vector<std::vector<double>>>();
    if (b.size() != 3) throw ConfigError("stereo prior needs three [lo, hi] pairs");
    for (std::size_t k = 0; k < 3; ++k) {
      if (b[k].size() != 2) throw ConfigError("stereo prior needs three [lo, hi] pairs");
      c.model.prior[k] = {b[k][0], b[k][1]};
    }
  }
  if (j.contains("shapes")) {
    c.shapes.clear();
    for (const auto& s : j.at("shapes")) c.shapes.push_back(parse_inclusion_shape(s.get<std::string>()));
  }
  c.n_sims = j.value("n_sims", c.n_sims);
  c.keep = j.value("keep", c.keep);
  c.local_keep = j.value("local_keep", c.local_keep);
  return c;
}

nlohmann::json StereoExperimentConfig::to_json() const {
  std::vector<std::string> shape_names;
  for (auto s : shapes) shape_names.push_back(to_string(s));
  std::vector<std::vector<double>> prior;
  for (const auto& [lo, hi] : model.prior) prior.push_back({lo, hi});
  return {{"v0", model.v0},         {"slab", model.slab}, {"truth", model.truth},
          {"prior", prior},         {"shapes", shape_names}, {"n_sims", n_sims},
          {"keep", keep},           {"local_keep", local_keep ? local_keep : keep}};
}

std::vector<StereoShapeResult> run_stereo_experiment(const StereoExperimentConfig& cfg,
                                                     const std::optional<std::filesystem::path>& out) {
  if (cfg.keep < 100 || cfg.keep >= cfg.n_sims) throw ConfigError("stereo: need 100 <= keep < n_sims");
  nlohmann::json log;
  std::vector<StereoShapeResult> results;
  for (InclusionShape shape : cfg.shapes)
    results.push_back(run_shape(cfg, shape, derive_seed(cfg.seed, static_cast<std::uint64_t>(shape) + 1), log));

  if (out) {
    ensure_directory(*out);
    Manifest manifest("experiment stereo", cfg.to_json(), cfg.seed);
    manifest.data()["shapes"] = log;
    for (const auto& r : results) {
      const std::string tag = to_string(r.shape);
      CsvWriter xi(*out / ("stereo_" + tag + "_xi.csv"), {"method", "xi", "weight"});
      const std::array<std::pair<const char*, std::pair<const Vector*, const Vector*>>, 4> blocks = {{
          {"regression", {&r.xi_a, &r.w_a}},
          {"recalibrated", {&r.xi_b, &r.w_b}},
          {"aux-summaries", {&r.xi_c, &r.w_c}},
          {"recalibrated-aux", {&r.xi_d, &r.w_d}},
      }};
      for (const auto& [name, data] : blocks)
        for (Eigen::Index k = 0; k < data.first->size(); ++k)
          xi.row(std::vector<std::string>{name, format_double((*data.first)[k]), format_double((*data.second)[k])});
      CsvWriter p(*out / ("stereo_" + tag + "_p_xi.csv"), {"p_xi"});
      for (double v : r.p_xi) p.row(std::vector<double>{v});
    }
    manifest.write(*out / "stereo_manifest.json");
  }
  return results;
}

} // namespace recal
