// abc: command-line front end for simulation, ABC, recalibration, coverage
// diagnostics and the three experiment drivers.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "recal/abc.hpp"
#include "recal/csv.hpp"
#include "recal/diagnostics.hpp"
#include "recal/error.hpp"
#include "recal/experiments/lognormal.hpp"
#include "recal/experiments/output.hpp"
#include "recal/experiments/stereo.hpp"
#include "recal/experiments/twisted.hpp"
#include "recal/models/registry.hpp"
#include "recal/parallel.hpp"
#include "recal/particles.hpp"
#include "recal/recalibration.hpp"
#include "recal/regression.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace recal;

namespace {

struct Globals {
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out = "out";
  std::string config_path;
  bool paper_scale = false;
  json config;

  unsigned thread_count() const { return threads ? threads : default_threads(); }
  json section(const std::string& key) const {
    return config.contains(key) ? config.at(key) : json();
  }
};

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("cannot parse number '" + item + "'");
    }
  }
  return out;
}

Vector to_vector(const std::vector<double>& v) { return Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<double> to_std(const Vector& v) { return {v.data(), v.data() + v.size()}; }

// Observed summaries: given explicitly, or simulated at a parameter value.
Vector observed_summaries(const SimulatorModel& model, const std::string& s_obs, const std::string& theta,
                          std::uint64_t seed) {
  if (!s_obs.empty()) {
    Vector s = to_vector(parse_list(s_obs));
    if (static_cast<std::size_t>(s.size()) != model.dim_summary())
      throw ConfigError("--s-obs needs " + std::to_string(model.dim_summary()) + " values");
    return s;
  }
  const Vector t = theta.empty() ? default_truth(model) : to_vector(parse_list(theta));
  if (static_cast<std::size_t>(t.size()) != model.dim_theta())
    throw ConfigError("--theta needs " + std::to_string(model.dim_theta()) + " values");
  Rng rng(seed, 0);
  const auto s = model.summarize(model.simulate(as_span(t), rng));
  if (!s) throw DegenerateError("summary of the observed dataset could not be computed");
  return *s;
}

void cmd_simulate(const Globals& g, const std::string& model_name, const std::string& theta) {
  const auto model = make_model(model_name, g.section("model"));
  const Vector t = theta.empty() ? default_truth(*model) : to_vector(parse_list(theta));
  if (static_cast<std::size_t>(t.size()) != model->dim_theta()) throw ConfigError("--theta has the wrong length");
  Rng rng(g.seed, 0);
  const DataSet y = model->simulate(as_span(t), rng);
  const auto s = model->summarize(y);
  const fs::path out(g.out);
  ensure_directory(out);
  CsvWriter csv(out / "data.csv", {"y"});
  for (double v : y) csv.row(std::vector<double>{v});
  Manifest m("simulate", {{"model", model_name}, {"model_config", g.section("model")}, {"theta", to_std(t)}}, g.seed);
  m.data()["n_observations"] = y.size();
  m.data()["summaries"] = s ? json(to_std(*s)) : json(nullptr);
  m.write(out / "manifest.json");
  std::cout << "wrote " << y.size() << " observations to " << (out / "data.csv").string() << '\n';
}

struct AbcArgs {
  std::string model;
  std::size_t n = 10000;
  std::size_t accept_count = 0;
  double accept_rate = 0.0;
  double h = 0.0;
  std::string kernel = "epanechnikov";
  std::string s_obs;
  std::string theta;
};

void cmd_abc_run(const Globals& g, const AbcArgs& a) {
  const auto model = make_model(a.model, g.section("model"));
  WeightingSpec w;
  w.family = parse_kernel_family(a.kernel);
  if (a.accept_count > 0)
    w.accept_count = a.accept_count;
  else if (a.accept_rate > 0.0)
    w.accept_count = static_cast<std::size_t>(std::llround(a.accept_rate * static_cast<double>(a.n)));
  else if (a.h > 0.0)
    w.h = a.h;
  const Vector s_obs = observed_summaries(*model, a.s_obs, a.theta, g.seed);
  const ABCApproximation approx = run_abc(*model, s_obs, a.n, w, derive_seed(g.seed, 1), g.thread_count());

  const fs::path out(g.out);
  ensure_directory(out);
  write_particles_csv(out / "particles.csv", approx.particles);
  json cfg{{"model", a.model}, {"model_config", g.section("model")}, {"n", a.n}, {"kernel", a.kernel}};
  Manifest m("abc run", cfg, g.seed);
  m.data()["s_obs"] = to_std(s_obs);
  m.data()["kernel"] = to_json(approx.kernel);
  m.data()["accept_count"] = approx.target_count;
  m.data()["accepted"] = approx.accepted.size();
  m.data()["n_failed"] = approx.n_failed;
  m.data()["scaling"] = to_std(approx.scaling.scales);
  m.data()["parameters"] = model->parameter_names();
  m.write(out / "manifest.json");
  std::cout << approx.accepted.size() << " of " << approx.size() << " particles accepted, h = " << approx.kernel.h
            << '\n';
}

struct RecalArgs {
  std::string in;
  std::string estimator = "ecdf";
  std::size_t local_accept_count = 0;
  std::string theta_adjust = "none";
  std::string p_adjust = "none";
};

void cmd_recalibrate(const Globals& g, const RecalArgs& a) {
  const fs::path in(a.in);
  const json run = read_json(in / "manifest.json");
  const auto model = make_model(run.at("config").at("model").get<std::string>(), run.at("config").at("model_config"));
  ParticleSet ps = read_particles_csv(in / "particles.csv");
  const Vector s_obs = to_vector(run.at("s_obs").get<std::vector<double>>());
  WeightingSpec w;
  w.family = parse_kernel_family(run.at("kernel").at("family").get<std::string>());
  w.accept_count = run.at("accept_count").get<std::size_t>();
  if (w.accept_count == 0 && run.at("kernel").at("h").is_number()) w.h = run.at("kernel").at("h").get<double>();
  DistanceSpec scaling{to_vector(run.at("scaling").get<std::vector<double>>())};
  ABCApproximation approx = weight_particles(std::move(ps), s_obs, w, scaling);
  approx.particles.seed = run.at("seed").get<std::uint64_t>();

  const PAdjust padj = parse_p_adjust(a.p_adjust);
  RecalibrationResult result;
  if (a.estimator == "ecdf") {
    RecalibrationOptions opts;
    opts.local_accept_count = a.local_accept_count;
    opts.procedure.theta_adjust = parse_theta_adjust(a.theta_adjust);
    if (opts.procedure.theta_adjust == ThetaAdjust::linear) opts.procedure.log_scale = model->positive_parameters();
    opts.p_adjust = padj;
    opts.threads = g.thread_count();
    result = recalibrate_abc(approx, opts);
  } else if (a.estimator.rfind("aux:", 0) == 0) {
    const auto aux = make_auxiliary(a.estimator.substr(4), *model);
    result = recalibrate_auxiliary(approx, *aux, padj);
  } else {
    throw ConfigError("unknown estimator '" + a.estimator + "' (ecdf|aux:<name>)");
  }

  const fs::path out(g.out);
  ensure_directory(out);
  write_recalibration_csv(out / "recalibrated.csv", result);
  json cfg{{"in", a.in}, {"estimator", a.estimator}, {"local_accept_count", a.local_accept_count},
           {"theta_adjust", a.theta_adjust}, {"p_adjust", a.p_adjust}};
  Manifest m("recalibrate", cfg, g.seed);
  m.data()["provenance"] = to_json(result.provenance);
  Vector dist(static_cast<Eigen::Index>(approx.accepted.size()));
  for (std::size_t k = 0; k < approx.accepted.size(); ++k)
    dist[static_cast<Eigen::Index>(k)] = approx.distances[static_cast<Eigen::Index>(approx.accepted[k])];
  m.data()["accepted_distance"] = {{"min", dist.minCoeff()}, {"max", dist.maxCoeff()}, {"mean", dist.mean()}};
  json uni = json::array();
  for (Eigen::Index j = 0; j < result.p.values.cols(); ++j) {
    std::vector<double> col;
    for (std::size_t r = 0; r < result.p.rows(); ++r)
      if (!result.p.flagged[r]) col.push_back(result.p.values(static_cast<Eigen::Index>(r), j));
    uni.push_back(to_json(uniformity_report(col)));
  }
  m.data()["p_uniformity"] = uni;
  m.write(out / "manifest.json");
  std::cout << "recalibrated " << result.particle.size() << " particles (" << result.provenance.n_flagged
            << " flagged, " << result.provenance.n_excluded << " excluded)\n";
}

struct CoverageArgs {
  std::string model;
  std::string procedure = "abc";
  std::size_t reps = 200;
  std::size_t n = 10000;
  std::size_t accept_count = 200;
  std::string kernel = "epanechnikov";
  double neighborhood_frac = 1.0;
  std::string s_obs;
};

void cmd_coverage(const Globals& g, const CoverageArgs& a) {
  const auto model = make_model(a.model, g.section("model"));
  json proc = json::object();
  if (fs::exists(a.procedure)) {
    proc = read_json(a.procedure);
  } else {
    proc["type"] = a.procedure;
  }
  const std::string type = proc.value("type", std::string("abc"));
  const std::size_t n = proc.value("n", a.n);
  const std::size_t m = proc.value("accept_count", a.accept_count);
  const KernelFamily family = parse_kernel_family(proc.value("kernel", a.kernel));
  const bool recal = proc.value("recalibrate", type == "abc-recal");

  InferenceProcedure procedure;
  std::unique_ptr<AuxiliaryEstimator> aux;
  if (type == "prior") {
    procedure = [&](const Vector&, std::uint64_t) {
      MarginalSet out;
      for (const auto& margin : model->prior().margins()) {
        struct PriorMarginal final : MarginalPosterior {
          Margin mg;
          explicit PriorMarginal(Margin x) : mg(x) {}
          double cdf(double x) const override { return mg.cdf(x); }
          double quantile(double) const override { throw ContractViolation("prior quantile not needed"); }
        };
        out.push_back(std::make_shared<PriorMarginal>(margin));
      }
      return out;
    };
  } else if (type.rfind("aux:", 0) == 0) {
    aux = make_auxiliary(type.substr(4), *model);
    procedure = [&](const Vector& s0, std::uint64_t) { return aux->marginals(as_span(s0)); };
  } else if (type == "abc" || type == "abc-recal") {
    procedure = [&, n, m, family, recal](const Vector& s0, std::uint64_t seed) {
      WeightingSpec w;
      w.family = family;
      w.accept_count = m;
      const ABCApproximation approx = run_abc(*model, s0, n, w, seed, 1);
      MarginalSet out;
      if (!recal) {
        for (std::size_t j = 0; j < approx.dim_theta(); ++j) out.push_back(std::make_shared<WeightedECDF>(marginal_of(approx, j)));
        return out;
      }
      const RecalibrationResult r = recalibrate_abc(approx);
      for (Eigen::Index j = 0; j < r.recalibrated_thetas.cols(); ++j) {
        const Vector col = r.recalibrated_thetas.col(j);
        out.push_back(std::make_shared<WeightedECDF>(as_span(col), as_span(r.weights)));
      }
      return out;
    };
  } else {
    throw ConfigError("unknown procedure type '" + type + "' (prior|abc|abc-recal|aux:<name>)");
  }

  CoverageOptions opts;
  opts.n_reps = a.reps;
  opts.seed = g.seed;
  opts.threads = g.thread_count();
  opts.neighborhood_frac = a.neighborhood_frac;
  if (!a.s_obs.empty()) opts.s_obs = to_vector(parse_list(a.s_obs));
  const CoverageReport report = coverage_diagnostic(*model, procedure, opts);

  const fs::path out(g.out);
  ensure_directory(out);
  std::vector<std::string> header;
  for (std::size_t j = 0; j < model->dim_theta(); ++j) header.push_back("p_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < model->dim_theta(); ++j) header.push_back("theta0_" + std::to_string(j + 1));
  CsvWriter csv(out / "coverage_p.csv", header);
  for (Eigen::Index r = 0; r < report.p.rows(); ++r) {
    std::vector<double> row = to_std(report.p.row(r).transpose());
    for (Eigen::Index j = 0; j < report.theta0.cols(); ++j) row.push_back(report.theta0(r, j));
    csv.row(row);
  }
  json cfg{{"model", a.model}, {"procedure", proc}, {"reps", a.reps}, {"neighborhood_frac", a.neighborhood_frac}};
  Manifest man("diagnose coverage", cfg, g.seed);
  json margins = json::array();
  for (std::size_t j = 0; j < report.margins.size(); ++j) {
    json mj = to_json(report.margins[j]);
    mj["coverage_90"] = report.coverage[j];
    margins.push_back(mj);
  }
  man.data()["margins"] = margins;
  man.data()["n_failed"] = report.n_failed;
  man.write(out / "coverage_report.json");
  for (std::size_t j = 0; j < report.margins.size(); ++j)
    std::cout << "margin " << j + 1 << ": KS " << report.margins[j].ks << ", p = " << report.margins[j].p_value
              << ", 90% coverage " << report.coverage[j] << '\n';
}

void cmd_experiment(const Globals& g, const std::string& which, std::size_t seeds) {
  const fs::path out(g.out);
  const json section = g.section(which);
  if (which == "lognormal") {
    auto cfg = LognormalExperimentConfig::from_json(section);
    cfg.threads = g.thread_count();
    for (std::size_t k = 0; k < seeds; ++k) {
      cfg.seed = g.seed + k;
      const fs::path dir = seeds > 1 ? out / ("seed_" + std::to_string(cfg.seed)) : out;
      const auto r = run_lognormal_experiment(cfg, dir);
      std::cout << "seed " << cfg.seed << ": KS recal/ref (" << r.ks_recal_ref[0] << ", " << r.ks_recal_ref[1]
                << "), aux/ref (" << r.ks_aux_ref[0] << ", " << r.ks_aux_ref[1] << ")\n";
    }
  } else if (which == "twisted") {
    auto cfg = TwistedExperimentConfig::from_json(section);
    if (g.paper_scale && !section.contains("replicates")) cfg.replicates = 1000;
    cfg.seed = g.seed;
    cfg.threads = g.thread_count();
    const auto r = run_twisted_experiment(cfg, out);
    for (const auto& p : r.pipelines) {
      const auto [mse, at] = r.optimum(p);
      std::cout << p << ": min MSE " << mse << " at " << at << '\n';
    }
  } else if (which == "stereo") {
    auto cfg = StereoExperimentConfig::from_json(section);
    if (g.paper_scale) {
      if (!section.contains("n_sims")) cfg.n_sims = 2000000;
      if (!section.contains("keep")) cfg.keep = 2000;
    }
    cfg.seed = g.seed;
    cfg.threads = g.thread_count();
    for (const auto& r : run_stereo_experiment(cfg, out))
      std::cout << to_string(r.shape) << ": p_xi mean " << r.p_xi_report.mean << ", KS p " << r.p_xi_report.p_value
                << ", xi means " << r.xi_mean[0] << ' ' << r.xi_mean[1] << ' ' << r.xi_mean[2] << ' '
                << r.xi_mean[3] << '\n';
  } else {
    throw ConfigError("unknown experiment '" + which + "'");
  }
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"ABC with recalibration post-processing"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--seed", g.seed, "Base random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads (0: hardware concurrency)");
  app.add_option("--out", g.out, "Output directory")->capture_default_str();
  app.add_option("--config", g.config_path, "JSON config file")->check(CLI::ExistingFile);
  app.add_flag("--paper-scale", g.paper_scale, "Use the full simulation budgets");

  std::string model_name, theta;
  auto* sim = app.add_subcommand("simulate", "Simulate one dataset");
  sim->add_option("--model", model_name, "Model name")->required();
  sim->add_option("--theta", theta, "Comma-separated parameter values");

  AbcArgs abc;
  auto* abc_cmd = app.add_subcommand("abc", "ABC rejection sampling");
  abc_cmd->require_subcommand(1);
  auto* run = abc_cmd->add_subcommand("run", "Simulate and weight a particle bank");
  run->set_help_flag("--help", "Print this help message and exit");
  run->add_option("--model", abc.model)->required();
  run->add_option("--n", abc.n, "Number of simulations")->capture_default_str();
  auto* ac = run->add_option("--accept-count", abc.accept_count, "Nonzero-weight particles");
  run->add_option("--accept-rate", abc.accept_rate, "Fraction of particles with nonzero weight")->excludes(ac);
  run->add_option("--h", abc.h, "Fixed kernel scale");
  run->add_option("--kernel", abc.kernel, "epanechnikov|uniform|gaussian")->capture_default_str();
  run->add_option("--s-obs", abc.s_obs, "Observed summaries, comma separated");
  run->add_option("--theta", abc.theta, "Parameter generating the observed data");

  RecalArgs rec;
  auto* rc = app.add_subcommand("recalibrate", "Recalibrate an ABC run");
  rc->add_option("--in", rec.in, "Directory written by abc run")->required();
  rc->add_option("--estimator", rec.estimator, "ecdf|aux:<name>")->capture_default_str();
  rc->add_option("--local-accept-count", rec.local_accept_count, "Local neighbourhood size (0: same as run)");
  rc->add_option("--theta-adjust", rec.theta_adjust, "none|linear")->capture_default_str();
  rc->add_option("--p-adjust", rec.p_adjust, "none|logit-regression")->capture_default_str();

  CoverageArgs cov;
  auto* diag = app.add_subcommand("diagnose", "Diagnostics");
  diag->require_subcommand(1);
  auto* cv = diag->add_subcommand("coverage", "Replicate coverage diagnostic");
  cv->add_option("--model", cov.model)->required();
  cv->add_option("--procedure", cov.procedure, "prior|abc|abc-recal|aux:<name> or a JSON file")->capture_default_str();
  cv->add_option("--reps", cov.reps)->capture_default_str();
  cv->add_option("--n", cov.n, "Simulations per replicate")->capture_default_str();
  cv->add_option("--accept-count", cov.accept_count)->capture_default_str();
  cv->add_option("--kernel", cov.kernel)->capture_default_str();
  cv->add_option("--neighborhood-frac", cov.neighborhood_frac, "Keep replicates closest to --s-obs");
  cv->add_option("--s-obs", cov.s_obs);

  std::string which;
  std::size_t seeds = 1;
  auto* ex = app.add_subcommand("experiment", "Run an experiment driver");
  ex->add_option("name", which, "lognormal|twisted|stereo")->required()->check(CLI::IsMember({"lognormal", "twisted", "stereo"}));
  ex->add_option("--seeds", seeds, "Lognormal only: number of consecutive seeds")->capture_default_str();

  CLI11_PARSE(app, argc, argv);
  try {
    if (!g.config_path.empty()) g.config = read_json(g.config_path);
    if (*sim) cmd_simulate(g, model_name, theta);
    else if (*run) cmd_abc_run(g, abc);
    else if (*rc) cmd_recalibrate(g, rec);
    else if (*cv) cmd_coverage(g, cov);
    else if (*ex) cmd_experiment(g, which, seeds);
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
