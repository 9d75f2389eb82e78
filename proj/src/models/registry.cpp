#include "recal/models/registry.hpp"

#include <set>

#include "recal/error.hpp"
#include "recal/models/conjugate_normal.hpp"
#include "recal/models/lognormal_sum.hpp"
#include "recal/models/stereo.hpp"
#include "recal/models/twisted.hpp"

namespace recal {

namespace {

using nlohmann::json;

void check_keys(const json& settings, const std::set<std::string>& allowed, const std::string& model) {
  if (settings.is_null()) return;
  if (!settings.is_object()) throw ConfigError(model + ": settings must be a JSON object");
  for (const auto& [key, _] : settings.items())
    if (!allowed.count(key)) throw ConfigError(model + ": unknown setting '" + key + "'");
}

template <class T>
T get_or(const json& settings, const char* key, T fallback) {
  if (settings.is_null() || !settings.contains(key)) return fallback;
  try {
    return settings.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("setting '") + key + "': " + e.what());
  }
}

StereoConfig stereo_config(const json& s, InclusionShape shape) {
  StereoConfig c;
  c.shape = shape;
  c.v0 = get_or(s, "v0", c.v0);
  c.slab = get_or(s, "slab", 50.0 * c.v0);
  c.truth = get_or(s, "truth", c.truth);
  if (!s.is_null() && s.contains("prior")) {
    const auto bounds = get_or<std::vector<std::vector<double>>>(s, "prior", {});
    if (bounds.size() != 3) throw ConfigError("stereo prior needs three [lo, hi] pairs");
    for (std::size_t j = 0; j < 3; ++j) {
      if (bounds[j].size() != 2) throw ConfigError("stereo prior needs three [lo, hi] pairs");
      c.prior[j] = {bounds[j][0], bounds[j][1]};
    }
  }
  return c;
}

StereoSummaryKind summary_kind(const std::string& name) {
  if (name == "standard") return StereoSummaryKind::standard;
  if (name == "auxiliary") return StereoSummaryKind::auxiliary;
  if (name == "combined") return StereoSummaryKind::combined;
  throw ConfigError("unknown stereo summaries '" + name + "'");
}

} // namespace

std::vector<std::string> model_names() {
  return {"conjugate-normal", "lognormal-sum", "twisted-normal", "stereo-spherical", "stereo-ellipsoidal"};
}

std::unique_ptr<SimulatorModel> make_model(const std::string& name, const json& settings) {
  if (name == "conjugate-normal") {
    check_keys(settings, {"n"}, name);
    return std::make_unique<ConjugateNormalModel>(get_or<std::size_t>(settings, "n", 1));
  }
  if (name == "lognormal-sum") {
    check_keys(settings, {"L", "n"}, name);
    LognormalSumParams p;
    p.L = get_or(settings, "L", p.L);
    p.n = get_or(settings, "n", p.n);
    return std::make_unique<LognormalSumModel>(p);
  }
  if (name == "twisted-normal") {
    check_keys(settings, {}, name);
    return std::make_unique<TwistedNormalModel>();
  }
  if (name == "stereo-spherical" || name == "stereo-ellipsoidal") {
    check_keys(settings, {"v0", "slab", "truth", "prior", "summaries"}, name);
    const auto shape = name == "stereo-spherical" ? InclusionShape::spherical : InclusionShape::ellipsoidal;
    return std::make_unique<StereoModel>(stereo_config(settings, shape),
                                         summary_kind(get_or<std::string>(settings, "summaries", "standard")));
  }
  throw ConfigError("unknown model '" + name + "'");
}

Vector default_truth(const SimulatorModel& model) {
  if (const auto* s = dynamic_cast<const StereoModel*>(&model)) {
    const auto& t = s->config().truth;
    return Eigen::Vector3d(t[0], t[1], t[2]);
  }
  if (dynamic_cast<const LognormalSumModel*>(&model)) return Eigen::Vector2d(0.0, 1.0);
  if (dynamic_cast<const TwistedNormalModel*>(&model)) return Eigen::Vector2d(1.0, 0.0);
  return Vector::Zero(static_cast<Eigen::Index>(model.dim_theta()));
}

std::unique_ptr<AuxiliaryEstimator> make_auxiliary(const std::string& name, const SimulatorModel& model) {
  if (name == "laplace") {
    if (!dynamic_cast<const LognormalSumModel*>(&model)) throw ConfigError("aux:laplace needs lognormal-sum");
    return std::make_unique<LaplaceAuxiliary>();
  }
  if (name == "conjugate-normal") {
    const auto* m = dynamic_cast<const ConjugateNormalModel*>(&model);
    if (!m) throw ConfigError("aux:conjugate-normal needs conjugate-normal");
    return std::make_unique<ConjugateNormalPosterior>(*m);
  }
  throw ConfigError("unknown auxiliary estimator '" + name + "' (laplace|conjugate-normal)");
}

} // namespace recal
