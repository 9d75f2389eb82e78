#pragma once

#include <memory>
#include <string>
#include <vector>

#include "json.hpp"

#include "recal/model.hpp"
#include "recal/recalibration.hpp"

namespace recal {

std::vector<std::string> model_names();

// Builds a model by name from an optional JSON object of model settings:
//   conjugate-normal   {"n"}
//   lognormal-sum      {"L", "n"}
//   twisted-normal     {}
//   stereo-spherical / stereo-ellipsoidal
//                      {"v0", "slab", "truth": [l, s, x], "prior": [[lo, hi] x3],
//                       "summaries": "standard" | "auxiliary" | "combined"}
// Throws ConfigError for unknown names or keys.
std::unique_ptr<SimulatorModel> make_model(const std::string& name, const nlohmann::json& settings = {});

// Parameter value used to generate observed data when none is given.
Vector default_truth(const SimulatorModel& model);

// Closed-form auxiliary estimator for aux:<name>; the model must outlive it.
std::unique_ptr<AuxiliaryEstimator> make_auxiliary(const std::string& name, const SimulatorModel& model);

} // namespace recal
