#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "recal/types.hpp"

namespace recal {

struct TwistedExperimentConfig {
  std::size_t n_particles = 10000;
  std::vector<std::size_t> grid = {100, 300, 1000, 3000, 5000, 8000, 10000};
  std::size_t replicates = 200;
  double y_obs = 1.0;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  static TwistedExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Pipeline names, in output order.
const std::vector<std::string>& twisted_pipelines();

struct TwistedExperimentResult {
  std::vector<std::string> pipelines;
  std::vector<std::size_t> grid;
  Matrix mse;        // pipelines x grid
  Matrix estimates;  // (replicate * grid) x pipelines, raw estimates of E(theta_1 - theta_2)
  double oracle = 0.0;

  double at(const std::string& pipeline, std::size_t accept_count) const;
  // Smallest MSE over the grid and its accept count.
  std::pair<double, std::size_t> optimum(const std::string& pipeline) const;
};

// MSE of E(theta_1 - theta_2 | y_obs) per pipeline and accept count against
// the quadrature oracle. Writes twisted_mse.csv (pipeline,accept_count,mse,log10_mse)
// and a manifest when `out` is given.
TwistedExperimentResult run_twisted_experiment(const TwistedExperimentConfig& cfg,
                                               const std::optional<std::filesystem::path>& out = std::nullopt);

} // namespace recal
