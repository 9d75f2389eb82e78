#pragma once

#include <array>
#include <filesystem>
#include <optional>

#include "json.hpp"

#include "recal/models/lognormal_sum.hpp"
#include "recal/recalibration.hpp"

namespace recal {

struct LognormalExperimentConfig {
  LognormalSumParams model;
  std::array<double, 2> truth = {0.0, 1.0};
  std::size_t n_particles = 10000;
  std::size_t n_reference = 100000;
  double reference_keep = 0.005;
  std::uint64_t seed = 1;
  unsigned threads = 1;

  static LognormalExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct LognormalExperimentResult {
  AuxGaussianPosterior aux;      // Laplace fit to the observed data
  RecalibrationResult recalibrated;
  Matrix reference;              // accepted low-h ABC particles (equal weights)
  std::array<double, 2> ks_recal_ref{};
  std::array<double, 2> ks_aux_ref{};
  std::array<double, 2> reference_mean{};
  std::array<double, 2> recal_mean{};
  std::size_t n_failed_fits = 0;
};

// Laplace auxiliary posterior, its recalibration with h = inf, and a low-h
// rejection reference on s = theta* (uniform kernel). Writes CSV/JSON outputs
// when `out` is given.
LognormalExperimentResult run_lognormal_experiment(const LognormalExperimentConfig& cfg,
                                                   const std::optional<std::filesystem::path>& out = std::nullopt);

} // namespace recal
