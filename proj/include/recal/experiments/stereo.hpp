#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include "json.hpp"

#include "recal/diagnostics.hpp"
#include "recal/models/stereo.hpp"
#include "recal/types.hpp"

namespace recal {

struct StereoExperimentConfig {
  StereoConfig model;                 // shape is overridden per run
  std::vector<InclusionShape> shapes = {InclusionShape::spherical, InclusionShape::ellipsoidal};
  std::size_t n_sims = 200000;
  std::size_t keep = 1000;
  std::size_t local_keep = 0;         // 0: same as keep
  std::uint64_t seed = 1;
  unsigned threads = 1;

  static StereoExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Weighted xi samples of the four methods for one inclusion shape:
/// (a) regression-adjusted ABC on the quantile summaries, (b) its
/// recalibration, (c) regression-adjusted ABC on (n', sigma~, xi~),
/// (d) recalibration of the spline-Gaussian auxiliary estimator.
struct StereoShapeResult {
  InclusionShape shape = InclusionShape::spherical;
  Vector xi_a, w_a, xi_b, w_b, xi_c, w_c, xi_d, w_d;
  std::vector<double> p_xi;           // from (b), unflagged rows
  UniformityReport p_xi_report;
  std::array<double, 4> xi_mean{};    // weighted means of (a)..(d)
  std::size_t n_failed = 0;           // bank particles without a GPD fit
  std::size_t n_flagged = 0;          // (b) rows passed through
  std::size_t n_excluded = 0;         // (d) rows dropped
  bool spline_fallback = false;
};

std::vector<StereoShapeResult> run_stereo_experiment(const StereoExperimentConfig& cfg,
                                                     const std::optional<std::filesystem::path>& out = std::nullopt);

} // namespace recal
