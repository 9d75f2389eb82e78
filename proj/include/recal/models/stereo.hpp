#pragma once

#include <array>
#include <optional>
#include <utility>

#include "recal/model.hpp"
#include "recal/models/gpd.hpp"

namespace recal {

enum class InclusionShape { spherical, ellipsoidal };

InclusionShape parse_inclusion_shape(const std::string& name);
std::string to_string(InclusionShape shape);

/// Inclusions with centres from a homogeneous Poisson process of rate lambda
/// in a unit-area slab of thickness T, sizes V = v0 + GPD(sigma, xi), observed
/// on the plane z = T / 2.
struct StereoConfig {
  InclusionShape shape = InclusionShape::spherical;
  double v0 = 5.0;
  double slab = 250.0; // T
  std::array<double, 3> truth = {100.0, 1.5, 0.1};                 // (lambda, sigma, xi)
  std::array<std::pair<double, double>, 3> prior = {{{5.0, 300.0}, {0.1, 10.0}, {-1.0, 2.0}}};

  // Throws ConfigError on invalid values or when P(V > T / 2) >= 1e-6 at the truth.
  void validate() const;
};

// Largest diameter of the section of an ellipsoid with principal diameters
// (a, b, c), a >= b >= c > 0, rotated by R, cut by the plane at signed
// distance dz from its centre. Empty when the plane misses it.
std::optional<double> ellipse_section(const Eigen::Vector3d& diameters, const Eigen::Matrix3d& rotation, double dz);

// Rotation matrix of a uniformly distributed unit quaternion.
Eigen::Matrix3d random_rotation(Rng& rng);

// Observed section sizes above v0. Only inclusions that can produce a
// section larger than v0 are generated (Poisson thinning over the
// centre-to-plane distance), which leaves the law of the data unchanged.
DataSet simulate_stereo(const StereoConfig& config, double lambda, double sigma, double xi, Rng& rng);

inline constexpr std::array<double, 6> kStereoQuantileLevels = {0.5, 0.7, 0.9, 0.95, 0.99, 1.0};

// (n', q_0.5, q_0.7, q_0.9, q_0.95, q_0.99, q_1), type-7 quantiles; an empty
// dataset gives quantiles equal to v0.
Vector stereo_summaries(const DataSet& y, double v0);

// (n', sigma~, xi~) from a GPD fit above v0; empty when the fit fails.
std::optional<Vector> stereo_aux_summaries(const DataSet& y, double v0);

enum class StereoSummaryKind { standard, auxiliary, combined };

/// theta = (lambda, sigma, xi) under independent uniform priors.
/// combined summaries are (standard 7, sigma~, xi~) so one bank serves both
/// summary sets; see stereo_standard_columns / stereo_aux_columns.
class StereoModel final : public SimulatorModel {
public:
  StereoModel(StereoConfig config, StereoSummaryKind kind);

  std::string name() const override;
  std::size_t dim_theta() const override { return 3; }
  std::size_t dim_summary() const override;
  const PriorSpec& prior() const override { return prior_; }
  DataSet simulate(std::span<const double> theta, Rng& rng) const override;
  std::optional<Vector> summarize(const DataSet& y) const override;
  std::vector<std::string> parameter_names() const override { return {"lambda", "sigma", "xi"}; }
  std::vector<bool> positive_parameters() const override { return {true, true, false}; }

  const StereoConfig& config() const { return config_; }

private:
  StereoConfig config_;
  StereoSummaryKind kind_;
  PriorSpec prior_;
};

inline constexpr std::array<std::size_t, 7> kStereoStandardColumns = {0, 1, 2, 3, 4, 5, 6};
inline constexpr std::array<std::size_t, 3> kStereoAuxColumns = {0, 7, 8};

} // namespace recal
