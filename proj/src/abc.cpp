#include "recal/abc.hpp"

#include <string>

#include "recal/error.hpp"

namespace recal {

ABCApproximation weight_particles(ParticleSet bank, const Vector& s_obs, const WeightingSpec& weighting,
                                  std::optional<DistanceSpec> scaling) {
  const std::size_t n = bank.size();
  if (n < 2) throw ConfigError("ABC needs at least two particles");
  if (static_cast<std::size_t>(s_obs.size()) != bank.dim_summary())
    throw ContractViolation("s_obs length differs from the summary dimension");

  ABCApproximation approx;
  approx.scaling = scaling ? std::move(*scaling) : DistanceSpec::from_mad(bank.summaries);
  approx.distances = distances_to(bank.summaries, as_span(s_obs), approx.scaling);
  approx.s_obs = s_obs;
  approx.kernel = {weighting.family, weighting.h};
  if (weighting.accept_count > 0) {
    approx.target_count = weighting.accept_count;
    approx.kernel.h = weighting.accept_count >= n
                          ? std::numeric_limits<double>::infinity()
                          : bandwidth_for_count(as_span(approx.distances), weighting.accept_count).h;
  } else if (!(weighting.h > 0.0)) {
    throw ConfigError("kernel scale h must be positive");
  }

  bank.weights.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const double w = kernel_weight(approx.distances[static_cast<Eigen::Index>(i)], approx.kernel);
    bank.weights[static_cast<Eigen::Index>(i)] = w;
    if (w > 0.0) approx.accepted.push_back(i);
  }
  if (approx.accepted.empty())
    throw DegenerateError("all kernel weights are zero; minimum distance " +
                          std::to_string(approx.distances.minCoeff()) + " vs h " +
                          std::to_string(approx.kernel.h));
  bank.normalize_weights();
  approx.particles = std::move(bank);
  return approx;
}

ABCApproximation run_abc(const SimulatorModel& model, const Vector& s_obs, std::size_t n,
                         const WeightingSpec& weighting, std::uint64_t seed, unsigned threads) {
  if (n < 2) throw ConfigError("run_abc: N must be >= 2");
  if (static_cast<std::size_t>(s_obs.size()) != model.dim_summary())
    throw ContractViolation("run_abc: s_obs length differs from the model summary dimension");
  SimulationBank bank = simulate_bank(model, n, seed, threads);
  ABCApproximation approx = weight_particles(std::move(bank.particles), s_obs, weighting);
  approx.n_failed = bank.n_failed;
  return approx;
}

WeightedECDF marginal_of(const ABCApproximation& approx, std::size_t j) {
  if (j >= approx.dim_theta()) throw ContractViolation("marginal_of: margin index out of range");
  const Vector column = approx.particles.thetas.col(static_cast<Eigen::Index>(j));
  return WeightedECDF(as_span(column), as_span(approx.particles.weights));
}

} // namespace recal
