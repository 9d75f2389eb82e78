#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "recal/kernels.hpp"
#include "recal/marginal.hpp"
#include "recal/model.hpp"
#include "recal/particles.hpp"

namespace recal {

/// How particles are weighted against s_obs: a kernel family plus either a
/// fixed h or a target count of nonzero-weight particles.
struct WeightingSpec {
  KernelFamily family = KernelFamily::epanechnikov;
  double h = std::numeric_limits<double>::infinity();
  std::size_t accept_count = 0; // > 0: derive h by bandwidth_for_count; >= N: h = +inf
};

/// Weighted particle bank approximating pi_ABC(theta | s_obs).
///
/// The whole bank is retained, zero-weight particles included, because the
/// leave-one-out local marginals of recalibration reuse it.
struct ABCApproximation {
  ParticleSet particles; // weights normalised over all N
  KernelSpec kernel;
  DistanceSpec scaling;
  Vector distances;
  Vector s_obs;
  std::vector<std::size_t> accepted; // ascending indices with weight > 0
  std::size_t n_failed = 0;          // simulations dropped for failed summaries

  std::size_t size() const { return particles.size(); }
  std::size_t dim_theta() const { return particles.dim_theta(); }
  // Nonzero-weight count requested (h derivation) or 0 for a fixed h.
  std::size_t target_count = 0;
};

// Weights an existing bank against s_obs. The bank's own weights are ignored.
// If `scaling` is empty the MAD scaling of the bank is used.
// Throws DegenerateError (minimum distance in the message) if every weight is zero.
ABCApproximation weight_particles(ParticleSet bank, const Vector& s_obs, const WeightingSpec& weighting,
                                  std::optional<DistanceSpec> scaling = std::nullopt);

// Simulate-and-weight: N prior-predictive particles weighted by
// K_h(|s - s_obs|).
ABCApproximation run_abc(const SimulatorModel& model, const Vector& s_obs, std::size_t n,
                         const WeightingSpec& weighting, std::uint64_t seed, unsigned threads = 1);

// Weighted ECDF of parameter j (0-based) under the approximation's weights.
WeightedECDF marginal_of(const ABCApproximation& approx, std::size_t j);

} // namespace recal
