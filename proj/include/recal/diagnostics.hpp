#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "recal/marginal.hpp"
#include "recal/model.hpp"
#include "recal/types.hpp"

namespace recal {

struct KsResult {
  double statistic = 0.0; // D_n = sup |F_n(x) - x|
  double p_value = 1.0;
};

// One-sample Kolmogorov-Smirnov test against U(0, 1), asymptotic p-value.
// Throws ContractViolation for an empty sample or entries outside [0, 1].
KsResult ks_uniform(std::span<const double> sample);

// Kolmogorov limiting survival function Q(sqrt(n) * d), clamped to [0, 1].
double kolmogorov_pvalue(double d, std::size_t n);

inline constexpr std::size_t kHistogramBins = 20;

struct UniformityReport {
  double ks = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  std::array<std::size_t, kHistogramBins> histogram{};
  double mean = 0.0;
  double skewness = 0.0;
};

UniformityReport uniformity_report(std::span<const double> sample);

// Two-sample KS distance sup |F_a - F_b| between step ECDFs of weighted
// samples. Weights need not be normalised; empty weight spans mean equal weights.
double ks_distance(std::span<const double> a, std::span<const double> wa, std::span<const double> b,
                   std::span<const double> wb);

// sup |F_a - G| between the step ECDF of a weighted sample and a continuous
// distribution function.
double ks_distance(std::span<const double> a, std::span<const double> wa, const MarginalPosterior& g);

/// Inference procedure under test: marginal posteriors for a pseudo-observed
/// summary, given a replicate seed for any internal simulation.
using InferenceProcedure = std::function<MarginalSet(const Vector& s0, std::uint64_t seed)>;

struct CoverageOptions {
  std::size_t n_reps = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
  // Fraction of replicates kept, those with summaries closest to s_obs (MAD
  // scaled). 1 keeps every replicate and s_obs is ignored.
  double neighborhood_frac = 1.0;
  std::optional<Vector> s_obs;
  double interval = 0.9; // nominal central interval mass for the coverage rate
};

struct CoverageReport {
  Matrix p;                           // rows: kept replicates, cols: margins
  Matrix theta0;                      // truth behind each row
  std::vector<UniformityReport> margins;
  std::vector<double> coverage;       // share of truths inside the central interval
  std::size_t n_failed = 0;
  std::size_t n_reps = 0;
};

// Draws theta0 from the prior, simulates, summarises, runs the procedure and
// records p_j = F~_{j,s0}(theta0_j) for each replicate. Failed replicates
// (summary or inference) are counted; more than 10% failures throws
// DegenerateError. Requires n_reps >= 50.
CoverageReport coverage_diagnostic(const SimulatorModel& model, const InferenceProcedure& procedure,
                                   const CoverageOptions& options);

} // namespace recal
