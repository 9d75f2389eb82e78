#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "recal/abc.hpp"
#include "recal/marginal.hpp"
#include "recal/model.hpp"

namespace recal {

enum class ThetaAdjust { none, linear };
enum class PAdjust { none, logit_regression };

ThetaAdjust parse_theta_adjust(const std::string& name);
PAdjust parse_p_adjust(const std::string& name);
std::string to_string(ThetaAdjust a);
std::string to_string(PAdjust a);

/// The marginal estimator used both at s_obs and at every s^(i): a weighted
/// ECDF of a kernel neighbourhood, optionally after local-linear adjustment
/// of theta towards the neighbourhood centre.
struct LocalProcedure {
  ThetaAdjust theta_adjust = ThetaAdjust::none;
  std::vector<bool> log_scale; // per margin; only used by linear adjustment
};

/// Realised p-vectors p^(i) = (F~_{1,s^(i)}(theta_1^(i)), ...), one row per
/// accepted particle.
///
/// Each row is a draw from G_{s^(i)}(p) = F_s[(F~_1^-1(p_1), ..., F~_d^-1(p_d))],
/// the law that links the estimated marginals at s to the true partial
/// posterior. G itself is never formed; recalibration only transports these
/// samples. Rows of flagged particles (degenerate local marginal) hold NaN.
struct PMatrix {
  Matrix values;
  std::vector<std::size_t> particle; // bank index of each row, ascending
  std::vector<char> flagged;

  std::size_t rows() const { return particle.size(); }
  std::size_t n_flagged() const;
};

struct RecalibrationProvenance {
  std::string estimator = "ecdf";
  ThetaAdjust theta_adjust = ThetaAdjust::none;
  PAdjust p_adjust = PAdjust::none;
  KernelSpec kernel;
  std::size_t accepted = 0;
  std::size_t local_accept_count = 0;
  std::size_t n_flagged = 0;  // passed through unadjusted
  std::size_t n_excluded = 0; // auxiliary path: dropped after failed fits
  std::uint64_t seed = 0;
};

struct RecalibrationResult {
  Matrix recalibrated_thetas;        // rows aligned with `particle`
  Vector weights;                    // copied from the approximation
  PMatrix p;
  std::vector<std::size_t> particle; // bank index of each row
  RecalibrationProvenance provenance;
};

// Leave-one-out marginals F~_{j,s^(i)} for an accepted particle i: the same
// kernel family and distance scaling as the original run, h chosen so that
// m_local other particles get positive weight.
MarginalSet local_marginals(const ABCApproximation& approx, std::size_t i, std::size_t m_local,
                            const LocalProcedure& procedure = {});

// F~_{j,s_obs}: the ECDFs of the (adjusted) accepted particles.
MarginalSet target_marginals(const ABCApproximation& approx, const LocalProcedure& procedure = {});

PMatrix compute_p(const ABCApproximation& approx, std::size_t m_local, const LocalProcedure& procedure = {},
                  unsigned threads = 1);

// Logit-link regression of unflagged rows on s^(i) - s_obs with the ABC weights.
PMatrix adjust_p(const PMatrix& p, const ABCApproximation& approx);

// theta_hat_j = F~_{j,s_obs}^-1(p_j) row by row; flagged rows keep theta.
RecalibrationResult recalibrate(const ABCApproximation& approx, const PMatrix& p, const MarginalSet& targets);

struct RecalibrationOptions {
  std::size_t local_accept_count = 0; // 0: reuse the approximation's acceptance count
  LocalProcedure procedure;
  PAdjust p_adjust = PAdjust::none;
  unsigned threads = 1;
};

// Full ECDF-path pipeline: compute_p, optional p adjustment, recalibrate.
RecalibrationResult recalibrate_abc(const ABCApproximation& approx, const RecalibrationOptions& options = {});

/// Closed-form marginal posteriors indexed by an auxiliary point estimate s.
class AuxiliaryEstimator {
public:
  virtual ~AuxiliaryEstimator() = default;
  virtual std::string name() const = 0;
  // d marginals F~_{j,s}; may throw FitFailure for unusable s.
  virtual MarginalSet marginals(std::span<const double> s) const = 0;
};

// Auxiliary-estimator recalibration of an approximation whose summaries are
// the auxiliary point estimates. Particles whose auxiliary marginals cannot be
// formed are excluded and counted.
RecalibrationResult recalibrate_auxiliary(const ABCApproximation& approx, const AuxiliaryEstimator& aux,
                                          PAdjust p_adjust = PAdjust::none);

// Simulate, weight and recalibrate with an auxiliary estimator in one call.
RecalibrationResult recalibrate_with_auxiliary(const SimulatorModel& model, const AuxiliaryEstimator& aux,
                                               const Vector& s_obs, std::size_t n, const WeightingSpec& weighting,
                                               std::uint64_t seed, unsigned threads = 1);

} // namespace recal
