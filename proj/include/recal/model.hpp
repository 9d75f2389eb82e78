#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "recal/prior.hpp"
#include "recal/rng.hpp"
#include "recal/types.hpp"

namespace recal {

using DataSet = std::vector<double>;

/// A generative model p(y | theta) with a prior and a summary map S(y).
///
/// simulate() must be a pure function of (theta, rng state) and summarize()
/// deterministic; bank construction relies on both for reproducibility.
/// summarize() returns nullopt when the summary itself is a fit (an auxiliary
/// MLE, a Laplace mode) and that fit failed; such particles are dropped and
/// counted rather than imputed.
class SimulatorModel {
public:
  virtual ~SimulatorModel() = default;

  virtual std::string name() const = 0;
  virtual std::size_t dim_theta() const = 0;
  virtual std::size_t dim_summary() const = 0;
  virtual const PriorSpec& prior() const = 0;
  virtual DataSet simulate(std::span<const double> theta, Rng& rng) const = 0;
  virtual std::optional<Vector> summarize(const DataSet& y) const = 0;

  virtual std::vector<std::string> parameter_names() const;
  // Parameters confined to (0, inf); regression adjustment works on their log.
  virtual std::vector<bool> positive_parameters() const;
};

} // namespace recal
