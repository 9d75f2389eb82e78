#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "recal/model.hpp"
#include "recal/types.hpp"

namespace recal {

/// N weighted (theta, summary) pairs: the output of the simulate-and-weight
/// loop and the input of every post-processing step.
struct ParticleSet {
  Matrix thetas;    // N x d
  Matrix summaries; // N x q
  Vector weights;   // N, nonnegative
  std::uint64_t seed = 0;

  std::size_t size() const { return static_cast<std::size_t>(thetas.rows()); }
  std::size_t dim_theta() const { return static_cast<std::size_t>(thetas.cols()); }
  std::size_t dim_summary() const { return static_cast<std::size_t>(summaries.cols()); }

  // Rescale weights to sum to one; throws DegenerateError if they are all zero.
  void normalize_weights();
  // Throws ContractViolation on shape mismatch, NaN entries or negative weights.
  void validate() const;
};

struct SimulationBank {
  ParticleSet particles;   // successfully summarised particles, weights all 1/N
  std::size_t n_failed = 0; // particles whose summary fit failed
  std::vector<std::size_t> source_index; // stream index of each kept particle
};

// Simulates n particles from the prior predictive. Particle i draws from
// stream (seed, i) only, so the bank is identical for any thread count.
SimulationBank simulate_bank(const SimulatorModel& model, std::size_t n, std::uint64_t seed,
                             unsigned threads = 1);

// CSV with header theta_1..theta_d,s_1..s_q,weight.
void write_particles_csv(const std::filesystem::path& path, const ParticleSet& particles);
ParticleSet read_particles_csv(const std::filesystem::path& path);

} // namespace recal
