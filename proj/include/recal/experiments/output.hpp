#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "recal/diagnostics.hpp"
#include "recal/kernels.hpp"
#include "recal/recalibration.hpp"

namespace recal {

std::uint64_t fnv1a(std::string_view bytes);
// Hex FNV-1a of the compact dump of a JSON config (keys sorted by nlohmann).
std::string config_hash(const nlohmann::json& config);

/// Sidecar JSON written next to every CSV output.
class Manifest {
public:
  Manifest(std::string command, const nlohmann::json& config, std::uint64_t seed);

  nlohmann::json& data() { return data_; }
  // Records wall time since construction and writes pretty JSON.
  void write(const std::filesystem::path& path);

private:
  nlohmann::json data_;
  std::chrono::steady_clock::time_point start_;
};

nlohmann::json to_json(const UniformityReport& r);
nlohmann::json to_json(const KernelSpec& k);
nlohmann::json to_json(const RecalibrationProvenance& p);

// theta_hat_1..d, p_1..d, weight, flag
void write_recalibration_csv(const std::filesystem::path& path, const RecalibrationResult& result);
// p_1..d, flag
void write_p_csv(const std::filesystem::path& path, const PMatrix& p);
// method,<names...>,weight in long format; one block per call with the same writer
struct SampleBlock {
  std::string method;
  const Matrix* thetas;
  const Vector* weights; // null: equal weights
};
void write_samples_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                       const std::vector<SampleBlock>& blocks);

void ensure_directory(const std::filesystem::path& dir);

} // namespace recal
