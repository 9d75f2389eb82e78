#include "recal/experiments/output.hpp"

#include <cstdio>
#include <fstream>

#include "recal/csv.hpp"
#include "recal/error.hpp"

namespace recal {

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string config_hash(const nlohmann::json& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
  return buf;
}

Manifest::Manifest(std::string command, const nlohmann::json& config, std::uint64_t seed)
    : start_(std::chrono::steady_clock::now()) {
  data_["command"] = std::move(command);
  data_["config"] = config;
  data_["config_hash"] = config_hash(config);
  data_["seed"] = seed;
}

void Manifest::write(const std::filesystem::path& path) {
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - start_;
  data_["wall_time_seconds"] = wall.count();
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << data_.dump(2) << '\n';
}

nlohmann::json to_json(const UniformityReport& r) {
  return {{"ks", r.ks},     {"p_value", r.p_value}, {"n", r.n},
          {"mean", r.mean}, {"skewness", r.skewness}, {"histogram", r.histogram}};
}

nlohmann::json to_json(const KernelSpec& k) {
  nlohmann::json j{{"family", to_string(k.family)}};
  if (k.infinite())
    j["h"] = "inf";
  else
    j["h"] = k.h;
  return j;
}

nlohmann::json to_json(const RecalibrationProvenance& p) {
  return {{"estimator", p.estimator},
          {"theta_adjust", to_string(p.theta_adjust)},
          {"p_adjust", to_string(p.p_adjust)},
          {"kernel", to_json(p.kernel)},
          {"accepted", p.accepted},
          {"local_accept_count", p.local_accept_count},
          {"n_flagged", p.n_flagged},
          {"n_excluded", p.n_excluded},
          {"seed", p.seed}};
}

void write_recalibration_csv(const std::filesystem::path& path, const RecalibrationResult& result) {
  const auto d = result.recalibrated_thetas.cols();
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < d; ++j) header.push_back("theta_hat_" + std::to_string(j + 1));
  for (Eigen::Index j = 0; j < d; ++j) header.push_back("p_" + std::to_string(j + 1));
  header.push_back("weight");
  header.push_back("flag");
  CsvWriter csv(path, header);
  std::vector<double> row;
  for (Eigen::Index r = 0; r < result.recalibrated_thetas.rows(); ++r) {
    row.clear();
    for (Eigen::Index j = 0; j < d; ++j) row.push_back(result.recalibrated_thetas(r, j));
    for (Eigen::Index j = 0; j < d; ++j) row.push_back(result.p.values(r, j));
    row.push_back(result.weights[r]);
    row.push_back(result.p.flagged[static_cast<std::size_t>(r)] ? 1.0 : 0.0);
    csv.row(row);
  }
}

void write_p_csv(const std::filesystem::path& path, const PMatrix& p) {
  std::vector<std::string> header;
  for (Eigen::Index j = 0; j < p.values.cols(); ++j) header.push_back("p_" + std::to_string(j + 1));
  header.push_back("flag");
  CsvWriter csv(path, header);
  std::vector<double> row;
  for (Eigen::Index r = 0; r < p.values.rows(); ++r) {
    row.assign(p.values.row(r).data(), p.values.row(r).data() + p.values.cols());
    row.push_back(p.flagged[static_cast<std::size_t>(r)] ? 1.0 : 0.0);
    csv.row(row);
  }
}

void write_samples_csv(const std::filesystem::path& path, const std::vector<std::string>& names,
                       const std::vector<SampleBlock>& blocks) {
  std::vector<std::string> header{"method"};
  header.insert(header.end(), names.begin(), names.end());
  header.push_back("weight");
  CsvWriter csv(path, header);
  for (const auto& b : blocks) {
    const Matrix& t = *b.thetas;
    if (t.cols() != static_cast<Eigen::Index>(names.size())) throw ContractViolation("write_samples_csv: width");
    const double eq = 1.0 / static_cast<double>(t.rows());
    for (Eigen::Index r = 0; r < t.rows(); ++r) {
      std::vector<std::string> fields{b.method};
      for (Eigen::Index j = 0; j < t.cols(); ++j) fields.push_back(format_double(t(r, j)));
      fields.push_back(format_double(b.weights ? (*b.weights)[r] : eq));
      csv.row(fields);
    }
  }
}

void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ConfigError("cannot create directory " + dir.string() + ": " + ec.message());
}

} // namespace recal
