#include "recal/particles.hpp"

#include <cmath>
#include <optional>

#include "recal/csv.hpp"
#include "recal/error.hpp"
#include "recal/parallel.hpp"

namespace recal {

std::vector<std::string> SimulatorModel::parameter_names() const {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < dim_theta(); ++j) names.push_back("theta_" + std::to_string(j + 1));
  return names;
}

std::vector<bool> SimulatorModel::positive_parameters() const {
  return std::vector<bool>(dim_theta(), false);
}

void ParticleSet::normalize_weights() {
  const double total = weights.sum();
  if (!(total > 0.0)) throw DegenerateError("particle weights are all zero");
  weights /= total;
}

void ParticleSet::validate() const {
  if (thetas.rows() < 1) throw ContractViolation("ParticleSet: no particles");
  if (summaries.rows() != thetas.rows() || weights.size() != thetas.rows())
    throw ContractViolation("ParticleSet: row counts differ");
  if (!thetas.allFinite() || !summaries.allFinite() || !weights.allFinite())
    throw ContractViolation("ParticleSet: non-finite entries");
  if ((weights.array() < 0.0).any()) throw ContractViolation("ParticleSet: negative weight");
}

SimulationBank simulate_bank(const SimulatorModel& model, std::size_t n, std::uint64_t seed,
                             unsigned threads) {
  if (n < 1) throw ConfigError("simulate_bank: n must be >= 1");
  const auto d = static_cast<Eigen::Index>(model.dim_theta());
  const auto q = static_cast<Eigen::Index>(model.dim_summary());
  Matrix thetas(static_cast<Eigen::Index>(n), d);
  Matrix summaries(static_cast<Eigen::Index>(n), q);
  std::vector<char> ok(n, 0);

  parallel_for(n, threads, [&](std::size_t i) {
    Rng rng(seed, i);
    Vector theta = model.prior().sample(rng);
    const DataSet y = model.simulate(as_span(theta), rng);
    std::optional<Vector> s = model.summarize(y);
    const auto row = static_cast<Eigen::Index>(i);
    thetas.row(row) = theta.transpose();
    if (s && s->allFinite()) {
      summaries.row(row) = s->transpose();
      ok[i] = 1;
    }
  });

  SimulationBank bank;
  std::size_t kept = 0;
  for (char flag : ok) kept += flag ? 1 : 0;
  bank.n_failed = n - kept;
  if (kept == 0) throw DegenerateError("simulate_bank: every summary fit failed");
  auto& ps = bank.particles;
  ps.seed = seed;
  ps.thetas.resize(static_cast<Eigen::Index>(kept), d);
  ps.summaries.resize(static_cast<Eigen::Index>(kept), q);
  bank.source_index.reserve(kept);
  Eigen::Index r = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!ok[i]) continue;
    ps.thetas.row(r) = thetas.row(static_cast<Eigen::Index>(i));
    ps.summaries.row(r) = summaries.row(static_cast<Eigen::Index>(i));
    bank.source_index.push_back(i);
    ++r;
  }
  ps.weights = Vector::Constant(static_cast<Eigen::Index>(kept), 1.0 / static_cast<double>(kept));
  return bank;
}

void write_particles_csv(const std::filesystem::path& path, const ParticleSet& particles) {
  std::vector<std::string> header;
  for (std::size_t j = 0; j < particles.dim_theta(); ++j) header.push_back("theta_" + std::to_string(j + 1));
  for (std::size_t j = 0; j < particles.dim_summary(); ++j) header.push_back("s_" + std::to_string(j + 1));
  header.push_back("weight");
  CsvWriter out(path, header);
  std::vector<double> row(header.size());
  for (Eigen::Index i = 0; i < particles.thetas.rows(); ++i) {
    std::size_t k = 0;
    for (Eigen::Index j = 0; j < particles.thetas.cols(); ++j) row[k++] = particles.thetas(i, j);
    for (Eigen::Index j = 0; j < particles.summaries.cols(); ++j) row[k++] = particles.summaries(i, j);
    row[k] = particles.weights[i];
    out.row(row);
  }
}

ParticleSet read_particles_csv(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  std::size_t d = 0, q = 0;
  bool has_weight = false;
  for (const auto& name : table.header) {
    if (name.rfind("theta_", 0) == 0) ++d;
    else if (name.rfind("s_", 0) == 0) ++q;
    else if (name == "weight") has_weight = true;
  }
  if (d == 0 || !has_weight) throw ConfigError(path.string() + ": not a particle CSV");
  if (table.rows.empty()) throw ConfigError(path.string() + ": no particles");
  ParticleSet ps;
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  ps.thetas.resize(n, static_cast<Eigen::Index>(d));
  ps.summaries.resize(n, static_cast<Eigen::Index>(q));
  ps.weights.resize(n);
  std::vector<std::size_t> theta_cols, s_cols;
  for (std::size_t j = 0; j < d; ++j) theta_cols.push_back(table.column("theta_" + std::to_string(j + 1)));
  for (std::size_t j = 0; j < q; ++j) s_cols.push_back(table.column("s_" + std::to_string(j + 1)));
  const std::size_t wcol = table.column("weight");
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = table.rows[static_cast<std::size_t>(i)];
    for (std::size_t j = 0; j < d; ++j) ps.thetas(i, static_cast<Eigen::Index>(j)) = r[theta_cols[j]];
    for (std::size_t j = 0; j < q; ++j) ps.summaries(i, static_cast<Eigen::Index>(j)) = r[s_cols[j]];
    ps.weights[i] = r[wcol];
  }
  ps.validate();
  return ps;
}

} // namespace recal
