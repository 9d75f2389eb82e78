#include "recal/models/conjugate_normal.hpp"

#include <cmath>
#include <numeric>

#include "recal/error.hpp"

namespace recal {

ConjugateNormalModel::ConjugateNormalModel(std::size_t n) : n_(n), prior_({Margin::normal(0.0, 1.0)}) {
  if (n < 1) throw ConfigError("conjugate-normal: n must be >= 1");
}

DataSet ConjugateNormalModel::simulate(std::span<const double> theta, Rng& rng) const {
  DataSet y(n_);
  for (double& v : y) v = theta[0] + rng.normal();
  return y;
}

std::optional<Vector> ConjugateNormalModel::summarize(const DataSet& y) const {
  if (y.empty()) throw ContractViolation("conjugate-normal: empty dataset");
  Vector s(1);
  s[0] = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(y.size());
  return s;
}

double ConjugateNormalModel::posterior_mean(double s) const {
  const double n = static_cast<double>(n_);
  return n * s / (n + 1.0);
}

double ConjugateNormalModel::posterior_sd() const { return 1.0 / std::sqrt(static_cast<double>(n_) + 1.0); }

ConjugateNormalPosterior::ConjugateNormalPosterior(const ConjugateNormalModel& model, double sd_scale,
                                                   double shift_sd)
    : model_(model), sd_scale_(sd_scale), shift_sd_(shift_sd) {
  if (!(sd_scale > 0.0)) throw ConfigError("sd scale must be positive");
}

MarginalSet ConjugateNormalPosterior::marginals(std::span<const double> s) const {
  const double sd = model_.posterior_sd();
  return {std::make_shared<GaussianMarginal>(model_.posterior_mean(s[0]) + shift_sd_ * sd, sd * sd_scale_)};
}

} // namespace recal
