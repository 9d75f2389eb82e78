#include "recal/models/twisted.hpp"

#include <cmath>

namespace recal {

TwistedNormalModel::TwistedNormalModel() : prior_({Margin::normal(0.0, 1.0), Margin::normal(0.0, 1.0)}) {}

double simulate_twisted(std::span<const double> theta) { return theta[0] + theta[1] * theta[1]; }

DataSet TwistedNormalModel::simulate(std::span<const double> theta, Rng&) const {
  return {simulate_twisted(theta)};
}

std::optional<Vector> TwistedNormalModel::summarize(const DataSet& y) const {
  Vector s(1);
  s[0] = y.at(0);
  return s;
}

double twisted_level_density(double t, double y) {
  const double r = y - t * t;
  return std::exp(-0.5 * r * r - 0.5 * t * t);
}

Matrix sample_twisted_posterior(std::size_t n, Rng& rng, double y) {
  Matrix out(static_cast<Eigen::Index>(n), 2);
  for (Eigen::Index i = 0; i < out.rows();) {
    const double t = rng.normal();
    const double r = y - t * t;
    if (rng.uniform() < std::exp(-0.5 * r * r)) {
      out(i, 0) = r;
      out(i, 1) = t;
      ++i;
    }
  }
  return out;
}

} // namespace recal
