#include "recal/prior.hpp"

#include <boost/math/special_functions/gamma.hpp>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "recal/error.hpp"

namespace recal {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double base_logpdf(const Margin& m, double x) {
  switch (m.family) {
  case MarginFamily::normal: {
    const double z = (x - m.a) / m.b;
    return -0.5 * z * z - std::log(m.b) - 0.5 * std::log(2.0 * std::numbers::pi);
  }
  case MarginFamily::gamma:
    if (x <= 0.0) return kNegInf;
    return m.a * std::log(m.b) - std::lgamma(m.a) + (m.a - 1.0) * std::log(x) - m.b * x;
  case MarginFamily::uniform:
    if (x < m.a || x > m.b) return kNegInf;
    return -std::log(m.b - m.a);
  }
  return kNegInf;
}

double base_cdf(const Margin& m, double x) {
  switch (m.family) {
  case MarginFamily::normal:
    return 0.5 * std::erfc(-(x - m.a) / (m.b * std::numbers::sqrt2));
  case MarginFamily::gamma:
    return x <= 0.0 ? 0.0 : boost::math::gamma_p(m.a, m.b * x);
  case MarginFamily::uniform:
    if (x <= m.a) return 0.0;
    if (x >= m.b) return 1.0;
    return (x - m.a) / (m.b - m.a);
  }
  return 0.0;
}

} // namespace

Margin Margin::normal(double mean, double sd) {
  return {MarginFamily::normal, mean, sd, MarginTransform::identity};
}

Margin Margin::gamma(double shape, double rate) {
  return {MarginFamily::gamma, shape, rate, MarginTransform::identity};
}

Margin Margin::uniform(double lo, double hi) {
  return {MarginFamily::uniform, lo, hi, MarginTransform::identity};
}

Margin Margin::on_square() const {
  Margin out = *this;
  out.transform = MarginTransform::square;
  return out;
}

void Margin::validate() const {
  if (!std::isfinite(a) || !std::isfinite(b))
    throw ConfigError("prior hyperparameters must be finite");
  switch (family) {
  case MarginFamily::normal:
    if (b <= 0.0) throw ConfigError("normal prior needs sd > 0");
    break;
  case MarginFamily::gamma:
    if (a <= 0.0 || b <= 0.0) throw ConfigError("gamma prior needs shape > 0 and rate > 0");
    break;
  case MarginFamily::uniform:
    if (!(a < b)) throw ConfigError("uniform prior needs lo < hi");
    break;
  }
  if (transform == MarginTransform::square && lower() < 0.0)
    throw ConfigError("a squared-parameter margin needs nonnegative support");
}

double Margin::sample(Rng& rng) const {
  double x = 0.0;
  switch (family) {
  case MarginFamily::normal: x = a + b * rng.normal(); break;
  case MarginFamily::gamma: x = rng.gamma(a, b); break;
  case MarginFamily::uniform: x = rng.uniform(a, b); break;
  }
  return transform == MarginTransform::square ? std::sqrt(x) : x;
}

double Margin::logpdf(double theta) const {
  if (transform == MarginTransform::identity) return base_logpdf(*this, theta);
  if (theta <= 0.0) return kNegInf;
  // density of theta = f(theta^2) * |d theta^2 / d theta|
  return base_logpdf(*this, theta * theta) + std::log(2.0 * theta);
}

double Margin::cdf(double theta) const {
  if (transform == MarginTransform::identity) return base_cdf(*this, theta);
  return theta <= 0.0 ? 0.0 : base_cdf(*this, theta * theta);
}

double Margin::lower() const {
  const double inf = std::numeric_limits<double>::infinity();
  double lo = family == MarginFamily::normal ? -inf : (family == MarginFamily::gamma ? 0.0 : a);
  if (transform == MarginTransform::square) lo = lo <= 0.0 ? 0.0 : std::sqrt(lo);
  return lo;
}

double Margin::upper() const {
  const double hi = family == MarginFamily::uniform ? b : std::numeric_limits<double>::infinity();
  return transform == MarginTransform::square ? std::sqrt(hi) : hi;
}

std::string Margin::describe() const {
  std::ostringstream os;
  switch (family) {
  case MarginFamily::normal: os << "Normal(" << a << ", " << b << ")"; break;
  case MarginFamily::gamma: os << "Gamma(" << a << ", " << b << ")"; break;
  case MarginFamily::uniform: os << "Uniform(" << a << ", " << b << ")"; break;
  }
  if (transform == MarginTransform::square) os << " on square";
  return os.str();
}

PriorSpec::PriorSpec(std::vector<Margin> margins) : margins_(std::move(margins)) {
  if (margins_.empty()) throw ConfigError("prior needs at least one margin");
  for (const auto& m : margins_) m.validate();
}

Vector PriorSpec::sample(Rng& rng) const {
  Vector theta(static_cast<Eigen::Index>(dim()));
  for (std::size_t j = 0; j < dim(); ++j) theta[static_cast<Eigen::Index>(j)] = margins_[j].sample(rng);
  return theta;
}

double PriorSpec::logpdf(std::span<const double> theta) const {
  if (theta.size() != dim()) throw ContractViolation("prior_logpdf: dimension mismatch");
  double total = 0.0;
  for (std::size_t j = 0; j < dim(); ++j) {
    const double lp = margins_[j].logpdf(theta[j]);
    if (lp == kNegInf) return kNegInf;
    total += lp;
  }
  return total;
}

Matrix sample_prior(const PriorSpec& prior, std::size_t n, Rng& rng) {
  if (n < 1) throw ConfigError("sample_prior: n must be >= 1");
  for (const auto& m : prior.margins()) m.validate();
  Matrix out(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(prior.dim()));
  for (std::size_t i = 0; i < n; ++i)
    out.row(static_cast<Eigen::Index>(i)) = prior.sample(rng).transpose();
  return out;
}

} // namespace recal
