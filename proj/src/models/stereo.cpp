#include "recal/models/stereo.hpp"

#include <algorithm>
#include <cmath>

#include "recal/error.hpp"

namespace recal {

namespace {

constexpr int kCells = 256;

// GPD survival P(V > v) for V = v0 + GPD(sigma, xi).
double survival(double v, double v0, double sigma, double xi) {
  if (v <= v0) return 1.0;
  const double z = (v - v0) / sigma;
  if (std::abs(xi) < kGpdXiZero) return std::exp(-z);
  const double t = xi * z;
  if (!(t > -1.0)) return 0.0;
  return std::exp(-std::log1p(t) / xi);
}

// V given P(V > v) = s.
double size_at_survival(double s, double v0, double sigma, double xi) {
  const double l = std::log(s);
  if (std::abs(xi) < kGpdXiZero) return v0 - sigma * l;
  return v0 + sigma * std::expm1(-xi * l) / xi;
}

} // namespace

InclusionShape parse_inclusion_shape(const std::string& name) {
  if (name == "spherical") return InclusionShape::spherical;
  if (name == "ellipsoidal") return InclusionShape::ellipsoidal;
  throw ConfigError("unknown inclusion shape '" + name + "'");
}

std::string to_string(InclusionShape shape) {
  return shape == InclusionShape::spherical ? "spherical" : "ellipsoidal";
}

void StereoConfig::validate() const {
  if (!(v0 > 0.0)) throw ConfigError("stereo: v0 must be positive");
  if (!(slab > 0.0)) throw ConfigError("stereo: slab thickness must be positive");
  if (!(truth[0] >= 0.0) || !(truth[1] > 0.0)) throw ConfigError("stereo: truth needs lambda >= 0, sigma > 0");
  for (const auto& [lo, hi] : prior)
    if (!(lo < hi)) throw ConfigError("stereo: prior bounds need lo < hi");
  if (!(prior[0].first >= 0.0) || !(prior[1].first > 0.0))
    throw ConfigError("stereo: prior must keep lambda >= 0 and sigma > 0");
  const double tail = survival(0.5 * slab, v0, truth[1], truth[2]);
  if (!(tail < 1e-6))
    throw ConfigError("stereo: slab too thin, P(V > T/2) = " + std::to_string(tail) + " at the truth");
}

std::optional<double> ellipse_section(const Eigen::Vector3d& diameters, const Eigen::Matrix3d& rotation, double dz) {
  const Eigen::Vector3d inv = (4.0 / diameters.array().square()).matrix();
  const Eigen::Matrix3d q = rotation * inv.asDiagonal() * rotation.transpose();
  const Eigen::Matrix2d a = q.topLeftCorner<2, 2>();
  const Eigen::Vector2d b = q.topRightCorner<2, 1>();
  const double k = 1.0 - dz * dz * (q(2, 2) - b.dot(a.ldlt().solve(b)));
  if (!(k > 0.0)) return std::nullopt;
  // smallest eigenvalue of the symmetric 2x2 block
  const double mean = 0.5 * (a(0, 0) + a(1, 1));
  const double diff = 0.5 * (a(0, 0) - a(1, 1));
  const double lmin = mean - std::sqrt(diff * diff + a(0, 1) * a(0, 1));
  return 2.0 * std::sqrt(k / lmin);
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  q.normalize();
  return q.toRotationMatrix();
}

DataSet simulate_stereo(const StereoConfig& c, double lambda, double sigma, double xi, Rng& rng) {
  if (lambda < 0.0 || !(sigma > 0.0)) throw DomainError("simulate_stereo: need lambda >= 0 and sigma > 0");
  DataSet out;
  if (lambda == 0.0) return out;
  const double width = c.slab / kCells;
  const double v0sq = c.v0 * c.v0;
  // d = |2 Z - T| ~ U(0, T); a section exceeds v0 only if V > sqrt(d^2 + v0^2).
  double bound_next = survival(c.v0, c.v0, sigma, xi);
  for (int k = 0; k < kCells; ++k) {
    const double lo = width * k;
    const double bound = bound_next;
    bound_next = survival(std::sqrt((lo + width) * (lo + width) + v0sq), c.v0, sigma, xi);
    if (!(bound > 0.0)) break;
    const std::uint64_t m = rng.poisson(lambda * width * bound);
    for (std::uint64_t i = 0; i < m; ++i) {
      const double d = lo + width * rng.uniform();
      const double s = survival(std::sqrt(d * d + v0sq), c.v0, sigma, xi);
      if (rng.uniform() * bound >= s) continue;
      const double v = size_at_survival(s * rng.uniform(), c.v0, sigma, xi);
      double y;
      if (c.shape == InclusionShape::spherical) {
        y = std::sqrt(v * v - d * d);
      } else {
        double u1 = rng.uniform(), u2 = rng.uniform();
        if (u1 < u2) std::swap(u1, u2);
        const Eigen::Matrix3d r = random_rotation(rng);
        const auto sec = ellipse_section(Eigen::Vector3d(v, u1 * v, u2 * v), r, 0.5 * d);
        if (!sec) continue;
        y = *sec;
      }
      if (y > c.v0) out.push_back(y);
    }
  }
  return out;
}

Vector stereo_summaries(const DataSet& y, double v0) {
  Vector s(1 + static_cast<Eigen::Index>(kStereoQuantileLevels.size()));
  s[0] = static_cast<double>(y.size());
  if (y.empty()) {
    s.tail(kStereoQuantileLevels.size()).setConstant(v0);
    return s;
  }
  std::vector<double> x = y;
  std::sort(x.begin(), x.end());
  const double n1 = static_cast<double>(x.size() - 1);
  for (std::size_t k = 0; k < kStereoQuantileLevels.size(); ++k) {
    const double h = n1 * kStereoQuantileLevels[k];
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, x.size() - 1);
    s[static_cast<Eigen::Index>(k + 1)] = x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
  }
  return s;
}

std::optional<Vector> stereo_aux_summaries(const DataSet& y, double v0) {
  try {
    const GPDFit fit = gpd_mle(y, v0);
    Vector s(3);
    s << static_cast<double>(y.size()), fit.sigma, fit.xi;
    return s;
  } catch (const FitFailure&) {
    return std::nullopt;
  }
}

StereoModel::StereoModel(StereoConfig config, StereoSummaryKind kind) : config_(std::move(config)), kind_(kind) {
  config_.validate();
  std::vector<Margin> margins;
  for (const auto& [lo, hi] : config_.prior) margins.push_back(Margin::uniform(lo, hi));
  prior_ = PriorSpec(std::move(margins));
}

std::string StereoModel::name() const { return "stereo-" + to_string(config_.shape); }

std::size_t StereoModel::dim_summary() const {
  switch (kind_) {
  case StereoSummaryKind::standard: return 7;
  case StereoSummaryKind::auxiliary: return 3;
  case StereoSummaryKind::combined: return 9;
  }
  return 0;
}

DataSet StereoModel::simulate(std::span<const double> theta, Rng& rng) const {
  return simulate_stereo(config_, theta[0], theta[1], theta[2], rng);
}

std::optional<Vector> StereoModel::summarize(const DataSet& y) const {
  if (kind_ == StereoSummaryKind::standard) return stereo_summaries(y, config_.v0);
  const auto aux = stereo_aux_summaries(y, config_.v0);
  if (!aux) return std::nullopt;
  if (kind_ == StereoSummaryKind::auxiliary) return aux;
  Vector s(9);
  s.head(7) = stereo_summaries(y, config_.v0);
  s[7] = (*aux)[1];
  s[8] = (*aux)[2];
  return s;
}

} // namespace recal
