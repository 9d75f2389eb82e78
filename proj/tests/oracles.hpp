#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "recal/rng.hpp"

namespace recal::oracle {

// Largest section diameter by Monte Carlo: uniform points in the plane,
// kept when inside the ellipsoid, then the maximal width over directions.
inline double mc_section(const Eigen::Vector3d& diam, const Eigen::Matrix3d& rot, double dz, Rng& rng) {
  const double half = 0.5 * diam.maxCoeff();
  std::vector<Eigen::Vector2d> pts;
  while (pts.size() < 30000) {
    const Eigen::Vector3d p(rng.uniform(-half, half), rng.uniform(-half, half), dz);
    const Eigen::Vector3d body = rot.transpose() * p;
    double r = 0;
    for (int k = 0; k < 3; ++k) r += std::pow(2 * body[k] / diam[k], 2);
    if (r <= 1.0) pts.emplace_back(p[0], p[1]);
  }
  double best = 0;
  for (int a = 0; a < 360; ++a) {
    const Eigen::Vector2d u(std::cos(a * M_PI / 360), std::sin(a * M_PI / 360));
    double lo = 1e300, hi = -1e300;
    for (const auto& p : pts) {
      const double t = u.dot(p);
      lo = std::min(lo, t);
      hi = std::max(hi, t);
    }
    best = std::max(best, hi - lo);
  }
  return best;
}

} // namespace recal::oracle
