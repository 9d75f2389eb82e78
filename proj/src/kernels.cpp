#include "recal/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "recal/error.hpp"

namespace recal {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

double midpoint_above(double lo, double hi) {
  const double h = lo + 0.5 * (hi - lo);
  return h > lo ? h : hi;
}

// Shared by the public overload and the neighbour queries; reorders `d`.
Bandwidth bandwidth_inplace(std::vector<double>& d, std::size_t m) {
  const std::size_t n = d.size();
  if (m < 1) throw ConfigError("bandwidth_for_count: target count must be >= 1");
  if (m >= n) throw ConfigError("bandwidth_for_count: target count must be below the particle count");
  const auto kth = d.begin() + static_cast<std::ptrdiff_t>(m - 1);
  std::nth_element(d.begin(), kth, d.end());
  const double dm = *kth;
  // Everything after kth is >= dm; find the tie count and the next distinct value.
  std::size_t ties = 0;
  double next = kInf;
  for (auto it = kth + 1; it != d.end(); ++it) {
    if (*it == dm) ++ties;
    else if (*it < next) next = *it;
  }
  if (next == kInf) return {kInf, n};
  return {midpoint_above(dm, next), m + ties};
}

} // namespace

KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "epanechnikov") return KernelFamily::epanechnikov;
  if (name == "uniform") return KernelFamily::uniform;
  if (name == "gaussian") return KernelFamily::gaussian;
  throw ConfigError("unknown kernel family '" + std::string(name) + "'");
}

std::string to_string(KernelFamily family) {
  switch (family) {
  case KernelFamily::epanechnikov: return "epanechnikov";
  case KernelFamily::uniform: return "uniform";
  case KernelFamily::gaussian: return "gaussian";
  }
  return "unknown";
}

double kernel_weight(double u, const KernelSpec& kernel) {
  if (kernel.infinite()) return 1.0;
  const double r = u / kernel.h;
  switch (kernel.family) {
  case KernelFamily::epanechnikov: return u < kernel.h ? 1.0 - r * r : 0.0;
  case KernelFamily::uniform: return u < kernel.h ? 1.0 : 0.0;
  case KernelFamily::gaussian: return std::exp(-0.5 * r * r);
  }
  return 0.0;
}

DistanceSpec DistanceSpec::from_mad(const Matrix& summaries) {
  const Eigen::Index q = summaries.cols();
  DistanceSpec spec;
  spec.scales.resize(q);
  std::vector<double> col(static_cast<std::size_t>(summaries.rows()));
  for (Eigen::Index j = 0; j < q; ++j) {
    for (Eigen::Index i = 0; i < summaries.rows(); ++i) col[static_cast<std::size_t>(i)] = summaries(i, j);
    const double med = median_inplace(col);
    for (Eigen::Index i = 0; i < summaries.rows(); ++i)
      col[static_cast<std::size_t>(i)] = std::abs(summaries(i, j) - med);
    const double mad = median_inplace(col);
    spec.scales[j] = (mad > 0.0 && std::isfinite(mad)) ? mad : 1.0;
  }
  return spec;
}

DistanceSpec DistanceSpec::unit(std::size_t q) {
  return {Vector::Ones(static_cast<Eigen::Index>(q))};
}

double distance(std::span<const double> s, std::span<const double> s_obs, const DistanceSpec& spec) {
  if (s.size() != s_obs.size() || s.size() != static_cast<std::size_t>(spec.scales.size()))
    throw ContractViolation("distance: length mismatch");
  double sum = 0.0;
  for (std::size_t j = 0; j < s.size(); ++j) {
    const double diff = (s[j] - s_obs[j]) / spec.scales[static_cast<Eigen::Index>(j)];
    sum += diff * diff;
  }
  return std::sqrt(sum);
}

Vector distances_to(const Matrix& summaries, std::span<const double> s_obs, const DistanceSpec& spec) {
  Vector out(summaries.rows());
  for (Eigen::Index i = 0; i < summaries.rows(); ++i) out[i] = distance(row_span(summaries, i), s_obs, spec);
  return out;
}

Bandwidth bandwidth_for_count(std::span<const double> distances, std::size_t m) {
  std::vector<double> copy(distances.begin(), distances.end());
  return bandwidth_inplace(copy, m);
}

NeighborFinder::NeighborFinder(const Matrix& summaries, DistanceSpec scaling)
    : summaries_(summaries), scaling_(std::move(scaling)), n_(static_cast<std::size_t>(summaries.rows())) {
  if (scaling_.scales.size() != summaries_.cols())
    throw ContractViolation("NeighborFinder: scaling length differs from summary dimension");
  if (summaries_.cols() == 1) {
    order_.resize(n_);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    std::stable_sort(order_.begin(), order_.end(), [&](std::size_t a, std::size_t b) {
      return summaries_(static_cast<Eigen::Index>(a), 0) < summaries_(static_cast<Eigen::Index>(b), 0);
    });
    rank_.resize(n_);
    sorted_.resize(n_);
    for (std::size_t r = 0; r < n_; ++r) {
      rank_[order_[r]] = r;
      sorted_[r] = summaries_(static_cast<Eigen::Index>(order_[r]), 0);
    }
  }
}

void NeighborFinder::query(std::size_t i, std::size_t m, KernelFamily family, Neighborhood& out) const {
  if (i >= n_) throw ContractViolation("NeighborFinder: particle index out of range");
  if (m < 1) throw ConfigError("NeighborFinder: local count must be >= 1");
  out.index.clear();
  out.weight.clear();
  if (m >= n_ - 1) {
    out.h = kInf;
    for (std::size_t k = 0; k < n_; ++k) {
      if (k == i) continue;
      out.index.push_back(k);
      out.weight.push_back(1.0);
    }
    return;
  }
  if (!order_.empty() && family != KernelFamily::gaussian) query_sorted(i, m, family, out);
  else query_generic(i, m, family, out);
}

void NeighborFinder::window(std::size_t i, std::size_t m, KernelFamily family, Window& out) const {
  if (order_.empty()) throw ContractViolation("NeighborFinder::window needs scalar summaries");
  if (family == KernelFamily::gaussian) throw ContractViolation("NeighborFinder::window needs a compact kernel");
  if (i >= n_) throw ContractViolation("NeighborFinder: particle index out of range");
  if (m < 1) throw ConfigError("NeighborFinder: local count must be >= 1");
  const std::size_t pos = rank_[i];
  if (m >= n_ - 1) {
    out.first = 0;
    out.last = n_;
    out.h = kInf;
    out.weight.assign(n_, 1.0);
    out.weight[pos] = 0.0;
    return;
  }
  // same rounding as distance(), so ties resolve identically
  const double x = sorted_[pos];
  const double scale = scaling_.scales[0];
  auto dist = [&](std::size_t r) { return std::abs((sorted_[r] - x) / scale); };

  // L = number of neighbours taken on the left. Taking one more on the left
  // (and one fewer on the right) helps while the next left point is closer.
  std::size_t lo = m > n_ - 1 - pos ? m - (n_ - 1 - pos) : 0;
  std::size_t hi = std::min(pos, m);
  while (lo < hi) {
    const std::size_t L = lo + (hi - lo) / 2;
    if (dist(pos - L - 1) < dist(pos + m - L)) lo = L + 1;
    else hi = L;
  }
  const std::size_t L = lo;
  std::size_t first = pos - L;
  std::size_t last = pos + (m - L) + 1;
  double dm = 0.0;
  if (L > 0) dm = dist(first);
  if (m - L > 0) dm = std::max(dm, dist(last - 1));
  while (first > 0 && dist(first - 1) <= dm) --first;
  while (last < n_ && dist(last) <= dm) ++last;
  const double dl = first > 0 ? dist(first - 1) : kInf;
  const double dr = last < n_ ? dist(last) : kInf;
  const double next = std::min(dl, dr);
  out.h = next == kInf ? kInf : midpoint_above(dm, next);
  out.first = first;
  out.last = last;
  out.weight.resize(last - first);
  double* w = out.weight.data();
  const std::size_t k = last - first;
  const double* s = sorted_.data() + first;
  if (out.h == kInf) {
    std::fill(w, w + k, 1.0);
  } else {
    const KernelSpec kernel{family, out.h};
    for (std::size_t r = 0; r < k; ++r) w[r] = kernel_weight(std::abs((s[r] - x) / scale), kernel);
  }
  w[pos - first] = 0.0;
}

void NeighborFinder::query_sorted(std::size_t i, std::size_t m, KernelFamily family, Neighborhood& out) const {
  Window w;
  window(i, m, family, w);
  out.h = w.h;
  for (std::size_t r = w.first; r < w.last; ++r) {
    const double wr = w.weight[r - w.first];
    if (!(wr > 0.0)) continue;
    out.index.push_back(order_[r]);
    out.weight.push_back(wr);
  }
}

void NeighborFinder::query_generic(std::size_t i, std::size_t m, KernelFamily family, Neighborhood& out) const {
  auto& d = out.buffer;
  d.resize(n_);
  const auto si = row_span(summaries_, static_cast<Eigen::Index>(i));
  for (std::size_t k = 0; k < n_; ++k)
    d[k] = k == i ? kInf : distance(row_span(summaries_, static_cast<Eigen::Index>(k)), si, scaling_);
  out.scratch.clear();
  for (std::size_t k = 0; k < n_; ++k)
    if (k != i) out.scratch.push_back(d[k]);
  const Bandwidth bw = bandwidth_inplace(out.scratch, m);
  out.h = bw.h;
  const KernelSpec kernel{family, bw.h};
  for (std::size_t k = 0; k < n_; ++k) {
    if (k == i) continue;
    const double w = kernel_weight(d[k], kernel);
    if (w > 0.0) {
      out.index.push_back(k);
      out.weight.push_back(w);
    }
  }
}

} // namespace recal
