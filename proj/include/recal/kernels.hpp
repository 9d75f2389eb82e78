#pragma once

#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "recal/types.hpp"

namespace recal {

enum class KernelFamily { epanechnikov, uniform, gaussian };

KernelFamily parse_kernel_family(std::string_view name);
std::string to_string(KernelFamily family);

/// Smoothing kernel K_h. h = +inf gives every particle weight one.
struct KernelSpec {
  KernelFamily family = KernelFamily::epanechnikov;
  double h = std::numeric_limits<double>::infinity();

  bool compact() const { return family != KernelFamily::gaussian; }
  bool infinite() const { return h == std::numeric_limits<double>::infinity(); }
};

// Unnormalised kernel value at distance u >= 0. Weights are renormalised
// downstream, so normalising constants are omitted.
double kernel_weight(double u, const KernelSpec& kernel);

/// Per-coordinate scaling for the Euclidean summary distance.
struct DistanceSpec {
  Vector scales;

  // Median absolute deviation of each summary column; zero-MAD columns use 1.
  static DistanceSpec from_mad(const Matrix& summaries);
  static DistanceSpec unit(std::size_t q);
};

double distance(std::span<const double> s, std::span<const double> s_obs, const DistanceSpec& spec);
Vector distances_to(const Matrix& summaries, std::span<const double> s_obs, const DistanceSpec& spec);

struct Bandwidth {
  double h = 0.0;
  std::size_t count = 0; // particles strictly inside h; exceeds m only on ties
};

// Bandwidth admitting the m closest distances under a compact kernel: the
// midpoint between the m-th and (m+1)-th smallest distance. Ties at the m-th
// distance are all admitted and the larger count reported. If nothing lies
// beyond the tie, h = +inf. Requires 1 <= m < distances.size().
Bandwidth bandwidth_for_count(std::span<const double> distances, std::size_t m);

/// Leave-one-out kernel neighbourhoods over a fixed particle bank.
///
/// For scalar summaries the bank is kept sorted, so a query touches only the
/// O(m) particles around the query point instead of all N.
class NeighborFinder {
public:
  struct Neighborhood {
    std::vector<std::size_t> index; // particles with positive kernel weight
    std::vector<double> weight;     // matching kernel weights (unnormalised)
    double h = 0.0;
    // scratch space reused across queries
    std::vector<double> buffer;
    std::vector<double> scratch;
  };

  // Scalar summaries: a neighbourhood is a run [first, last) of the sorted
  // order. weight[r - first] is the kernel weight of order()[r], and 0 at the
  // query particle itself.
  struct Window {
    std::size_t first = 0;
    std::size_t last = 0;
    std::vector<double> weight;
    double h = 0.0;
  };

  NeighborFinder(const Matrix& summaries, DistanceSpec scaling);

  // True when window() is available (scalar summaries).
  bool sorted() const { return !order_.empty(); }
  const std::vector<std::size_t>& order() const { return order_; }
  // Same neighbourhood as query() for compact kernels, as a sorted window.
  void window(std::size_t i, std::size_t m, KernelFamily family, Window& out) const;

  std::size_t size() const { return n_; }

  // Kernel neighbourhood of particle i among all other particles, with h set
  // by bandwidth_for_count(m) on the leave-one-out distances (h = +inf once
  // m >= N - 1).
  void query(std::size_t i, std::size_t m, KernelFamily family, Neighborhood& out) const;

private:
  void query_sorted(std::size_t i, std::size_t m, KernelFamily family, Neighborhood& out) const;
  void query_generic(std::size_t i, std::size_t m, KernelFamily family, Neighborhood& out) const;

  Matrix summaries_;
  DistanceSpec scaling_;
  std::size_t n_;
  std::vector<std::size_t> order_; // scalar case: particles sorted by summary
  std::vector<std::size_t> rank_;
  std::vector<double> sorted_; // scalar case: summaries in sorted order
};

} // namespace recal
