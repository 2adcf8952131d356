#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cusplab/lattice_space.hpp"
#include "cusplab/rng.hpp"
#include "cusplab/stats.hpp"

namespace cusplab {

/// Haar-distributed point of SL(2,R)/SL(2,Z): (Re z, Im z) with density
/// y^{-2} on the standard fundamental domain and a uniform frame angle.
/// The returned representative is reduced.
LatticePointd sample_modular(std::uint64_t seed);
LatticePointd sample_modular(Engine& eng);

/// Generic (not Haar) point of SL(3,R)/SL(3,Z): Gaussian matrix with positive
/// orientation, scaled to determinant 1, reduced.
LatticePointd sample_generic(std::uint64_t seed, int n = 3);
LatticePointd sample_generic(Engine& eng, int n = 3);

/// Upper-half-plane coordinates used by sample_modular, exposed for tests.
struct ModularCoordinates {
  double x;
  double y;
  double theta;
};
ModularCoordinates sample_modular_coordinates(Engine& eng);
LatticePointd lattice_from_coordinates(const ModularCoordinates& c);

struct TailEstimate {
  std::vector<double> thresholds;
  std::vector<std::uint64_t> hits;
  std::uint64_t total = 0;
  std::vector<double> empirical_prob;
  std::vector<Interval> intervals;  // Wilson, 95%
  double fitted_k = 0;
  double fitted_log_c = 0;  // intercept of log P(D > t) = log C - k t
  double ci_halfwidth = 0;  // 95% half-width for fitted_k (delta method)
};

/// Empirical mu(D > t) over `samples` random points.
/// Thresholds must be increasing and inside [2, 12]; samples >= 1e5.
/// Throws InsufficientDataError when the largest threshold has < 100 hits.
TailEstimate tail_measure(std::uint64_t samples, std::span<const double> thresholds, std::uint64_t seed,
                          int n = 2, unsigned workers = 1);

/// Depth samples in index order; chunked seeding makes the result
/// independent of `workers`.
std::vector<double> sample_depths(std::uint64_t samples, std::uint64_t seed, int n = 2, unsigned workers = 1);

/// Fits the tail from precomputed hit counts (no threshold-window checks).
TailEstimate fit_tail(std::span<const double> thresholds, std::span<const std::uint64_t> hits,
                      std::uint64_t total);

}  // namespace cusplab
