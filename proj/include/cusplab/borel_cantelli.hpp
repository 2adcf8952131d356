#pragma once

// Indicator streams X_n = 1{Y_n > r_n}, their ensemble statistics and the
// quasi-independent Borel-Cantelli diagnostics built on them:
//
//   p_n = P(X_n = 1),  p_{n,n+m} = P(X_n X_{n+m} = 1),
//   Var(J_n) <= sum p_i + 2 sum_{m<=n} psi(m) (n - m)  for J_n = sum_{i<=n} X_i,
//   sum_{m<=n} psi(m) (n - m) / (sum_{i<=n} p_i)^2 -> 0.
//
// Also a planted dependent model with covariance C0 p^2 m^{-beta}, the i.i.d.
// exponential example and the interval estimator for the limsup exponent.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "cusplab/flows.hpp"
#include "cusplab/rng.hpp"
#include "cusplab/stats.hpp"

namespace cusplab {

/// r_n = (gamma / k) log n.
struct RSchedule {
  double gamma = 1;
  double k = 1;

  double threshold(std::size_t n) const;
};

/// Bit-packed 0/1 sequences X_1..X_N, one row per ensemble point.
class EventStream {
 public:
  EventStream(std::size_t length, std::size_t ensemble);

  std::size_t length() const { return length_; }
  std::size_t ensemble() const { return ensemble_; }
  /// n is 1-based.
  bool get(std::size_t point, std::size_t n) const;
  void set(std::size_t point, std::size_t n, bool value = true);
  std::size_t hits(std::size_t point) const;
  /// Hit positions of one point in increasing order.
  std::vector<std::size_t> hit_times(std::size_t point) const;

  std::vector<double> thresholds;  // r_n, n = 1..N, when built from a schedule

 private:
  std::size_t length_;
  std::size_t ensemble_;
  std::size_t words_;
  std::vector<std::uint64_t> bits_;
};

/// X_n = 1 iff depth at integer time n exceeds r_n. Every series must contain
/// the times 1..N, N = floor of the smallest final time.
EventStream make_stream(std::span<const ExcursionSeries> series, const RSchedule& schedule);

/// Same from depths sampled at n = 1..N (depths[point][n-1]).
EventStream make_stream(std::span<const std::vector<double>> depths, const RSchedule& schedule);

struct PsiFit {
  double c = 0;
  double beta = std::numeric_limits<double>::infinity();
  double beta_stderr = 0;
  /// No lag showed a covariance above noise: independent at this resolution.
  bool degenerate = true;
  std::vector<std::size_t> lags;   // lags used in the fit
  std::vector<double> rho;         // normalized covariance per lag
  std::vector<double> rho_sigma;   // its noise level
};

struct BCReport {
  std::size_t ensemble = 0;
  std::vector<double> p_hat;              // n = 1..N
  std::vector<Interval> p_interval;
  std::vector<std::size_t> lags;
  std::vector<std::vector<double>> joint_hat;       // [lag][n-1], n + m <= N
  std::vector<std::vector<Interval>> joint_interval;
  double sum_p = 0;
  PsiFit psi;
  std::vector<std::size_t> curve_n;       // where the two curves below are evaluated
  std::vector<double> variance_bound_curve;
  std::vector<double> condition3_ratio;
};

/// Ensemble means p_n and p_{n,n+m} with Wilson intervals. Needs >= 1000 points.
BCReport estimate_joint(const EventStream& stream, std::span<const std::size_t> lags);

/// Fits (p_{n,n+m} - p_n p_{n+m}) = C p_n p_{n+m} m^{-beta} on lags in
/// [4, N/10]. Per lag the ratio rho_m = sum_n cov / sum_n p_n p_{n+m} is
/// formed; lags with rho_m > 2 sigma_m enter a weighted log-log fit. Needs at
/// least 8 lags in the window spanning two decades (InsufficientDataError);
/// fewer than three significant lags give the degenerate marker.
PsiFit psi_fit(const BCReport& report, std::size_t horizon);

/// sum_{i<=n} p_i + 2 sum_{m=1}^{n} psi(m) (n - m).
double variance_bound(std::span<const double> p, const std::function<double(std::size_t)>& psi, std::size_t n);

/// sum_{m=1}^{n} psi(m) (n - m) / (sum_{i<=n} p_i)^2; DivisionByZeroError when the sum of p is 0.
double condition3_ratio(std::span<const double> p, const std::function<double(std::size_t)>& psi, std::size_t n);

/// Fills report.curve_n / variance_bound_curve / condition3_ratio.
void attach_condition_curves(BCReport& report, const std::function<double(std::size_t)>& psi,
                             std::span<const std::size_t> ns);

/// Finite-horizon limsup estimate for i.i.d. Exp(lambda): max of Y_n / log n
/// over n in [N/4, N]. Y_n = -log(U_n) / lambda, so estimates for different
/// lambda with one seed differ exactly by the factor 1/lambda.
double simulate_iid_exponential(double lambda, std::size_t n_max, std::uint64_t seed);

/// Bernoulli stream with covariance close to C0 p^2 m^{-beta}. X_n is a coin
/// with bias p W_n, where W_n = w_base + sum_j w_j M_j and M_j in {0, K} (mean
/// 1) is a two-state factor redrawn after geometric waiting times of mean 2^j.
/// Factor j contributes w_j^2 (K-1) exp(-m / 2^j) to the covariance; the
/// amplitudes discretize m^{-beta} = Gamma(beta)^{-1} int x^{beta-1} e^{-mx} dx.
struct PlantedModel {
  double p = 0;
  double c0 = 0;
  double beta = 0;
  int levels = 0;  // memory lengths 2^0 .. 2^levels
  double k_value = 0;
  double w_base = 0;
  std::vector<double> weights;  // w_j, j = 0..levels

  /// Builds the model covering lags up to `horizon`; throws std::invalid_argument
  /// if p is too large for the resulting K.
  static PlantedModel make(double p, double c0, double beta, std::size_t horizon);
  /// Largest admissible p for these weights.
  double max_p() const;
  /// Exact model covariance of X_n, X_{n+m}.
  double covariance(std::size_t m) const;
};

/// One stream per ensemble point; point i uses derive_seed(seed, i).
EventStream planted_stream(const PlantedModel& model, std::size_t length, std::size_t ensemble,
                           std::uint64_t seed, unsigned workers = 1);

/// J_n at each checkpoint (increasing) for every ensemble point, without
/// storing the streams. Result is [point][checkpoint].
std::vector<std::vector<std::uint64_t>> planted_counts(const PlantedModel& model,
                                                       std::span<const std::size_t> checkpoints,
                                                       std::size_t ensemble, std::uint64_t seed,
                                                       unsigned workers = 1);

/// Same for independent coins with P(X_n = 1) = p(n).
std::vector<std::vector<std::uint64_t>> independent_counts(const std::function<double(std::size_t)>& p,
                                                           std::span<const std::size_t> checkpoints,
                                                           std::size_t ensemble, std::uint64_t seed,
                                                           unsigned workers = 1);

/// Independent coins as a stream.
EventStream independent_stream(const std::function<double(std::size_t)>& p, std::size_t length,
                               std::size_t ensemble, std::uint64_t seed);

/// Per-gamma hit statistics of X_n = 1{D_n > (gamma/k) log n}, summed over
/// ensemble points. Octave j holds the hits with n in [2^j, 2^{j+1}).
struct HitProfile {
  double gamma = 0;
  double k = 1;
  std::size_t horizon = 0;
  std::size_t ensemble = 0;
  std::vector<std::uint64_t> octave_hits;
  std::uint64_t sum_final = 0, sumsq_final = 0;  // J_N
  std::uint64_t sum_early = 0, sumsq_early = 0;  // J_{floor(sqrt N)}

  void merge(const HitProfile& other);
};

/// Profiles of one point for every gamma; depths[n-1] is the depth at time n.
std::vector<HitProfile> hit_profiles(std::span<const double> depths, std::span<const double> gammas, double k);

struct AlphaInterval {
  double lower = 0;
  double upper = 0;
  std::vector<double> gammas;
  std::vector<double> growth;         // log2 hits per octave, slope
  std::vector<double> growth_stderr;
  std::vector<double> rel_var_final;  // Var(J_N) / E(J_N)^2
  std::vector<double> rel_var_early;  // same at floor(sqrt N)
  std::vector<std::uint64_t> last_octave_hits;
};

/// Interval estimate of alpha from profiles on an increasing gamma grid (same
/// k, horizon and ensemble). upper = smallest gamma whose octave hit counts
/// decay (slope < -2 stderr) or vanish in the last full octave; lower =
/// largest gamma whose counts grow (slope > 2 stderr) with relative variance
/// of J falling from floor(sqrt N) to N. InconclusiveError when either side is
/// missing or lower > upper.
AlphaInterval limsup_exponent(std::span<const HitProfile> profiles, double k);

}  // namespace cusplab
