#pragma once

// Orbits of one-parameter subgroups on the lattice space and the excursion
// observables built on them: sampled depth series, running maxima, maximal
// depth over expanding horospherical boxes, backward escape rate, forward
// divergence rate and the construction of points with a divergent forward
// orbit next to a given point.

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

#include "cusplab/group_core.hpp"
#include "cusplab/lattice_space.hpp"
#include "cusplab/stats.hpp"

namespace cusplab {

using GroupElementd = GroupElement<double>;
using OneParamSubgroupd = OneParamSubgroup<double>;

/// Depth D sampled along an orbit. Times strictly increase.
struct ExcursionSeries {
  std::vector<double> times;
  std::vector<double> depths;
  bool refined = false;

  std::size_t size() const { return times.size(); }
  /// Throws std::logic_error if an invariant is broken.
  void validate() const;
};

/// Incremental orbit x, exp(h z) x, exp(2h z) x, ... with re-reduction after
/// every step. n = 2 runs on a scalar fast path.
class OrbitWalker {
 public:
  OrbitWalker(const LatticePointd& x, const OneParamSubgroupd& sub, double step);

  void advance();
  double depth() const;
  double alpha1() const;
  LatticePointd point() const;
  /// exp(tau z) applied to the current point, reduced; tau is expected to be small.
  LatticePointd point_at_offset(double tau) const;
  double depth_at_offset(double tau) const;

 private:
  OneParamSubgroupd sub_;
  int n_;
  double b_[4];   // n = 2 basis, column-major
  double e_[4];   // n = 2 step matrix
  LatticePointd x_;
  GroupElementd step_;
};

struct OrbitOptions {
  bool refine = true;
  /// A coarse local maximum is refined when it exceeds one of its neighbors by more than this.
  double prominence = 0.5;
  /// Width of the final bracket of the refinement search.
  double resolution = 1e-3;
};

/// D(exp(t z) x) on the grid 0, h, 2h, ..., t_max (t_max appended when off-grid),
/// plus refined samples around prominent local maxima.
ExcursionSeries orbit_series(const LatticePointd& x, const OneParamSubgroupd& sub, double t_max, double coarse_step,
                             const OrbitOptions& options = {});

/// M(t) = max over samples up to t.
ExcursionSeries running_max(const ExcursionSeries& series);

/// Largest depth among samples with time in (lo, hi].
double max_depth_in(const ExcursionSeries& series, double lo, double hi);

/// Indices of local maxima (D_i >= both neighbours, D_i > 0).
std::vector<std::size_t> local_maxima(const ExcursionSeries& series);

/// Bounded open box in the coordinates of the expanding horospherical
/// subgroup of a diagonal flow {a_t}. Coordinate (i, j) is the (i, j) entry of
/// a unipotent element; a_{log t} scales it by t^{z_ii - z_jj}.
struct BoxSpec {
  std::vector<Interval> intervals;
  OneParamSubgroupd expanding;

  /// B = {h_s : s in (0, 1)} for the geodesic flow on SL(2,R).
  static BoxSpec unit_horocycle();
  /// Unit cube in all expanding coordinates of a diagonal flow.
  static BoxSpec unit_box(const OneParamSubgroupd& diagonal_flow);

  std::vector<std::pair<int, int>> coordinates() const;
  void validate() const;
};

/// beta_t(x) = sup_{b in B_t} D(b x) for every t of the grid (t > 1, increasing).
/// Sampling spacing is at most 1/2 in expanded coordinates.
ExcursionSeries beta_t(const LatticePointd& x, const BoxSpec& box, std::span<const double> t_grid);

/// max over dyadic t in [T/4, T] of D(exp(-t z) x) / t; T >= 100. Orbits that
/// leave the double range end the scan at the last representable time.
double omega_minus(const LatticePointd& x, const OneParamSubgroupd& sub, double horizon);

/// C(x) with beta_t(x) <= (nu + omega + slack) log t + C(x) for every t of the
/// grid. From b = a_tau u a_{-tau}, tau = log t:
///   D(b x) <= D(a_{-tau} x) + 2 tau max(-z_ii) + 2 log sup_B |u^{-1}|,
/// so C(x) is the largest excess of the right side over the linear term. The
/// operator norm of u^{-1} is exact for n = 2 and bounded by Frobenius for n = 3.
double beta_bound_constant(const LatticePointd& x, const BoxSpec& box, std::span<const double> t_grid, double omega,
                           double slack = 0.1);

/// Least-squares slope of D(exp(t z) x) against t over [T/2, T], sampled every
/// 1/2; diagonal z, T >= 50. Rounding errors in the contracting direction grow
/// like exp(nu t), so exact answers for rational lattices need an extended
/// Scalar (see precision.hpp); double is fine for typical points.
template <typename Scalar>
double divergence_rate(const LatticePoint<Scalar>& x, const OneParamSubgroup<Scalar>& sub, double horizon) {
  if (sub.kind() != GeneratorKind::diagonal) throw std::invalid_argument("divergence_rate needs a diagonal generator");
  if (!(horizon >= 50)) throw std::invalid_argument("divergence_rate needs T >= 50");
  constexpr double h = 0.5;
  const GroupElement<Scalar> step = exp_one_param(sub, Scalar(h));
  LatticePoint<Scalar> cur = reduce(x);
  std::vector<double> ts, ds;
  const auto steps = static_cast<long>(std::floor(horizon / h));
  for (long i = 1; i <= steps; ++i) {
    cur = reduce(translate(step, cur));
    const double t = static_cast<double>(i) * h;
    if (t >= horizon / 2) {
      ts.push_back(t);
      ds.push_back(static_cast<double>(cusp_depth(cur)));
    }
  }
  return fit_line(ts, ds).slope;
}

struct NearDivergentPoint {
  LatticePointd point;        // y = g x, reduced
  GroupElementd g;            // small rotation
  double angle = 0;           // rotation angle of g
  Vector<double> aligned;     // lattice vector of y on the contracting line
  double constant = 0;        // D(exp(t z) y) >= nu t - constant for all t > 0
};

/// n = 2, diagonal z, eps in (0, 0.5): rotates a primitive vector of x lying
/// within angle eps/2 of the contracting eigenline onto that line. Searches
/// vectors of norm <= norm_bound (default 2/eps); throws NotFoundError otherwise.
NearDivergentPoint near_divergent_point(const LatticePointd& x, double eps, const OneParamSubgroupd& sub,
                                        double norm_bound = 0);

/// Integer times t in [lo, hi] with D(exp(-t z) x) < level.
std::vector<double> return_times(const LatticePointd& x, const OneParamSubgroupd& sub, double lo, double hi,
                                 double level);

/// Witness that beta_{e^t}(x) is large: b = a_t h_u a_{-t} lies in
/// B_{e^t} and D(b x) >= nu t - constant.
struct ExcursionCertificate {
  double t = 0;
  double box_coordinate = 0;    // u in the base box
  double depth = 0;             // D(b x), computed directly
  double constant = 0;          // from the aligned vector length
  double lower_bound = 0;       // nu t - constant
};

/// n = 2 construction at time t (0 < t <= 300): pull back by exp(-t z), align a
/// vector of h_{center} exp(-t z) x with the contracting line as in
/// near_divergent_point, split the rotation into lower-triangular times
/// horocycle parts, and push forward again. The box must be a single (0, 1)
/// coordinate interval. Runs in extended precision because the push-forward
/// amplifies rounding by exp(nu t). Throws NotFoundError as
/// near_divergent_point does.
ExcursionCertificate certify_excursion(const LatticePointd& x, double t, double eps, const BoxSpec& box,
                                       double norm_bound = 0);

}  // namespace cusplab
