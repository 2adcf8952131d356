#pragma once

// Continued fractions as ground truth for horocycle excursions on
// SL(2,R)/SL(2,Z).
//
// For Lambda_alpha = [[1, 0], [-alpha, 1]] Z^2 the lattice vector with
// coefficients (-q, -p) is (-q, r) with r = q alpha - p, and h_s moves it to
// (s r - q, r). Its length is |r| sqrt(1 + (s - s*)^2) with s* = q / r, so a
// good rational approximation p/q produces an excursion of depth 2 log(1/|r|)
// at time s*. Negative r gives the excursion at time q/|r| of the reversed
// flow.

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <limits>
#include <variant>
#include <vector>

#include "cusplab/errors.hpp"
#include "cusplab/lattice_space.hpp"

namespace cusplab {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

struct Convergent {
  BigInt p;
  BigInt q;
};

struct ContinuedFraction {
  /// The expanded number; a double is treated as the exact dyadic rational it stores.
  std::variant<double, Rational> value;
  /// Partial quotients a_1, a_2, ... of x = [0; a_1, a_2, ...].
  std::vector<BigInt> quotients;
  /// 0/1 followed by p_k/q_k for every quotient.
  std::vector<Convergent> convergents;
  /// The expansion reached x exactly.
  bool terminated = false;

  Rational exact_value() const;
};

/// Raised when rounding leaves the next floating-point quotient undetermined.
class PrecisionWall : public PrecisionWallError {
 public:
  PrecisionWall(ContinuedFraction partial, const std::string& message)
      : PrecisionWallError(message), partial_(std::move(partial)) {}
  const ContinuedFraction& partial() const noexcept { return partial_; }

 private:
  ContinuedFraction partial_;
};

inline constexpr int kMaxFloatTerms = 64;

/// The dyadic rational stored in a finite double.
Rational exact_rational(double x);

/// Floating expansion with a running bound on the rounding error of the
/// residual; x in (0, 1), max_terms <= 64. Throws PrecisionWall (with the
/// quotients that are still certain) when the bound no longer pins down the
/// next quotient.
ContinuedFraction cf_expand(double x, int max_terms);

/// Exact expansion of a rational in (0, 1); max_terms = 0 means unlimited.
ContinuedFraction cf_expand(const Rational& x, std::size_t max_terms = 0);

/// Lambda_alpha for alpha in [0, 1).
LatticePointd lattice_family(double alpha);

struct ExcursionPrediction {
  double s_star = 0;      // may be +inf when q/|r| exceeds the double range
  double log_s_star = 0;  // always finite
  double depth = 0;       // 2 log(1/|r|)
  BigInt p;
  BigInt q;
  bool reversed = false;  // r < 0: the excursion happens at time -s_star
};

/// One prediction per convergent with 0 < s* <= s_max and positive depth,
/// sorted by s*. Uses exact arithmetic on the stored value.
std::vector<ExcursionPrediction> predict_excursions(const ContinuedFraction& cf, double s_max);

/// sum_{k=1}^{terms} 10^{-k!}, 1 <= terms <= 6.
Rational liouville_alpha(int terms);

/// The truncation p/q = sum_{k<=j} 10^{-k!}, q = 10^{j!}, of a Liouville number
/// with more terms. Stage index is k = j - 1, predicted slope 2(k+1)/(k+2).
struct LiouvilleStage {
  int k = 0;
  BigInt p;
  BigInt q;
  double depth = 0;       // 2 log(1/|q alpha - p|)
  double log_s_star = 0;  // log(q / |q alpha - p|)
  double slope = 0;       // depth / log_s_star
  double predicted = 0;   // 2(k+1)/(k+2)
};

/// Stages j = 1 .. terms-1 (the last truncation is alpha itself).
std::vector<LiouvilleStage> liouville_stages(int terms);

/// Natural logarithm of |x| for a nonzero rational of any size.
double log_abs(const Rational& x);

/// Candidate excursion of the horocycle orbit of a general lattice.
struct HorocycleCandidate {
  double s_star = 0;
  double depth = 0;   // -2 log|Y| for the lattice vector (X, Y)
  long long m = 0;    // coefficients of the vector in the representative basis
  long long n = 0;
};

/// Every excursion of s -> h_s x with 0 < s* <= s_max and depth > min_depth.
/// A lattice vector (X, Y) = g (m, n) is moved by h_s to (X + s Y, Y), so it
/// reaches (0, Y) at s* = -X/Y, giving depth -2 log|Y|. With [c, d] the second
/// row of the reduced representative and |d| >= |c|, X = m/d + bY/d bounds
/// |m| by |d| s_max eps + |b| eps for eps = exp(-min_depth/2), and n is the
/// integer nearest to -c m / d; the loop over m is exhaustive (roles swap when
/// |c| > |d|). Sorted by s*.
std::vector<HorocycleCandidate> horocycle_candidates(const LatticePointd& x, double s_max,
                                                     double min_depth);

}  // namespace cusplab
