#include "cusplab/diophantine_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <tuple>

namespace cusplab {

namespace {

void push_quotient(ContinuedFraction& cf, const BigInt& a) {
  const auto& c = cf.convergents;
  const BigInt p_prev2 = c.size() >= 2 ? c[c.size() - 2].p : BigInt(1);
  const BigInt q_prev2 = c.size() >= 2 ? c[c.size() - 2].q : BigInt(0);
  cf.quotients.push_back(a);
  cf.convergents.push_back({a * c.back().p + p_prev2, a * c.back().q + q_prev2});
}

double log_abs_int(BigInt v) {
  if (v < 0) v = -v;
  if (v == 0) throw std::invalid_argument("log of zero");
  const auto bits = boost::multiprecision::msb(v);
  if (bits < 1000) return std::log(v.convert_to<double>());
  const auto shift = bits - 60;
  return std::log((v >> shift).convert_to<double>()) + static_cast<double>(shift) * std::numbers::ln2;
}

}  // namespace

Rational exact_rational(double x) {
  if (!std::isfinite(x)) throw std::invalid_argument("cannot convert a non-finite double");
  int exponent = 0;
  const double mantissa = std::frexp(x, &exponent);
  // 53 significant bits fit an int64 after scaling by 2^53.
  const auto scaled = static_cast<long long>(std::ldexp(mantissa, 53));
  exponent -= 53;
  Rational r(scaled);
  if (exponent > 0) r *= Rational(BigInt(1) << exponent);
  if (exponent < 0) r /= Rational(BigInt(1) << -exponent);
  return r;
}

Rational ContinuedFraction::exact_value() const {
  if (const auto* r = std::get_if<Rational>(&value)) return *r;
  return exact_rational(std::get<double>(value));
}

ContinuedFraction cf_expand(double x, int max_terms) {
  if (!(x > 0 && x < 1)) throw std::invalid_argument("cf_expand needs x in (0, 1)");
  if (max_terms < 1 || max_terms > kMaxFloatTerms) {
    throw std::invalid_argument("cf_expand: floating expansions allow 1..64 terms");
  }
  ContinuedFraction cf;
  cf.value = x;
  cf.convergents.push_back({0, 1});
  double e = 0;  // bound on |residual - exact residual|
  for (int k = 0; k < max_terms; ++k) {
    if (x == 0 && e == 0) {
      cf.terminated = true;
      break;
    }
    if (!(x - e > 0)) throw PrecisionWall(cf, "cf_expand: residual lost to rounding after " + std::to_string(k) + " terms");
    const double y = 1 / x;
    // fma gives y*x - 1 exactly, hence the rounding error of the reciprocal.
    const double rounding = std::abs(std::fma(y, x, -1.0)) / x;
    if (e > 0 || rounding > 0) {
      const double lo = std::nextafter(1 / (x + e) - rounding, 0.0);
      const double hi = std::nextafter(1 / (x - e) + rounding, INFINITY);
      if (std::floor(lo) != std::floor(hi)) {
        throw PrecisionWall(cf, "cf_expand: quotient " + std::to_string(k + 1) + " undetermined by rounding");
      }
    }
    const double a = std::floor(y);
    e = e / (x * (x - e)) + rounding;
    x = y - a;  // exact
    push_quotient(cf, BigInt(static_cast<long long>(a)));
  }
  if (!cf.terminated && x == 0 && e == 0) cf.terminated = true;
  return cf;
}

ContinuedFraction cf_expand(const Rational& x, std::size_t max_terms) {
  if (!(x > 0 && x < 1)) throw std::invalid_argument("cf_expand needs x in (0, 1)");
  ContinuedFraction cf;
  cf.value = x;
  cf.convergents.push_back({0, 1});
  BigInt num = boost::multiprecision::numerator(x);
  BigInt den = boost::multiprecision::denominator(x);
  while (num != 0 && (max_terms == 0 || cf.quotients.size() < max_terms)) {
    const BigInt a = den / num;
    const BigInt rest = den - a * num;
    den = num;
    num = rest;
    push_quotient(cf, a);
  }
  cf.terminated = num == 0;
  return cf;
}

LatticePointd lattice_family(double alpha) {
  if (!(alpha >= 0 && alpha < 1)) throw std::invalid_argument("lattice_family needs alpha in [0, 1)");
  Matrix<double> m(2, 2);
  m << 1, 0, -alpha, 1;
  return LatticePointd(GroupElement<double>::from_trusted(m));
}

double log_abs(const Rational& x) {
  return log_abs_int(boost::multiprecision::numerator(x)) - log_abs_int(boost::multiprecision::denominator(x));
}

std::vector<ExcursionPrediction> predict_excursions(const ContinuedFraction& cf, double s_max) {
  const Rational alpha = cf.exact_value();
  const double log_max = std::log(s_max);
  std::vector<ExcursionPrediction> out;
  for (const auto& c : cf.convergents) {
    const Rational r = Rational(c.q) * alpha - Rational(c.p);
    if (r == 0 || c.q == 0) continue;
    const double log_r = log_abs(r);
    if (!(log_r < 0)) continue;
    ExcursionPrediction pred;
    pred.log_s_star = log_abs_int(c.q) - log_r;
    if (pred.log_s_star > log_max) continue;
    pred.s_star = std::exp(pred.log_s_star);
    pred.depth = -2 * log_r;
    pred.p = c.p;
    pred.q = c.q;
    pred.reversed = r < 0;
    out.push_back(std::move(pred));
  }
  std::sort(out.begin(), out.end(),
            [](const ExcursionPrediction& a, const ExcursionPrediction& b) { return a.log_s_star < b.log_s_star; });
  return out;
}

Rational liouville_alpha(int terms) {
  if (terms < 1 || terms > 6) throw std::invalid_argument("liouville_alpha needs 1 <= terms <= 6");
  Rational alpha = 0;
  unsigned factorial = 1;
  for (int k = 1; k <= terms; ++k) {
    factorial *= static_cast<unsigned>(k);
    alpha += Rational(BigInt(1), boost::multiprecision::pow(BigInt(10), factorial));
  }
  return alpha;
}

std::vector<LiouvilleStage> liouville_stages(int terms) {
  const Rational alpha = liouville_alpha(terms);
  std::vector<LiouvilleStage> out;
  Rational partial = 0;
  unsigned factorial = 1;
  for (int j = 1; j < terms; ++j) {
    factorial *= static_cast<unsigned>(j);
    const BigInt q = boost::multiprecision::pow(BigInt(10), factorial);
    partial += Rational(BigInt(1), q);
    LiouvilleStage st;
    st.k = j - 1;
    st.q = q;
    st.p = boost::multiprecision::numerator(partial * Rational(q));
    const Rational r = Rational(q) * alpha - Rational(st.p);
    const double log_r = log_abs(r);
    st.depth = -2 * log_r;
    st.log_s_star = log_abs_int(q) - log_r;
    st.slope = st.depth / st.log_s_star;
    st.predicted = 2.0 * (st.k + 1) / (st.k + 2);
    out.push_back(std::move(st));
  }
  return out;
}

std::vector<HorocycleCandidate> horocycle_candidates(const LatticePointd& x, double s_max, double min_depth) {
  if (x.dim() != 2) throw std::invalid_argument("horocycle_candidates needs n = 2");
  if (!(s_max > 0)) throw std::invalid_argument("horocycle_candidates needs s_max > 0");
  if (!(min_depth >= 0)) throw std::invalid_argument("horocycle_candidates needs min_depth >= 0");
  const LatticePointd r = reduce(x);
  const auto& g = r.basis();
  // Work with rows (c, d) -> (lead, other) so that |lead| >= |other|.
  const bool by_d = std::abs(g(1, 1)) >= std::abs(g(1, 0));
  const long double a = by_d ? g(0, 0) : g(0, 1), b = by_d ? g(0, 1) : g(0, 0);
  const long double c = by_d ? g(1, 0) : g(1, 1), d = by_d ? g(1, 1) : g(1, 0);
  const double eps = std::exp(-min_depth / 2);
  const double bound = std::abs(static_cast<double>(d)) * s_max * eps + std::abs(static_cast<double>(b)) * eps + 1;
  if (bound > 1e8) throw std::invalid_argument("horocycle_candidates: min_depth too small for s_max");
  const auto m_max = static_cast<long long>(bound);

  std::vector<HorocycleCandidate> out;
  auto consider = [&](long long m, long long n) {
    const long double X = a * m + b * n;
    const long double Y = c * m + d * n;
    if (Y == 0 || std::gcd(m, n) != 1) return;
    const double depth = static_cast<double>(-2 * std::log(std::abs(Y)));
    const double s = static_cast<double>(-X / Y);
    if (depth > min_depth && s > 0 && s <= s_max) out.push_back({s, depth, by_d ? m : n, by_d ? n : m});
  };
  consider(0, 1);
  // For m > 0 the opposite vector describes the same excursion.
  for (long long m = 1; m <= m_max; ++m) {
    const long double lo = (-eps - c * m) / d, hi = (eps - c * m) / d;
    const auto n_lo = static_cast<long long>(std::ceil(std::min(lo, hi)));
    const auto n_hi = static_cast<long long>(std::floor(std::max(lo, hi)));
    for (long long n = n_lo; n <= n_hi; ++n) consider(m, n);
  }
  std::sort(out.begin(), out.end(), [](const HorocycleCandidate& u, const HorocycleCandidate& v) {
    return u.s_star < v.s_star || (u.s_star == v.s_star && std::tie(u.m, u.n) < std::tie(v.m, v.n));
  });
  return out;
}

}  // namespace cusplab
