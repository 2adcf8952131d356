#pragma once

// The space of unimodular lattices SL(n,R)/SL(n,Z), n in {2,3}.
//
// A point is stored through a coset representative whose columns form a basis
// of the lattice. Reduction replaces the representative by rep * gamma with
// gamma in SL(n,Z): Lagrange-Gauss for n = 2, LLL (delta = 0.99) for n = 3.
// The cusp-depth observable D = max(0, 2 log(1/alpha_1)) is computed from the
// shortest nonzero lattice vector.

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "cusplab/errors.hpp"
#include "cusplab/group_core.hpp"

namespace cusplab {

inline constexpr double kLovaszDelta = 0.99;
inline constexpr double kPrecisionLossTolerance = 1e-6;

template <typename Scalar>
class LatticePoint {
 public:
  LatticePoint() : rep_(GroupElement<Scalar>::identity(2)) {}
  explicit LatticePoint(GroupElement<Scalar> rep, bool reduced = false)
      : rep_(std::move(rep)), reduced_(reduced) {}

  static LatticePoint standard(int n) { return LatticePoint(GroupElement<Scalar>::identity(n), true); }

  int dim() const { return rep_.dim(); }
  const GroupElement<Scalar>& rep() const { return rep_; }
  const Matrix<Scalar>& basis() const { return rep_.matrix(); }
  bool reduced() const { return reduced_; }

 private:
  GroupElement<Scalar> rep_;
  bool reduced_ = false;
};

/// Left translation g * x.
template <typename Scalar>
LatticePoint<Scalar> translate(const GroupElement<Scalar>& g, const LatticePoint<Scalar>& x) {
  return LatticePoint<Scalar>(g * x.rep(), false);
}

namespace detail {

template <typename Scalar>
void gauss_reduce(Matrix<Scalar>& b) {
  using V2 = Eigen::Matrix<Scalar, 2, 1>;
  V2 b1 = b.col(0), b2 = b.col(1);
  // (b1, b2) -> (b2, -b1) keeps the orientation.
  if (b1.squaredNorm() > b2.squaredNorm()) {
    const V2 tmp = b1;
    b1 = b2;
    b2 = -tmp;
  }
  for (int iter = 0; iter < 10000; ++iter) {
    const Scalar mu = round(b1.dot(b2) / b1.squaredNorm());
    if (mu != Scalar(0)) b2 -= mu * b1;
    if (b2.squaredNorm() >= b1.squaredNorm()) break;
    const V2 tmp = b1;
    b1 = b2;
    b2 = -tmp;
  }
  b.col(0) = b1;
  b.col(1) = b2;
}

template <typename Scalar>
void gram_schmidt(const Matrix<Scalar>& b, Matrix<Scalar>& bstar, Matrix<Scalar>& mu) {
  const Eigen::Index n = b.cols();
  bstar = b;
  mu = Matrix<Scalar>::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      mu(i, j) = b.col(i).dot(bstar.col(j)) / bstar.col(j).squaredNorm();
      bstar.col(i) -= mu(i, j) * bstar.col(j);
    }
  }
}

template <typename Scalar>
void lll_reduce(Matrix<Scalar>& b, Scalar delta) {
  const Eigen::Index n = b.cols();
  Matrix<Scalar> bstar, mu;
  gram_schmidt(b, bstar, mu);
  Eigen::Index k = 1;
  for (int iter = 0; k < n && iter < 100000; ++iter) {
    for (Eigen::Index j = k - 1; j >= 0; --j) {
      const Scalar q = round(mu(k, j));
      if (q != Scalar(0)) {
        b.col(k) -= q * b.col(j);
        gram_schmidt(b, bstar, mu);
      }
    }
    if (bstar.col(k).squaredNorm() >= (delta - mu(k, k - 1) * mu(k, k - 1)) * bstar.col(k - 1).squaredNorm()) {
      ++k;
    } else {
      b.col(k).swap(b.col(k - 1));
      gram_schmidt(b, bstar, mu);
      k = std::max<Eigen::Index>(k - 1, 1);
    }
  }
  if (b.determinant() < Scalar(0)) b.col(n - 1) *= Scalar(-1);
}

}  // namespace detail

/// True when the representative satisfies the Gauss (n = 2) or LLL (n = 3)
/// conditions, up to a small relative slack.
template <typename Scalar>
bool is_reduced(const Matrix<Scalar>& b, Scalar slack = Scalar(1e-9)) {
  if (b.cols() == 2) {
    const Scalar n1 = b.col(0).squaredNorm(), n2 = b.col(1).squaredNorm();
    return n1 <= n2 * (1 + slack) && abs(b.col(0).dot(b.col(1))) <= n1 * (Scalar(0.5) + slack);
  }
  Matrix<Scalar> bstar, mu;
  detail::gram_schmidt(b, bstar, mu);
  for (Eigen::Index i = 1; i < b.cols(); ++i) {
    for (Eigen::Index j = 0; j < i; ++j) {
      if (abs(mu(i, j)) > Scalar(0.5) + slack) return false;
    }
    if (bstar.col(i).squaredNorm() <
        (Scalar(kLovaszDelta) - mu(i, i - 1) * mu(i, i - 1)) * bstar.col(i - 1).squaredNorm() * (1 - slack)) {
      return false;
    }
  }
  return true;
}

/// Same coset, reduced representative, determinant renormalized to 1.
template <typename Scalar>
LatticePoint<Scalar> reduce(const LatticePoint<Scalar>& x) {
  if (x.reduced()) return x;
  Matrix<Scalar> b = x.basis();
  if (x.dim() == 2) {
    detail::gauss_reduce(b);
  } else {
    detail::lll_reduce(b, Scalar(kLovaszDelta));
  }
  const Scalar det = b.determinant();
  if (!(abs(det - Scalar(1)) <= Scalar(kPrecisionLossTolerance))) {
    throw PrecisionLossError("reduce: determinant drifted to " + std::to_string(static_cast<double>(det)));
  }
  b /= pow(det, Scalar(1) / Scalar(b.cols()));
  return LatticePoint<Scalar>(GroupElement<Scalar>::from_trusted(b), true);
}

template <typename Scalar>
struct ShortestVector {
  Vector<Scalar> vector;
  Scalar alpha1;
};

/// Calls visit(coeffs, vector) for every nonzero lattice vector of norm <= radius,
/// given a reduced basis. Coefficient ranges come from |c_i| <= radius * sqrt((G^{-1})_ii).
template <typename Scalar, typename Visitor>
void enumerate_vectors(const Matrix<Scalar>& basis, Scalar radius, Visitor&& visit) {
  const Eigen::Index n = basis.cols();
  const Matrix<Scalar> gram_inv = (basis.transpose() * basis).inverse();
  Eigen::Matrix<long long, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1> bound(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    bound(i) = static_cast<long long>(floor(radius * sqrt(gram_inv(i, i)) + Scalar(1e-9)));
  }
  Eigen::Matrix<long long, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1> c(n);
  const long long b2 = n > 2 ? bound(2) : 0;
  const Scalar r2 = radius * radius;
  for (long long k = -b2; k <= b2; ++k) {
    for (long long j = -bound(1); j <= bound(1); ++j) {
      for (long long i = -bound(0); i <= bound(0); ++i) {
        if (i == 0 && j == 0 && k == 0) continue;
        c(0) = i;
        c(1) = j;
        if (n > 2) c(2) = k;
        const Vector<Scalar> v = basis * c.template cast<Scalar>();
        if (v.squaredNorm() <= r2) visit(c, v);
      }
    }
  }
}

template <typename Scalar>
ShortestVector<Scalar> shortest_vector(const LatticePoint<Scalar>& x) {
  const LatticePoint<Scalar> r = reduce(x);
  const auto& b = r.basis();
  if (r.dim() == 2) {
    // A Gauss-reduced first vector is a shortest vector.
    return {b.col(0), b.col(0).norm()};
  }
  Vector<Scalar> best = b.col(0);
  for (Eigen::Index j = 1; j < b.cols(); ++j) {
    if (b.col(j).squaredNorm() < best.squaredNorm()) best = b.col(j);
  }
  Scalar best2 = best.squaredNorm();
  enumerate_vectors(b, sqrt(best2), [&](const auto&, const Vector<Scalar>& v) {
    const Scalar n2 = v.squaredNorm();
    if (n2 < best2) best2 = n2, best = v;
  });
  return {best, sqrt(best2)};
}

/// D(x) = max(0, 2 log(1/alpha_1)).
template <typename Scalar>
Scalar cusp_depth(const LatticePoint<Scalar>& x) {
  const Scalar a1 = shortest_vector(x).alpha1;
  return std::max(Scalar(0), -Scalar(2) * log(a1));
}

template <typename Scalar>
struct UpperHalfPoint {
  std::complex<Scalar> z;
  Scalar frame_angle = 0;

  Scalar x() const { return z.real(); }
  Scalar y() const { return z.imag(); }
};

/// p(g) = SO(2) g, realized as g^T . i, together with the SO(2) angle of the
/// Iwasawa factorization g^T = (upper triangular) * rotation.
template <typename Scalar>
UpperHalfPoint<Scalar> project_H2(const LatticePoint<Scalar>& x) {
  if (x.dim() != 2) throw std::invalid_argument("project_H2 is defined for n = 2 only");
  const auto& g = x.basis();
  const Scalar a = g(0, 0), b = g(0, 1), c = g(1, 0), d = g(1, 1);
  const Scalar den = b * b + d * d;
  const Scalar re = (a * b + c * d) / den;
  const Scalar im = (a * d - b * c) / den;
  // K = U(z)^{-1} g^T with U(z) = [[sqrt(y), x/sqrt(y)], [0, 1/sqrt(y)]].
  const Scalar sy = sqrt(im);
  const Scalar k00 = (a - re * b) / sy;
  const Scalar k10 = sy * b;
  Scalar theta = atan2(k10, k00);
  if (theta < 0) theta += 2 * std::numbers::pi_v<Scalar>;
  return {{re, im}, theta};
}

/// Curvature -1 distance on the upper half plane.
template <typename Scalar>
Scalar hyperbolic_distance(const UpperHalfPoint<Scalar>& p, const UpperHalfPoint<Scalar>& q) {
  if (!(p.y() > 0) || !(q.y() > 0)) throw std::invalid_argument("points must lie in the upper half plane");
  // arccosh(1 + |p-q|^2 / (2 y_p y_q)) written in its cancellation-free form.
  return Scalar(2) * asinh(abs(p.z - q.z) / (Scalar(2) * sqrt(p.y() * q.y())));
}

/// Moves z into {|Re z| <= 1/2, |z| >= 1} with the standard SL(2,Z) generators.
template <typename Scalar>
UpperHalfPoint<Scalar> to_fundamental_domain(UpperHalfPoint<Scalar> p) {
  std::complex<Scalar> z = p.z;
  for (int iter = 0; iter < 10000; ++iter) {
    z -= round(z.real());
    if (std::norm(z) >= Scalar(1) - Scalar(1e-15)) break;
    z = Scalar(-1) / z;
  }
  p.z = z;
  return p;
}

using LatticePointd = LatticePoint<double>;
using UpperHalfPointd = UpperHalfPoint<double>;

}  // namespace cusplab
