#pragma once

// Small-matrix Lie group toolkit for SL(2,R) and SL(3,R): one-parameter
// subgroups with closed-form exponentials, Cartan (KAK) decomposition, the
// K-bi-invariant distance to the basepoint and linear drift rates.
//
// Everything is templated on the scalar type and uses Eigen matrices with a
// compile-time maximum size of 3x3, so no heap allocation happens on the hot
// paths.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <optional>
#include <sstream>
#include <string>

#include "cusplab/errors.hpp"

namespace cusplab {

// Unqualified math calls in the templates resolve to these for builtin
// floating types and to the multiprecision overloads by argument lookup.
using std::abs;
using std::asinh;
using std::atan2;
using std::cos;
using std::exp;
using std::floor;
using std::log;
using std::log1p;
using std::pow;
using std::round;
using std::sin;
using std::sqrt;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, 3, 3>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1, Eigen::ColMajor, 3, 1>;

inline constexpr double kOverflowLimit = 1e300;
inline constexpr double kDetTolerance = 1e-9;
inline constexpr double kTraceTolerance = 1e-12;

namespace detail {

inline void require_dimension(Eigen::Index rows, Eigen::Index cols) {
  if (rows != cols || rows < 2 || rows > 3) {
    throw std::invalid_argument("group elements must be 2x2 or 3x3, got " + std::to_string(rows) +
                                "x" + std::to_string(cols));
  }
}

// Determinant tolerance relative to the Hadamard bound, so that elements with
// large entries (long horocycle translates) are not rejected for rounding.
template <typename Scalar>
Scalar det_scale(const Matrix<Scalar>& m) {
  Scalar scale(1);
  for (Eigen::Index j = 0; j < m.cols(); ++j) scale *= m.col(j).norm();
  return std::max(Scalar(1), scale);
}

template <typename Scalar>
void check_overflow(const Matrix<Scalar>& m, const char* what) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    const Scalar v = m.data()[i];
    if (!std::isfinite(static_cast<double>(v)) || abs(v) > Scalar(kOverflowLimit)) {
      throw OverflowError(std::string(what) + ": matrix entry exceeds 1e300");
    }
  }
}

}  // namespace detail

/// Element of SL(n,R), n in {2,3}.
template <typename Scalar>
class GroupElement {
 public:
  using MatrixType = Matrix<Scalar>;

  GroupElement() : m_(MatrixType::Identity(2, 2)) {}

  explicit GroupElement(MatrixType m) : m_(std::move(m)) {
    detail::require_dimension(m_.rows(), m_.cols());
    const Scalar det = m_.determinant();
    if (abs(det - Scalar(1)) > Scalar(kDetTolerance) * detail::det_scale(m_)) {
      std::ostringstream os;
      os << "matrix is not unimodular (det = " << det << ")";
      throw std::invalid_argument(os.str());
    }
  }

  static GroupElement identity(int n) { return GroupElement(MatrixType::Identity(n, n), Trusted{}); }

  /// Divides by det^{1/n}; the determinant must be positive.
  static GroupElement normalized(MatrixType m) {
    detail::require_dimension(m.rows(), m.cols());
    const Scalar det = m.determinant();
    if (!(det > Scalar(0))) throw std::invalid_argument("cannot normalize: determinant is not positive");
    m /= pow(det, Scalar(1) / Scalar(m.rows()));
    return GroupElement(std::move(m), Trusted{});
  }

  /// Skips the determinant check; callers guarantee unimodularity up to rounding.
  static GroupElement from_trusted(MatrixType m) { return GroupElement(std::move(m), Trusted{}); }

  int dim() const { return static_cast<int>(m_.rows()); }
  const MatrixType& matrix() const { return m_; }
  Scalar operator()(Eigen::Index i, Eigen::Index j) const { return m_(i, j); }
  Scalar determinant() const { return m_.determinant(); }

  GroupElement inverse() const { return GroupElement(m_.inverse(), Trusted{}); }

  friend GroupElement operator*(const GroupElement& a, const GroupElement& b) {
    if (a.dim() != b.dim()) throw std::invalid_argument("dimension mismatch in group product");
    return GroupElement(a.m_ * b.m_, Trusted{});
  }

 private:
  struct Trusted {};
  GroupElement(MatrixType m, Trusted) : m_(std::move(m)) {}

  MatrixType m_;
};

enum class GeneratorKind { diagonal, upper_unipotent, lower_unipotent, rotation, generic };

inline const char* to_string(GeneratorKind kind) {
  switch (kind) {
    case GeneratorKind::diagonal: return "diagonal";
    case GeneratorKind::upper_unipotent: return "upper-unipotent";
    case GeneratorKind::lower_unipotent: return "lower-unipotent";
    case GeneratorKind::rotation: return "rotation";
    case GeneratorKind::generic: return "generic";
  }
  return "generic";
}

/// Traceless generator z of a one-parameter subgroup, tagged with its shape.
template <typename Scalar>
class LieAlgebraElement {
 public:
  using MatrixType = Matrix<Scalar>;

  LieAlgebraElement(MatrixType z, GeneratorKind kind) : z_(std::move(z)), kind_(kind) {
    detail::require_dimension(z_.rows(), z_.cols());
    if (abs(z_.trace()) > Scalar(kTraceTolerance)) {
      throw std::invalid_argument("generator must be traceless");
    }
    if (!has_shape(z_, kind_)) {
      throw std::invalid_argument(std::string("generator does not have the shape of kind ") +
                                  to_string(kind_));
    }
  }

  /// Picks the most specific kind whose shape constraints hold exactly.
  static LieAlgebraElement classify(const MatrixType& z) {
    for (GeneratorKind k : {GeneratorKind::diagonal, GeneratorKind::upper_unipotent,
                            GeneratorKind::lower_unipotent, GeneratorKind::rotation}) {
      if (has_shape(z, k)) return LieAlgebraElement(z, k);
    }
    return LieAlgebraElement(z, GeneratorKind::generic);
  }

  static LieAlgebraElement diagonal(std::initializer_list<Scalar> entries) {
    MatrixType z = MatrixType::Zero(entries.size(), entries.size());
    Eigen::Index i = 0;
    for (Scalar e : entries) z(i, i) = e, ++i;
    return LieAlgebraElement(z, GeneratorKind::diagonal);
  }

  int dim() const { return static_cast<int>(z_.rows()); }
  const MatrixType& matrix() const { return z_; }
  GeneratorKind kind() const { return kind_; }

  LieAlgebraElement operator-() const { return LieAlgebraElement(-z_, kind_); }

  static bool has_shape(const MatrixType& z, GeneratorKind kind) {
    const Eigen::Index n = z.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index j = 0; j < n; ++j) {
        const Scalar v = z(i, j);
        switch (kind) {
          case GeneratorKind::diagonal:
            if (i != j && v != Scalar(0)) return false;
            break;
          case GeneratorKind::upper_unipotent:
            if (i >= j && v != Scalar(0)) return false;
            break;
          case GeneratorKind::lower_unipotent:
            if (i <= j && v != Scalar(0)) return false;
            break;
          case GeneratorKind::rotation:
            if (v != -z(j, i)) return false;
            break;
          case GeneratorKind::generic:
            break;
        }
      }
    }
    return true;
  }

 private:
  MatrixType z_;
  GeneratorKind kind_;
};

template <typename Scalar>
class OneParamSubgroup;

template <typename Scalar>
Scalar symmetric_distance(const GroupElement<Scalar>& g);

template <typename Scalar>
GroupElement<Scalar> exp_one_param(const OneParamSubgroup<Scalar>& sub, Scalar t);

namespace detail {
template <typename Scalar>
std::optional<Scalar> compute_drift(const LieAlgebraElement<Scalar>& z);
}

/// {exp(t z)}: generator plus cached drift rate (empty when the eigenvalue
/// solver fails).
template <typename Scalar>
class OneParamSubgroup {
 public:
  explicit OneParamSubgroup(LieAlgebraElement<Scalar> generator)
      : generator_(std::move(generator)), drift_(detail::compute_drift(generator_)) {}

  const LieAlgebraElement<Scalar>& generator() const { return generator_; }
  GeneratorKind kind() const { return generator_.kind(); }
  int dim() const { return generator_.dim(); }
  const std::optional<Scalar>& cached_drift() const { return drift_; }

  /// The same orbit traversed backwards.
  OneParamSubgroup reversed() const { return OneParamSubgroup(-generator_, drift_); }

 private:
  OneParamSubgroup(LieAlgebraElement<Scalar> g, std::optional<Scalar> drift)
      : generator_(std::move(g)), drift_(drift) {}

  LieAlgebraElement<Scalar> generator_;
  std::optional<Scalar> drift_;
};

/// a_t = diag(e^{t/2}, e^{-t/2}).
template <typename Scalar = double>
OneParamSubgroup<Scalar> geodesic_flow() {
  return OneParamSubgroup<Scalar>(LieAlgebraElement<Scalar>::diagonal({Scalar(0.5), Scalar(-0.5)}));
}

/// h_s = [[1, s], [0, 1]].
template <typename Scalar = double>
OneParamSubgroup<Scalar> horocycle_flow() {
  Matrix<Scalar> z = Matrix<Scalar>::Zero(2, 2);
  z(0, 1) = 1;
  return OneParamSubgroup<Scalar>(LieAlgebraElement<Scalar>(z, GeneratorKind::upper_unipotent));
}

/// Elementary unipotent u_t = I + t E_{row,col} in SL(n).
template <typename Scalar = double>
OneParamSubgroup<Scalar> elementary_unipotent(int n, int row, int col) {
  Matrix<Scalar> z = Matrix<Scalar>::Zero(n, n);
  z(row, col) = 1;
  return OneParamSubgroup<Scalar>(LieAlgebraElement<Scalar>(
      z, row < col ? GeneratorKind::upper_unipotent : GeneratorKind::lower_unipotent));
}

template <typename Scalar = double>
GroupElement<Scalar> rotation2(Scalar theta) {
  Matrix<Scalar> m(2, 2);
  m << cos(theta), -sin(theta), sin(theta), cos(theta);
  return GroupElement<Scalar>::from_trusted(m);
}

template <typename Scalar>
GroupElement<Scalar> exp_one_param(const OneParamSubgroup<Scalar>& sub, Scalar t) {
  using std::abs;
  if (!std::isfinite(static_cast<double>(t))) throw std::invalid_argument("flow time must be finite");
  const auto& z = sub.generator().matrix();
  const Eigen::Index n = z.rows();
  Matrix<Scalar> m;
  switch (sub.kind()) {
    case GeneratorKind::diagonal: {
      m = Matrix<Scalar>::Zero(n, n);
      const Scalar limit = log(Scalar(kOverflowLimit));
      for (Eigen::Index i = 0; i < n; ++i) {
        const Scalar e = t * z(i, i);
        if (e > limit) throw OverflowError("exp_one_param: diagonal entry exceeds 1e300");
        m(i, i) = exp(e);
      }
      return GroupElement<Scalar>::from_trusted(m);
    }
    case GeneratorKind::upper_unipotent:
    case GeneratorKind::lower_unipotent: {
      // Strictly triangular 3x3 matrices satisfy N^3 = 0.
      const Matrix<Scalar> nil = t * z;
      m = Matrix<Scalar>::Identity(n, n) + nil + (nil * nil) / Scalar(2);
      detail::check_overflow(m, "exp_one_param");
      return GroupElement<Scalar>::from_trusted(m);
    }
    case GeneratorKind::rotation: {
      if (n == 2) return rotation2<Scalar>(t * z(1, 0));
      const Matrix<Scalar> k = t * z;
      const Scalar theta = sqrt(k(2, 1) * k(2, 1) + k(0, 2) * k(0, 2) + k(1, 0) * k(1, 0));
      m = Matrix<Scalar>::Identity(3, 3);
      if (theta > Scalar(0)) {
        m += (sin(theta) / theta) * k + ((Scalar(1) - cos(theta)) / (theta * theta)) * (k * k);
      }
      return GroupElement<Scalar>::from_trusted(m);
    }
    case GeneratorKind::generic: {
      const Matrix<Scalar> scaled = t * z;
      // ||exp(A)||_inf <= exp(||A||_inf).
      if (scaled.cwiseAbs().rowwise().sum().maxCoeff() > log(Scalar(kOverflowLimit))) {
        throw OverflowError("exp_one_param: generic exponential exceeds 1e300");
      }
      // det exp(A) = e^{tr A} = 1; a computed determinant is less accurate than m.
      m = scaled.exp();
      detail::check_overflow(m, "exp_one_param");
      return GroupElement<Scalar>::from_trusted(m);
    }
  }
  return GroupElement<Scalar>::identity(static_cast<int>(n));
}

template <typename Scalar>
struct KAKDecomposition {
  GroupElement<Scalar> k1;
  GroupElement<Scalar> a;
  GroupElement<Scalar> k2;

  /// Singular values sigma_1 >= ... >= sigma_n.
  Vector<Scalar> singular_values() const { return a.matrix().diagonal(); }
  Matrix<Scalar> reconstruct() const { return k1.matrix() * a.matrix() * k2.matrix(); }
};

/// g = k1 * a * k2 with k1, k2 in SO(n) and a diagonal, sorted descending.
template <typename Scalar>
KAKDecomposition<Scalar> kak(const GroupElement<Scalar>& g) {
  Eigen::JacobiSVD<Matrix<Scalar>> svd(g.matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  Matrix<Scalar> u = svd.matrixU();
  Matrix<Scalar> v = svd.matrixV();
  const Eigen::Index n = g.dim();
  if (u.determinant() < Scalar(0)) {
    // det g > 0 forces det U and det V to share a sign.
    u.col(n - 1) *= Scalar(-1);
    v.col(n - 1) *= Scalar(-1);
  }
  Matrix<Scalar> a = Matrix<Scalar>::Zero(n, n);
  a.diagonal() = svd.singularValues();
  return {GroupElement<Scalar>::from_trusted(u), GroupElement<Scalar>::from_trusted(a),
          GroupElement<Scalar>::from_trusted(v.transpose())};
}

/// log of the singular values, renormalized to sum to zero.
template <typename Scalar>
Vector<Scalar> log_singular_values(const GroupElement<Scalar>& g) {
  const auto& m = g.matrix();
  Vector<Scalar> logs(g.dim());
  if (g.dim() == 2) {
    // For det = 1, ||g||_F^2 - 2 = (a - d)^2 + (b + c)^2 avoids cancellation
    // near the identity.
    const Scalar excess = (m(0, 0) - m(1, 1)) * (m(0, 0) - m(1, 1)) +
                          (m(0, 1) + m(1, 0)) * (m(0, 1) + m(1, 0));
    const Scalar x = (excess + sqrt(excess * (excess + Scalar(4)))) / Scalar(2);
    logs(0) = log1p(x) / Scalar(2);
    logs(1) = -logs(0);
    return logs;
  }
  Eigen::JacobiSVD<Matrix<Scalar>> svd(m);
  const auto s = svd.singularValues();
  for (Eigen::Index i = 0; i < s.size(); ++i) logs(i) = log(s(i));
  logs.array() -= logs.mean();
  return logs;
}

/// sqrt(2) * || log(sigma) ||; for n = 2 this is the hyperbolic distance from
/// i to the projection of g.
template <typename Scalar>
Scalar symmetric_distance(const GroupElement<Scalar>& g) {
  return sqrt(Scalar(2)) * log_singular_values(g).norm();
}

namespace detail {

template <typename Scalar>
std::optional<Scalar> compute_drift(const LieAlgebraElement<Scalar>& z) {
  switch (z.kind()) {
    case GeneratorKind::diagonal:
      return sqrt(Scalar(2)) * z.matrix().diagonal().norm();
    case GeneratorKind::upper_unipotent:
    case GeneratorKind::lower_unipotent:
    case GeneratorKind::rotation:
      return Scalar(0);
    case GeneratorKind::generic:
      break;
  }
  // Singular values of exp(tz) grow like exp(t Re lambda_i) up to polynomial
  // factors. Computed in double.
  const Eigen::MatrixXd zd = z.matrix().template cast<double>();
  Eigen::EigenSolver<Eigen::MatrixXd> solver(zd, false);
  if (solver.info() != Eigen::Success) return std::nullopt;
  const Eigen::VectorXd re = solver.eigenvalues().real();
  return Scalar(std::sqrt(2.0) * (re.array() - re.mean()).matrix().norm());
}

}  // namespace detail

/// Linear escape rate of {exp(t z)} from the basepoint.
template <typename Scalar>
Scalar drift_rate(const OneParamSubgroup<Scalar>& sub) {
  if (!sub.cached_drift()) {
    throw NonConvergenceError("drift_rate: eigenvalue computation failed");
  }
  return *sub.cached_drift();
}

}  // namespace cusplab
