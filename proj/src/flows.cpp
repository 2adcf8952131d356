#include "cusplab/flows.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>

#include "cusplab/precision.hpp"

namespace cusplab {

void ExcursionSeries::validate() const {
  if (times.size() != depths.size()) throw std::logic_error("ExcursionSeries: length mismatch");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!(depths[i] >= 0)) throw std::logic_error("ExcursionSeries: negative depth");
    if (i > 0 && !(times[i] > times[i - 1])) throw std::logic_error("ExcursionSeries: times not increasing");
  }
}

OrbitWalker::OrbitWalker(const LatticePointd& x, const OneParamSubgroupd& sub, double step)
    : sub_(sub), n_(x.dim()), x_(reduce(x)), step_(exp_one_param(sub, step)) {
  if (sub.dim() != n_) throw std::invalid_argument("OrbitWalker: dimension mismatch");
  if (n_ == 2) {
    std::copy_n(x_.basis().data(), 4, b_);
    std::copy_n(step_.matrix().data(), 4, e_);
  }
}

void OrbitWalker::advance() {
  if (n_ != 2) {
    x_ = reduce(translate(step_, x_));
    return;
  }
  // Column-major: b_[0], b_[1] is the first basis vector.
  double u0 = e_[0] * b_[0] + e_[2] * b_[1];
  double u1 = e_[1] * b_[0] + e_[3] * b_[1];
  double v0 = e_[0] * b_[2] + e_[2] * b_[3];
  double v1 = e_[1] * b_[2] + e_[3] * b_[3];
  if (u0 * u0 + u1 * u1 > v0 * v0 + v1 * v1) {
    std::swap(u0, v0);
    std::swap(u1, v1);
    v0 = -v0;
    v1 = -v1;
  }
  for (int iter = 0; iter < 10000; ++iter) {
    const double nu = u0 * u0 + u1 * u1;
    const double mu = std::round((u0 * v0 + u1 * v1) / nu);
    if (mu != 0) {
      v0 -= mu * u0;
      v1 -= mu * u1;
    }
    if (v0 * v0 + v1 * v1 >= nu) break;
    std::swap(u0, v0);
    std::swap(u1, v1);
    v0 = -v0;
    v1 = -v1;
  }
  const double det = u0 * v1 - u1 * v0;
  if (!(std::abs(det - 1) <= kPrecisionLossTolerance)) {
    throw PrecisionLossError("OrbitWalker: determinant drifted to " + std::to_string(det));
  }
  const double s = 1 / std::sqrt(det);
  b_[0] = u0 * s;
  b_[1] = u1 * s;
  b_[2] = v0 * s;
  b_[3] = v1 * s;
}

double OrbitWalker::alpha1() const {
  if (n_ == 2) return std::hypot(b_[0], b_[1]);
  return shortest_vector(x_).alpha1;
}

double OrbitWalker::depth() const { return std::max(0.0, -2 * std::log(alpha1())); }

LatticePointd OrbitWalker::point() const {
  if (n_ != 2) return x_;
  Matrix<double> m(2, 2);
  std::copy_n(b_, 4, m.data());
  return LatticePointd(GroupElementd::from_trusted(m), true);
}

LatticePointd OrbitWalker::point_at_offset(double tau) const {
  return reduce(translate(exp_one_param(sub_, tau), point()));
}

double OrbitWalker::depth_at_offset(double tau) const { return cusp_depth(point_at_offset(tau)); }

namespace {

struct Sample {
  double t;
  double d;
};

// Golden-section search for the maximum of D(exp(tau z) p), tau in [0, width];
// every probe is reported.
void refine_window(const LatticePointd& p, const OneParamSubgroupd& sub, double t0, double width,
                   double resolution, std::vector<Sample>& probes) {
  const double invphi = (std::sqrt(5.0) - 1) / 2;
  auto f = [&](double tau) {
    const double d = cusp_depth(reduce(translate(exp_one_param(sub, tau), p)));
    probes.push_back({t0 + tau, d});
    return d;
  };
  double a = 0, b = width;
  double c = b - invphi * (b - a), d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > resolution) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
}

}  // namespace

ExcursionSeries orbit_series(const LatticePointd& x, const OneParamSubgroupd& sub, double t_max, double coarse_step,
                             const OrbitOptions& options) {
  if (!(t_max > 0)) throw std::invalid_argument("orbit_series needs t_max > 0");
  if (!(coarse_step > 0 && coarse_step <= 1)) throw std::invalid_argument("orbit_series needs coarse_step in (0, 1]");

  OrbitWalker walker(x, sub, coarse_step);
  const auto steps = static_cast<std::size_t>(std::floor(t_max / coarse_step));
  ExcursionSeries coarse;
  coarse.times.reserve(steps + 2);
  coarse.depths.reserve(steps + 2);

  // Points at the last three grid times, for refinement from t_{i-1}.
  LatticePointd window[3];
  std::vector<Sample> probes;
  auto consider = [&](std::size_t i) {
    // Grid index i >= 1 with i + 1 already sampled; window[(i-1) % 3] holds t_{i-1}.
    const double di = coarse.depths[i], dl = coarse.depths[i - 1], dr = coarse.depths[i + 1];
    if (!(di > dl && di >= dr)) return;
    if (std::max(di - dl, di - dr) <= options.prominence) return;
    const double width = coarse.times[i + 1] - coarse.times[i - 1];
    refine_window(window[(i - 1) % 3], sub, coarse.times[i - 1], width, options.resolution, probes);
  };

  for (std::size_t i = 0; i <= steps; ++i) {
    if (i > 0) walker.advance();
    coarse.times.push_back(static_cast<double>(i) * coarse_step);
    coarse.depths.push_back(walker.depth());
    if (options.refine) {
      window[i % 3] = walker.point();
      if (i >= 2) consider(i - 1);
    }
  }
  const double last = coarse.times.back();
  if (t_max - last > 1e-12 * std::max(1.0, t_max)) {
    coarse.times.push_back(t_max);
    coarse.depths.push_back(walker.depth_at_offset(t_max - last));
    if (options.refine && coarse.times.size() >= 3) {
      const std::size_t i = coarse.times.size() - 2;
      const double di = coarse.depths[i], dl = coarse.depths[i - 1], dr = coarse.depths[i + 1];
      if (di > dl && di >= dr && std::max(di - dl, di - dr) > options.prominence) {
        refine_window(window[(i - 1) % 3], sub, coarse.times[i - 1], coarse.times[i + 1] - coarse.times[i - 1],
                      options.resolution, probes);
      }
    }
  }

  coarse.refined = options.refine;
  if (probes.empty()) return coarse;

  std::sort(probes.begin(), probes.end(), [](const Sample& a, const Sample& b) { return a.t < b.t; });
  ExcursionSeries out;
  out.refined = true;
  out.times.reserve(coarse.size() + probes.size());
  out.depths.reserve(coarse.size() + probes.size());
  std::size_t p = 0;
  auto push = [&](double t, double d) {
    if (!out.times.empty() && !(t > out.times.back())) return;
    out.times.push_back(t);
    out.depths.push_back(d);
  };
  for (std::size_t i = 0; i < coarse.size(); ++i) {
    while (p < probes.size() && probes[p].t < coarse.times[i]) push(probes[p].t, probes[p].d), ++p;
    push(coarse.times[i], coarse.depths[i]);
  }
  while (p < probes.size()) push(probes[p].t, probes[p].d), ++p;
  return out;
}

ExcursionSeries running_max(const ExcursionSeries& series) {
  ExcursionSeries out = series;
  for (std::size_t i = 1; i < out.depths.size(); ++i) out.depths[i] = std::max(out.depths[i], out.depths[i - 1]);
  return out;
}

double max_depth_in(const ExcursionSeries& series, double lo, double hi) {
  const auto first = std::upper_bound(series.times.begin(), series.times.end(), lo);
  const auto last = std::upper_bound(series.times.begin(), series.times.end(), hi);
  double best = 0;
  for (auto it = first; it < last; ++it) best = std::max(best, series.depths[it - series.times.begin()]);
  return best;
}

std::vector<std::size_t> local_maxima(const ExcursionSeries& series) {
  std::vector<std::size_t> out;
  const auto& d = series.depths;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const bool left = i == 0 || d[i] >= d[i - 1];
    const bool right = i + 1 == d.size() || d[i] >= d[i + 1];
    if (left && right && d[i] > 0) out.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------- boxes

BoxSpec BoxSpec::unit_horocycle() { return unit_box(geodesic_flow<double>()); }

BoxSpec BoxSpec::unit_box(const OneParamSubgroupd& diagonal_flow) {
  BoxSpec box{{}, diagonal_flow};
  box.intervals.assign(box.coordinates().size(), Interval{0, 1});
  box.validate();
  return box;
}

std::vector<std::pair<int, int>> BoxSpec::coordinates() const {
  if (expanding.kind() != GeneratorKind::diagonal) throw std::invalid_argument("BoxSpec needs a diagonal flow");
  const auto& z = expanding.generator().matrix();
  std::vector<std::pair<int, int>> out;
  for (int i = 0; i < z.rows(); ++i) {
    for (int j = 0; j < z.cols(); ++j) {
      if (z(i, i) > z(j, j)) out.emplace_back(i, j);
    }
  }
  return out;
}

void BoxSpec::validate() const {
  const auto coords = coordinates();
  if (coords.empty()) throw std::invalid_argument("BoxSpec: flow has no expanding directions");
  if (intervals.size() != coords.size()) {
    throw std::invalid_argument("BoxSpec: expected " + std::to_string(coords.size()) + " intervals");
  }
  for (const auto& iv : intervals) {
    if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || !(iv.lo < iv.hi)) {
      throw std::invalid_argument("BoxSpec: intervals must be bounded and non-empty");
    }
  }
}

namespace {

double expansion_exponent(const BoxSpec& box, std::pair<int, int> c) {
  const auto& z = box.expanding.generator().matrix();
  return z(c.first, c.first) - z(c.second, c.second);
}

Matrix<double> horospherical_element(int n, const std::vector<std::pair<int, int>>& coords,
                                     const std::vector<double>& u) {
  Matrix<double> b = Matrix<double>::Identity(n, n);
  for (std::size_t k = 0; k < coords.size(); ++k) b(coords[k].first, coords[k].second) = u[k];
  return b;
}

// Grid search over B_t with spacing <= 1/2 followed by one coordinate-wise
// golden-section pass around the best grid point.
double beta_by_grid(const LatticePointd& x, const BoxSpec& box, double t) {
  constexpr double kSpacing = 0.5;
  constexpr double kMaxPoints = 2e6;
  const auto coords = box.coordinates();
  const int n = x.dim();
  const std::size_t m = coords.size();
  std::vector<double> lo(m), hi(m), h(m);
  std::vector<std::size_t> count(m);
  double total = 1;
  for (std::size_t k = 0; k < m; ++k) {
    const double s = std::pow(t, expansion_exponent(box, coords[k]));
    lo[k] = box.intervals[k].lo * s;
    hi[k] = box.intervals[k].hi * s;
    count[k] = static_cast<std::size_t>(std::ceil((hi[k] - lo[k]) / kSpacing));
    h[k] = (hi[k] - lo[k]) / static_cast<double>(count[k]);
    total *= static_cast<double>(count[k]);
  }
  if (total > kMaxPoints) {
    throw std::invalid_argument("beta_t: B_t at t = " + std::to_string(t) + " needs more than 2e6 grid points");
  }
  auto depth_at = [&](const std::vector<double>& u) {
    return cusp_depth(translate(GroupElementd::from_trusted(horospherical_element(n, coords, u)), x));
  };
  std::vector<std::size_t> idx(m, 0);
  std::vector<double> u(m), best_u(m);
  double best = -1;
  for (;;) {
    for (std::size_t k = 0; k < m; ++k) u[k] = lo[k] + (static_cast<double>(idx[k]) + 0.5) * h[k];
    const double d = depth_at(u);
    if (d > best) best = d, best_u = u;
    std::size_t k = 0;
    while (k < m && ++idx[k] == count[k]) idx[k++] = 0;
    if (k == m) break;
  }
  const double invphi = (std::sqrt(5.0) - 1) / 2;
  for (std::size_t k = 0; k < m; ++k) {
    u = best_u;
    auto f = [&](double v) {
      u[k] = v;
      const double d = depth_at(u);
      if (d > best) best = d, best_u = u;
      return d;
    };
    double a = std::max(lo[k], best_u[k] - h[k]), b = std::min(hi[k], best_u[k] + h[k]);
    double c = b - invphi * (b - a), d = a + invphi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > 1e-3) {
      if (fc >= fd) {
        b = d, d = c, fd = fc;
        c = b - invphi * (b - a);
        fc = f(c);
      } else {
        a = c, c = d, fc = fd;
        d = a + invphi * (b - a);
        fd = f(d);
      }
    }
  }
  return std::max(best, 0.0);
}

}  // namespace

ExcursionSeries beta_t(const LatticePointd& x, const BoxSpec& box, std::span<const double> t_grid) {
  box.validate();
  if (box.expanding.dim() != x.dim()) throw std::invalid_argument("beta_t: dimension mismatch");
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > 1)) throw std::invalid_argument("beta_t: grid values must exceed 1");
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("beta_t: grid must increase");
  }
  ExcursionSeries out;
  out.refined = true;
  out.times.assign(t_grid.begin(), t_grid.end());
  out.depths.reserve(t_grid.size());
  if (t_grid.empty()) return out;

  const auto coords = box.coordinates();
  if (x.dim() == 2) {
    const auto c = coords.front();
    const double e = expansion_exponent(box, c);
    const auto flow = elementary_unipotent<double>(2, c.first, c.second);
    const Interval iv = box.intervals.front();
    if (iv.lo == 0) {
      // B_t are nested: one orbit segment serves the whole grid.
      const double s_max = iv.hi * std::pow(t_grid.back(), e);
      const ExcursionSeries orbit = running_max(orbit_series(x, flow, s_max, 0.5));
      for (double t : t_grid) {
        const double s = iv.hi * std::pow(t, e);
        const auto it = std::upper_bound(orbit.times.begin(), orbit.times.end(), s);
        out.depths.push_back(it == orbit.times.begin() ? 0.0 : orbit.depths[it - orbit.times.begin() - 1]);
      }
      return out;
    }
    for (double t : t_grid) {
      const double s = std::pow(t, e);
      const LatticePointd start = reduce(translate(exp_one_param(flow, iv.lo * s), x));
      const ExcursionSeries seg = orbit_series(start, flow, (iv.hi - iv.lo) * s, 0.5);
      out.depths.push_back(*std::max_element(seg.depths.begin(), seg.depths.end()));
    }
    return out;
  }
  for (double t : t_grid) out.depths.push_back(beta_by_grid(x, box, t));
  return out;
}

double omega_minus(const LatticePointd& x, const OneParamSubgroupd& sub, double horizon) {
  if (!(horizon >= 100)) throw std::invalid_argument("omega_minus needs T >= 100");
  constexpr double h = 0.5;
  OrbitWalker walker(x, sub.reversed(), h);
  double best = 0;
  double t = 0;
  for (double dyadic = 1; dyadic <= horizon; dyadic *= 2) {
    try {
      while (t < dyadic) walker.advance(), t += h;
    } catch (const PrecisionLossError&) {
      // A divergent orbit leaves the double range near t = 700; the ratio
      // at the last representable time stands in for the rest of the window.
      if (t < 100) throw;
      return std::max(best, walker.depth() / t);
    }
    if (dyadic >= horizon / 4) best = std::max(best, walker.depth() / dyadic);
  }
  return best;
}

double beta_bound_constant(const LatticePointd& x, const BoxSpec& box, std::span<const double> t_grid, double omega,
                           double slack) {
  box.validate();
  if (box.expanding.dim() != x.dim()) throw std::invalid_argument("beta_bound_constant: dimension mismatch");
  const int n = x.dim();
  // u = I + N with N^3 = 0, so |u^{-1}| <= |I + |N| + |N|^2| entrywise.
  Matrix<double> a = Matrix<double>::Zero(n, n);
  const auto coords = box.coordinates();
  for (std::size_t c = 0; c < coords.size(); ++c) {
    a(coords[c].first, coords[c].second) = std::max(std::abs(box.intervals[c].lo), std::abs(box.intervals[c].hi));
  }
  const Matrix<double> inv_bound = Matrix<double>::Identity(n, n) + a + a * a;
  const double log_inv = n == 2 ? std::log((a.sum() + std::sqrt(a.sum() * a.sum() + 4)) / 2)
                                : std::log(inv_bound.norm());
  const auto& z = box.expanding.generator().matrix();
  const double contraction = -z.diagonal().minCoeff();
  const double nu = drift_rate(box.expanding);
  double best = -std::numeric_limits<double>::infinity();
  for (double t : t_grid) {
    if (!(t > 1)) throw std::invalid_argument("beta_bound_constant: grid values must exceed 1");
    const double tau = std::log(t);
    const double back = cusp_depth(reduce(translate(exp_one_param(box.expanding, -tau), x)));
    best = std::max(best, back + 2 * contraction * tau - (nu + omega + slack) * tau);
  }
  return best + 2 * log_inv;
}

// ---------------------------------------------------------------- near-divergent points

namespace {

int contracting_axis(const OneParamSubgroupd& sub) {
  if (sub.dim() != 2 || sub.kind() != GeneratorKind::diagonal) {
    throw std::invalid_argument("near-divergent construction needs a diagonal flow on SL(2,R)");
  }
  const auto& z = sub.generator().matrix();
  if (z(0, 0) == z(1, 1)) throw std::invalid_argument("flow has no contracting direction");
  return z(0, 0) < z(1, 1) ? 0 : 1;
}

// Signed angle psi in (-pi/2, pi/2] with R(psi) v on the axis line.
template <typename Scalar>
Scalar alignment_angle(const Vector<Scalar>& v, int axis) {
  const Scalar pi = boost::math::constants::pi<Scalar>();
  Scalar psi = (axis == 0 ? Scalar(0) : pi / 2) - atan2(v(1), v(0));
  while (psi > pi / 2) psi -= pi;
  while (psi <= -pi / 2) psi += pi;
  return psi;
}

struct AlignedChoice {
  Eigen::Vector2d coeffs;
  double norm;
};

// Shortest primitive vector of the reduced basis within angle eps/2 of the axis.
AlignedChoice choose_aligned(const Matrix<double>& basis, int axis, double eps, double bound) {
  bool found = false;
  AlignedChoice best{{0, 0}, std::numeric_limits<double>::infinity()};
  double best_angle = 0;
  enumerate_vectors(basis, bound, [&](const auto& c, const Vector<double>& v) {
    if (std::gcd(static_cast<long long>(c(0)), static_cast<long long>(c(1))) != 1) return;
    const double psi = std::abs(alignment_angle(v, axis));
    if (!(psi < eps / 2)) return;
    const double len = v.norm();
    // Ties are broken by angle, then lexicographically, so the result is deterministic.
    const bool better = !found || len < best.norm - 1e-12 ||
                        (len <= best.norm + 1e-12 &&
                         (psi < best_angle - 1e-15 ||
                          (psi <= best_angle + 1e-15 &&
                           std::make_pair(c(0), c(1)) > std::make_pair(static_cast<long long>(best.coeffs(0)),
                                                                       static_cast<long long>(best.coeffs(1))))));
    if (better) {
      found = true;
      best = {Eigen::Vector2d(static_cast<double>(c(0)), static_cast<double>(c(1))), len};
      best_angle = psi;
    }
  });
  if (!found) {
    throw NotFoundError("no primitive vector within angle eps/2 of the contracting line below norm " +
                        std::to_string(bound));
  }
  return best;
}

double default_bound(double eps, double norm_bound) {
  if (!(eps > 0 && eps < 0.5)) throw std::invalid_argument("eps must lie in (0, 0.5)");
  return norm_bound > 0 ? norm_bound : 2 / eps;
}

}  // namespace

NearDivergentPoint near_divergent_point(const LatticePointd& x, double eps, const OneParamSubgroupd& sub,
                                        double norm_bound) {
  if (x.dim() != 2) throw std::invalid_argument("near_divergent_point needs n = 2");
  const int axis = contracting_axis(sub);
  const double bound = default_bound(eps, norm_bound);
  const LatticePointd r = reduce(x);
  const AlignedChoice choice = choose_aligned(r.basis(), axis, eps, bound);
  const Vector<double> v = r.basis() * choice.coeffs;
  const double psi = alignment_angle(v, axis);

  NearDivergentPoint out;
  out.g = rotation2(psi);
  out.angle = psi;
  out.point = reduce(translate(out.g, r));
  out.aligned = out.g.matrix() * v;
  out.aligned(1 - axis) = 0;
  out.constant = 2 * std::log(choice.norm);
  return out;
}

std::vector<double> return_times(const LatticePointd& x, const OneParamSubgroupd& sub, double lo, double hi,
                                 double level) {
  if (!(lo >= 0 && hi >= lo)) throw std::invalid_argument("return_times needs 0 <= lo <= hi");
  OrbitWalker walker(x, sub.reversed(), 1.0);
  std::vector<double> out;
  const auto first = static_cast<long>(std::ceil(lo));
  const auto last = static_cast<long>(std::floor(hi));
  for (long t = 0; t <= last; ++t) {
    if (t > 0) walker.advance();
    if (t >= first && walker.depth() < level) out.push_back(static_cast<double>(t));
  }
  return out;
}

ExcursionCertificate certify_excursion(const LatticePointd& x, double t, double eps, const BoxSpec& box,
                                       double norm_bound) {
  using HP = HighPrecision;
  box.validate();
  if (x.dim() != 2) throw std::invalid_argument("certify_excursion needs n = 2");
  if (!(t > 0 && t <= 300)) throw std::invalid_argument("certify_excursion needs t in (0, 300]");
  const auto coords = box.coordinates();
  if (coords.front() != std::make_pair(0, 1)) {
    throw std::invalid_argument("certify_excursion needs the upper horocycle as expanding coordinate");
  }
  const int axis = contracting_axis(box.expanding);
  const double bound = default_bound(eps, norm_bound);
  const Interval iv = box.intervals.front();
  const double u0 = (iv.lo + iv.hi) / 2;

  const OneParamSubgroup<HP> flow = subgroup_cast<HP>(box.expanding);
  const LatticePoint<HP> xh = lattice_cast<HP>(x);
  const LatticePoint<HP> xn = reduce(translate(exp_one_param(flow, HP(-t)), xh));
  Matrix<HP> hu(2, 2);
  hu << HP(1), HP(u0), HP(0), HP(1);
  const LatticePoint<HP> x1 = reduce(translate(GroupElement<HP>::from_trusted(hu), xn));

  const Matrix<double> basis = x1.basis().cast<double>();
  const AlignedChoice choice = choose_aligned(basis, axis, eps, bound);
  const Vector<HP> v = x1.basis() * choice.coeffs.cast<HP>();
  const HP psi = alignment_angle(v, axis);
  // R(psi) = L h_delta with L lower triangular and delta = -tan(psi).
  const HP delta = -tan(psi);
  const double u = u0 + static_cast<double>(delta);
  if (!(u > iv.lo && u < iv.hi)) throw NotFoundError("certify_excursion: aligned coordinate leaves the box");

  // The exact coordinate matters: an error e in u grows to e * exp(nu t).
  hu(0, 1) = HP(u0) + delta;
  const LatticePoint<HP> moved =
      translate(exp_one_param(flow, HP(t)), translate(GroupElement<HP>::from_trusted(hu), xn));

  ExcursionCertificate out;
  out.t = t;
  out.box_coordinate = u;
  out.depth = static_cast<double>(cusp_depth(moved));
  out.constant = static_cast<double>(2 * log(sqrt(v.squaredNorm()) * cos(psi)));
  out.lower_bound = drift_rate(box.expanding) * t - out.constant;
  return out;
}

}  // namespace cusplab
