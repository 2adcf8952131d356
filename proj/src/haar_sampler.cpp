#include "cusplab/haar_sampler.hpp"

#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

#include "cusplab/parallel.hpp"

namespace cusplab {

namespace {

constexpr std::uint64_t kChunk = 4096;
constexpr double kMinHits = 100;

}  // namespace

ModularCoordinates sample_modular_coordinates(Engine& eng) {
  const double ymin = std::sqrt(3.0) / 2;
  for (;;) {
    const double x = uniform01(eng) - 0.5;
    // Inverse CDF of y^{-2} dy on [ymin, inf).
    const double y = ymin / uniform_open0(eng);
    if (x * x + y * y < 1.0) continue;
    const double theta = 2 * std::numbers::pi * uniform01(eng);
    return {x, y, theta};
  }
}

LatticePointd lattice_from_coordinates(const ModularCoordinates& c) {
  // g = K(theta)^T U(z)^T so that g^T = U(z) K(theta) and g^T . i = z.
  const double sy = std::sqrt(c.y);
  Matrix<double> ut(2, 2);
  ut << sy, 0, c.x / sy, 1 / sy;
  Matrix<double> kt(2, 2);
  kt << std::cos(c.theta), std::sin(c.theta), -std::sin(c.theta), std::cos(c.theta);
  return reduce(LatticePointd(GroupElement<double>::from_trusted(kt * ut)));
}

LatticePointd sample_modular(Engine& eng) { return lattice_from_coordinates(sample_modular_coordinates(eng)); }

LatticePointd sample_modular(std::uint64_t seed) {
  Engine eng = make_engine(seed);
  return sample_modular(eng);
}

LatticePointd sample_generic(Engine& eng, int n) {
  if (n != 3) throw std::invalid_argument("sample_generic supports n = 3");
  std::normal_distribution<double> normal;
  for (;;) {
    Matrix<double> m(n, n);
    for (int i = 0; i < n * n; ++i) m.data()[i] = normal(eng);
    double det = m.determinant();
    if (std::abs(det) < 1e-12) continue;
    if (det < 0) {
      m.col(0) *= -1;
      det = -det;
    }
    return reduce(LatticePointd(GroupElement<double>::normalized(m)));
  }
}

LatticePointd sample_generic(std::uint64_t seed, int n) {
  Engine eng = make_engine(seed);
  return sample_generic(eng, n);
}

std::vector<double> sample_depths(std::uint64_t samples, std::uint64_t seed, int n, unsigned workers) {
  std::vector<double> depths(samples);
  const std::uint64_t chunks = (samples + kChunk - 1) / kChunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    Engine eng = make_engine(derive_seed(seed, c));
    const std::uint64_t end = std::min<std::uint64_t>(samples, (c + 1) * kChunk);
    for (std::uint64_t i = c * kChunk; i < end; ++i) {
      depths[i] = cusp_depth(n == 2 ? sample_modular(eng) : sample_generic(eng, n));
    }
  });
  return depths;
}

TailEstimate fit_tail(std::span<const double> thresholds, std::span<const std::uint64_t> hits,
                      std::uint64_t total) {
  TailEstimate est;
  est.thresholds.assign(thresholds.begin(), thresholds.end());
  est.hits.assign(hits.begin(), hits.end());
  est.total = total;
  std::vector<double> ts, logs, vars;
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double p = static_cast<double>(hits[i]) / static_cast<double>(total);
    est.empirical_prob.push_back(p);
    est.intervals.push_back(wilson_interval(hits[i], total));
    if (static_cast<double>(hits[i]) >= kMinHits) {
      ts.push_back(thresholds[i]);
      logs.push_back(std::log(p));
      vars.push_back((1 - p) / (static_cast<double>(total) * p));
    }
  }
  if (hits.empty() || static_cast<double>(hits.back()) < kMinHits) {
    throw InsufficientDataError("tail_measure: largest threshold has fewer than 100 hits");
  }
  if (ts.size() < 2) throw InsufficientDataError("tail_measure: need two thresholds with >= 100 hits");
  const LineFit fit = fit_line(ts, logs);
  est.fitted_k = -fit.slope;
  est.fitted_log_c = fit.intercept;
  double tbar = 0;
  for (double t : ts) tbar += t;
  tbar /= static_cast<double>(ts.size());
  double sxx = 0;
  for (double t : ts) sxx += (t - tbar) * (t - tbar);
  double var_k = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double w = (ts[i] - tbar) / sxx;
    var_k += w * w * vars[i];
  }
  est.ci_halfwidth = 1.96 * std::sqrt(var_k);
  return est;
}

TailEstimate tail_measure(std::uint64_t samples, std::span<const double> thresholds, std::uint64_t seed, int n,
                          unsigned workers) {
  if (samples < 100000) throw std::invalid_argument("tail_measure: samples must be >= 1e5");
  if (thresholds.empty()) throw std::invalid_argument("tail_measure: no thresholds");
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    if (thresholds[i] < 2 || thresholds[i] > 12) {
      throw std::invalid_argument("tail_measure: thresholds must lie in [2, 12]");
    }
    if (i > 0 && !(thresholds[i] > thresholds[i - 1])) {
      throw std::invalid_argument("tail_measure: thresholds must be increasing");
    }
  }
  const std::vector<double> depths = sample_depths(samples, seed, n, workers);
  std::vector<std::uint64_t> hits(thresholds.size(), 0);
  for (double d : depths) {
    for (std::size_t i = 0; i < thresholds.size() && d > thresholds[i]; ++i) ++hits[i];
  }
  return fit_tail(thresholds, hits, samples);
}

}  // namespace cusplab
