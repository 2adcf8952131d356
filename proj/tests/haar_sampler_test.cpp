#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "cusplab/haar_sampler.hpp"

using namespace cusplab;

namespace {

double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == v) ++i;
    while (j < b.size() && b[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST_CASE("sample_modular coordinates follow y^-2 dx dy") {
  Engine eng = make_engine(1);
  const int n = 1000000;
  int high = 0;
  for (int i = 0; i < n; ++i) {
    const auto c = sample_modular_coordinates(eng);
    REQUIRE(std::abs(c.x) <= 0.5);
    REQUIRE(c.x * c.x + c.y * c.y >= 1);
    REQUIRE(c.theta >= 0);
    REQUIRE(c.theta < 2 * std::numbers::pi);
    high += c.y > 2;
  }
  const double p = 3 / (2 * std::numbers::pi);
  CHECK(p == doctest::Approx(0.477).epsilon(1e-3));
  CHECK(std::abs(static_cast<double>(high) / n - p) <= 3 * std::sqrt(p * (1 - p) / n));
}

TEST_CASE("sample_modular is deterministic and respects Minkowski") {
  const auto a = sample_modular(42), b = sample_modular(42), c = sample_modular(43);
  CHECK(a.basis() == b.basis());
  CHECK(a.basis() != c.basis());
  const double bound = std::sqrt(2 / std::sqrt(3.0));
  for (std::uint64_t seed = 0; seed < 100000; ++seed) {
    const auto x = sample_modular(seed);
    REQUIRE(x.reduced());
    REQUIRE(shortest_vector(x).alpha1 <= bound + 1e-9);
  }
}

TEST_CASE("sample_generic") {
  std::vector<double> depths;
  for (std::uint64_t seed = 0; seed < 10000; ++seed) {
    const auto x = sample_generic(seed);
    REQUIRE(x.dim() == 3);
    REQUIRE(std::abs(x.basis().determinant() - 1) < 1e-9);
    depths.push_back(cusp_depth(x));
  }
  CHECK(sample_generic(1).basis() != sample_generic(2).basis());
  CHECK(sample_generic(1).basis() == sample_generic(1).basis());
  std::nth_element(depths.begin(), depths.begin() + 5000, depths.end());
  CHECK(std::isfinite(depths[5000]));
  CHECK(depths[5000] < 6);
  CHECK_THROWS_AS(sample_generic(1, 2), std::invalid_argument);
}

TEST_CASE("tail_measure recovers k = 1 for n = 2") {
  const std::vector<double> thresholds{3, 4, 5, 6, 7, 8};
  const auto est = tail_measure(1000000, thresholds, 7, 2, 1);
  CHECK(est.fitted_k == doctest::Approx(1).epsilon(0.15));
  CHECK(est.fitted_k > 0);
  CHECK(std::is_sorted(est.empirical_prob.rbegin(), est.empirical_prob.rend()));
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    CHECK(est.intervals[i].lo <= est.empirical_prob[i]);
    CHECK(est.empirical_prob[i] <= est.intervals[i].hi);
  }
  // Exact cusp integral: mu(D > t) = (3/pi) e^{-t} for t >= 0.
  for (std::size_t i = 0; i < thresholds.size(); ++i) {
    const double c = est.empirical_prob[i] * std::exp(thresholds[i]);
    CHECK(c == doctest::Approx(3 / std::numbers::pi).epsilon(0.2));
  }
}

TEST_CASE("tail_measure confidence shrinks like 1/sqrt(samples)") {
  const std::vector<double> thresholds{2, 3, 4, 5, 6};
  const auto a = tail_measure(200000, thresholds, 3, 2, 1);
  const auto b = tail_measure(400000, thresholds, 3, 2, 1);
  const double ratio = b.ci_halfwidth / a.ci_halfwidth;
  CHECK(ratio >= 0.6);
  CHECK(ratio <= 0.8);
}

TEST_CASE("tail_measure does not depend on the worker count") {
  const std::vector<double> thresholds{2, 3, 4, 5};
  const auto a = tail_measure(100000, thresholds, 11, 2, 1);
  const auto b = tail_measure(100000, thresholds, 11, 2, 3);
  CHECK(a.hits == b.hits);
  CHECK(a.fitted_k == b.fitted_k);
}

TEST_CASE("tail_measure preconditions") {
  const std::vector<double> ok{3, 4};
  CHECK_THROWS_AS(tail_measure(1000, ok, 1), std::invalid_argument);
  CHECK_THROWS_AS(tail_measure(100000, std::vector<double>{1, 3}, 1), std::invalid_argument);
  CHECK_THROWS_AS(tail_measure(100000, std::vector<double>{4, 3}, 1), std::invalid_argument);
  CHECK_THROWS_AS(tail_measure(100000, std::vector<double>{3, 11}, 1), InsufficientDataError);
}

TEST_CASE("n = 3 generic samples have an exponential tail") {
  // Generic samples are not Haar for n = 3, so no exponent is asserted.
  const std::vector<double> thresholds{2, 2.5, 3, 3.5};
  const auto est = tail_measure(200000, thresholds, 5, 3, 1);
  CHECK(std::is_sorted(est.empirical_prob.rbegin(), est.empirical_prob.rend()));
  CHECK(est.empirical_prob.back() > 0);
  CHECK(est.fitted_k > 0);
  CHECK(std::isfinite(est.fitted_k));
}

TEST_CASE("Haar invariance under a horocycle translate") {
  const int n = 100000;
  std::vector<double> a(n), b(n);
  const auto h = exp_one_param(horocycle_flow<double>(), 0.37);
  for (int i = 0; i < n; ++i) {
    a[i] = cusp_depth(sample_modular(derive_seed(1, i)));
    b[i] = cusp_depth(translate(h, sample_modular(derive_seed(2, i))));
  }
  // Two-sample 1% critical value 1.63 sqrt(2/n).
  CHECK(ks_statistic(a, b) < 1.63 * std::sqrt(2.0 / n));
}

TEST_CASE("tail sandwich constants are stable across seeds") {
  const std::vector<double> thresholds{3, 4, 5, 6, 7, 8};
  std::vector<double> lo, hi;
  for (std::uint64_t seed : {21, 22, 23}) {
    const auto est = tail_measure(1000000, thresholds, seed, 2, 1);
    double c1 = INFINITY, c2 = 0;
    for (std::size_t i = 0; i < thresholds.size(); ++i) {
      const double c = est.empirical_prob[i] * std::exp(thresholds[i]);
      c1 = std::min(c1, c);
      c2 = std::max(c2, c);
    }
    lo.push_back(c1);
    hi.push_back(c2);
  }
  for (const auto* v : {&lo, &hi}) {
    const double mean = ((*v)[0] + (*v)[1] + (*v)[2]) / 3;
    for (double c : *v) CHECK(c == doctest::Approx(mean).epsilon(0.2));
  }
}
