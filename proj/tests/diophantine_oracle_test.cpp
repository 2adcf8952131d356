#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "cusplab/diophantine_oracle.hpp"
#include "cusplab/flows.hpp"
#include "cusplab/haar_sampler.hpp"

using namespace cusplab;

namespace {

const double kGoldenConj = std::numbers::phi - 1;

BigInt big(long long v) { return BigInt(v); }

// Smallest |q x - p| over 1 <= q <= q_max, by brute force.
std::pair<long long, long long> best_approximation(double x, long long q_max) {
  long long bp = 0, bq = 1;
  double best = INFINITY;
  for (long long q = 1; q <= q_max; ++q) {
    const long long p = std::llround(q * x);
    const double r = std::abs(q * x - static_cast<double>(p));
    if (r < best) best = r, bp = p, bq = q;
  }
  return {bp, bq};
}

}  // namespace

TEST_CASE("cf_expand examples") {
  const auto half = cf_expand(Rational(1, 2));
  CHECK(half.quotients == std::vector<BigInt>{2});
  REQUIRE(half.convergents.size() == 2);
  CHECK(half.convergents[0].p == 0);
  CHECK(half.convergents[0].q == 1);
  CHECK(half.convergents[1].p == 1);
  CHECK(half.convergents[1].q == 2);
  CHECK(half.terminated);

  const auto golden = cf_expand(kGoldenConj, 20);
  CHECK(golden.quotients == std::vector<BigInt>(20, 1));
  const long long fib[] = {1, 1, 2, 3, 5, 8, 13, 21};
  for (int k = 1; k <= 6; ++k) {
    CHECK(golden.convergents[k].p == fib[k - 1]);
    CHECK(golden.convergents[k].q == fib[k]);
  }

  const auto pi = cf_expand(std::numbers::pi - 3, 4);
  CHECK(pi.quotients == std::vector<BigInt>{7, 15, 1, 292});
  const long long pq[][2] = {{1, 7}, {15, 106}, {16, 113}};
  for (int k = 0; k < 3; ++k) {
    CHECK(pi.convergents[k + 1].p == pq[k][0]);
    CHECK(pi.convergents[k + 1].q == pq[k][1]);
    // Each convergent is the best approximation with denominator up to q_k.
    const auto [bp, bq] = best_approximation(std::numbers::pi - 3, pq[k][1]);
    CHECK(bp == pq[k][0]);
    CHECK(bq == pq[k][1]);
  }
}

TEST_CASE("cf_expand preconditions and precision wall") {
  CHECK_THROWS_AS(cf_expand(1.5, 5), std::invalid_argument);
  CHECK_THROWS_AS(cf_expand(0.3, 65), std::invalid_argument);
  CHECK_THROWS_AS(cf_expand(Rational(3, 2)), std::invalid_argument);
  try {
    cf_expand(kGoldenConj, 64);
    FAIL("expected a precision wall");
  } catch (const PrecisionWall& wall) {
    // The certified prefix is that of the double itself, which leaves the
    // all-ones expansion at quotient 38.
    const auto& q = wall.partial().quotients;
    CHECK(q.size() >= 30);
    const auto exact = cf_expand(exact_rational(kGoldenConj));
    for (std::size_t i = 0; i < q.size(); ++i) {
      CHECK(q[i] == exact.quotients[i]);
      if (i < 37) CHECK(q[i] == 1);
    }
  }
  // A double is an exact dyadic rational: its exact expansion terminates.
  const auto exact = cf_expand(exact_rational(kGoldenConj));
  CHECK(exact.terminated);
  CHECK(exact.exact_value() == exact_rational(kGoldenConj));
  CHECK(exact_rational(0.375) == Rational(3, 8));
}

TEST_CASE("determinant identity and best approximations") {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 200; ++trial) {
    const double x = u(eng);
    const auto cf = cf_expand(exact_rational(x));
    for (std::size_t k = 1; k < cf.convergents.size(); ++k) {
      const auto& a = cf.convergents[k];
      const auto& b = cf.convergents[k - 1];
      const BigInt det = a.p * b.q - b.p * a.q;
      REQUIRE((det == 1 || det == -1));
      if (k >= 2) REQUIRE(a.q > b.q);
    }
    const Rational xr = exact_rational(x);
    for (std::size_t k = 1; k < cf.convergents.size() && cf.convergents[k].q <= 10000; ++k) {
      const auto& c = cf.convergents[k];
      const Rational rk = abs(Rational(c.q) * xr - Rational(c.p));
      const long long qk = c.q.convert_to<long long>();
      for (long long q = 1; q < qk; ++q) {
        const Rational xq = Rational(q) * xr;
        const BigInt p = numerator(xq) / denominator(xq);
        const Rational r = std::min(abs(xq - Rational(p)), abs(xq - Rational(p + 1)));
        REQUIRE(rk < r);
      }
    }
  }
}

TEST_CASE("lattice_family") {
  CHECK((lattice_family(0).basis() - Matrix<double>::Identity(2, 2)).cwiseAbs().maxCoeff() == 0);
  const auto s0 = orbit_series(lattice_family(0), horocycle_flow<double>(), 100, 0.5);
  CHECK(*std::max_element(s0.depths.begin(), s0.depths.end()) == 0);

  // Direct minimization of the shortest vector along h_s, s in (300, 450).
  const auto x = lattice_family(kGoldenConj);
  double best_s = 0, best_depth = 0;
  for (double s = 300; s < 450; s += 1e-3) {
    const double d = cusp_depth(reduce(translate(exp_one_param(horocycle_flow<double>(), s), x)));
    if (d > best_depth) best_depth = d, best_s = s;
  }
  const double r = 13 * kGoldenConj - 8;
  CHECK(r == doctest::Approx(0.0344419).epsilon(1e-5));
  CHECK(best_s == doctest::Approx(13 / r).epsilon(1e-5));
  CHECK(best_depth == doctest::Approx(2 * std::log(1 / r)).epsilon(1e-5));
  CHECK(best_depth == doctest::Approx(6.737).epsilon(1e-3));

  // Rational alpha: closed orbit, bounded depth.
  const auto third = orbit_series(lattice_family(1.0 / 3), horocycle_flow<double>(), 1e4, 0.5);
  CHECK(*std::max_element(third.depths.begin(), third.depths.end()) <= 2 * std::log(3.0) + 1e-6);
  CHECK_THROWS_AS(lattice_family(1.0), std::invalid_argument);
}

TEST_CASE("predict_excursions") {
  const auto golden = predict_excursions(cf_expand(exact_rational(kGoldenConj)), 400);
  REQUIRE(!golden.empty());
  CHECK(golden.back().p == 8);
  CHECK(golden.back().q == 13);
  CHECK(golden.back().s_star == doctest::Approx(377.4).epsilon(1e-3));
  CHECK(golden.back().depth == doctest::Approx(6.737).epsilon(1e-3));
  CHECK(!golden.back().reversed);
  for (std::size_t i = 1; i < golden.size(); ++i) CHECK(golden[i].s_star > golden[i - 1].s_star);

  // Bounded quotients: depth / log s* tends to 1.
  const auto far = predict_excursions(cf_expand(kGoldenConj, 36), 1e12);
  const auto& last = far.back();
  CHECK(last.depth / last.log_s_star == doctest::Approx(1).epsilon(0.03));

  const auto rational = predict_excursions(cf_expand(Rational(355, 1000)), 1e300);
  CHECK(rational.size() < cf_expand(Rational(355, 1000)).convergents.size());
}

TEST_CASE("liouville_alpha") {
  Rational sum = 0;
  BigInt q = 1;
  for (int k = 1; k <= 4; ++k) {
    BigInt f = 1;
    for (int j = 2; j <= k; ++j) f *= j;
    sum += Rational(1, boost::multiprecision::pow(big(10), f.convert_to<unsigned>()));
  }
  CHECK(liouville_alpha(4) == sum);
  CHECK_THROWS_AS(liouville_alpha(0), std::invalid_argument);
  CHECK_THROWS_AS(liouville_alpha(7), std::invalid_argument);
}

TEST_CASE("liouville stages") {
  // q = 100 truncation: r = 100 alpha - 1 = 10^-4 + 10^-22 + ..., exact ratio 4/3.
  const auto two = liouville_stages(2);
  REQUIRE(two.size() == 1);
  CHECK(two[0].q == 10);
  const auto three = liouville_stages(3);
  REQUIRE(three.size() == 2);
  CHECK(three[1].q == 100);
  CHECK(three[1].k == 1);
  CHECK(three[1].depth == doctest::Approx(8 * std::log(10.0)).epsilon(1e-9));
  CHECK(three[1].slope == doctest::Approx(4.0 / 3).epsilon(1e-9));

  const auto six = liouville_stages(6);
  REQUIRE(six.size() == 5);
  for (std::size_t i = 0; i < six.size(); ++i) {
    CHECK(six[i].predicted == doctest::Approx(2.0 * (six[i].k + 1) / (six[i].k + 2)));
    if (six[i].k >= 2) CHECK(std::abs(six[i].slope / six[i].predicted - 1) <= 0.05);
    if (i > 0) CHECK(six[i].slope > six[i - 1].slope);
    CHECK(six[i].slope < 2);
  }
}

TEST_CASE("log_abs") {
  CHECK(log_abs(Rational(1, 1000)) == doctest::Approx(-3 * std::log(10.0)));
  const BigInt huge = boost::multiprecision::pow(big(10), 720);
  CHECK(log_abs(Rational(huge)) == doctest::Approx(720 * std::log(10.0)));
  CHECK(log_abs(Rational(-7, 2)) == doctest::Approx(std::log(3.5)));
  CHECK_THROWS(log_abs(Rational(0)));
}

TEST_CASE("horocycle_candidates cover dense simulation") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto x = sample_modular(seed);
    const double s_max = 2000;
    const auto cands = horocycle_candidates(x, s_max, 1.0);
    const auto s = orbit_series(x, horocycle_flow<double>(), s_max, 0.25);
    for (std::size_t i : local_maxima(s)) {
      if (s.depths[i] <= 1.5 || s.times[i] < 1 || s.times[i] > s_max - 1) continue;
      const bool found = std::any_of(cands.begin(), cands.end(), [&](const HorocycleCandidate& c) {
        return std::abs(c.s_star - s.times[i]) <= 1 && std::abs(c.depth - s.depths[i]) <= 0.7;
      });
      REQUIRE(found);
    }
    for (const auto& c : cands) {
      REQUIRE(c.s_star > 0);
      REQUIRE(c.s_star <= s_max);
      REQUIRE(c.depth > 1.0);
    }
  }
}
