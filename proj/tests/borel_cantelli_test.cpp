#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "cusplab/borel_cantelli.hpp"
#include "cusplab/haar_sampler.hpp"

using namespace cusplab;

namespace {

// Ordered-pair double loop: sum_i p_i + sum_{i != j} psi(|i - j|).
double pair_loop_bound(const std::vector<double>& p, const std::function<double(std::size_t)>& psi, std::size_t n) {
  double v = 0;
  for (std::size_t i = 1; i <= n; ++i) {
    v += p[i - 1];
    for (std::size_t j = 1; j <= n; ++j) {
      if (i != j) v += psi(i > j ? i - j : j - i);
    }
  }
  return v;
}

std::vector<std::size_t> geometric_lags(std::size_t horizon) {
  std::vector<std::size_t> lags;
  for (double m = 4; m <= static_cast<double>(horizon) / 10; m *= 1.4) {
    const auto lag = static_cast<std::size_t>(m);
    if (lags.empty() || lags.back() != lag) lags.push_back(lag);
  }
  return lags;
}

std::vector<double> walker_depths(const LatticePointd& x, const OneParamSubgroupd& sub, std::size_t horizon) {
  OrbitWalker w(x, sub, 1.0);
  std::vector<double> d(horizon);
  for (auto& v : d) {
    w.advance();
    v = w.depth();
  }
  return d;
}

double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  return v[static_cast<std::size_t>(q * static_cast<double>(v.size() - 1))];
}

}  // namespace

TEST_CASE("RSchedule") {
  const RSchedule r{0.5, 2};
  CHECK(r.threshold(1) == 0);
  CHECK(r.threshold(100) == doctest::Approx(0.25 * std::log(100.0)));
  CHECK_THROWS_AS(r.threshold(0), std::invalid_argument);
}

TEST_CASE("EventStream bit storage") {
  EventStream s(130, 3);
  s.set(1, 1);
  s.set(1, 64);
  s.set(1, 65);
  s.set(2, 130);
  CHECK(s.get(1, 64));
  CHECK(!s.get(0, 64));
  CHECK(s.hits(1) == 3);
  CHECK(s.hit_times(1) == std::vector<std::size_t>{1, 64, 65});
  s.set(1, 64, false);
  CHECK(s.hits(1) == 2);
  CHECK(s.hit_times(2) == std::vector<std::size_t>{130});
}

TEST_CASE("make_stream examples") {
  const std::vector<std::vector<double>> zero(3, std::vector<double>(50, 0.0));
  const auto z = make_stream(std::span<const std::vector<double>>(zero), {1, 1});
  for (std::size_t i = 0; i < 3; ++i) CHECK(z.hits(i) == 0);

  ExcursionSeries geo = orbit_series(LatticePointd::standard(2), geodesic_flow<double>(), 200, 0.5);
  const std::vector<ExcursionSeries> series{geo};
  const auto g = make_stream(std::span<const ExcursionSeries>(series), {1, 1});
  CHECK(g.length() == 200);
  CHECK(g.hits(0) == 200);
  CHECK(g.thresholds.size() == 200);

  ExcursionSeries gap;
  gap.times = {0, 0.5, 2, 3};
  gap.depths = {0, 0, 0, 0};
  const std::vector<ExcursionSeries> bad{gap};
  CHECK_THROWS_AS(make_stream(std::span<const ExcursionSeries>(bad), {1, 1}), std::invalid_argument);
}

TEST_CASE("Haar horocycle streams track (3/pi)/n") {
  const std::size_t e = 2000, horizon = 8192;
  std::vector<std::vector<double>> depths(e);
  for (std::size_t i = 0; i < e; ++i) depths[i] = walker_depths(sample_modular(derive_seed(5, i)), horocycle_flow<double>(), horizon);
  const auto s = make_stream(std::span<const std::vector<double>>(depths), {1, 1});
  for (std::size_t lo = 16; lo < horizon; lo *= 2) {
    double hits = 0, expected = 0;
    for (std::size_t n = lo; n < 2 * lo && n <= horizon; ++n) {
      for (std::size_t i = 0; i < e; ++i) hits += s.get(i, n);
      expected += 3 / std::numbers::pi / static_cast<double>(n) * static_cast<double>(e);
    }
    CHECK(hits / expected > 0.5);
    CHECK(hits / expected < 2);
  }
}

TEST_CASE("estimate_joint examples") {
  const std::size_t e = 4000, n = 64;
  const std::vector<std::size_t> lags{1, 5, 20};
  const auto coins = independent_stream([](std::size_t) { return 0.3; }, n, e, 9);
  const auto r = estimate_joint(coins, lags);
  CHECK(r.ensemble == e);
  const double sigma = std::sqrt(0.09 * 0.91 / e);
  for (std::size_t l = 0; l < lags.size(); ++l) {
    REQUIRE(r.joint_hat[l].size() == n - lags[l]);
    double worst = 0;
    for (double v : r.joint_hat[l]) worst = std::max(worst, std::abs(v - 0.09));
    // Max over <= 63 correlated estimates: 4 sigma keeps the family-wise rate small.
    CHECK(worst < 4 * sigma);
    CHECK(r.joint_hat[l][10] == doctest::Approx(0.09).epsilon(3 * sigma / 0.09));
  }
  for (std::size_t i = 0; i < n; ++i) CHECK(r.p_interval[i].lo <= r.p_hat[i]);

  EventStream same(n, e);
  std::mt19937_64 eng(1);
  for (std::size_t i = 0; i < e; ++i) {
    if (eng() % 3 == 0)
      for (std::size_t k = 1; k <= n; ++k) same.set(i, k);
  }
  const auto rs = estimate_joint(same, lags);
  for (std::size_t l = 0; l < lags.size(); ++l)
    for (std::size_t k = 0; k + lags[l] < n; ++k) CHECK(rs.joint_hat[l][k] == rs.p_hat[k]);

  const auto rz = estimate_joint(EventStream(n, e), lags);
  for (double p : rz.p_hat) CHECK(p == 0);
  CHECK(rz.sum_p == 0);
  for (const auto& row : rz.joint_hat)
    for (double v : row) CHECK(v == 0);

  CHECK_THROWS_AS(estimate_joint(EventStream(n, 999), lags), InsufficientDataError);
  CHECK_THROWS_AS(estimate_joint(EventStream(n, e), std::vector<std::size_t>{n}), std::invalid_argument);
}

TEST_CASE("planted model covariance") {
  const auto m = PlantedModel::make(0.02, 1, 0.5, 16384);
  for (std::size_t lag = 4; lag <= 1638; lag *= 2) {
    CHECK(m.covariance(lag) == doctest::Approx(0.02 * 0.02 / std::sqrt(static_cast<double>(lag))).epsilon(0.01));
  }
  CHECK(m.max_p() > 0.05);
  CHECK_THROWS_AS(PlantedModel::make(0.5, 1, 0.5, 16384), std::invalid_argument);
  CHECK_THROWS_AS(PlantedModel::make(0.02, 1, 0, 16384), std::invalid_argument);
}

TEST_CASE("planted stream matches its model") {
  const auto m = PlantedModel::make(0.05, 1, 0.5, 4096);
  const std::size_t e = 4000, n = 512;
  const auto s = planted_stream(m, n, e, 3);
  const std::vector<std::size_t> lags{8, 32};
  const auto r = estimate_joint(s, lags);
  double mean_p = 0;
  for (double p : r.p_hat) mean_p += p / static_cast<double>(n);
  CHECK(mean_p == doctest::Approx(0.05).epsilon(0.05));
  for (std::size_t l = 0; l < lags.size(); ++l) {
    double cov = 0;
    for (std::size_t k = 0; k + lags[l] < n; ++k) cov += r.joint_hat[l][k] - r.p_hat[k] * r.p_hat[k + lags[l]];
    cov /= static_cast<double>(n - lags[l]);
    CHECK(cov == doctest::Approx(m.covariance(lags[l])).epsilon(0.3));
  }
}

TEST_CASE("planted streams do not depend on the worker count") {
  const auto m = PlantedModel::make(0.02, 1, 0.5, 1000);
  const auto a = planted_stream(m, 1000, 20, 7, 1);
  const auto b = planted_stream(m, 1000, 20, 7, 4);
  for (std::size_t i = 0; i < 20; ++i) CHECK(a.hit_times(i) == b.hit_times(i));
  const std::vector<std::size_t> cps{10, 1000};
  CHECK(planted_counts(m, cps, 20, 7, 1) == planted_counts(m, cps, 20, 7, 3));
  const auto counts = planted_counts(m, cps, 20, 7, 1);
  for (std::size_t i = 0; i < 20; ++i) CHECK(counts[i][1] == a.hits(i));
}

TEST_CASE("psi_fit recovers the planted exponent") {
  const std::size_t horizon = 16384;
  const auto m = PlantedModel::make(0.02, 1, 0.5, horizon);
  const auto s = planted_stream(m, horizon, 2000, 11);
  const auto fit = psi_fit(estimate_joint(s, geometric_lags(horizon)), horizon);
  CHECK(!fit.degenerate);
  CHECK(fit.beta == doctest::Approx(0.5).epsilon(0.2));
  CHECK(fit.c == doctest::Approx(1).epsilon(0.5));
}

TEST_CASE("psi_fit on independent coins is degenerate") {
  const std::size_t horizon = 8192;
  const auto s = independent_stream([](std::size_t) { return 0.05; }, horizon, 1000, 5);
  const auto fit = psi_fit(estimate_joint(s, geometric_lags(horizon)), horizon);
  CHECK(fit.degenerate);
  CHECK(std::isinf(fit.beta));
}

TEST_CASE("psi_fit needs enough lags") {
  const auto s = independent_stream([](std::size_t) { return 0.05; }, 1000, 1000, 5);
  const std::vector<std::size_t> few{4, 8, 16, 32};
  CHECK_THROWS_AS(psi_fit(estimate_joint(s, few), 1000), InsufficientDataError);
}

TEST_CASE("variance_bound examples") {
  const std::vector<double> p{0.5, 0.5, 0.5};
  const auto psi = [](std::size_t m) { return m == 1 ? 0.1 : m == 2 ? 0.05 : 0.0; };
  CHECK(variance_bound(p, psi, 3) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(variance_bound(p, [](std::size_t) { return 0.0; }, 3) == 1.5);
  CHECK(variance_bound(p, psi, 1) == 0.5);
  CHECK_THROWS_AS(variance_bound(p, psi, 4), std::invalid_argument);
}

TEST_CASE("variance_bound equals the pair-loop oracle exactly") {
  // Dyadic inputs make every partial sum exact, so both orders agree bit for bit.
  std::mt19937_64 eng(23);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + eng() % 200;
    std::vector<double> p(n), table(n + 1);
    for (auto& v : p) v = static_cast<double>(eng() % 1024) / 1024;
    for (auto& v : table) v = static_cast<double>(eng() % 256) / 4096;
    const auto psi = [&](std::size_t m) { return table[m]; };
    REQUIRE(variance_bound(p, psi, n) == pair_loop_bound(p, psi, n));
  }
}

TEST_CASE("condition3_ratio") {
  const std::vector<double> p{0.5, 0.5, 0.5};
  const auto psi = [](std::size_t m) { return m == 1 ? 0.1 : m == 2 ? 0.05 : 0.0; };
  CHECK(condition3_ratio(p, psi, 3) == doctest::Approx(0.25 / 2.25).epsilon(1e-15));
  CHECK(condition3_ratio(p, [](std::size_t) { return 0.0; }, 3) == 0);
  const std::vector<double> zero(3, 0.0);
  CHECK_THROWS_AS(condition3_ratio(zero, psi, 3), DivisionByZeroError);

  // psi(m) = m^{-1/2}, p_i = 0.1: independent summation of the displayed ratio.
  const std::vector<double> tenth(10000, 0.1);
  const auto root = [](std::size_t m) { return 1 / std::sqrt(static_cast<double>(m)); };
  double prev = INFINITY;
  for (std::size_t n : {100, 1000, 10000}) {
    long double num = 0;
    for (std::size_t m = n; m >= 1; --m) num += static_cast<long double>(n - m) / std::sqrt(static_cast<long double>(m));
    const double expected = static_cast<double>(num / (0.1L * n * 0.1L * n));
    const double r = condition3_ratio(tenth, root, n);
    CHECK(r == doctest::Approx(expected).epsilon(1e-12));
    CHECK(r < prev);
    prev = r;
  }
  CHECK(condition3_ratio(tenth, root, 1000) == doctest::Approx(4.07).epsilon(0.01));
  // Decay like n^{-1/2}.
  CHECK(condition3_ratio(tenth, root, 10000) / condition3_ratio(tenth, root, 100) ==
        doctest::Approx(0.1).epsilon(0.05));
}

TEST_CASE("attach_condition_curves") {
  BCReport r;
  r.p_hat.assign(100, 0.1);
  const std::vector<std::size_t> ns{10, 100};
  attach_condition_curves(r, [](std::size_t) { return 0.0; }, ns);
  CHECK(r.curve_n == ns);
  CHECK(r.variance_bound_curve == std::vector<double>{variance_bound(r.p_hat, [](std::size_t) { return 0.0; }, 10),
                                                      variance_bound(r.p_hat, [](std::size_t) { return 0.0; }, 100)});
  CHECK(r.condition3_ratio == std::vector<double>{0, 0});
}

TEST_CASE("i.i.d. exponential limsup") {
  const double one = simulate_iid_exponential(1, 1000000, 1);
  CHECK(one >= 0.85);
  CHECK(one <= 1.30);
  const double two = simulate_iid_exponential(2, 1000000, 1);
  CHECK(two >= 0.42);
  CHECK(two <= 0.65);
  for (std::uint64_t seed = 2; seed < 6; ++seed) {
    const double a = simulate_iid_exponential(1, 100000, seed);
    const double b = simulate_iid_exponential(0.5, 100000, seed);
    CHECK(b == doctest::Approx(2 * a).epsilon(0.1));
  }
  CHECK_THROWS_AS(simulate_iid_exponential(0, 100000, 1), std::invalid_argument);
}

TEST_CASE("easy half: summable independent streams stop hitting") {
  const std::vector<std::size_t> cps{10000, 100000, 1000000};
  const auto counts = independent_counts([](std::size_t n) { return 1 / (static_cast<double>(n) * n); }, cps, 2000, 3);
  std::vector<std::vector<double>> at(cps.size());
  for (const auto& row : counts)
    for (std::size_t c = 0; c < cps.size(); ++c) at[c].push_back(static_cast<double>(row[c]));
  // sum p_n = pi^2/6: the median stays at 1 or 2 and the tail does not move with N.
  for (std::size_t c = 0; c < cps.size(); ++c) {
    CHECK(quantile(at[c], 0.5) <= 2);
    CHECK(quantile(at[c], 0.99) <= 5);
  }
  CHECK(quantile(at[2], 0.99) == quantile(at[0], 0.99));
}

TEST_CASE("hard half: p_n = c/n gives c log N hits everywhere") {
  const double c = 5;
  const std::vector<std::size_t> cps{1000000};
  const auto counts = independent_counts([c](std::size_t n) { return std::min(1.0, c / static_cast<double>(n)); }, cps,
                                         200, 8);
  std::uint64_t lowest = UINT64_MAX;
  for (const auto& row : counts) lowest = std::min(lowest, row[0]);
  CHECK(static_cast<double>(lowest) >= 0.5 * c * std::log(1e6));
}

TEST_CASE("planted model: J_n / E J_n concentrates") {
  const auto m = PlantedModel::make(0.02, 1, 0.5, 100000);
  const std::vector<std::size_t> cps{1000, 100000};
  const auto counts = planted_counts(m, cps, 50, 4);
  std::vector<double> rel;
  for (std::size_t c = 0; c < cps.size(); ++c) {
    double sum = 0, sumsq = 0;
    for (const auto& row : counts) sum += row[c], sumsq += static_cast<double>(row[c]) * row[c];
    const double mean = sum / 50;
    rel.push_back((sumsq / 50 - mean * mean) / (mean * mean));
    CHECK(mean == doctest::Approx(0.02 * cps[c]).epsilon(0.2));
  }
  CHECK(rel[1] < rel[0]);
  CHECK(rel[1] < 0.05);
  const std::vector<double> p(100000, 0.02);
  const auto psi = [&](std::size_t lag) { return m.covariance(lag); };
  CHECK(condition3_ratio(p, psi, 100000) < condition3_ratio(p, psi, 1000));
}

TEST_CASE("limsup_exponent brackets 1 on horocycle streams") {
  const std::vector<double> gammas{0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5};
  std::vector<HitProfile> merged(gammas.size());
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto d = walker_depths(sample_modular(derive_seed(31, i)), horocycle_flow<double>(), 131072);
    const auto prof = hit_profiles(d, gammas, 1);
    for (std::size_t g = 0; g < gammas.size(); ++g) merged[g].merge(prof[g]);
  }
  const auto a = limsup_exponent(merged, 1);
  CHECK(a.lower <= 1);
  CHECK(a.upper >= 1);
  CHECK(a.upper <= 1.2);
  CHECK(a.lower > 0);
}

TEST_CASE("limsup_exponent brackets 1 on geodesic streams") {
  const std::vector<double> gammas{0.3, 0.5, 0.7, 0.9, 1.1, 1.3, 1.5};
  std::vector<HitProfile> merged(gammas.size());
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto d = walker_depths(sample_modular(derive_seed(37, i)), geodesic_flow<double>(), 131072);
    const auto prof = hit_profiles(d, gammas, 1);
    for (std::size_t g = 0; g < gammas.size(); ++g) merged[g].merge(prof[g]);
  }
  const auto a = limsup_exponent(merged, 1);
  CHECK(a.lower <= 1);
  CHECK(a.upper >= 1);
}

TEST_CASE("limsup_exponent on all-zero streams is inconclusive") {
  const std::vector<double> zero(1024, 0.0);
  const std::vector<double> gammas{0.5, 1.0};
  std::vector<HitProfile> merged(gammas.size());
  for (int i = 0; i < 10; ++i) {
    const auto prof = hit_profiles(zero, gammas, 1);
    for (std::size_t g = 0; g < gammas.size(); ++g) merged[g].merge(prof[g]);
  }
  CHECK_THROWS_AS(limsup_exponent(merged, 1), InconclusiveError);
}
