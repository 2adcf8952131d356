#include "cusplab/borel_cantelli.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>

#include "cusplab/errors.hpp"
#include "cusplab/parallel.hpp"

namespace cusplab {

double RSchedule::threshold(std::size_t n) const {
  if (n == 0) throw std::invalid_argument("thresholds start at n = 1");
  return gamma / k * std::log(static_cast<double>(n));
}

EventStream::EventStream(std::size_t length, std::size_t ensemble)
    : length_(length), ensemble_(ensemble), words_((length + 63) / 64), bits_(words_ * ensemble, 0) {}

bool EventStream::get(std::size_t point, std::size_t n) const {
  const std::size_t i = n - 1;
  return (bits_[point * words_ + i / 64] >> (i % 64)) & 1U;
}

void EventStream::set(std::size_t point, std::size_t n, bool value) {
  const std::size_t i = n - 1;
  auto& word = bits_[point * words_ + i / 64];
  const std::uint64_t mask = std::uint64_t{1} << (i % 64);
  word = value ? (word | mask) : (word & ~mask);
}

std::size_t EventStream::hits(std::size_t point) const {
  std::size_t total = 0;
  for (std::size_t w = 0; w < words_; ++w) total += static_cast<std::size_t>(std::popcount(bits_[point * words_ + w]));
  return total;
}

std::vector<std::size_t> EventStream::hit_times(std::size_t point) const {
  std::vector<std::size_t> out;
  for (std::size_t w = 0; w < words_; ++w) {
    std::uint64_t word = bits_[point * words_ + w];
    while (word != 0) {
      out.push_back(w * 64 + static_cast<std::size_t>(std::countr_zero(word)) + 1);
      word &= word - 1;
    }
  }
  return out;
}

namespace {

void check_schedule(const RSchedule& s) {
  if (!(s.k > 0) || !(s.gamma >= 0)) throw std::invalid_argument("schedule needs k > 0 and gamma >= 0");
}

std::vector<double> thresholds_for(const RSchedule& s, std::size_t n_max) {
  std::vector<double> r(n_max);
  for (std::size_t n = 1; n <= n_max; ++n) r[n - 1] = s.threshold(n);
  return r;
}

}  // namespace

EventStream make_stream(std::span<const ExcursionSeries> series, const RSchedule& schedule) {
  check_schedule(schedule);
  if (series.empty()) throw std::invalid_argument("make_stream needs at least one series");
  double t_end = INFINITY;
  for (const auto& s : series) {
    if (s.times.empty()) throw std::invalid_argument("make_stream: empty series");
    t_end = std::min(t_end, s.times.back());
  }
  if (t_end < 1) throw std::invalid_argument("make_stream: series end before time 1");
  const auto n_max = static_cast<std::size_t>(std::floor(t_end + 1e-9));
  EventStream stream(n_max, series.size());
  stream.thresholds = thresholds_for(schedule, n_max);
  for (std::size_t p = 0; p < series.size(); ++p) {
    const auto& s = series[p];
    std::size_t i = 0;
    for (std::size_t n = 1; n <= n_max; ++n) {
      const double t = static_cast<double>(n);
      while (i < s.size() && s.times[i] < t - 1e-9) ++i;
      if (i == s.size() || std::abs(s.times[i] - t) > 1e-9) {
        throw std::invalid_argument("make_stream: series has no sample at time " + std::to_string(n));
      }
      if (s.depths[i] > stream.thresholds[n - 1]) stream.set(p, n);
    }
  }
  return stream;
}

EventStream make_stream(std::span<const std::vector<double>> depths, const RSchedule& schedule) {
  check_schedule(schedule);
  if (depths.empty()) throw std::invalid_argument("make_stream needs at least one point");
  std::size_t n_max = depths.front().size();
  for (const auto& d : depths) n_max = std::min(n_max, d.size());
  if (n_max == 0) throw std::invalid_argument("make_stream: empty depth sequence");
  EventStream stream(n_max, depths.size());
  stream.thresholds = thresholds_for(schedule, n_max);
  for (std::size_t p = 0; p < depths.size(); ++p) {
    for (std::size_t n = 1; n <= n_max; ++n) {
      if (depths[p][n - 1] > stream.thresholds[n - 1]) stream.set(p, n);
    }
  }
  return stream;
}

BCReport estimate_joint(const EventStream& stream, std::span<const std::size_t> lags) {
  const std::size_t n_max = stream.length();
  const std::size_t e = stream.ensemble();
  if (e < 1000) throw InsufficientDataError("estimate_joint needs an ensemble of at least 1000 points");
  for (std::size_t m : lags) {
    if (m == 0 || m >= n_max) throw std::invalid_argument("estimate_joint: lags must lie in [1, N)");
  }
  std::vector<std::uint64_t> single(n_max, 0);
  std::vector<std::vector<std::uint64_t>> joint(lags.size());
  for (std::size_t l = 0; l < lags.size(); ++l) joint[l].assign(n_max - lags[l], 0);
  for (std::size_t p = 0; p < e; ++p) {
    for (std::size_t n : stream.hit_times(p)) {
      ++single[n - 1];
      for (std::size_t l = 0; l < lags.size(); ++l) {
        const std::size_t m = lags[l];
        if (n + m <= n_max && stream.get(p, n + m)) ++joint[l][n - 1];
      }
    }
  }
  BCReport r;
  r.ensemble = e;
  r.lags.assign(lags.begin(), lags.end());
  const double total = static_cast<double>(e);
  r.p_hat.resize(n_max);
  r.p_interval.resize(n_max);
  for (std::size_t i = 0; i < n_max; ++i) {
    r.p_hat[i] = static_cast<double>(single[i]) / total;
    r.p_interval[i] = wilson_interval(single[i], e);
    r.sum_p += r.p_hat[i];
  }
  r.joint_hat.resize(lags.size());
  r.joint_interval.resize(lags.size());
  for (std::size_t l = 0; l < lags.size(); ++l) {
    const auto& counts = joint[l];
    r.joint_hat[l].resize(counts.size());
    r.joint_interval[l].resize(counts.size());
    for (std::size_t i = 0; i < counts.size(); ++i) {
      r.joint_hat[l][i] = static_cast<double>(counts[i]) / total;
      r.joint_interval[l][i] = wilson_interval(counts[i], e);
    }
  }
  return r;
}

PsiFit psi_fit(const BCReport& report, std::size_t horizon) {
  const std::size_t n_max = report.p_hat.size();
  if (horizon == 0 || horizon > n_max) horizon = n_max;
  const double lag_hi = static_cast<double>(horizon) / 10;
  std::vector<std::size_t> window;
  for (std::size_t l = 0; l < report.lags.size(); ++l) {
    const std::size_t m = report.lags[l];
    if (m >= 4 && static_cast<double>(m) <= lag_hi) window.push_back(l);
  }
  if (window.size() < 8) throw InsufficientDataError("psi_fit needs at least 8 lags in [4, N/10]");
  std::size_t m_lo = report.lags[window.front()], m_hi = m_lo;
  for (std::size_t l : window) {
    m_lo = std::min(m_lo, report.lags[l]);
    m_hi = std::max(m_hi, report.lags[l]);
  }
  if (m_hi < 100 * m_lo) throw InsufficientDataError("psi_fit needs lags spanning two decades");

  PsiFit fit;
  const double e = static_cast<double>(report.ensemble);
  std::vector<double> xs, ys, ws;
  for (std::size_t l : window) {
    const std::size_t m = report.lags[l];
    double cov = 0, base = 0, pair = 0;
    for (std::size_t n = 1; n + m <= horizon; ++n) {
      const double pp = report.p_hat[n - 1] * report.p_hat[n + m - 1];
      const double j = report.joint_hat[l][n - 1];
      cov += j - pp;
      base += pp;
      pair += j;
    }
    if (base <= 0) continue;
    const double rho = cov / base;
    const double sigma = std::sqrt(std::max(pair, base) / e) / base;
    fit.lags.push_back(m);
    fit.rho.push_back(rho);
    fit.rho_sigma.push_back(sigma);
    if (rho > 2 * sigma) {
      xs.push_back(std::log(static_cast<double>(m)));
      ys.push_back(std::log(rho));
      ws.push_back((rho / sigma) * (rho / sigma));
    }
  }
  if (xs.size() < 3) return fit;

  double sw = 0, mx = 0, my = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) sw += ws[i], mx += ws[i] * xs[i], my += ws[i] * ys[i];
  mx /= sw;
  my /= sw;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
    sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
  }
  if (sxx == 0) return fit;
  const double slope = sxy / sxx;
  const double intercept = my - slope * mx;
  double rss = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double r = ys[i] - intercept - slope * xs[i];
    rss += ws[i] * r * r;
  }
  fit.degenerate = false;
  fit.beta = std::clamp(-slope, 1e-6, 2.0);
  fit.c = std::exp(intercept);
  fit.beta_stderr = std::sqrt(rss / static_cast<double>(xs.size() - 2) / sxx);
  return fit;
}

namespace {

void check_bound_inputs(std::span<const double> p, std::size_t n) {
  if (n == 0 || n > p.size()) throw std::invalid_argument("need 1 <= n <= p.size()");
}

double psi_weighted_sum(const std::function<double(std::size_t)>& psi, std::size_t n) {
  double s = 0;
  for (std::size_t m = 1; m < n; ++m) s += psi(m) * static_cast<double>(n - m);
  return s;
}

}  // namespace

double variance_bound(std::span<const double> p, const std::function<double(std::size_t)>& psi, std::size_t n) {
  check_bound_inputs(p, n);
  double sp = 0;
  for (std::size_t i = 0; i < n; ++i) sp += p[i];
  return sp + 2 * psi_weighted_sum(psi, n);
}

double condition3_ratio(std::span<const double> p, const std::function<double(std::size_t)>& psi, std::size_t n) {
  check_bound_inputs(p, n);
  double sp = 0;
  for (std::size_t i = 0; i < n; ++i) sp += p[i];
  if (sp == 0) throw DivisionByZeroError("condition3_ratio: sum of p_i is zero");
  return psi_weighted_sum(psi, n) / (sp * sp);
}

void attach_condition_curves(BCReport& report, const std::function<double(std::size_t)>& psi,
                             std::span<const std::size_t> ns) {
  report.curve_n.assign(ns.begin(), ns.end());
  report.variance_bound_curve.clear();
  report.condition3_ratio.clear();
  for (std::size_t n : ns) {
    report.variance_bound_curve.push_back(variance_bound(report.p_hat, psi, n));
    report.condition3_ratio.push_back(condition3_ratio(report.p_hat, psi, n));
  }
}

double simulate_iid_exponential(double lambda, std::size_t n_max, std::uint64_t seed) {
  if (!(lambda > 0)) throw std::invalid_argument("simulate_iid_exponential needs lambda > 0");
  if (n_max < 8) throw std::invalid_argument("simulate_iid_exponential needs N >= 8");
  Engine eng = make_engine(seed);
  const std::size_t n_lo = std::max<std::size_t>(2, n_max / 4);
  double best = 0;
  for (std::size_t n = 1; n <= n_max; ++n) {
    const double y = -std::log(uniform_open0(eng));
    if (n >= n_lo) best = std::max(best, y / std::log(static_cast<double>(n)));
  }
  return best / lambda;
}

PlantedModel PlantedModel::make(double p, double c0, double beta, std::size_t horizon) {
  if (!(p > 0 && p < 1)) throw std::invalid_argument("planted model needs p in (0, 1)");
  if (!(c0 > 0) || !(beta > 0 && beta <= 2)) throw std::invalid_argument("planted model needs C0 > 0, beta in (0, 2]");
  if (horizon < 2) throw std::invalid_argument("planted model needs a horizon of at least 2");
  PlantedModel m;
  m.p = p;
  m.c0 = c0;
  m.beta = beta;
  // m^{-beta} = Gamma(beta)^{-1} int x^{beta-1} e^{-m x} dx, discretized at
  // x = 2^{-j}, i.e. exponential memories of length 2^j. Cutting the integral
  // at x = 2^{-levels} loses about (m 2^{-levels})^beta / Gamma(beta + 1),
  // under 1% at m = horizon / 10 for beta >= 1/2.
  m.levels = static_cast<int>(std::ceil(std::log2(static_cast<double>(horizon)))) + 12;
  const double scale = c0 * std::log(2.0) / std::tgamma(beta);
  double root_sum = 0;
  std::vector<double> amp;
  for (int j = 0; j <= m.levels; ++j) {
    amp.push_back(scale * std::exp2(-beta * j));
    root_sum += std::sqrt(amp.back());
  }
  if (m.levels > 63) throw std::invalid_argument("planted model: horizon too large");
  m.k_value = 1 + root_sum * root_sum;
  double wsum = 0;
  for (double a : amp) {
    m.weights.push_back(std::sqrt(a / (m.k_value - 1)));
    wsum += m.weights.back();
  }
  m.w_base = std::max(0.0, 1 - wsum);
  if (p > m.max_p()) {
    throw std::invalid_argument("planted model: p exceeds " + std::to_string(m.max_p()) + " for this C0 and beta");
  }
  return m;
}

double PlantedModel::max_p() const {
  double wsum = 0;
  for (double w : weights) wsum += w;
  return 1 / (w_base + k_value * wsum);
}

double PlantedModel::covariance(std::size_t m) const {
  double c = 0;
  for (std::size_t j = 0; j < weights.size(); ++j) {
    c += weights[j] * weights[j] * (k_value - 1) * std::exp(-static_cast<double>(m) / std::exp2(static_cast<double>(j)));
  }
  return p * p * c;
}

namespace {

/// Markov chain of the planted model for one ensemble point.
class PlantedChain {
 public:
  PlantedChain(const PlantedModel& model, std::uint64_t seed) : model_(model), eng_(make_engine(seed)) {
    for (std::size_t j = 0; j < model_.weights.size(); ++j) {
      jump_.push_back(model_.weights[j] * model_.k_value);
      memory_.push_back(std::exp2(static_cast<double>(j)));
      if (uniform01(eng_) * model_.k_value < 1) on_ |= std::uint64_t{1} << j;
      queue_.push({1 + gap(j), j});
    }
    recompute();
  }

  /// X_n for the next n.
  bool step() {
    ++n_;
    if (queue_.top().first == n_) {
      while (queue_.top().first == n_) {
        const std::size_t j = queue_.top().second;
        queue_.pop();
        const std::uint64_t bit = std::uint64_t{1} << j;
        on_ = uniform01(eng_) * model_.k_value < 1 ? (on_ | bit) : (on_ & ~bit);
        queue_.push({n_ + gap(j), j});
      }
      recompute();
    }
    return uniform01(eng_) < bias_;
  }

 private:
  // Geometric holding time with per-step redraw probability 1 - exp(-2^{-j}).
  std::uint64_t gap(std::size_t j) {
    return 1 + static_cast<std::uint64_t>(-memory_[j] * std::log(uniform_open0(eng_)));
  }

  void recompute() {
    double w = model_.w_base;
    for (std::uint64_t bits = on_; bits != 0; bits &= bits - 1) {
      w += jump_[static_cast<std::size_t>(std::countr_zero(bits))];
    }
    bias_ = model_.p * w;
  }

  using Event = std::pair<std::uint64_t, std::size_t>;
  const PlantedModel& model_;
  Engine eng_;
  std::vector<double> jump_, memory_;
  std::uint64_t on_ = 0;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> queue_;
  std::uint64_t n_ = 0;
  double bias_ = 0;
};

void check_checkpoints(std::span<const std::size_t> checkpoints) {
  if (checkpoints.empty() || checkpoints.front() == 0 || !std::is_sorted(checkpoints.begin(), checkpoints.end())) {
    throw std::invalid_argument("checkpoints must be positive and increasing");
  }
}

template <typename Draw>
std::vector<std::uint64_t> count_at(std::span<const std::size_t> checkpoints, Draw&& draw) {
  std::vector<std::uint64_t> out;
  out.reserve(checkpoints.size());
  std::uint64_t hits = 0;
  std::size_t n = 0;
  for (std::size_t target : checkpoints) {
    for (; n < target; ++n) hits += draw(n + 1) ? 1 : 0;
    out.push_back(hits);
  }
  return out;
}

}  // namespace

EventStream planted_stream(const PlantedModel& model, std::size_t length, std::size_t ensemble, std::uint64_t seed,
                           unsigned workers) {
  EventStream stream(length, ensemble);
  std::vector<std::vector<std::size_t>> hits(ensemble);
  parallel_for(ensemble, workers, [&](std::size_t p) {
    PlantedChain chain(model, derive_seed(seed, p));
    for (std::size_t n = 1; n <= length; ++n) {
      if (chain.step()) hits[p].push_back(n);
    }
  });
  for (std::size_t p = 0; p < ensemble; ++p) {
    for (std::size_t n : hits[p]) stream.set(p, n);
  }
  return stream;
}

std::vector<std::vector<std::uint64_t>> planted_counts(const PlantedModel& model,
                                                       std::span<const std::size_t> checkpoints,
                                                       std::size_t ensemble, std::uint64_t seed, unsigned workers) {
  check_checkpoints(checkpoints);
  std::vector<std::vector<std::uint64_t>> out(ensemble);
  parallel_for(ensemble, workers, [&](std::size_t p) {
    PlantedChain chain(model, derive_seed(seed, p));
    out[p] = count_at(checkpoints, [&](std::size_t) { return chain.step(); });
  });
  return out;
}

std::vector<std::vector<std::uint64_t>> independent_counts(const std::function<double(std::size_t)>& p,
                                                           std::span<const std::size_t> checkpoints,
                                                           std::size_t ensemble, std::uint64_t seed,
                                                           unsigned workers) {
  check_checkpoints(checkpoints);
  std::vector<std::vector<std::uint64_t>> out(ensemble);
  parallel_for(ensemble, workers, [&](std::size_t i) {
    Engine eng = make_engine(derive_seed(seed, i));
    out[i] = count_at(checkpoints, [&](std::size_t n) { return uniform01(eng) < p(n); });
  });
  return out;
}

EventStream independent_stream(const std::function<double(std::size_t)>& p, std::size_t length,
                               std::size_t ensemble, std::uint64_t seed) {
  EventStream stream(length, ensemble);
  for (std::size_t i = 0; i < ensemble; ++i) {
    Engine eng = make_engine(derive_seed(seed, i));
    for (std::size_t n = 1; n <= length; ++n) {
      if (uniform01(eng) < p(n)) stream.set(i, n);
    }
  }
  return stream;
}

void HitProfile::merge(const HitProfile& other) {
  if (ensemble == 0) {
    *this = other;
    return;
  }
  if (other.gamma != gamma || other.k != k || other.horizon != horizon) {
    throw std::invalid_argument("HitProfile::merge: profiles differ in gamma, k or horizon");
  }
  if (octave_hits.size() < other.octave_hits.size()) octave_hits.resize(other.octave_hits.size(), 0);
  for (std::size_t j = 0; j < other.octave_hits.size(); ++j) octave_hits[j] += other.octave_hits[j];
  ensemble += other.ensemble;
  sum_final += other.sum_final;
  sumsq_final += other.sumsq_final;
  sum_early += other.sum_early;
  sumsq_early += other.sumsq_early;
}

std::vector<HitProfile> hit_profiles(std::span<const double> depths, std::span<const double> gammas, double k) {
  if (!(k > 0)) throw std::invalid_argument("hit_profiles needs k > 0");
  const std::size_t n_max = depths.size();
  if (n_max < 4) throw std::invalid_argument("hit_profiles needs at least 4 samples");
  const auto early = static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(n_max))));
  const std::size_t octaves = static_cast<std::size_t>(std::bit_width(n_max));
  std::vector<HitProfile> out;
  for (double gamma : gammas) {
    if (!(gamma >= 0)) throw std::invalid_argument("hit_profiles needs gamma >= 0");
    HitProfile h;
    h.gamma = gamma;
    h.k = k;
    h.horizon = n_max;
    h.ensemble = 1;
    h.octave_hits.assign(octaves, 0);
    std::uint64_t j_n = 0, j_early = 0;
    for (std::size_t n = 1; n <= n_max; ++n) {
      if (depths[n - 1] > gamma / k * std::log(static_cast<double>(n))) {
        ++h.octave_hits[static_cast<std::size_t>(std::bit_width(n)) - 1];
        ++j_n;
        if (n <= early) ++j_early;
      }
    }
    h.sum_final = j_n;
    h.sumsq_final = j_n * j_n;
    h.sum_early = j_early;
    h.sumsq_early = j_early * j_early;
    out.push_back(std::move(h));
  }
  return out;
}

namespace {

double relative_variance(std::uint64_t sum, std::uint64_t sumsq, std::size_t e) {
  if (sum == 0) return INFINITY;
  const double n = static_cast<double>(e);
  const double mean = static_cast<double>(sum) / n;
  const double var = (static_cast<double>(sumsq) - n * mean * mean) / (n - 1);
  return std::max(0.0, var) / (mean * mean);
}

}  // namespace

AlphaInterval limsup_exponent(std::span<const HitProfile> profiles, double k) {
  if (profiles.empty()) throw std::invalid_argument("limsup_exponent needs profiles");
  const auto& first = profiles.front();
  if (first.ensemble < 2) throw InsufficientDataError("limsup_exponent needs at least 2 ensemble points");
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const auto& h = profiles[i];
    if (h.k != k || h.horizon != first.horizon || h.ensemble != first.ensemble) {
      throw std::invalid_argument("limsup_exponent: profiles disagree on k, horizon or ensemble");
    }
    if (i > 0 && !(h.gamma > profiles[i - 1].gamma)) {
      throw std::invalid_argument("limsup_exponent: gammas must increase");
    }
  }
  // Octaves 2 .. last one contained in [1, N].
  const std::size_t last = static_cast<std::size_t>(std::bit_width(first.horizon + 1)) - 2;
  if (last < 5) throw InsufficientDataError("limsup_exponent needs N >= 63 (four full octaves)");

  AlphaInterval out;
  bool have_lower = false, have_upper = false;
  for (const auto& h : profiles) {
    std::vector<double> xs, ys;
    for (std::size_t j = 2; j <= last; ++j) {
      xs.push_back(static_cast<double>(j));
      ys.push_back(std::log2(static_cast<double>(h.octave_hits[j]) + 0.5));
    }
    const LineFit fit = fit_line(xs, ys);
    const double var_final = relative_variance(h.sum_final, h.sumsq_final, h.ensemble);
    const double var_early = relative_variance(h.sum_early, h.sumsq_early, h.ensemble);
    out.gammas.push_back(h.gamma);
    out.growth.push_back(fit.slope);
    out.growth_stderr.push_back(fit.slope_stderr);
    out.rel_var_final.push_back(var_final);
    out.rel_var_early.push_back(var_early);
    out.last_octave_hits.push_back(h.octave_hits[last]);

    const bool grows = fit.slope > 2 * fit.slope_stderr && var_final < var_early;
    const bool dies = fit.slope < -2 * fit.slope_stderr || h.octave_hits[last] == 0;
    if (grows) {
      out.lower = h.gamma;
      have_lower = true;
    }
    if (dies && !have_upper) {
      out.upper = h.gamma;
      have_upper = true;
    }
  }
  if (!have_lower || !have_upper) {
    throw InconclusiveError("limsup_exponent: no gamma with clearly " + std::string(have_lower ? "finite" : "infinite") +
                            " hit counts on this grid");
  }
  if (out.lower > out.upper) throw InconclusiveError("limsup_exponent: lower bound exceeds upper bound");
  return out;
}

}  // namespace cusplab
