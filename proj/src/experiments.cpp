#include "cusplab/experiments.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <numeric>
#include <stdexcept>
#include <typeinfo>

#include "cusplab/borel_cantelli.hpp"
#include "cusplab/errors.hpp"
#include "cusplab/flows.hpp"
#include "cusplab/haar_sampler.hpp"
#include "cusplab/parallel.hpp"
#include "cusplab/rng.hpp"
#include "cusplab/stats.hpp"

namespace cusplab {

namespace {

constexpr std::array<std::pair<ExperimentKind, std::string_view>, 8> kNames{{
    {ExperimentKind::tail, "tail"},
    {ExperimentKind::geodesic_loglaw, "geodesic-loglaw"},
    {ExperimentKind::horocycle_loglaw, "horocycle-loglaw"},
    {ExperimentKind::beta, "beta"},
    {ExperimentKind::unipotent_alpha, "unipotent-alpha"},
    {ExperimentKind::oracle_compare, "oracle-compare"},
    {ExperimentKind::ubprop_demo, "ubprop-demo"},
    {ExperimentKind::bc_synthetic, "bc-synthetic"},
}};

enum class FieldType { count, real, reals };

struct Field {
  const char* name;
  FieldType type;
  Json fallback;  // null: required
  double lo;
  double hi;
};

std::vector<double> geometric_grid(double from, double to, int per_decade) {
  std::vector<double> out;
  const int steps = static_cast<int>(std::lround(std::log10(to / from) * per_decade));
  for (int i = 0; i <= steps; ++i) out.push_back(from * std::pow(10.0, static_cast<double>(i) / per_decade));
  return out;
}

std::vector<double> linear_grid(double from, double to, double step) {
  std::vector<double> out;
  const int steps = static_cast<int>(std::lround((to - from) / step));
  for (int i = 0; i <= steps; ++i) out.push_back(std::round((from + i * step) * 1e9) / 1e9);
  return out;
}

std::vector<Field> schema(ExperimentKind kind, int n) {
  const Json none;
  switch (kind) {
    case ExperimentKind::tail:
      return {{"ensemble", FieldType::count, none, 1e5, 1e9},
              {"thresholds", FieldType::reals, n == 2 ? Json{3, 4, 5, 6, 7, 8} : Json{2, 2.5, 3}, 2, 12}};
    case ExperimentKind::geodesic_loglaw:
      return {{"ensemble", FieldType::count, none, 1, 1e6},
              {"horizon", FieldType::real, 1e4, 100, 1e7},
              {"step", FieldType::real, 0.5, 0.01, 1}};
    case ExperimentKind::horocycle_loglaw:
      return {{"ensemble", FieldType::count, none, 1, 1e6},
              {"horizon", FieldType::real, 1e7, 1e3, 1e9},
              {"depth_margin", FieldType::real, 6, 1, 10}};
    case ExperimentKind::beta:
      return {{"ensemble", FieldType::count, none, 1, 1e5},
              {"t_grid", FieldType::reals, n == 2 ? Json(geometric_grid(1e2, 1e6, 2)) : Json{2, 4, 8, 16}, 1.01, 1e7},
              {"omega_horizon", FieldType::real, 1e4, 100, 1e6}};
    case ExperimentKind::unipotent_alpha:
      return {{"ensemble", FieldType::count, none, 2, 1e6},
              {"horizon", FieldType::count, n == 2 ? 131072 : 32768, 63, 1e7},
              {"gammas", FieldType::reals, Json(linear_grid(0.3, 1.5, 0.1)), 0.01, 10},
              {"k", FieldType::real, n == 2 ? 1.0 : 1.5, 0.1, 10},
              {"psi_gamma", FieldType::real, 0.5, 0.01, 10},
              {"psi_horizon", FieldType::count, 4096, 4000, 1e6}};
    case ExperimentKind::oracle_compare:
      return {{"ensemble", FieldType::count, none, 1, 1e5},
              {"horizon", FieldType::real, 1e5, 10, 1e7},
              {"step", FieldType::real, 0.5, 0.01, 0.5}};
    case ExperimentKind::ubprop_demo:
      return {{"terms", FieldType::count, 6, 2, 6}};
    case ExperimentKind::bc_synthetic:
      return {{"ensemble", FieldType::count, 2000, 1000, 1e6},
              {"p", FieldType::real, 0.02, 1e-6, 0.5},
              {"c0", FieldType::real, 1, 1e-3, 100},
              {"beta", FieldType::real, 0.5, 0.05, 2},
              {"fit_horizon", FieldType::count, 16384, 4000, 1e7},
              {"horizon", FieldType::count, 1000000, 100, 1e8},
              {"count_ensemble", FieldType::count, 50, 2, 1e6},
              {"lambdas", FieldType::reals, Json{0.5, 1, 2}, 1e-3, 1e3}};
  }
  return {};
}

bool supports_n3(ExperimentKind kind) {
  return kind == ExperimentKind::tail || kind == ExperimentKind::geodesic_loglaw || kind == ExperimentKind::beta ||
         kind == ExperimentKind::unipotent_alpha;
}

Json validate_field(const Field& f, const nlohmann::json& v) {
  const std::string name = f.name;
  auto in_range = [&](double x) {
    if (!std::isfinite(x) || x < f.lo || x > f.hi) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "value %.17g outside [%.17g, %.17g]", x, f.lo, f.hi);
      throw ConfigError(name, buf);
    }
  };
  switch (f.type) {
    case FieldType::count: {
      if (!v.is_number_integer()) throw ConfigError(name, "expected a positive integer");
      if (v.is_number_unsigned()) {
        in_range(static_cast<double>(v.get<std::uint64_t>()));
        return v.get<std::uint64_t>();
      }
      in_range(static_cast<double>(v.get<std::int64_t>()));
      return static_cast<std::uint64_t>(v.get<std::int64_t>());
    }
    case FieldType::real: {
      if (!v.is_number()) throw ConfigError(name, "expected a number");
      in_range(v.get<double>());
      return v.get<double>();
    }
    case FieldType::reals: {
      if (!v.is_array() || v.empty()) throw ConfigError(name, "expected a non-empty array of numbers");
      Json out = Json::array();
      double prev = -INFINITY;
      for (const auto& e : v) {
        if (!e.is_number()) throw ConfigError(name, "expected a non-empty array of numbers");
        const double x = e.get<double>();
        in_range(x);
        if (!(x > prev)) throw ConfigError(name, "values must be strictly increasing");
        prev = x;
        out.push_back(x);
      }
      return out;
    }
  }
  return v;
}

}  // namespace

std::string_view to_string(ExperimentKind kind) {
  for (const auto& [k, name] : kNames) {
    if (k == kind) return name;
  }
  return "unknown";
}

ExperimentKind parse_experiment(std::string_view name) {
  for (const auto& [k, n] : kNames) {
    if (n == name) return k;
  }
  throw ConfigError("experiment", "unknown experiment '" + std::string(name) + "'");
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  ExperimentConfig c;
  if (!j.contains("experiment")) throw ConfigError("experiment", "required field is missing");
  if (!j["experiment"].is_string()) throw ConfigError("experiment", "expected a string");
  c.kind_ = parse_experiment(j["experiment"].get<std::string>());
  if (j.contains("n")) {
    if (!j["n"].is_number_integer() || (j["n"] != 2 && j["n"] != 3)) throw ConfigError("n", "must be 2 or 3");
    c.n_ = j["n"].get<int>();
  }
  if (c.n_ == 3 && !supports_n3(c.kind_)) {
    throw ConfigError("n", std::string(to_string(c.kind_)) + " supports only n = 2");
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_integer() || (j["seed"].is_number_integer() && !j["seed"].is_number_unsigned() &&
                                           j["seed"].get<std::int64_t>() < 0)) {
      throw ConfigError("seed", "expected an unsigned 64-bit integer");
    }
    c.seed_ = j["seed"].get<std::uint64_t>();
  }
  const auto fields = schema(c.kind_, c.n_);
  for (const auto& [key, value] : j.items()) {
    if (key == "experiment" || key == "n" || key == "seed") continue;
    const bool known = std::any_of(fields.begin(), fields.end(), [&](const Field& f) { return key == f.name; });
    if (!known) throw ConfigError(key, "unknown field for experiment " + std::string(to_string(c.kind_)));
  }
  for (const auto& f : fields) {
    if (j.contains(f.name)) {
      c.fields_[f.name] = validate_field(f, j[f.name]);
    } else if (f.fallback.is_null()) {
      throw ConfigError(f.name, "required field is missing");
    } else {
      c.fields_[f.name] = validate_field(f, nlohmann::json::parse(f.fallback.dump()));
    }
  }
  return c;
}

Json ExperimentConfig::to_json() const {
  Json j;
  j["experiment"] = std::string(to_string(kind_));
  j["n"] = n_;
  j["seed"] = seed_;
  for (const auto& [key, value] : fields_.items()) j[key] = value;
  return j;
}

double ExperimentConfig::number(const char* field) const {
  if (!fields_.contains(field)) throw std::logic_error(std::string("config has no field ") + field);
  return fields_[field].get<double>();
}

std::uint64_t ExperimentConfig::count(const char* field) const {
  if (!fields_.contains(field)) throw std::logic_error(std::string("config has no field ") + field);
  return fields_[field].get<std::uint64_t>();
}

std::vector<double> ExperimentConfig::numbers(const char* field) const {
  if (!fields_.contains(field)) throw std::logic_error(std::string("config has no field ") + field);
  return fields_[field].get<std::vector<double>>();
}

// ---------------------------------------------------------------------------
// Reports

Json Report::to_json() const {
  Json j;
  j["experiment"] = experiment;
  j["claim"] = claim;
  j["version"] = version;
  j["config"] = config;
  j["columns"] = columns;
  j["rows"] = rows;
  j["aggregate"] = aggregate;
  Json errs = Json::array();
  for (const auto& e : errors) errs.push_back(Json{{"index", e.index}, {"kind", e.kind}, {"message", e.message}});
  j["errors"] = errs;
  j["inconclusive"] = inconclusive;
  return j;
}

Report Report::from_json(const Json& j) {
  Report r;
  r.experiment = j.at("experiment").get<std::string>();
  r.claim = j.at("claim").get<std::string>();
  r.version = j.at("version").get<std::string>();
  r.config = j.at("config");
  r.columns = j.at("columns").get<std::vector<std::string>>();
  r.rows = j.at("rows").get<std::vector<std::vector<double>>>();
  r.aggregate = j.at("aggregate");
  for (const auto& e : j.at("errors")) {
    r.errors.push_back({e.at("index").get<std::uint64_t>(), e.at("kind").get<std::string>(),
                        e.at("message").get<std::string>()});
  }
  r.inconclusive = j.at("inconclusive").get<bool>();
  return r;
}

bool Report::operator==(const Report& o) const {
  return experiment == o.experiment && claim == o.claim && version == o.version && config == o.config &&
         columns == o.columns && rows == o.rows && aggregate == o.aggregate && errors == o.errors &&
         inconclusive == o.inconclusive;
}

std::string to_csv(const Report& report) {
  std::string out;
  for (std::size_t c = 0; c < report.columns.size(); ++c) {
    if (c > 0) out += ',';
    out += report.columns[c];
  }
  out += '\n';
  char buf[40];
  for (const auto& row : report.rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c > 0) out += ',';
      std::snprintf(buf, sizeof buf, "%.17g", row[c]);
      out += buf;
    }
    out += '\n';
  }
  return out;
}

std::string to_json_text(const Report& report) { return report.to_json().dump(2) + "\n"; }

std::filesystem::path emit(const Report& report, OutputFormat format, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto path = dir / (report.experiment + (format == OutputFormat::csv ? ".csv" : ".json"));
  const std::string text = format == OutputFormat::csv ? to_csv(report) : to_json_text(report);
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw std::runtime_error("cannot open " + path.string() + " for writing");
  file.write(text.data(), static_cast<std::streamsize>(text.size()));
  file.close();
  if (!file) throw std::runtime_error("error writing " + path.string());
  return path;
}

// ---------------------------------------------------------------------------
// Shared pipelines

std::vector<OracleMatch> compare_oracle(double alpha, double s_max, double step) {
  if (!(alpha > 0 && alpha < 1)) throw std::invalid_argument("compare_oracle needs alpha in (0, 1)");
  const auto predictions = predict_excursions(cf_expand(exact_rational(alpha)), s_max);
  const LatticePointd x = lattice_family(alpha);
  const auto flow = horocycle_flow<double>();
  const ExcursionSeries forward = orbit_series(x, flow, s_max + 2, step);
  ExcursionSeries backward;
  if (std::any_of(predictions.begin(), predictions.end(), [](const auto& p) { return p.reversed; })) {
    backward = orbit_series(x, flow.reversed(), s_max + 2, step);
  }
  std::vector<OracleMatch> out;
  for (const auto& pred : predictions) {
    const ExcursionSeries& s = pred.reversed ? backward : forward;
    OracleMatch m{pred, 0, 0, false};
    double best_err = INFINITY;
    for (std::size_t i : local_maxima(s)) {
      if (std::abs(s.times[i] - pred.s_star) > 1) continue;
      const double err = std::abs(s.depths[i] - pred.depth);
      if (err < best_err) best_err = err, m.sim_s = s.times[i], m.sim_depth = s.depths[i];
    }
    if (!std::isfinite(best_err)) {
      // Shallow predictions may sit on a plateau of clipped depth.
      double best = -1;
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (std::abs(s.times[i] - pred.s_star) <= 1 && s.depths[i] > best) {
          best = s.depths[i], m.sim_s = s.times[i], m.sim_depth = s.depths[i];
        }
      }
      if (best >= 0) best_err = std::abs(best - pred.depth);
    }
    m.matched = best_err <= 0.7;
    out.push_back(std::move(m));
  }
  return out;
}

HorocycleMax horocycle_max_depth(const LatticePointd& x, double s_max, double margin) {
  if (x.dim() != 2) throw std::invalid_argument("horocycle_max_depth needs n = 2");
  constexpr double kDense = 1000;
  const auto flow = horocycle_flow<double>();
  HorocycleMax out;
  const ExcursionSeries dense = orbit_series(x, flow, std::min(s_max, kDense), 0.25);
  out.max_depth = *std::max_element(dense.depths.begin(), dense.depths.end());
  if (s_max <= kDense) return out;
  const double min_depth = std::max(0.0, std::log(s_max) - margin);
  for (const auto& c : horocycle_candidates(x, s_max, min_depth)) {
    if (c.s_star <= kDense - 2) continue;
    ++out.candidates;
    const double start = std::max(0.0, c.s_star - 2);
    const double width = std::min(s_max, c.s_star + 2) - start;
    const LatticePointd y = reduce(translate(exp_one_param(flow, start), x));
    const ExcursionSeries w = orbit_series(y, flow, width, 0.1);
    const double local = *std::max_element(w.depths.begin(), w.depths.end());
    out.oracle_gap = std::max(out.oracle_gap, std::abs(local - c.depth));
    out.max_depth = std::max(out.max_depth, local);
  }
  return out;
}

namespace {

// Lags 4, 4 * 1.4, ... up to horizon / 10, which is always included.
std::vector<std::size_t> fit_lags(std::size_t horizon) {
  std::vector<std::size_t> lags;
  const std::size_t top = horizon / 10;
  for (double m = 4; m < static_cast<double>(top); m *= 1.4) {
    const auto lag = static_cast<std::size_t>(m);
    if (lags.empty() || lags.back() != lag) lags.push_back(lag);
  }
  if (lags.empty() || lags.back() != top) lags.push_back(top);
  return lags;
}

std::string error_kind(const std::exception& e) {
  if (dynamic_cast<const OverflowError*>(&e)) return "overflow";
  if (dynamic_cast<const PrecisionLossError*>(&e)) return "precision-loss";
  if (dynamic_cast<const NonConvergenceError*>(&e)) return "non-convergence";
  if (dynamic_cast<const NotFoundError*>(&e)) return "not-found";
  if (dynamic_cast<const PrecisionWallError*>(&e)) return "precision-wall";
  if (dynamic_cast<const InsufficientDataError*>(&e)) return "insufficient-data";
  if (dynamic_cast<const InconclusiveError*>(&e)) return "inconclusive";
  if (dynamic_cast<const DivisionByZeroError*>(&e)) return "division-by-zero";
  return "error";
}

/// Runs fn(i) for every ensemble point; library errors are recorded in
/// index order instead of aborting.
template <typename Fn>
std::vector<PointError> for_each_point(std::size_t count, unsigned workers, Fn&& fn) {
  std::vector<std::optional<PointError>> slots(count);
  parallel_for(count, workers, [&](std::size_t i) {
    try {
      fn(i);
    } catch (const Error& e) {
      slots[i] = PointError{i, error_kind(e), e.what()};
    }
  });
  std::vector<PointError> out;
  for (auto& s : slots) {
    if (s) out.push_back(std::move(*s));
  }
  return out;
}

double median(std::vector<double> v) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : (v[m - 1] + v[m]) / 2;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return NAN;
  std::sort(v.begin(), v.end());
  const double pos = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

Json number_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

LatticePointd sample_point(int n, std::uint64_t seed) { return n == 2 ? sample_modular(seed) : sample_generic(seed); }

OneParamSubgroupd diagonal_flow(int n) {
  return n == 2 ? geodesic_flow<double>() : OneParamSubgroupd(LieAlgebraElement<double>::diagonal({1.0, 0.0, -1.0}));
}

double tail_exponent(int n) { return n == 2 ? 1.0 : 1.5; }

void run_tail(const ExperimentConfig& c, unsigned workers, Report& r) {
  r.claim = "The Haar measure of {D > t} decays like C exp(-k t); with this normalization k = 1 for n = 2 "
            "(k = 3/2 for n = 3).";
  r.columns = {"threshold", "hits", "total", "prob", "ci_lo", "ci_hi"};
  const auto thresholds = c.numbers("thresholds");
  const TailEstimate est = tail_measure(c.count("ensemble"), thresholds, c.seed(), c.n(), workers);
  for (std::size_t i = 0; i < est.thresholds.size(); ++i) {
    r.rows.push_back({est.thresholds[i], static_cast<double>(est.hits[i]), static_cast<double>(est.total),
                      est.empirical_prob[i], est.intervals[i].lo, est.intervals[i].hi});
  }
  r.aggregate["fitted_k"] = est.fitted_k;
  r.aggregate["ci_halfwidth"] = est.ci_halfwidth;
  r.aggregate["fitted_log_c"] = est.fitted_log_c;
  r.aggregate["expected_k"] = tail_exponent(c.n());
}

void run_geodesic(const ExperimentConfig& c, unsigned workers, Report& r) {
  r.claim = "Along the diagonal flow the running maximum of the cusp depth grows like (1/k) log t for almost "
            "every point.";
  r.columns = {"point", "max_depth", "slope", "octave_slope"};
  const std::size_t e = c.count("ensemble");
  const double horizon = c.number("horizon");
  const auto flow = diagonal_flow(c.n());
  std::vector<std::optional<std::array<double, 3>>> result(e);
  r.errors = for_each_point(e, workers, [&](std::size_t i) {
    const LatticePointd x = sample_point(c.n(), derive_seed(c.seed(), i));
    const ExcursionSeries s = orbit_series(x, flow, horizon, c.number("step"));
    const double m = max_depth_in(s, 0, horizon);
    double octave = 0;
    for (double t : {horizon / 4, horizon / 2, horizon}) octave += max_depth_in(s, 0, t) / std::log(t) / 3;
    result[i] = {m, m / std::log(horizon), octave};
  });
  std::vector<double> slopes;
  for (std::size_t i = 0; i < e; ++i) {
    if (!result[i]) continue;
    const auto& v = *result[i];
    r.rows.push_back({static_cast<double>(i), v[0], v[1], v[2]});
    slopes.push_back(v[2]);
  }
  r.aggregate["points"] = slopes.size();
  r.aggregate["median_octave_slope"] = number_or_null(median(slopes));
  r.aggregate["quartiles"] = {number_or_null(quantile(slopes, 0.25)), number_or_null(quantile(slopes, 0.75))};
  r.aggregate["expected_slope"] = 1 / tail_exponent(c.n());
  if (c.n() == 3) r.aggregate["caveat"] = "n = 3 points are generic Gaussian samples, not Haar distributed";
}

void run_horocycle(const ExperimentConfig& c, unsigned workers, Report& r) {
  r.claim = "For almost every point of the modular surface the deepest horocycle excursion up to time S has "
            "depth about log S.";
  r.columns = {"point", "candidates", "max_depth", "slope", "oracle_gap"};
  const std::size_t e = c.count("ensemble");
  const double s_max = c.number("horizon");
  std::vector<std::optional<HorocycleMax>> result(e);
  r.errors = for_each_point(e, workers, [&](std::size_t i) {
    result[i] = horocycle_max_depth(sample_modular(derive_seed(c.seed(), i)), s_max, c.number("depth_margin"));
  });
  std::vector<double> slopes;
  double gap = 0;
  for (std::size_t i = 0; i < e; ++i) {
    if (!result[i]) continue;
    const auto& h = *result[i];
    const double slope = h.max_depth / std::log(s_max);
    r.rows.push_back({static_cast<double>(i), static_cast<double>(h.candidates), h.max_depth, slope, h.oracle_gap});
    slopes.push_back(slope);
    gap = std::max(gap, h.oracle_gap);
  }
  r.aggregate["points"] = slopes.size();
  r.aggregate["median_slope"] = number_or_null(median(slopes));
  r.aggregate["min_slope"] = slopes.empty() ? Json(nullptr) : Json(*std::min_element(slopes.begin(), slopes.end()));
  r.aggregate["max_oracle_gap"] = gap;
}

void run_beta(const ExperimentConfig& c, unsigned workers, Report& r) {
  r.claim = "The deepest point of the expanded box B_t grows like nu log t for almost every point, and never "
            "faster than (nu + omega^-) log t plus a constant.";
  r.columns = {"point", "t", "beta", "bound"};
  const std::size_t e = c.count("ensemble");
  const auto grid = c.numbers("t_grid");
  if (grid.size() < 2) throw ConfigError("t_grid", "needs at least two times");
  const auto flow = diagonal_flow(c.n());
  const BoxSpec box = c.n() == 2 ? BoxSpec::unit_horocycle() : BoxSpec::unit_box(flow);
  const double nu = drift_rate(flow);

  struct PointResult {
    std::vector<double> beta, bound;
    double omega = 0;
    double slope = 0;
  };
  std::vector<std::optional<PointResult>> result(e);
  r.errors = for_each_point(e, workers, [&](std::size_t i) {
    const LatticePointd x = sample_point(c.n(), derive_seed(c.seed(), i));
    const ExcursionSeries b = beta_t(x, box, grid);
    PointResult pr;
    pr.beta = b.depths;
    pr.omega = omega_minus(x, flow, c.number("omega_horizon"));
    const double constant = beta_bound_constant(x, box, grid, pr.omega);
    std::vector<double> logs;
    for (std::size_t j = 0; j < grid.size(); ++j) {
      logs.push_back(std::log(grid[j]));
      pr.bound.push_back((nu + pr.omega + 0.1) * logs.back() + constant);
    }
    pr.slope = fit_line(logs, pr.beta).slope;
    result[i] = std::move(pr);
  });
  std::vector<double> xs, ys, slopes, omegas;
  std::size_t violations = 0;
  for (std::size_t i = 0; i < e; ++i) {
    if (!result[i]) continue;
    const auto& pr = *result[i];
    for (std::size_t j = 0; j < grid.size(); ++j) {
      r.rows.push_back({static_cast<double>(i), grid[j], pr.beta[j], pr.bound[j]});
      xs.push_back(std::log(grid[j]));
      ys.push_back(pr.beta[j]);
      if (pr.beta[j] > pr.bound[j] + 1e-9) ++violations;
    }
    slopes.push_back(pr.slope);
    omegas.push_back(pr.omega);
  }
  r.aggregate["points"] = slopes.size();
  r.aggregate["nu"] = nu;
  r.aggregate["pooled_slope"] = xs.size() >= 2 ? Json(fit_line(xs, ys).slope) : Json(nullptr);
  r.aggregate["median_point_slope"] = number_or_null(median(slopes));
  r.aggregate["median_omega_minus"] = number_or_null(median(omegas));
  r.aggregate["bound_violations"] = violations;
  if (c.n() == 3) r.aggregate["caveat"] = "n = 3 points are generic Gaussian samples, not Haar distributed";
}

OneParamSubgroupd unipotent_flow(int n) {
  return n == 2 ? horocycle_flow<double>() : elementary_unipotent<double>(3, 0, 1);
}

std::vector<double> unipotent_depths(int n, std::uint64_t seed, std::size_t horizon) {
  OrbitWalker w(sample_point(n, seed), unipotent_flow(n), 1.0);
  std::vector<double> d(horizon);
  for (auto& v : d) {
    w.advance();
    v = w.depth();
  }
  return d;
}

void run_unipotent(const ExperimentConfig& c, unsigned workers, Report& r) {
  r.claim = "Along a unipotent orbit the events {D(u_n x) > (gamma/k) log n} happen infinitely often for gamma "
            "below alpha and finitely often above it; the reported interval brackets alpha.";
  r.columns = {"gamma", "growth", "growth_stderr", "rel_var_final", "rel_var_early", "last_octave_hits"};
  const std::size_t e = c.count("ensemble");
  const std::size_t horizon = c.count("horizon");
  const auto gammas = c.numbers("gammas");
  const double k = c.number("k");
  std::vector<std::vector<HitProfile>> per_point(e);
  r.errors = for_each_point(e, workers, [&](std::size_t i) {
    per_point[i] = hit_profiles(unipotent_depths(c.n(), derive_seed(c.seed(), i), horizon), gammas, k);
  });
  std::vector<HitProfile> merged(gammas.size());
  std::size_t used = 0;
  for (const auto& p : per_point) {
    if (p.empty()) continue;
    ++used;
    for (std::size_t g = 0; g < gammas.size(); ++g) merged[g].merge(p[g]);
  }
  r.aggregate["points"] = used;
  r.aggregate["k"] = k;
  if (c.n() == 3) r.aggregate["caveat"] = "n = 3 points are generic Gaussian samples, not Haar distributed";
  try {
    if (used < 2) throw InconclusiveError("fewer than two ensemble points succeeded");
    const AlphaInterval a = limsup_exponent(merged, k);
    for (std::size_t g = 0; g < a.gammas.size(); ++g) {
      // -1 marks an undefined relative variance (no hits).
      r.rows.push_back({a.gammas[g], a.growth[g], a.growth_stderr[g],
                        std::isfinite(a.rel_var_final[g]) ? a.rel_var_final[g] : -1,
                        std::isfinite(a.rel_var_early[g]) ? a.rel_var_early[g] : -1,
                        static_cast<double>(a.last_octave_hits[g])});
    }
    r.aggregate["alpha_lower"] = a.lower;
    r.aggregate["alpha_upper"] = a.upper;
  } catch (const InconclusiveError& err) {
    r.inconclusive = true;
    r.aggregate["alpha_lower"] = nullptr;
    r.aggregate["alpha_upper"] = nullptr;
    r.aggregate["inconclusive_reason"] = err.what();
  }

  if (e < 1000) {
    r.aggregate["psi_fit"] = "skipped: needs an ensemble of at least 1000 points";
    return;
  }
  const std::size_t psi_horizon = c.count("psi_horizon");
  std::vector<std::vector<double>> depths(e);
  parallel_for(e, workers, [&](std::size_t i) {
    // Fresh points, disjoint from the profile run.
    depths[i] = unipotent_depths(c.n(), derive_seed(c.seed() ^ 0x5eedULL, i), psi_horizon);
  });
  const EventStream stream = make_stream(std::span<const std::vector<double>>(depths), {c.number("psi_gamma"), k});
  const auto lags = fit_lags(psi_horizon);
  const PsiFit fit = psi_fit(estimate_joint(stream, lags), psi_horizon);
  r.aggregate["psi_fit"] = Json{{"gamma", c.number("psi_gamma")},
                                {"degenerate", fit.degenerate},
                                {"c", fit.degenerate ? Json(nullptr) : Json(fit.c)},
                                {"beta", fit.degenerate ? Json(nullptr) : Json(fit.beta)},
                                {"beta_stderr", fit.degenerate ? Json(nullptr) : Json(fit.beta_stderr)}};
}

void run_oracle(const ExperimentConfig& c, unsigned workers, Report& r) {
  r.claim = "Every good rational approximation p/q of alpha produces a horocycle excursion of Lambda_alpha at "
            "time q/|q alpha - p| with depth 2 log(1/|q alpha - p|).";
  r.columns = {"alpha_index", "alpha", "q", "s_star", "depth", "sim_s", "sim_depth", "reversed", "matched"};
  const std::size_t e = c.count("ensemble");
  std::vector<double> alphas(e);
  std::vector<std::vector<OracleMatch>> result(e);
  r.errors = for_each_point(e, workers, [&](std::size_t i) {
    Engine eng = make_engine(derive_seed(c.seed(), i));
    double a = 0;
    while (a == 0) a = uniform01(eng);
    alphas[i] = a;
    result[i] = compare_oracle(a, c.number("horizon"), c.number("step"));
  });
  std::size_t total = 0, matched = 0;
  for (std::size_t i = 0; i < e; ++i) {
    for (const auto& m : result[i]) {
      r.rows.push_back({static_cast<double>(i), alphas[i], m.prediction.q.convert_to<double>(), m.prediction.s_star,
                        m.prediction.depth, m.sim_s, m.sim_depth, m.prediction.reversed ? 1.0 : 0.0,
                        m.matched ? 1.0 : 0.0});
      ++total;
      matched += m.matched ? 1 : 0;
    }
  }
  r.aggregate["predictions"] = total;
  r.aggregate["matched"] = matched;
  r.aggregate["all_matched"] = total == matched;
}

void run_ubprop(const ExperimentConfig& c, Report& r) {
  r.claim = "Truncations of a Liouville number give horocycle excursions whose depth approaches 2 log s*, twice "
            "the generic rate; stage k has depth / log s* close to 2(k+1)/(k+2).";
  r.columns = {"k", "log10_q", "depth", "log_s_star", "slope", "predicted", "rel_error"};
  const auto stages = liouville_stages(static_cast<int>(c.count("terms")));
  double worst = 0;
  bool monotone = true;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const auto& s = stages[i];
    const double rel = std::abs(s.slope - s.predicted) / s.predicted;
    r.rows.push_back({static_cast<double>(s.k), log_abs(Rational(s.q)) / std::numbers::ln10, s.depth, s.log_s_star,
                      s.slope, s.predicted, rel});
    if (s.k >= 2) worst = std::max(worst, rel);
    if (i > 0 && !(s.slope > stages[i - 1].slope)) monotone = false;
  }
  r.aggregate["stages"] = stages.size();
  r.aggregate["max_rel_error_k_ge_2"] = worst;
  r.aggregate["slopes_increasing"] = monotone;
}

void run_bc(const ExperimentConfig& c, unsigned workers, Report& r) {
  r.claim = "Dependent Borel-Cantelli diagnostics on synthetic streams: recovery of a planted covariance "
            "exponent, decay of the variance ratio, concentration of J_n, and the i.i.d. exponential limsup 1/lambda.";
  r.columns = {"n", "condition3_ratio", "mean_j", "rel_var_j"};
  const double p = c.number("p");
  const std::size_t fit_horizon = c.count("fit_horizon");
  const std::size_t horizon = c.count("horizon");

  const PlantedModel fit_model = PlantedModel::make(p, c.number("c0"), c.number("beta"), fit_horizon);
  const EventStream stream = planted_stream(fit_model, fit_horizon, c.count("ensemble"), c.seed(), workers);
  const auto lags = fit_lags(fit_horizon);
  const PsiFit fit = psi_fit(estimate_joint(stream, lags), fit_horizon);
  r.aggregate["planted_beta"] = c.number("beta");
  r.aggregate["fit_degenerate"] = fit.degenerate;
  r.aggregate["fit_c"] = fit.degenerate ? Json(nullptr) : Json(fit.c);
  r.aggregate["fit_beta"] = fit.degenerate ? Json(nullptr) : Json(fit.beta);
  r.aggregate["fit_beta_stderr"] = fit.degenerate ? Json(nullptr) : Json(fit.beta_stderr);

  const PlantedModel model = PlantedModel::make(p, c.number("c0"), c.number("beta"), horizon);
  std::vector<std::size_t> checkpoints;
  for (std::size_t n = 100; n < horizon; n *= 10) checkpoints.push_back(n);
  checkpoints.push_back(horizon);
  const std::size_t ce = c.count("count_ensemble");
  const auto counts = planted_counts(model, checkpoints, ce, derive_seed(c.seed(), 1), workers);
  const std::vector<double> p_vec(horizon, p);
  const auto psi = [&](std::size_t m) { return model.covariance(m); };
  for (std::size_t j = 0; j < checkpoints.size(); ++j) {
    double sum = 0, sumsq = 0;
    for (const auto& row : counts) {
      const auto v = static_cast<double>(row[j]);
      sum += v;
      sumsq += v * v;
    }
    const double mean = sum / static_cast<double>(ce);
    const double var = (sumsq - static_cast<double>(ce) * mean * mean) / static_cast<double>(ce - 1);
    r.rows.push_back({static_cast<double>(checkpoints[j]), condition3_ratio(p_vec, psi, checkpoints[j]), mean,
                      mean > 0 ? var / (mean * mean) : -1});
  }
  Json iid = Json::array();
  for (double lambda : c.numbers("lambdas")) {
    iid.push_back(Json{{"lambda", lambda}, {"estimate", simulate_iid_exponential(lambda, horizon, derive_seed(c.seed(), 2))},
                       {"expected", 1 / lambda}});
  }
  r.aggregate["iid_exponential"] = iid;
}

}  // namespace

Report run(const ExperimentConfig& config, unsigned workers) {
  const auto start = std::chrono::steady_clock::now();
  Report r;
  r.experiment = std::string(to_string(config.experiment()));
  r.version = CUSPLAB_VERSION;
  r.config = config.to_json();
  switch (config.experiment()) {
    case ExperimentKind::tail: run_tail(config, workers, r); break;
    case ExperimentKind::geodesic_loglaw: run_geodesic(config, workers, r); break;
    case ExperimentKind::horocycle_loglaw: run_horocycle(config, workers, r); break;
    case ExperimentKind::beta: run_beta(config, workers, r); break;
    case ExperimentKind::unipotent_alpha: run_unipotent(config, workers, r); break;
    case ExperimentKind::oracle_compare: run_oracle(config, workers, r); break;
    case ExperimentKind::ubprop_demo: run_ubprop(config, r); break;
    case ExperimentKind::bc_synthetic: run_bc(config, workers, r); break;
  }
  r.runtime_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace cusplab
