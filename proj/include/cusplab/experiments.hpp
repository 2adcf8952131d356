#pragma once

// Seeded experiment runner: JSON configuration, dispatch to the library
// pipelines, and deterministic CSV/JSON reports.

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "cusplab/diophantine_oracle.hpp"
#include "cusplab/lattice_space.hpp"

namespace cusplab {

using Json = nlohmann::ordered_json;

enum class ExperimentKind {
  tail,
  geodesic_loglaw,
  horocycle_loglaw,
  beta,
  unipotent_alpha,
  oracle_compare,
  ubprop_demo,
  bc_synthetic,
};

std::string_view to_string(ExperimentKind kind);
/// Throws ConfigError("experiment", ...) for unknown names.
ExperimentKind parse_experiment(std::string_view name);

/// Common fields (experiment, n, seed) plus the experiment's own fields, all
/// validated and with defaults filled in. Unknown fields are rejected.
class ExperimentConfig {
 public:
  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Canonical form: common fields first, then the experiment's fields in schema order.
  Json to_json() const;

  ExperimentKind experiment() const { return kind_; }
  int n() const { return n_; }
  std::uint64_t seed() const { return seed_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  double number(const char* field) const;
  std::uint64_t count(const char* field) const;
  std::vector<double> numbers(const char* field) const;

 private:
  ExperimentKind kind_ = ExperimentKind::tail;
  int n_ = 2;
  std::uint64_t seed_ = 0;
  Json fields_ = Json::object();
};

/// Library error raised while processing one ensemble point.
struct PointError {
  std::uint64_t index = 0;
  std::string kind;
  std::string message;

  bool operator==(const PointError&) const = default;
};

struct Report {
  std::string experiment;
  std::string claim;     // what the experiment checks, in plain words
  std::string version;
  Json config;           // canonical config echo
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  Json aggregate = Json::object();
  std::vector<PointError> errors;
  bool inconclusive = false;
  /// Wall time of run(); never serialized, so reports stay byte-identical.
  double runtime_seconds = 0;

  Json to_json() const;
  static Report from_json(const Json& j);
  /// Ignores runtime_seconds.
  bool operator==(const Report& other) const;
};

/// Runs the experiment. Results do not depend on `workers`.
Report run(const ExperimentConfig& config, unsigned workers = 1);

enum class OutputFormat { csv, json };

/// Table with a header line; reals printed with 17 significant digits.
std::string to_csv(const Report& report);
std::string to_json_text(const Report& report);
/// Writes <dir>/<experiment>.csv or .json; returns the path written.
std::filesystem::path emit(const Report& report, OutputFormat format, const std::filesystem::path& dir);

/// One predicted excursion of the horocycle orbit of Lambda_alpha next to the
/// simulated one.
struct OracleMatch {
  ExcursionPrediction prediction;
  double sim_s = 0;      // time of the matched local maximum
  double sim_depth = 0;
  bool matched = false;  // a sample within 1 of s* with |depth error| <= 0.7
};

/// Simulates the forward (and, when needed, reversed) horocycle orbit of
/// Lambda_alpha up to s_max with grid step `step` and matches every
/// prediction from the exact expansion of alpha.
std::vector<OracleMatch> compare_oracle(double alpha, double s_max, double step = 0.5);

/// max_{0 < s <= S} D(h_s x) for n = 2: dense simulation up to min(S, 1000),
/// then local windows of width 4 around every oracle candidate deeper than
/// log S - margin.
struct HorocycleMax {
  double max_depth = 0;
  std::size_t candidates = 0;
  double oracle_gap = 0;  // largest |window max - candidate depth|
};
HorocycleMax horocycle_max_depth(const LatticePointd& x, double s_max, double margin = 6);

}  // namespace cusplab
