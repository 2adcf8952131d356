#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "cusplab/errors.hpp"
#include "cusplab/experiments.hpp"

namespace {

enum Exit { ok = 0, failure = 1, config_error = 2, inconclusive = 3 };

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cusplab: cusp excursion experiments on SL(n,R)/SL(n,Z)"};
  std::string experiment;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  cusplab::OutputFormat format = cusplab::OutputFormat::csv;
  unsigned workers = 1;

  app.add_option("experiment", experiment,
                 "tail | geodesic-loglaw | horocycle-loglaw | beta | unipotent-alpha | oracle-compare | "
                 "ubprop-demo | bc-synthetic")
      ->required();
  app.add_option("--config", config_path, "JSON config file")->required();
  app.add_option("--seed", seed, "overrides the config seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--format", format, "csv or json")
      ->transform(CLI::CheckedTransformer(
          std::map<std::string, cusplab::OutputFormat>{{"csv", cusplab::OutputFormat::csv},
                                                        {"json", cusplab::OutputFormat::json}}));
  app.add_option("--workers", workers, "worker threads; results do not depend on it")->check(CLI::Range(1u, 256u));
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? ok : config_error;
  }

  cusplab::ExperimentConfig config;
  try {
    std::ifstream in(config_path);
    if (!in) throw cusplab::ConfigError("config", "cannot read " + config_path);
    nlohmann::json j = nlohmann::json::parse(in);
    if (!j.is_object()) throw cusplab::ConfigError("config", "expected a JSON object");
    if (!j.contains("experiment")) j["experiment"] = experiment;
    if (j["experiment"] != experiment) {
      throw cusplab::ConfigError("experiment", "config names " + j["experiment"].dump() + " but the command is " +
                                                   experiment);
    }
    config = cusplab::ExperimentConfig::from_json(j);
    if (seed) config.set_seed(*seed);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const cusplab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  }

  try {
    const cusplab::Report report = cusplab::run(config, workers);
    const auto path = cusplab::emit(report, format, out_dir);
    std::fprintf(stderr, "%s: wrote %s in %.2f s", report.experiment.c_str(), path.string().c_str(),
                 report.runtime_seconds);
    if (!report.errors.empty()) std::fprintf(stderr, ", %zu point errors", report.errors.size());
    std::fputc('\n', stderr);
    if (report.inconclusive) {
      std::cerr << "inconclusive: " << report.aggregate.value("inconclusive_reason", std::string()) << "\n";
      return inconclusive;
    }
    return ok;
  } catch (const cusplab::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return config_error;
  } catch (const cusplab::InconclusiveError& e) {
    std::cerr << "inconclusive: " << e.what() << "\n";
    return inconclusive;
  } catch (const cusplab::InsufficientDataError& e) {
    std::cerr << "inconclusive: " << e.what() << "\n";
    return inconclusive;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return failure;
  }
}
