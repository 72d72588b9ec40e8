#pragma once

// Run configuration (flat TOML-style file), experiment assembly, run records
// and output files for the CLI.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "psc/flow.hpp"
#include "psc/lab.hpp"
#include "psc/spectral.hpp"

namespace psc {

inline constexpr const char* kToolVersion = "psclab 0.1.0";

struct RunConfig {
  // [grid]
  int dim = 3;
  int n_cells = 128;
  // [metric]
  std::string family = "round";
  std::string potential = "R";
  // [f]
  std::string f = "const:1";
  // [u0]
  std::string u0 = "const:1";
  // [integrator]
  std::string scheme = "imex";
  std::string dt = "h2:1";
  double horizon = 1.0;
  double stop_tol = 1e-10;
  std::string renormalize = "none";
  // [output]
  int cadence = 1;
  std::string u_ref = "one";
  std::uint64_t seed = 0;
  std::string dir = "psclab_out";
  bool energy_log = false;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  std::string to_toml() const;
  /// Checks every tag so that a bad config fails before any work or output.
  void validate() const;
};

RunConfig parse_config_text(const std::string& text);
/// TOML-style file, or a JSON run record / config echo (detected by a leading '{').
RunConfig load_config(const std::string& path);

/// u0 tags: "const:c", "cos:a" (1 + a cos r), "mode:l:a" (1 + a phi_l with
/// phi_l the l-th radial eigenfield from the top of the spectrum, scaled to
/// sup norm one), "kernel:a" (1 + a psi with psi from warped_kernel_solve),
/// "random:a" (1 + a times a seeded smooth radial profile).
Field build_u0(const WarpedMetric& m, const std::string& tag, Potential potential, std::uint64_t seed);

struct Experiment {
  RunConfig config;
  WarpedMetric metric;
  Field u0;
  FlowControls controls;
};

Experiment prepare(const RunConfig& config);

struct RunResult {
  FlowTrace trace;
  nlohmann::json record;
};

RunResult run_experiment(const RunConfig& config);

/// Writes trace.csv, run.json and (optionally) energy.jsonl into config.dir.
void write_outputs(const RunConfig& config, const RunResult& result);

std::string trace_csv(const FlowTrace& trace);
/// Columns of a CSV file with a header row, keyed by column name.
std::map<std::string, std::vector<double>> read_csv_columns(const std::string& path);

nlohmann::json to_json(const RateFit& fit);
nlohmann::json to_json(const RateClassification& c);
nlohmann::json to_json(const LojasiewiczEstimate& e);
nlohmann::json to_json(const EnergyReport& r, double t);

/// Runs independent configs on up to `threads` workers; each writes to its
/// own output directory. Returns one record per config, in input order.
std::vector<nlohmann::json> sweep(const std::vector<RunConfig>& configs, unsigned threads);

}  // namespace psc
