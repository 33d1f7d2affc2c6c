#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsense/planning.hpp"
#include "dsense/simulation.hpp"

namespace dsense {

// Resolved run configuration: JSON config file values overridden by flags,
// seed falling back to the DSENSE_SEED environment variable.
struct RunConfig {
  std::string command;  // fit | sensitivity | design-sensitivity | plan | power-split | simulate
  std::string input_path;
  std::string outcome_col = "y";
  std::string treatment_col = "z";
  std::vector<std::string> covariate_cols;

  std::optional<double> trim_propensity;
  std::optional<double> trim_weight;
  std::string augment = "none";  // none | ols | column:<name>

  std::vector<double> lambda_values;
  std::vector<double> r2_values;
  std::vector<double> tau_grid;

  int reps = 1000;
  double alpha = 0.05;
  std::uint64_t seed = 0;

  double planning_fraction = 0.1;
  int splits = 1000;
  bool outcome_sim = false;
  std::optional<double> proxy_r2;

  std::string sweep;  // simulate: drivers | heterogeneity | misspecification | (empty: emit sample)
  DgpConfig dgp;
  double misspec_tau = 1.5;

  int workers = 0;  // 0 = hardware concurrency
  std::string out_dir = ".";

  void validate() const;
  std::vector<DesignSpec> design_menu() const;
  TrimRule trim_rule() const;
};

// Parses flags (and an optional --config JSON file) into a RunConfig.
RunConfig parse_cli(int argc, const char* const* argv);

// Executes a run and writes report.json plus the command's CSV outputs into
// config.out_dir. Returns the process exit status (0 success, 2 config error,
// 3 data error, 4 numerical failure).
int run(const RunConfig& config);

// Convenience wrapper used by the executable.
int run_cli(int argc, const char* const* argv);

}  // namespace dsense
