#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dsense/design_sensitivity.hpp"

namespace dsense {

struct PlanningConfig {
  double fraction = 0.1;  // planning share
  int n_splits = 1000;
  std::vector<double> tau_grid;  // hypothesized effects for DS estimation
  std::vector<DesignSpec> menu = {DesignSpec::plain()};
  std::vector<double> lambda_values = {1.5};  // marginal-model Gamma list
  std::vector<double> r2_values = {0.1};      // variance-based Gamma list
  double alpha = 0.05;
  int bootstrap_reps = 1000;
  std::uint64_t seed = 0;
  bool outcome_sim = false;          // simulate analysis outcomes from a planning model
  std::optional<double> proxy_r2;    // proxy outcome model mode
  SplitMode split_mode = SplitMode::full_split;  // used by power_by_splitting

  void validate() const;
};

// Design sensitivities for one design estimated from a planning sample:
// weights are fit on the full sample, the planning sample is drawn from the
// control arm, outcome moments come from planning controls and the weight
// variance from the full control arm.
struct PlanningDsResult {
  DesignSpec design;
  double tau = 0.0;
  DesignSensitivityResult vbm;
  DesignSensitivityResult msm;
};

std::vector<PlanningDsResult> ds_from_planning(const ObservationTable& table,
                                               const PlanningConfig& config, double tau,
                                               Diagnostics* diag = nullptr);

// Variant that fits an outcome model on the planning controls and simulates
// control outcomes for a bootstrap resample of the analysis controls before
// estimating the design sensitivities.
std::vector<PlanningDsResult> ds_from_planning_simulated(const ObservationTable& table,
                                                         const PlanningConfig& config, double tau,
                                                         Diagnostics* diag = nullptr);

// Proxy outcome model explaining a chosen share of the outcome variance:
// regress the outcomes on sqrt(r2) * standardized outcome + sqrt(1-r2) * noise.
struct ProxyOutcome {
  Eigen::VectorXd fitted;
  Eigen::VectorXd residuals;
  double realized_r2 = 0.0;
};

ProxyOutcome proxy_outcome(const Eigen::VectorXd& outcomes, double r2, std::uint64_t seed);

// Estimated power over repeated planning/analysis splits: per split the
// planning half ranks the menu designs by design sensitivity, the analysis
// half runs the level-alpha sensitivity analysis at each configured Gamma,
// and rejections aggregate into proportions. Everything is refit within each
// half; the planning half never sees analysis outcomes.
struct PowerTable {
  std::vector<SensitivitySpec> specs;           // row keys (model, Gamma)
  std::vector<std::string> estimator_names;     // column keys, menu order
  bool has_chosen = false;                      // extra last column when menu >= 2
  std::vector<std::vector<double>> proportions; // [row][column(+chosen)]
  std::vector<std::vector<int>> full_sample_reject;  // [row][menu column], 0/1
  std::vector<std::vector<double>> selection_frequency;  // [model: vbm=0,msm=1][menu column]
  int n_splits_used = 0;
  int n_splits_failed = 0;
};

PowerTable power_by_splitting(const ObservationTable& table, const PlanningConfig& config,
                              int workers = 1, Diagnostics* diag = nullptr);

}  // namespace dsense
