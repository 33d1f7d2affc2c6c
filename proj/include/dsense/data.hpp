#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dsense/common.hpp"

namespace dsense {

// One observational study sample: outcome Y, binary treatment Z and a numeric
// covariate matrix X. Validated on construction; immutable afterwards so it is
// safe to share read-only across workers.
struct ObservationTable {
  Eigen::VectorXd outcome;              // Y, length n
  Eigen::VectorXi treatment;            // Z in {0,1}, length n
  Eigen::MatrixXd covariates;           // n x d, d >= 1
  std::vector<std::string> covariate_names;
  std::string outcome_name = "y";
  std::string treatment_name = "z";
  // Row index in the source table, carried through splits and resamples.
  std::vector<int> unit_ids;
  // Optional externally supplied outcome predictions (extra CSV column).
  std::optional<Eigen::VectorXd> external_predictions;

  int n() const { return static_cast<int>(outcome.size()); }
  int d() const { return static_cast<int>(covariates.cols()); }
  int n_treated() const;
  int n_controls() const { return n() - n_treated(); }
  std::vector<int> treated_indices() const;
  std::vector<int> control_indices() const;

  // Rows may repeat (bootstrap resamples); unit_ids follow the rows.
  ObservationTable subset(const std::vector<int>& rows) const;

  // Throws Error(data) on length mismatches, non-binary treatment or a
  // single-arm sample.
  void validate() const;
};

ObservationTable make_table(Eigen::VectorXd outcome, Eigen::VectorXi treatment,
                            Eigen::MatrixXd covariates);

struct CsvSchema {
  std::string outcome_col;
  std::string treatment_col;
  std::vector<std::string> covariate_cols;
  std::optional<std::string> prediction_col;  // external outcome-model predictions
};

ObservationTable load_csv(const std::string& path, const CsvSchema& schema);
void write_csv(const ObservationTable& table, const std::string& path);

enum class SplitMode { controls_only, full_split };

struct SplitResult {
  ObservationTable planning;
  ObservationTable analysis;
  SplitMode mode = SplitMode::controls_only;
  std::uint64_t seed = 0;
};

// Deterministic planning/analysis split. controls_only draws the planning
// sample from control units and sends every treated unit to analysis
// (planning size = round(fraction * n_controls)); full_split samples
// round(fraction * n_arm) from each treatment arm so both arms appear on both
// sides.
SplitResult split_planning(const ObservationTable& table, double fraction,
                           SplitMode mode, std::uint64_t seed);

}  // namespace dsense
