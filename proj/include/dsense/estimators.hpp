#pragma once

#include <optional>

#include <Eigen/Dense>

#include "dsense/data.hpp"
#include "dsense/propensity.hpp"

namespace dsense {

// Baseline outcome model g(X) used for augmentation: ordinary least squares
// fit on control units, or externally supplied per-unit predictions.
struct OutcomeModel {
  enum class Kind { linear_least_squares, external_predictions };
  Kind kind = Kind::linear_least_squares;
  Eigen::VectorXd coefficients;  // intercept + d slopes (linear case)
  double training_r2 = 0.0;
  double residual_variance = 0.0;  // SSR / (n0 - d - 1) on training controls

  Eigen::VectorXd predict(const ObservationTable& table) const;
};

struct OutcomeModelSpec {
  enum class Kind { none, ols, external_column };
  Kind kind = Kind::none;

  static OutcomeModelSpec none() { return {}; }
  static OutcomeModelSpec ols() { return {Kind::ols}; }
  static OutcomeModelSpec external() { return {Kind::external_column}; }
};

// Least squares of Y on (1, X) over control units only; external predictions
// pass through with training diagnostics computed on controls.
OutcomeModel fit_outcome_model(const ObservationTable& table, const OutcomeModelSpec& spec);

enum class EstimatorKind { plain, augmented, trimmed };

struct AttEstimate {
  double value = 0.0;  // treated component - control component, exactly
  EstimatorKind estimator_kind = EstimatorKind::plain;
  int n_treated_used = 0;
  int n_controls_used = 0;
  double treated_mean_component = 0.0;
  double control_mean_component = 0.0;  // Hajek mean, or augmented analogue
};

// Hajek weighted ATT (treated mean minus weight-normalized control mean) over
// kept units.
AttEstimate hajek_att(const ObservationTable& table, const WeightSet& weights);

// Augmented (doubly robust) estimator: treated mean of Y minus
// [Hajek control mean of (Y - g(X)) + treated mean of g(X)].
AttEstimate augmented_att(const ObservationTable& table, const WeightSet& weights,
                          const OutcomeModel& model);

// e_i = Y_i - g(X_i) for every unit.
Eigen::VectorXd residualize(const ObservationTable& table, const OutcomeModel& model);

}  // namespace dsense
