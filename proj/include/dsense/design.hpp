#pragma once

#include <optional>
#include <string>

#include "dsense/estimators.hpp"

namespace dsense {

// A weighted design: the estimator family plus the trimming and outcome-model
// choices that define it.
struct DesignSpec {
  EstimatorKind kind = EstimatorKind::plain;
  TrimRule trim;                 // used when kind == trimmed
  OutcomeModelSpec outcome;      // used when kind == augmented

  static DesignSpec plain() { return {}; }
  static DesignSpec trimmed(TrimRule rule) {
    return {EstimatorKind::trimmed, rule, OutcomeModelSpec::none()};
  }
  static DesignSpec augmented(OutcomeModelSpec model = OutcomeModelSpec::ols()) {
    return {EstimatorKind::augmented, TrimRule::none(), model};
  }
  std::string name() const;
};

// A design realized on a table: fitted propensity, weights after trimming,
// the optional outcome model, and the reduced control sample that every
// sensitivity computation consumes. `variant_outcome` holds Y for
// plain/trimmed designs and the residual e for augmented ones, over kept
// controls with the matching mean-1 weights; `treated_component` is the
// corresponding kept-treated mean so that
//   estimate = treated_component - hajek(variant_outcome, variant_weight).
struct DesignFit {
  PropensityFit propensity;
  WeightSet weights;
  std::optional<OutcomeModel> model;
  AttEstimate att;
  Eigen::VectorXd variant_outcome;
  Eigen::VectorXd variant_weight;
  double treated_component = 0.0;
  WeightMoments moments;  // moments of (variant_outcome, variant_weight)
};

DesignFit build_design(const ObservationTable& table, const DesignSpec& spec,
                       Diagnostics* diag = nullptr);

// Same pipeline reusing an existing propensity fit (planning workflows fit
// weights once on the full sample).
DesignFit build_design_with_fit(const ObservationTable& table, const PropensityFit& fit,
                                const DesignSpec& spec, Diagnostics* diag = nullptr);

}  // namespace dsense
