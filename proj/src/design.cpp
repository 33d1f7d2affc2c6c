#include "dsense/design.hpp"

namespace dsense {

std::string DesignSpec::name() const {
  switch (kind) {
    case EstimatorKind::plain:
      return "plain";
    case EstimatorKind::trimmed:
      return trim.kind == TrimRule::Kind::propensity_cutoff
                 ? "trimmed(p>" + std::to_string(trim.value) + ")"
                 : "trimmed(w>=" + std::to_string(trim.value) + ")";
    case EstimatorKind::augmented:
      return outcome.kind == OutcomeModelSpec::Kind::external_column ? "augmented(external)"
                                                                     : "augmented(ols)";
  }
  return "unknown";
}

DesignFit build_design_with_fit(const ObservationTable& table, const PropensityFit& fit,
                                const DesignSpec& spec, Diagnostics* diag) {
  DesignFit out;
  out.propensity = fit;
  out.weights = att_weights(out.propensity, table, /*normalize=*/true, diag);
  if (spec.kind == EstimatorKind::trimmed)
    out.weights = trim_weights(out.weights, out.propensity, table, spec.trim, diag);

  std::optional<Eigen::VectorXd> residuals;
  if (spec.kind == EstimatorKind::augmented) {
    out.model = fit_outcome_model(table, spec.outcome);
    residuals = residualize(table, *out.model);
    out.att = augmented_att(table, out.weights, *out.model);
  } else {
    out.att = hajek_att(table, out.weights);
  }

  // reduced control sample for interval and design-sensitivity computations
  const Eigen::VectorXd& values = residuals ? *residuals : table.outcome;
  const std::vector<int> controls = table.control_indices();
  const int kept = out.weights.n_kept_controls();
  out.variant_outcome.resize(kept);
  out.variant_weight.resize(kept);
  int j = 0;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    if (!out.weights.kept_control[k]) continue;
    out.variant_outcome[j] = values[controls[k]];
    out.variant_weight[j] = out.weights.control_weights[static_cast<Eigen::Index>(k)];
    ++j;
  }
  const std::vector<int> treated = table.treated_indices();
  double treated_sum = 0.0;
  int treated_count = 0;
  for (std::size_t k = 0; k < treated.size(); ++k) {
    if (!out.weights.kept_treated[k]) continue;
    treated_sum += values[treated[k]];
    ++treated_count;
  }
  if (treated_count == 0) throw_data("design has no kept treated units");
  out.treated_component = treated_sum / treated_count;
  out.moments = weight_moments(out.weights, table, residuals);
  return out;
}

DesignFit build_design(const ObservationTable& table, const DesignSpec& spec,
                       Diagnostics* diag) {
  return build_design_with_fit(table, fit_logistic(table, diag), spec, diag);
}

}  // namespace dsense
