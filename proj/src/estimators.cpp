#include "dsense/estimators.hpp"

#include <cmath>

namespace dsense {

Eigen::VectorXd OutcomeModel::predict(const ObservationTable& table) const {
  if (kind == Kind::external_predictions) {
    if (!table.external_predictions)
      throw_config("outcome model expects an external prediction column");
    return *table.external_predictions;
  }
  if (coefficients.size() != table.d() + 1)
    throw_config("outcome model dimension does not match table");
  return (coefficients[0] +
          (table.covariates * coefficients.tail(table.d())).array())
      .matrix();
}

OutcomeModel fit_outcome_model(const ObservationTable& table, const OutcomeModelSpec& spec) {
  // control-only tables are fine here: the model is trained on controls
  if (spec.kind == OutcomeModelSpec::Kind::none)
    throw_config("fit_outcome_model: no model requested");
  if (table.n_controls() < 2) throw_data("fit_outcome_model: needs at least 2 control units");

  const std::vector<int> controls = table.control_indices();
  const int n0 = static_cast<int>(controls.size());
  const int p = table.d() + 1;

  OutcomeModel model;
  if (spec.kind == OutcomeModelSpec::Kind::external_column) {
    if (!table.external_predictions)
      throw_data("external outcome model requested but no prediction column was loaded");
    model.kind = OutcomeModel::Kind::external_predictions;
  } else {
    if (n0 < p + 1)
      throw_data("fit_outcome_model: needs at least d+2 control units");
    Eigen::MatrixXd a(n0, p);
    Eigen::VectorXd y(n0);
    for (int i = 0; i < n0; ++i) {
      a(i, 0) = 1.0;
      a.row(i).tail(table.d()) = table.covariates.row(controls[static_cast<std::size_t>(i)]);
      y[i] = table.outcome[controls[static_cast<std::size_t>(i)]];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < p) throw_numeric("singular design: outcome model covariates are rank deficient");
    model.kind = OutcomeModel::Kind::linear_least_squares;
    model.coefficients = qr.solve(y);
  }

  // training diagnostics on controls
  const Eigen::VectorXd fitted_all = model.predict(table);
  double ss_res = 0.0;
  double y_mean = 0.0;
  for (int r : controls) y_mean += table.outcome[r];
  y_mean /= n0;
  double ss_tot = 0.0;
  for (int r : controls) {
    const double e = table.outcome[r] - fitted_all[r];
    ss_res += e * e;
    const double d = table.outcome[r] - y_mean;
    ss_tot += d * d;
  }
  model.training_r2 = ss_tot > 0.0 ? std::max(0.0, 1.0 - ss_res / ss_tot) : 0.0;
  const int dof = n0 - p;
  model.residual_variance = dof > 0 ? ss_res / dof : 0.0;
  return model;
}

namespace {

struct ControlAggregate {
  double weighted_sum = 0.0;
  double weight_total = 0.0;
  int n_kept = 0;
};

ControlAggregate control_aggregate(const ObservationTable& table, const WeightSet& weights,
                                   const Eigen::VectorXd& values) {
  const std::vector<int> controls = table.control_indices();
  if (static_cast<int>(controls.size()) != weights.n_controls())
    throw_config("weights and table are not aligned");
  ControlAggregate agg;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    if (!weights.kept_control[k]) continue;
    const double w = weights.control_weights[static_cast<Eigen::Index>(k)];
    agg.weighted_sum += w * values[controls[k]];
    agg.weight_total += w;
    ++agg.n_kept;
  }
  return agg;
}

double kept_treated_mean(const ObservationTable& table, const WeightSet& weights,
                         const Eigen::VectorXd& values, int* n_used) {
  const std::vector<int> treated = table.treated_indices();
  if (treated.size() != weights.kept_treated.size())
    throw_config("weights and table are not aligned");
  double sum = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < treated.size(); ++k) {
    if (!weights.kept_treated[k]) continue;
    sum += values[treated[k]];
    ++count;
  }
  if (count == 0) throw_data("no kept treated units");
  *n_used = count;
  return sum / count;
}

}  // namespace

AttEstimate hajek_att(const ObservationTable& table, const WeightSet& weights) {
  AttEstimate est;
  est.estimator_kind = weights.trim_rule.kind == TrimRule::Kind::none
                           ? EstimatorKind::plain
                           : EstimatorKind::trimmed;
  est.treated_mean_component =
      kept_treated_mean(table, weights, table.outcome, &est.n_treated_used);
  const ControlAggregate agg = control_aggregate(table, weights, table.outcome);
  if (agg.n_kept == 0 || agg.weight_total <= 0.0)
    throw_data("hajek_att: control weights are all zero");
  est.n_controls_used = agg.n_kept;
  est.control_mean_component = agg.weighted_sum / agg.weight_total;
  est.value = est.treated_mean_component - est.control_mean_component;
  return est;
}

AttEstimate augmented_att(const ObservationTable& table, const WeightSet& weights,
                          const OutcomeModel& model) {
  const Eigen::VectorXd g = model.predict(table);
  const Eigen::VectorXd e = table.outcome - g;

  AttEstimate est;
  est.estimator_kind = EstimatorKind::augmented;
  est.treated_mean_component =
      kept_treated_mean(table, weights, table.outcome, &est.n_treated_used);
  int n_treated_g = 0;
  const double treated_g_mean = kept_treated_mean(table, weights, g, &n_treated_g);
  const ControlAggregate agg = control_aggregate(table, weights, e);
  if (agg.n_kept == 0 || agg.weight_total <= 0.0)
    throw_data("augmented_att: control weights are all zero");
  est.n_controls_used = agg.n_kept;
  est.control_mean_component = agg.weighted_sum / agg.weight_total + treated_g_mean;
  est.value = est.treated_mean_component - est.control_mean_component;
  return est;
}

Eigen::VectorXd residualize(const ObservationTable& table, const OutcomeModel& model) {
  return table.outcome - model.predict(table);
}

}  // namespace dsense
