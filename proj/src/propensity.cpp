#include "dsense/propensity.hpp"

#include <algorithm>
#include <cmath>

namespace dsense {

namespace {

Eigen::MatrixXd design_matrix(const ObservationTable& table) {
  Eigen::MatrixXd a(table.n(), table.d() + 1);
  a.col(0).setOnes();
  a.rightCols(table.d()) = table.covariates;
  return a;
}

double log_likelihood(const Eigen::VectorXd& eta, const Eigen::VectorXi& z) {
  // sum z*eta - log(1+exp(eta)), computed stably
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    const double log1pexp = e > 30.0 ? e : std::log1p(std::exp(e));
    ll += static_cast<double>(z[i]) * e - log1pexp;
  }
  return ll;
}

}  // namespace

PropensityFit fit_logistic(const ObservationTable& table, Diagnostics* diag) {
  table.validate();
  const Eigen::MatrixXd a = design_matrix(table);
  const Eigen::VectorXd z = table.treatment.cast<double>();
  const Eigen::Index p = a.cols();

  {
    // full-column-rank precondition
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    if (qr.rank() < p) throw_numeric("singular design: covariate matrix is rank deficient");
  }

  constexpr double kTol = 1e-8;
  constexpr int kMaxIter = 100;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd eta = a * beta;
  double ll = log_likelihood(eta, table.treatment);
  double grad_norm = 0.0;
  int iter = 0;
  bool converged = false;

  for (; iter < kMaxIter; ++iter) {
    const Eigen::VectorXd prob = (1.0 / (1.0 + (-eta.array()).exp())).matrix();
    const Eigen::VectorXd grad = a.transpose() * (z - prob);
    grad_norm = grad.lpNorm<Eigen::Infinity>();
    if (grad_norm <= kTol) {
      converged = true;
      break;
    }
    const Eigen::ArrayXd wt = prob.array() * (1.0 - prob.array());
    const Eigen::MatrixXd hess = a.transpose() * (a.array().colwise() * wt).matrix();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hess);
    if (ldlt.info() != Eigen::Success)
      throw_numeric("logistic fit: Hessian factorization failed");
    const Eigen::VectorXd direction = ldlt.solve(grad);

    // step-halving on the log-likelihood
    double step = 1.0;
    Eigen::VectorXd beta_new;
    double ll_new = ll;
    bool improved = false;
    for (int h = 0; h < 30; ++h) {
      beta_new = beta + step * direction;
      const Eigen::VectorXd eta_new = a * beta_new;
      ll_new = log_likelihood(eta_new, table.treatment);
      if (ll_new >= ll - 1e-14 * std::abs(ll)) {
        improved = true;
        eta = eta_new;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
    beta = beta_new;
    ll = ll_new;
  }

  PropensityFit fit;
  fit.coefficients = beta;
  fit.iterations = iter;
  fit.gradient_norm = grad_norm;
  fit.converged = converged;
  // separation heuristic: runaway coefficients while the deviance plateaus
  // (saturated probabilities also shrink the gradient, so a converged flag
  // alone cannot be trusted out here)
  if (beta.lpNorm<Eigen::Infinity>() > 30.0) {
    fit.separation_suspected = true;
    fit.converged = false;
    warn_into(diag, "logistic fit: separation suspected (|coefficient| > 30)");
  } else if (!converged) {
    warn_into(diag, "logistic fit: not converged after " + std::to_string(iter) + " iterations");
  }
  fit.fitted_probabilities = (1.0 / (1.0 + (-(a * beta).array()).exp()))
                                 .max(kProbabilityClamp)
                                 .min(1.0 - kProbabilityClamp)
                                 .matrix();
  return fit;
}

int WeightSet::n_kept_controls() const {
  return static_cast<int>(std::count(kept_control.begin(), kept_control.end(), 1));
}

WeightSet att_weights(const PropensityFit& fit, const ObservationTable& table,
                      bool normalize, Diagnostics* diag) {
  if (fit.fitted_probabilities.size() != table.n())
    throw_config("att_weights: fit and table are not aligned");
  const std::vector<int> controls = table.control_indices();
  WeightSet ws;
  ws.control_weights.resize(static_cast<Eigen::Index>(controls.size()));
  ws.kept_control.assign(controls.size(), 1);
  ws.kept_treated.assign(static_cast<std::size_t>(table.n_treated()), 1);
  for (std::size_t k = 0; k < controls.size(); ++k) {
    const double p = fit.fitted_probabilities[controls[k]];
    if (p >= 1.0 - kProbabilityClamp) ws.overlap_warning_units.push_back(controls[k]);
    ws.control_weights[static_cast<Eigen::Index>(k)] = p / (1.0 - p);
  }
  if (!ws.overlap_warning_units.empty())
    warn_into(diag, "overlap warning: " + std::to_string(ws.overlap_warning_units.size()) +
                        " control unit(s) with fitted probability at the clamp boundary");
  if (normalize) {
    const double mean = ws.control_weights.mean();
    if (mean <= 0.0) throw_numeric("att_weights: nonpositive mean weight");
    ws.control_weights /= mean;
    ws.normalized = true;
  }
  return ws;
}

WeightSet trim_weights(const WeightSet& weights, const PropensityFit& fit,
                       const ObservationTable& table, const TrimRule& rule,
                       Diagnostics* diag) {
  if (rule.kind == TrimRule::Kind::none) return weights;
  if (rule.kind == TrimRule::Kind::propensity_cutoff &&
      !(rule.value > 0.5 && rule.value <= 1.0))
    throw_config("propensity trim cutoff must lie in (0.5, 1]");
  if (rule.kind == TrimRule::Kind::weight_cutoff && !(rule.value > 0.0))
    throw_config("weight trim cutoff must be positive");

  const std::vector<int> controls = table.control_indices();
  const std::vector<int> treated = table.treated_indices();
  if (static_cast<int>(controls.size()) != weights.n_controls())
    throw_config("trim_weights: weights and table are not aligned");

  // Work on raw weights so repeated application with the same rule is
  // idempotent regardless of earlier renormalization.
  auto raw_weight = [&](int row) {
    const double p = fit.fitted_probabilities[row];
    return p / (1.0 - p);
  };
  auto dropped = [&](int row) {
    if (rule.kind == TrimRule::Kind::propensity_cutoff)
      return fit.fitted_probabilities[row] > rule.value;  // tie at the cutoff is kept
    return raw_weight(row) >= rule.value;
  };

  WeightSet out = weights;
  out.trim_rule = rule;
  double raw_kept_sum = 0.0;
  int raw_kept_count = 0;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    if (!weights.kept_control[k]) continue;
    if (dropped(controls[k])) {
      out.kept_control[k] = 0;
    } else {
      raw_kept_sum += raw_weight(controls[k]);
      ++raw_kept_count;
    }
  }
  if (raw_kept_count == 0) throw_data("degenerate trim: cutoff removes every control unit");
  for (std::size_t k = 0; k < treated.size(); ++k) {
    if (!weights.kept_treated[k]) continue;
    if (dropped(treated[k])) out.kept_treated[k] = 0;
  }
  if (out.n_kept_treated() == 0) throw_data("degenerate trim: cutoff removes every treated unit");

  // kept weights renormalized to mean 1 (raw scale, then divided by kept mean)
  const double kept_mean = raw_kept_sum / static_cast<double>(raw_kept_count);
  for (std::size_t k = 0; k < controls.size(); ++k)
    out.control_weights[static_cast<Eigen::Index>(k)] =
        out.kept_control[k] ? raw_weight(controls[k]) / kept_mean : 0.0;
  out.normalized = true;
  const double raw_cutoff = rule.kind == TrimRule::Kind::propensity_cutoff
                                ? rule.value / (1.0 - rule.value)
                                : rule.value;
  out.equivalent_weight_cutoff = raw_cutoff / kept_mean;

  const int n_dropped = static_cast<int>(controls.size()) - out.n_kept_controls();
  if (n_dropped > 0)
    warn_into(diag, "trimming dropped " + std::to_string(n_dropped) + " of " +
                        std::to_string(controls.size()) + " control units");
  return out;
}

WeightMoments weight_moments(const WeightSet& weights, const ObservationTable& table,
                             const std::optional<Eigen::VectorXd>& outcome_override) {
  const std::vector<int> controls = table.control_indices();
  if (static_cast<int>(controls.size()) != weights.n_controls())
    throw_config("weight_moments: weights and table are not aligned");
  const Eigen::VectorXd& y_source = outcome_override ? *outcome_override : table.outcome;
  if (y_source.size() != table.n())
    throw_config("weight_moments: outcome override length mismatch");

  std::vector<double> w_kept;
  std::vector<double> y_kept;
  for (std::size_t k = 0; k < controls.size(); ++k) {
    if (!weights.kept_control[k]) continue;
    w_kept.push_back(weights.control_weights[static_cast<Eigen::Index>(k)]);
    y_kept.push_back(y_source[controls[k]]);
  }
  const int m = static_cast<int>(w_kept.size());
  if (m < 2) throw_data("weight_moments: fewer than 2 kept control units");

  double w_sum = 0.0;
  double y_sum = 0.0;
  double wy_sum = 0.0;
  for (int i = 0; i < m; ++i) {
    w_sum += w_kept[static_cast<std::size_t>(i)];
    y_sum += y_kept[static_cast<std::size_t>(i)];
    wy_sum += w_kept[static_cast<std::size_t>(i)] * y_kept[static_cast<std::size_t>(i)];
  }
  const double w_mean = w_sum / m;
  const double y_mean = y_sum / m;
  double sww = 0.0;
  double syy = 0.0;
  double swy = 0.0;
  for (int i = 0; i < m; ++i) {
    const double dw = w_kept[static_cast<std::size_t>(i)] - w_mean;
    const double dy = y_kept[static_cast<std::size_t>(i)] - y_mean;
    sww += dw * dw;
    syy += dy * dy;
    swy += dw * dy;
  }
  WeightMoments mom;
  mom.n_controls = m;
  mom.var_w = sww / (m - 1);
  mom.var_y = syy / (m - 1);
  if (sww <= 0.0 || syy <= 0.0) {
    mom.zero_variance = true;
    mom.cor_wy = 0.0;
  } else {
    mom.cor_wy = swy / std::sqrt(sww * syy);
    mom.cor_wy = std::clamp(mom.cor_wy, -1.0, 1.0);
  }
  if (w_sum <= 0.0) throw_numeric("weight_moments: nonpositive weight total");
  mom.mean_wy = wy_sum / w_sum;
  return mom;
}

}  // namespace dsense
