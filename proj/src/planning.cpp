#include "dsense/planning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dsense {

void PlanningConfig::validate() const {
  if (!(fraction > 0.0 && fraction < 1.0)) throw_config("planning fraction must be in (0,1)");
  if (n_splits < 1) throw_config("n_splits must be at least 1");
  if (menu.empty()) throw_config("estimator menu is empty");
  if (!(alpha > 0.0 && alpha < 1.0)) throw_config("alpha must be in (0,1)");
  if (bootstrap_reps < 2) throw_config("bootstrap_reps must be at least 2");
  for (double t : tau_grid)
    if (!(t > 0.0)) throw_config("tau grid entries must be positive");
  for (double l : lambda_values)
    if (!(l >= 1.0)) throw_config("lambda values must be >= 1");
  for (double r : r2_values)
    if (!(r >= 0.0 && r < 1.0)) throw_config("r2 values must be in [0,1)");
  if (proxy_r2 && !(*proxy_r2 >= 0.0 && *proxy_r2 < 1.0))
    throw_config("proxy r2 must be in [0,1)");
}

namespace {

struct PlanningPieces {
  ObservationTable planning;
  ObservationTable analysis;
  PropensityFit full_fit;  // weights fit on the full sample
};

PlanningPieces split_for_planning(const ObservationTable& table, const PlanningConfig& config,
                                  Diagnostics* diag) {
  PlanningPieces pieces;
  pieces.full_fit = fit_logistic(table, diag);
  const SplitResult split =
      split_planning(table, config.fraction, SplitMode::controls_only, config.seed);
  pieces.planning = split.planning;
  pieces.analysis = split.analysis;
  if (pieces.planning.outcome.size() < 10)
    warn_into(diag, "planning sample has fewer than 10 control units");
  return pieces;
}

// Control units evaluated against a fit on the full sample and restricted by
// the design's trim rule: kept (value, weight) pairs with mean-1 weights.
struct SubsetControls {
  Eigen::VectorXd outcome;
  Eigen::VectorXd weight;
};

// source_rows hold original-table row ids (control units only); values[k]
// belongs to source_rows[k].
SubsetControls kept_controls(const PropensityFit& full_fit,
                             const std::vector<int>& source_rows, const TrimRule& trim,
                             const Eigen::VectorXd& values) {
  std::vector<double> w;
  std::vector<double> v;
  for (std::size_t k = 0; k < source_rows.size(); ++k) {
    const int unit = source_rows[k];
    const double p = full_fit.fitted_probabilities[unit];
    const double raw = p / (1.0 - p);
    bool keep = true;
    if (trim.kind == TrimRule::Kind::propensity_cutoff) keep = p <= trim.value;
    if (trim.kind == TrimRule::Kind::weight_cutoff) keep = raw < trim.value;
    if (!keep) continue;
    w.push_back(raw);
    v.push_back(values[static_cast<Eigen::Index>(k)]);
  }
  if (w.size() < 2) throw_data("planning: fewer than 2 kept control units");
  const double mean = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(w.size());
  SubsetControls out;
  out.outcome = Eigen::Map<Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  out.weight = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size())) / mean;
  return out;
}

}  // namespace

std::vector<PlanningDsResult> ds_from_planning(const ObservationTable& table,
                                               const PlanningConfig& config, double tau,
                                               Diagnostics* diag) {
  config.validate();
  if (!(tau > 0.0)) throw_config("planning design sensitivity needs tau > 0");
  table.validate();
  PlanningPieces pieces = split_for_planning(table, config, diag);

  std::vector<PlanningDsResult> results;
  for (const DesignSpec& design : config.menu) {
    PlanningDsResult result;
    result.design = design;
    result.tau = tau;

    // planning control values: outcomes, or residuals of a planning-fit model
    Eigen::VectorXd planning_values = pieces.planning.outcome;
    std::optional<OutcomeModel> model;
    if (design.kind == EstimatorKind::augmented) {
      model = fit_outcome_model(pieces.planning, design.outcome);
      planning_values = residualize(pieces.planning, *model);
    }
    const TrimRule trim =
        design.kind == EstimatorKind::trimmed ? design.trim : TrimRule::none();

    // planning controls (value, weight)
    std::vector<int> planning_rows;
    std::vector<double> planning_vals;
    for (int i = 0; i < pieces.planning.n(); ++i) {
      if (pieces.planning.treatment[i] != 0) continue;
      planning_rows.push_back(pieces.planning.unit_ids[static_cast<std::size_t>(i)]);
      planning_vals.push_back(planning_values[i]);
    }
    Eigen::VectorXd pv =
        Eigen::Map<Eigen::VectorXd>(planning_vals.data(),
                                    static_cast<Eigen::Index>(planning_vals.size()));
    const SubsetControls plan = kept_controls(pieces.full_fit, planning_rows, trim, pv);

    // full-sample control weights for var(w)
    std::vector<int> full_control_rows = table.control_indices();
    Eigen::VectorXd zeros = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(full_control_rows.size()));
    const SubsetControls full = kept_controls(pieces.full_fit, full_control_rows, trim, zeros);

    // variance-based: var(Y), cor(w,Y) from planning; var(w) from full sample
    const FavorableSituation plan_situation = make_situation(
        tau, plan.outcome, plan.weight,
        design.kind == EstimatorKind::augmented
            ? SituationVariant::augmented
            : (design.kind == EstimatorKind::trimmed ? SituationVariant::trimmed
                                                     : SituationVariant::standard));
    WeightMoments mixed = plan_situation.moments;
    {
      const double full_mean = full.weight.mean();
      const Eigen::ArrayXd centered = full.weight.array() - full_mean;
      mixed.var_w = centered.square().sum() / (static_cast<double>(full.weight.size()) - 1.0);
    }
    result.vbm = ds_vbm_from_moments(tau, mixed);

    // marginal model: Hajek mean and estimating equation over planning controls
    result.msm = ds_msm(plan_situation);
    results.push_back(std::move(result));
  }
  return results;
}

std::vector<PlanningDsResult> ds_from_planning_simulated(const ObservationTable& table,
                                                         const PlanningConfig& config, double tau,
                                                         Diagnostics* diag) {
  config.validate();
  if (!(tau > 0.0)) throw_config("planning design sensitivity needs tau > 0");
  table.validate();
  PlanningPieces pieces = split_for_planning(table, config, diag);

  // outcome model fit on planning controls
  const OutcomeModel planning_model = fit_outcome_model(pieces.planning, OutcomeModelSpec::ols());
  const double sigma_e = std::sqrt(std::max(0.0, planning_model.residual_variance));

  // bootstrap resample of the analysis control units, with simulated outcomes
  const std::vector<int> analysis_controls = pieces.analysis.control_indices();
  const int nb = static_cast<int>(analysis_controls.size());
  if (nb < 2) throw_data("analysis sample has fewer than 2 control units");
  Rng rng = make_rng(config.seed, "planning-sim", 0);
  std::uniform_int_distribution<int> pick(0, nb - 1);
  std::vector<int> rows;
  rows.reserve(static_cast<std::size_t>(nb));
  for (int i = 0; i < nb; ++i)
    rows.push_back(analysis_controls[static_cast<std::size_t>(pick(rng))]);
  ObservationTable bootstrap = pieces.analysis.subset(rows);
  const Eigen::VectorXd g_hat = planning_model.predict(bootstrap);
  std::normal_distribution<double> noise(0.0, 1.0);
  Eigen::VectorXd y_star(bootstrap.n());
  for (int i = 0; i < bootstrap.n(); ++i) y_star[i] = g_hat[i] + sigma_e * noise(rng);
  bootstrap.outcome = y_star;

  std::vector<PlanningDsResult> results;
  for (const DesignSpec& design : config.menu) {
    PlanningDsResult result;
    result.design = design;
    result.tau = tau;

    Eigen::VectorXd values = bootstrap.outcome;
    if (design.kind == EstimatorKind::augmented) {
      // a priori model: the planning fit itself; simulated residuals
      values = bootstrap.outcome - planning_model.predict(bootstrap);
    }
    const TrimRule trim =
        design.kind == EstimatorKind::trimmed ? design.trim : TrimRule::none();

    std::vector<int> b_rows(bootstrap.unit_ids.begin(), bootstrap.unit_ids.end());
    const SubsetControls b = kept_controls(pieces.full_fit, b_rows, trim, values);

    std::vector<int> full_control_rows = table.control_indices();
    Eigen::VectorXd zeros =
        Eigen::VectorXd::Zero(static_cast<Eigen::Index>(full_control_rows.size()));
    const SubsetControls full =
        kept_controls(pieces.full_fit, full_control_rows, trim, zeros);

    const FavorableSituation situation = make_situation(
        tau, b.outcome, b.weight,
        design.kind == EstimatorKind::augmented
            ? SituationVariant::augmented
            : (design.kind == EstimatorKind::trimmed ? SituationVariant::trimmed
                                                     : SituationVariant::standard));
    WeightMoments mixed = situation.moments;
    {
      const double full_mean = full.weight.mean();
      const Eigen::ArrayXd centered = full.weight.array() - full_mean;
      mixed.var_w = centered.square().sum() / (static_cast<double>(full.weight.size()) - 1.0);
    }
    result.vbm = ds_vbm_from_moments(tau, mixed);
    result.msm = ds_msm(situation);
    results.push_back(std::move(result));
  }
  return results;
}

ProxyOutcome proxy_outcome(const Eigen::VectorXd& outcomes, double r2, std::uint64_t seed) {
  if (!(r2 >= 0.0 && r2 < 1.0)) throw_config("proxy r2 must be in [0,1)");
  const int n = static_cast<int>(outcomes.size());
  if (n < 3) throw_data("proxy outcome model needs at least 3 outcomes");
  const double mean = outcomes.mean();
  const double sd = std::sqrt((outcomes.array() - mean).square().sum() / (n - 1));
  if (!(sd > 0.0)) throw_data("proxy outcome model: constant outcomes");

  Rng rng = make_rng(seed, "proxy-outcome", 0);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  Eigen::VectorXd x_star(n);
  const Eigen::ArrayXd z_star = (outcomes.array() - mean) / sd;
  for (int i = 0; i < n; ++i)
    x_star[i] = std::sqrt(r2) * z_star[i] + std::sqrt(1.0 - r2) * std_normal(rng);

  // least squares of outcomes on (1, x_star)
  const double x_mean = x_star.mean();
  const Eigen::ArrayXd xc = x_star.array() - x_mean;
  const double sxx = xc.square().sum();
  const double sxy = (xc * (outcomes.array() - mean)).sum();
  const double slope = sxx > 0.0 ? sxy / sxx : 0.0;
  const double intercept = mean - slope * x_mean;

  ProxyOutcome out;
  out.fitted = (intercept + slope * x_star.array()).matrix();
  out.residuals = outcomes - out.fitted;
  const double ss_res = out.residuals.squaredNorm();
  const double ss_tot = (outcomes.array() - mean).square().sum();
  out.realized_r2 = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 0.0;
  return out;
}

namespace {

struct SplitOutcome {
  bool failed = false;
  std::string error;
  // rejections[row][design]; row order matches the flattened spec list
  std::vector<std::vector<int>> rejections;
  int chosen_vbm = 0;
  int chosen_msm = 0;
};

std::vector<SensitivitySpec> flatten_specs(const PlanningConfig& config) {
  std::vector<SensitivitySpec> specs;
  for (double l : config.lambda_values) specs.push_back(SensitivitySpec::msm(l));
  for (double r : config.r2_values) specs.push_back(SensitivitySpec::vbm(r));
  return specs;
}

// Rank menu designs on the planning half by design sensitivity; the
// hypothesized effect for each design is its own planning-sample estimate.
void select_designs(const ObservationTable& planning, const std::vector<DesignSpec>& menu,
                    int* chosen_vbm, int* chosen_msm) {
  const PropensityFit fit = fit_logistic(planning);
  double best_vbm = -1.0;
  double best_msm = -1.0;
  *chosen_vbm = 0;
  *chosen_msm = 0;
  for (std::size_t d = 0; d < menu.size(); ++d) {
    double vbm_value = 0.0;
    double msm_value = 1.0;
    try {
      const DesignFit design = build_design_with_fit(planning, fit, menu[d]);
      if (design.att.value > 0.0) {
        const FavorableSituation situation = situation_from_design(design, design.att.value);
        vbm_value = ds_vbm(situation).value;
        msm_value = ds_msm(situation).value;  // +inf sorts above any finite value
      }
    } catch (const Error&) {
      // a design that cannot be built on the planning half is never selected
    }
    if (vbm_value > best_vbm) {
      best_vbm = vbm_value;
      *chosen_vbm = static_cast<int>(d);
    }
    if (msm_value > best_msm) {
      best_msm = msm_value;
      *chosen_msm = static_cast<int>(d);
    }
  }
}

}  // namespace

PowerTable power_by_splitting(const ObservationTable& table, const PlanningConfig& config,
                              int workers, Diagnostics* diag) {
  config.validate();
  table.validate();
  const std::vector<SensitivitySpec> specs = flatten_specs(config);
  if (specs.empty()) throw_config("power_by_splitting: no sensitivity parameters configured");

  PowerTable out;
  out.specs = specs;
  for (const auto& d : config.menu) out.estimator_names.push_back(d.name());
  out.has_chosen = config.menu.size() >= 2;

  // full-sample rejection flags
  out.full_sample_reject.assign(specs.size(), std::vector<int>(config.menu.size(), 0));
  for (std::size_t d = 0; d < config.menu.size(); ++d) {
    const BootstrapCache cache =
        make_bootstrap_cache(table, config.menu[d], config.bootstrap_reps,
                             derive_seed(config.seed, "power-full", d), workers, diag);
    for (std::size_t s = 0; s < specs.size(); ++s)
      out.full_sample_reject[s][d] =
          ci_from_cache(cache, specs[s], config.alpha).excludes_zero() ? 1 : 0;
  }

  std::vector<SplitOutcome> split_results(static_cast<std::size_t>(config.n_splits));
  parallel_for(static_cast<std::size_t>(config.n_splits), workers, [&](std::size_t s) {
    SplitOutcome& result = split_results[s];
    try {
      const SplitResult split = split_planning(table, config.fraction, config.split_mode,
                                               derive_seed(config.seed, "power-split", s));
      select_designs(split.planning, config.menu, &result.chosen_vbm, &result.chosen_msm);

      result.rejections.assign(specs.size(), std::vector<int>(config.menu.size(), 0));
      for (std::size_t d = 0; d < config.menu.size(); ++d) {
        const BootstrapCache cache = make_bootstrap_cache(
            split.analysis, config.menu[d], config.bootstrap_reps,
            derive_seed(config.seed, "power-analysis", s * 64 + d), 1, nullptr);
        for (std::size_t q = 0; q < specs.size(); ++q)
          result.rejections[q][d] =
              ci_from_cache(cache, specs[q], config.alpha).excludes_zero() ? 1 : 0;
      }
    } catch (const std::exception& e) {
      result.failed = true;
      result.error = e.what();
    }
  });

  const std::size_t n_cols = config.menu.size() + (out.has_chosen ? 1 : 0);
  out.proportions.assign(specs.size(), std::vector<double>(n_cols, 0.0));
  out.selection_frequency.assign(2, std::vector<double>(config.menu.size(), 0.0));
  int used = 0;
  for (const auto& result : split_results) {
    if (result.failed) {
      ++out.n_splits_failed;
      continue;
    }
    ++used;
    out.selection_frequency[0][static_cast<std::size_t>(result.chosen_vbm)] += 1.0;
    out.selection_frequency[1][static_cast<std::size_t>(result.chosen_msm)] += 1.0;
    for (std::size_t q = 0; q < specs.size(); ++q) {
      for (std::size_t d = 0; d < config.menu.size(); ++d)
        out.proportions[q][d] += result.rejections[q][d];
      if (out.has_chosen) {
        const int chosen = specs[q].model == SensitivityModel::vbm ? result.chosen_vbm
                                                                   : result.chosen_msm;
        out.proportions[q][config.menu.size()] +=
            result.rejections[q][static_cast<std::size_t>(chosen)];
      }
    }
  }
  out.n_splits_used = used;
  if (used == 0) throw_numeric("power_by_splitting: every split failed");
  for (auto& row : out.proportions)
    for (double& cell : row) cell /= static_cast<double>(used);
  for (auto& row : out.selection_frequency)
    for (double& cell : row) cell /= static_cast<double>(used);
  if (out.n_splits_failed > 0)
    warn_into(diag, "power_by_splitting: " + std::to_string(out.n_splits_failed) +
                        " of " + std::to_string(config.n_splits) + " splits failed and were excluded");
  return out;
}

}  // namespace dsense
