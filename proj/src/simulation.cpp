#include "dsense/simulation.hpp"

#include <cmath>

namespace dsense {

void DgpConfig::validate() const {
  if (!(sigma_x > 0.0)) throw_config("dgp: sigma_x must be positive");
  if (!(sigma_y >= 0.0)) throw_config("dgp: sigma_y must be nonnegative");
  if (n < 2) throw_config("dgp: n must be at least 2");
}

ObservationTable sample_dgp(const DgpConfig& config) {
  config.validate();
  Rng rng = make_rng(config.seed, "dgp", 0);
  std::normal_distribution<double> std_normal(0.0, 1.0);
  std::uniform_real_distribution<double> unif(0.0, 1.0);

  Eigen::VectorXd x(config.n);
  for (int i = 0; i < config.n; ++i) x[i] = config.mu_x + config.sigma_x * std_normal(rng);
  Eigen::VectorXi z(config.n);
  for (int i = 0; i < config.n; ++i) {
    const double p = 1.0 / (1.0 + std::exp(-config.beta_pi * x[i]));
    z[i] = unif(rng) < p ? 1 : 0;
  }
  Eigen::VectorXd y(config.n);
  for (int i = 0; i < config.n; ++i) {
    const double tau_i = config.tau0 + config.beta_tau * x[i];
    y[i] = config.beta_y * x[i] + tau_i * static_cast<double>(z[i]) +
           config.sigma_y * std_normal(rng);
  }
  Eigen::MatrixXd covariates(config.n, 1);
  covariates.col(0) = x;
  ObservationTable table = make_table(std::move(y), std::move(z), std::move(covariates));
  table.covariate_names = {"x"};
  return table;
}

Eigen::VectorXd individual_effects(const DgpConfig& config, const ObservationTable& table) {
  if (table.d() != 1) throw_config("individual_effects expects the single-covariate DGP table");
  return (config.tau0 + config.beta_tau * table.covariates.col(0).array()).matrix();
}

// ---------------------------------------------------------------------------

std::vector<DriversParams> drivers_grid() {
  std::vector<DriversParams> grid;
  // effect size block
  for (double tau : {0.25, 0.50, 0.75, 1.00, 1.25, 1.50, 1.75, 2.00})
    grid.push_back({tau, 1.0, 1.0, 1.0});
  // outcome variance block
  for (auto [by, sy] : {std::pair{0.5, 0.5}, {1.0, 1.0}, {1.5, 1.5}, {2.0, 2.0}, {2.5, 2.5}})
    grid.push_back({1.0, by, 1.0, sy});
  // weight variance block (outcome variance held roughly constant)
  for (auto [by, bp, sy] : {std::tuple{0.80, 0.50, 1.11},
                            {0.88, 0.75, 1.07},
                            {1.00, 1.00, 1.00},
                            {1.17, 1.25, 0.88},
                            {1.40, 1.50, 0.65},
                            {1.64, 1.75, 0.14}})
    grid.push_back({1.0, by, bp, sy});
  // correlation block
  for (auto [by, sy] : {std::pair{-1.4, 0.46}, {-1.2, 0.80}, {-1.0, 1.00}, {-0.8, 1.14},
                        {-0.6, 1.24}, {-0.4, 1.30}, {-0.2, 1.34}, {0.0, 1.35},
                        {0.2, 1.34},  {0.4, 1.30},  {0.6, 1.24},  {0.8, 1.14},
                        {1.0, 1.00},  {1.2, 0.80},  {1.4, 0.46}})
    grid.push_back({1.0, by, 1.0, sy});
  return grid;
}

std::vector<DriversResult> sweep_drivers(const std::vector<DriversParams>& grid, int n,
                                         std::uint64_t seed, int workers, Diagnostics* diag) {
  if (grid.empty()) throw_config("sweep_drivers: empty grid");
  std::vector<DriversResult> rows(grid.size());
  parallel_for(grid.size(), workers, [&](std::size_t k) {
    DriversResult& row = rows[k];
    row.params = grid[k];
    try {
      DgpConfig config;
      config.tau0 = grid[k].tau;
      config.beta_y = grid[k].beta_y;
      config.beta_pi = grid[k].beta_pi;
      config.sigma_y = grid[k].sigma_y;
      config.n = n;
      config.seed = derive_seed(seed, "drivers", k);
      const ObservationTable table = sample_dgp(config);
      const DesignFit fit = build_design(table, DesignSpec::plain());
      row.var_y = fit.moments.var_y;
      row.var_w = fit.moments.var_w;
      row.cor_wy = fit.moments.cor_wy;
      const FavorableSituation situation = situation_from_design(fit, grid[k].tau);
      row.lambda_tilde = ds_msm(situation).value;
      row.r2_tilde = ds_vbm(situation).value;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  });
  for (const auto& row : rows)
    if (row.failed) warn_into(diag, "drivers sweep point failed: " + row.error);
  return rows;
}

// ---------------------------------------------------------------------------

std::string misspec_model_name(MisspecModel model) {
  switch (model) {
    case MisspecModel::correct: return "correct";
    case MisspecModel::noise: return "noise";
    case MisspecModel::cubic: return "cubic";
    case MisspecModel::exp_half: return "exp_half";
    case MisspecModel::log_quartic: return "log_quartic";
  }
  return "unknown";
}

std::vector<double> misspec_sigma_grid() { return {0.5, 1.0, 1.5, 2.0, 3.0}; }

std::vector<MisspecModel> misspec_model_grid() {
  return {MisspecModel::correct, MisspecModel::noise, MisspecModel::cubic,
          MisspecModel::exp_half, MisspecModel::log_quartic};
}

namespace {

Eigen::VectorXd misspec_covariate(MisspecModel model, const Eigen::VectorXd& x, Rng& rng) {
  switch (model) {
    case MisspecModel::correct:
      return x;
    case MisspecModel::noise: {
      std::normal_distribution<double> std_normal(0.0, 1.0);
      Eigen::VectorXd w(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) w[i] = std_normal(rng);
      return w;
    }
    case MisspecModel::cubic:
      return x.array().cube().matrix();
    case MisspecModel::exp_half:
      return (x.array() / 2.0).exp().matrix();
    case MisspecModel::log_quartic: {
      Eigen::VectorXd w(x.size());
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        // |x| below 1e-300 would overflow the log; probability-zero event
        const double ax = std::max(std::abs(x[i]), 1e-300);
        w[i] = 4.0 * std::log(ax);
      }
      return w;
    }
  }
  throw_config("unknown misspecification model");
}

}  // namespace

std::vector<MisspecResult> sweep_misspecification(const std::vector<double>& sigma_ys,
                                                  const std::vector<MisspecModel>& models,
                                                  double tau, int n, std::uint64_t seed,
                                                  int workers, Diagnostics* diag) {
  if (sigma_ys.empty() || models.empty()) throw_config("sweep_misspecification: empty grid");
  std::vector<MisspecResult> rows(sigma_ys.size() * models.size());
  parallel_for(rows.size(), workers, [&](std::size_t k) {
    MisspecResult& row = rows[k];
    const std::size_t mi = k % models.size();
    const std::size_t si = k / models.size();
    row.sigma_y = sigma_ys[si];
    row.model = models[mi];
    try {
      DgpConfig config;
      config.tau0 = tau;
      config.sigma_y = row.sigma_y;
      config.n = n;
      config.seed = derive_seed(seed, "misspec", si);  // same draw across models of a block
      ObservationTable table = sample_dgp(config);
      const DesignFit plain = build_design(table, DesignSpec::plain());
      row.cor_wy = plain.moments.cor_wy;
      row.var_y = plain.moments.var_y;
      const FavorableSituation plain_situation = situation_from_design(plain, tau);
      row.lambda_tilde = ds_msm(plain_situation).value;
      row.r2_tilde = ds_vbm(plain_situation).value;

      // outcome model fit on the (possibly wrong) covariate
      Rng rng = make_rng(seed, "misspec-covariate", k);
      ObservationTable transformed = table;
      transformed.covariates.col(0) = misspec_covariate(row.model, table.covariates.col(0), rng);
      const OutcomeModel model = fit_outcome_model(transformed, OutcomeModelSpec::ols());
      const Eigen::VectorXd residuals = residualize(transformed, model);
      const WeightMoments moments_e = weight_moments(plain.weights, table, residuals);
      row.cor_we = moments_e.cor_wy;
      row.var_e = moments_e.var_y;

      std::vector<int> controls = table.control_indices();
      Eigen::VectorXd e_controls(plain.variant_outcome.size());
      int j = 0;
      for (std::size_t c = 0; c < controls.size(); ++c) {
        if (!plain.weights.kept_control[c]) continue;
        e_controls[j++] = residuals[controls[c]];
      }
      const FavorableSituation aug_situation = make_situation(
          tau, std::move(e_controls), plain.variant_weight, SituationVariant::augmented);
      row.lambda_aug = ds_msm(aug_situation).value;
      row.r2_aug = ds_vbm(aug_situation).value;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  });
  for (const auto& row : rows)
    if (row.failed) warn_into(diag, "misspecification sweep point failed: " + row.error);
  return rows;
}

// ---------------------------------------------------------------------------

HeterogeneityConfig heterogeneity_defaults() {
  HeterogeneityConfig config;
  config.base.mu_x = 0.0;
  config.base.sigma_x = 1.373;
  config.base.beta_pi = 1.0415;
  config.base.beta_y = 1.048;
  config.base.sigma_y = 0.9819;
  config.target_att = 2.23;
  config.trim_weight_cutoff = 9.0;
  return config;
}

std::vector<double> heterogeneity_beta_tau_grid() {
  return {-1.5, -1.0, -0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0};
}

namespace {

// Calibrate tau0 so the sampled untrimmed estimand hits the target: bisection
// against the treated-arm mean of the individual effects on a fixed
// calibration draw.
double calibrate_tau0(const HeterogeneityConfig& config, double beta_tau, int n,
                      std::uint64_t seed) {
  DgpConfig calib = config.base;
  calib.beta_tau = beta_tau;
  calib.tau0 = 0.0;
  calib.n = n;
  calib.seed = seed;
  const ObservationTable table = sample_dgp(calib);
  double x1_sum = 0.0;
  int n1 = 0;
  for (int i = 0; i < table.n(); ++i) {
    if (table.treatment[i] != 1) continue;
    x1_sum += table.covariates(i, 0);
    ++n1;
  }
  if (n1 == 0) throw_data("calibration draw has no treated units");
  const double x1_mean = x1_sum / n1;
  auto att_of = [&](double tau0) { return tau0 + beta_tau * x1_mean; };

  const double spread = std::abs(beta_tau) * (std::abs(config.base.mu_x) +
                                              6.0 * config.base.sigma_x) + 1.0;
  double lo = config.target_att - spread;
  double hi = config.target_att + spread;
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double att = att_of(mid);
    if (std::abs(att - config.target_att) <= 0.5 * config.calibration_tol) return mid;
    if (att < config.target_att)
      lo = mid;
    else
      hi = mid;
  }
  throw_numeric("tau0 calibration did not converge");
}

}  // namespace

std::vector<HeterogeneityResult> sweep_heterogeneity(const std::vector<double>& beta_taus,
                                                     const HeterogeneityConfig& config, int n,
                                                     std::uint64_t seed, int workers,
                                                     Diagnostics* diag) {
  if (beta_taus.empty()) throw_config("sweep_heterogeneity: empty grid");
  std::vector<HeterogeneityResult> rows(beta_taus.size());
  parallel_for(beta_taus.size(), workers, [&](std::size_t k) {
    HeterogeneityResult& row = rows[k];
    row.beta_tau = beta_taus[k];
    try {
      row.tau0 = calibrate_tau0(config, row.beta_tau, n, derive_seed(seed, "hetero-calib", k));
      DgpConfig dgp = config.base;
      dgp.beta_tau = row.beta_tau;
      dgp.tau0 = row.tau0;
      dgp.n = n;
      dgp.seed = derive_seed(seed, "hetero", k);
      const ObservationTable table = sample_dgp(dgp);

      const PropensityFit pfit = fit_logistic(table);
      const DesignFit plain = build_design_with_fit(table, pfit, DesignSpec::plain());
      const DesignSpec trim_spec =
          DesignSpec::trimmed(TrimRule::weight(config.trim_weight_cutoff));
      const DesignFit trimmed = build_design_with_fit(table, pfit, trim_spec);

      row.var_y = plain.moments.var_y;
      row.var_w = plain.moments.var_w;
      row.cor_wy = plain.moments.cor_wy;
      row.var_y_trim = trimmed.moments.var_y;
      row.var_w_trim = trimmed.moments.var_w;
      row.cor_trim = trimmed.moments.cor_wy;

      // trimmed estimand: mean individual effect over kept treated units
      const Eigen::VectorXd effects = individual_effects(dgp, table);
      const std::vector<int> treated = table.treated_indices();
      double trim_sum = 0.0;
      int trim_count = 0;
      for (std::size_t t = 0; t < treated.size(); ++t) {
        if (!trimmed.weights.kept_treated[t]) continue;
        trim_sum += effects[treated[t]];
        ++trim_count;
      }
      if (trim_count == 0) throw_data("trim removed every treated unit");
      row.trimmed_att = trim_sum / trim_count;

      const FavorableSituation plain_situation =
          situation_from_design(plain, config.target_att);
      row.lambda_tilde = ds_msm(plain_situation).value;
      row.r2_tilde = ds_vbm(plain_situation).value;
      const FavorableSituation trim_situation = situation_from_design(trimmed, row.trimmed_att);
      row.lambda_trim = ds_msm(trim_situation).value;
      row.r2_trim = ds_vbm(trim_situation).value;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
    }
  });
  for (const auto& row : rows)
    if (row.failed) warn_into(diag, "heterogeneity sweep point failed: " + row.error);
  return rows;
}

}  // namespace dsense
