#pragma once

#include <string>
#include <vector>

#include "dsense/design_sensitivity.hpp"

namespace dsense {

// Synthetic study generator: X ~ Normal(mu_x, sigma_x^2),
// Z ~ Bernoulli(expit(beta_pi * X)), Y = beta_y X + tau_i Z + u with
// tau_i = tau0 + beta_tau * X and u ~ Normal(0, sigma_y^2).
struct DgpConfig {
  double mu_x = 0.0;
  double sigma_x = 1.0;
  double beta_pi = 1.0;
  double beta_y = 1.0;
  double sigma_y = 1.0;
  double tau0 = 1.0;
  double beta_tau = 0.0;  // 0 = constant effect
  int n = 10000;
  std::uint64_t seed = 0;

  void validate() const;
};

// The stream consumption is fixed (X draws, then assignment uniforms, then
// noise draws), so beta_tau = 0 reproduces the constant-effect sample
// bit-for-bit.
ObservationTable sample_dgp(const DgpConfig& config);

// Individual effects implied by a config for a sampled table (single
// covariate).
Eigen::VectorXd individual_effects(const DgpConfig& config, const ObservationTable& table);

enum class SweepKind { drivers, heterogeneity, misspecification };

// ---------------------------------------------------------------------------
// drivers sweep: one row per DGP parameter set, both design sensitivities

struct DriversParams {
  double tau = 1.0;
  double beta_y = 1.0;
  double beta_pi = 1.0;
  double sigma_y = 1.0;
};

struct DriversResult {
  DriversParams params;
  double var_y = 0.0;
  double var_w = 0.0;
  double cor_wy = 0.0;
  double lambda_tilde = 0.0;
  double r2_tilde = 0.0;
  bool failed = false;
  std::string error;
};

// The four standard blocks: effect size, outcome variance, weight variance,
// weight-outcome correlation.
std::vector<DriversParams> drivers_grid();
std::vector<DriversResult> sweep_drivers(const std::vector<DriversParams>& grid, int n,
                                         std::uint64_t seed, int workers = 1,
                                         Diagnostics* diag = nullptr);

// ---------------------------------------------------------------------------
// misspecification sweep: augmentation with outcome models fit on a
// transformed (possibly wrong) covariate

enum class MisspecModel { correct, noise, cubic, exp_half, log_quartic };
std::string misspec_model_name(MisspecModel model);

struct MisspecResult {
  double sigma_y = 0.0;
  MisspecModel model = MisspecModel::correct;
  double cor_wy = 0.0;
  double var_y = 0.0;
  double cor_we = 0.0;
  double var_e = 0.0;
  double lambda_tilde = 0.0;
  double lambda_aug = 0.0;
  double r2_tilde = 0.0;
  double r2_aug = 0.0;
  bool failed = false;
  std::string error;
};

std::vector<double> misspec_sigma_grid();
std::vector<MisspecModel> misspec_model_grid();
std::vector<MisspecResult> sweep_misspecification(const std::vector<double>& sigma_ys,
                                                  const std::vector<MisspecModel>& models,
                                                  double tau, int n, std::uint64_t seed,
                                                  int workers = 1, Diagnostics* diag = nullptr);

// ---------------------------------------------------------------------------
// heterogeneity sweep: impact of trimming while the effect slope beta_tau
// varies, with tau0 recalibrated per row so the untrimmed estimand stays at
// the target

struct HeterogeneityConfig {
  DgpConfig base;        // beta_tau/tau0 overwritten per row
  double target_att = 2.23;
  double trim_weight_cutoff = 9.0;
  double calibration_tol = 0.01;
};

// Sweep defaults with a weight spread and outcome scale large enough that
// trimming at the cutoff changes the design sensitivities materially.
HeterogeneityConfig heterogeneity_defaults();

struct HeterogeneityResult {
  double beta_tau = 0.0;
  double tau0 = 0.0;
  double trimmed_att = 0.0;
  double lambda_tilde = 0.0;
  double lambda_trim = 0.0;
  double r2_tilde = 0.0;
  double r2_trim = 0.0;
  double var_y = 0.0;
  double var_y_trim = 0.0;
  double cor_wy = 0.0;
  double cor_trim = 0.0;
  double var_w = 0.0;
  double var_w_trim = 0.0;
  bool failed = false;
  std::string error;
};

std::vector<double> heterogeneity_beta_tau_grid();
std::vector<HeterogeneityResult> sweep_heterogeneity(const std::vector<double>& beta_taus,
                                                     const HeterogeneityConfig& config, int n,
                                                     std::uint64_t seed, int workers = 1,
                                                     Diagnostics* diag = nullptr);

}  // namespace dsense
