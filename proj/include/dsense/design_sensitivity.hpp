#pragma once

#include <optional>

#include "dsense/sensitivity.hpp"

namespace dsense {

enum class SituationVariant { standard, trimmed, augmented };

// The hypothesized alternative under which power is computed: a positive
// effect tau together with an empirical control sample of (outcome, weight)
// pairs standing in for the favorable joint distribution. For the trimmed
// variant the sample holds kept controls with mean-1 weights and tau is the
// trimmed estimand; for the augmented variant outcomes are residuals.
struct FavorableSituation {
  double tau = 0.0;
  Eigen::VectorXd control_outcome;
  Eigen::VectorXd control_weight;
  SituationVariant variant = SituationVariant::standard;
  WeightMoments moments;

  void validate() const;
};

FavorableSituation make_situation(double tau, Eigen::VectorXd control_outcome,
                                  Eigen::VectorXd control_weight,
                                  SituationVariant variant = SituationVariant::standard);

// Situation carried by a realized design (its kept-control variant sample).
FavorableSituation situation_from_design(const DesignFit& design, double tau);

struct DesignSensitivityResult {
  SensitivityModel model = SensitivityModel::vbm;
  // R~2 in [0,1) for the variance-based model; Lambda~ >= 1 or +infinity for
  // the marginal model.
  double value = 0.0;
  // false when the marginal-model estimating equation has no root below the
  // sample bound (Lambda -> infinity), or when a degenerate variance makes
  // the variance-based neighborhood empty.
  bool attained = true;
  bool no_confounding_possible = false;
  int iterations = 0;
  double bracket_lo = 0.0;
  double bracket_hi = 0.0;
  double residual = 0.0;
};

// Closed form R~2 = a^2/(1+a^2) with
// a^2 = tau^2 / ((1-cor^2) var_w var_y) on the variant's moments.
DesignSensitivityResult ds_vbm(const FavorableSituation& situation);
DesignSensitivityResult ds_vbm_from_moments(double tau, const WeightMoments& moments);

// Sample analogue of the estimating-equation right-hand side: the worst-case
// tilted Hajek mean at a given Lambda (sup over order-statistic cutoffs).
double msm_rhs(const FavorableSituation& situation, double lambda);

// Root of msm_rhs(Lambda) = hajek mean + tau by bracketed bisection;
// +infinity sentinel when the target exceeds the largest observed outcome
// (sample boundedness).
DesignSensitivityResult ds_msm(const FavorableSituation& situation);

// Gain criteria for augmentation (Y-moments vs residual-moments) and trimming
// (full vs trimmed moments). `improves` is strict; equality is reported as
// no strict gain.
struct GainVerdict {
  bool improves = false;
  bool undefined = false;  // |cor| = 1 makes the criterion undefined
  double lhs = 0.0;
  double rhs = 0.0;
  // trimming criterion factors: (a) weight-variance ratio,
  // (b) correlation adjustment, (c) outcome-variance ratio
  double factor_a = 0.0;
  double factor_b = 0.0;
  double factor_c = 0.0;
};

GainVerdict augmentation_gain(const WeightMoments& moments_y, const WeightMoments& moments_e);
GainVerdict trimming_gain(const WeightMoments& moments_full, const WeightMoments& moments_trim);

struct PowerInput {
  double n = 0.0;
  double tau_w = 0.0;     // population weighted effect under the alternative
  double xi = 0.0;        // worst-case bias term at the chosen Gamma
  double sigma_w = 0.0;   // asymptotic sd of sqrt(n) * tau_hat
  double sigma_nu = 0.0;  // asymptotic sd of sqrt(n) * lower bound
  double alpha = 0.05;

  void validate() const;
};

// Normal approximation to the power of a one-sided level-alpha sensitivity
// analysis: 1 - Phi((z_{1-alpha} sigma_nu + sqrt(n)(xi - tau_w)) / sigma_w).
double power_formula(const PowerInput& input);

// Bootstrap plug-ins for the power formula: sigma_w from the spread of the
// point estimate, sigma_nu from the spread of the lower bound, xi from the
// full-sample interval.
PowerInput power_inputs_from_bootstrap(const ObservationTable& table, const DesignSpec& design,
                                       const SensitivitySpec& spec, int reps, std::uint64_t seed,
                                       double alpha = 0.05, int workers = 1,
                                       Diagnostics* diag = nullptr);
PowerInput power_inputs_from_cache(const BootstrapCache& cache, const SensitivitySpec& spec,
                                   int n_units, double alpha = 0.05);

}  // namespace dsense
