#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "dsense/common.hpp"
#include "dsense/data.hpp"

namespace dsense {

inline constexpr double kProbabilityClamp = 1e-12;

struct PropensityFit {
  Eigen::VectorXd coefficients;        // intercept + d slopes
  Eigen::VectorXd fitted_probabilities;  // clamped to (eps, 1-eps)
  bool converged = false;
  int iterations = 0;
  double gradient_norm = 0.0;
  bool separation_suspected = false;
};

// Maximum-likelihood logistic fit via Newton-Raphson with step-halving.
// Stops when the gradient max-norm drops to 1e-8 or after 100 iterations.
PropensityFit fit_logistic(const ObservationTable& table, Diagnostics* diag = nullptr);

struct TrimRule {
  enum class Kind { none, propensity_cutoff, weight_cutoff };
  Kind kind = Kind::none;
  double value = 0.0;

  static TrimRule none() { return {}; }
  static TrimRule propensity(double a) { return {Kind::propensity_cutoff, a}; }
  static TrimRule weight(double m) { return {Kind::weight_cutoff, m}; }
};

// ATT weights for the control units (w = p/(1-p)), with trimming metadata.
// Kept-control weights are renormalized to mean 1 whenever `normalized` is
// set. The treated mask mirrors the trimmed estimand's region restriction.
struct WeightSet {
  Eigen::VectorXd control_weights;   // per control unit, in table control order
  std::vector<char> kept_control;    // false when trimmed away
  std::vector<char> kept_treated;    // false when the unit is outside the trim region
  bool normalized = false;
  TrimRule trim_rule;
  // Raw-weight cutoff expressed on the normalized-weight scale (m / mean raw
  // kept weight); meaningful only after trimming.
  std::optional<double> equivalent_weight_cutoff;
  std::vector<int> overlap_warning_units;  // control rows with p >= 1-eps before clamping

  int n_controls() const { return static_cast<int>(control_weights.size()); }
  int n_kept_controls() const;
  int n_kept_treated() const { return static_cast<int>(std::count(kept_treated.begin(), kept_treated.end(), 1)); }
};

WeightSet att_weights(const PropensityFit& fit, const ObservationTable& table,
                      bool normalize = true, Diagnostics* diag = nullptr);

// Drops control units outside the overlap region (p > a, or raw weight >= m)
// and mirrors the restriction on the treated arm; kept weights are
// renormalized to mean 1. Idempotent for a fixed rule.
WeightSet trim_weights(const WeightSet& weights, const PropensityFit& fit,
                       const ObservationTable& table, const TrimRule& rule,
                       Diagnostics* diag = nullptr);

// Second moments over kept controls that feed every sensitivity formula.
struct WeightMoments {
  double var_w = 0.0;   // var(w | Z=0), sample variance (n-1)
  double var_y = 0.0;   // var(Y | Z=0)
  double cor_wy = 0.0;  // Pearson cor(w, Y | Z=0); 0 when a variance vanishes
  double mean_wy = 0.0; // Hajek control mean sum(wY)/sum(w)
  int n_controls = 0;
  bool zero_variance = false;
};

// outcome_override substitutes residuals for Y (augmented pipeline); it must
// be indexed like the full table.
WeightMoments weight_moments(const WeightSet& weights, const ObservationTable& table,
                             const std::optional<Eigen::VectorXd>& outcome_override = std::nullopt);

}  // namespace dsense
