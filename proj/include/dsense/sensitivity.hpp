#pragma once

#include <optional>
#include <vector>

#include "dsense/design.hpp"
#include "dsense/msm.hpp"

namespace dsense {

enum class SensitivityModel { vbm, msm };

// Which sensitivity model to use and how much confounding it allows:
// R^2 in [0,1) for the variance-based model, Lambda >= 1 for the marginal
// model. The null values R^2 = 0 and Lambda = 1 allow none.
struct SensitivitySpec {
  SensitivityModel model = SensitivityModel::msm;
  double parameter = 1.0;

  static SensitivitySpec vbm(double r2) { return {SensitivityModel::vbm, r2}; }
  static SensitivitySpec msm(double lambda) { return {SensitivityModel::msm, lambda}; }
  double null_value() const { return model == SensitivityModel::vbm ? 0.0 : 1.0; }
  void validate() const;
};

struct EffectIntervalEstimate {
  double lower = 0.0;
  double upper = 0.0;
  double point = 0.0;
  std::optional<double> ci_lower;
  std::optional<double> ci_upper;
  double alpha = 0.0;
  int bootstrap_reps = 0;
  SensitivitySpec spec;

  bool excludes_zero() const {
    const double lo = ci_lower.value_or(lower);
    const double hi = ci_upper.value_or(upper);
    return lo > 0.0 || hi < 0.0;
  }
};

// Variance-based interval around a point estimate via the bias bound
// B = sqrt(1-cor^2) * sqrt(r2/(1-r2) * var_y * var_w).
double vbm_bias_bound(const WeightMoments& moments, double r2);
EffectIntervalEstimate vbm_interval(const AttEstimate& estimate, const WeightMoments& moments,
                                    double r2);

// Marginal-model extrema of the effect over control (Y, w) pairs by exact
// cutoff enumeration over the outcome order statistics.
EffectIntervalEstimate msm_extrema(const Eigen::VectorXd& control_outcome,
                                   const Eigen::VectorXd& control_weight,
                                   double treated_mean, double lambda);

// Interval for a realized design under either model (no sampling error).
EffectIntervalEstimate interval_for_design(const DesignFit& design, const SensitivitySpec& spec);

// Per-replicate sufficient statistics: any Gamma can be evaluated afterwards
// without refitting (O(m) marginal-model scan, O(1) variance-based bound).
struct ReplicateStats {
  double att = 0.0;
  double treated_component = 0.0;
  MsmProfile profile;
  WeightMoments moments;

  std::pair<double, double> interval_at(const SensitivitySpec& spec) const;
};

ReplicateStats replicate_stats(const DesignFit& design);

// Unit resampling bootstrap: every replicate refits the whole design
// (propensity, trimming, outcome model), propagating the sampling error of
// the estimated weights. Degenerate resamples are redrawn, not skipped.
struct BootstrapCache {
  ReplicateStats full;      // design on the original table
  std::vector<ReplicateStats> reps;
  int redrawn = 0;
  std::uint64_t seed = 0;
};

BootstrapCache make_bootstrap_cache(const ObservationTable& table, const DesignSpec& design,
                                    int reps, std::uint64_t seed, int workers = 1,
                                    Diagnostics* diag = nullptr);

// Percentile-bootstrap confidence interval for the effect interval:
// [alpha/2 quantile of L*, 1-alpha/2 quantile of U*].
EffectIntervalEstimate ci_from_cache(const BootstrapCache& cache, const SensitivitySpec& spec,
                                     double alpha);

EffectIntervalEstimate percentile_bootstrap_ci(const ObservationTable& table,
                                               const DesignSpec& design,
                                               const SensitivitySpec& spec, int reps,
                                               double alpha, std::uint64_t seed,
                                               int workers = 1, Diagnostics* diag = nullptr);

// Largest sensitivity parameter at which the level-alpha CI still excludes
// zero. The bootstrap replicates are shared across the whole search, so the
// per-replicate bounds are exactly monotone in the parameter and the
// bisection predicate is monotone by construction.
struct RobustnessValue {
  enum class Status { ok, not_significant, unbounded };
  double value = 0.0;
  Status status = Status::ok;
};

RobustnessValue robustness_value_from_cache(const BootstrapCache& cache, SensitivityModel model,
                                            double alpha);
RobustnessValue robustness_value(const ObservationTable& table, const DesignSpec& design,
                                 SensitivityModel model, double alpha, int reps,
                                 std::uint64_t seed, int workers = 1,
                                 Diagnostics* diag = nullptr);

}  // namespace dsense
