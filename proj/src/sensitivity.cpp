#include "dsense/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace dsense {

void SensitivitySpec::validate() const {
  if (model == SensitivityModel::vbm) {
    if (!(parameter >= 0.0 && parameter < 1.0))
      throw_config("variance-based sensitivity parameter must satisfy 0 <= R^2 < 1");
  } else {
    if (!(parameter >= 1.0))
      throw_config("marginal sensitivity parameter must satisfy Lambda >= 1");
  }
}

double vbm_bias_bound(const WeightMoments& moments, double r2) {
  if (!(r2 >= 0.0 && r2 < 1.0))
    throw_config("variance-based sensitivity parameter must satisfy 0 <= R^2 < 1");
  const double cor2 = moments.cor_wy * moments.cor_wy;
  return std::sqrt(1.0 - cor2) *
         std::sqrt(r2 / (1.0 - r2) * moments.var_y * moments.var_w);
}

EffectIntervalEstimate vbm_interval(const AttEstimate& estimate, const WeightMoments& moments,
                                    double r2) {
  const double bound = vbm_bias_bound(moments, r2);
  EffectIntervalEstimate out;
  out.point = estimate.value;
  out.lower = estimate.value - bound;
  out.upper = estimate.value + bound;
  out.spec = SensitivitySpec::vbm(r2);
  return out;
}

EffectIntervalEstimate msm_extrema(const Eigen::VectorXd& control_outcome,
                                   const Eigen::VectorXd& control_weight,
                                   double treated_mean, double lambda) {
  if (!(lambda >= 1.0))
    throw_config("marginal sensitivity parameter must satisfy Lambda >= 1");
  const MsmProfile profile(control_outcome, control_weight);
  EffectIntervalEstimate out;
  out.point = treated_mean - profile.hajek_mean();
  out.lower = treated_mean - profile.max_mean(lambda);
  out.upper = treated_mean - profile.min_mean(lambda);
  out.spec = SensitivitySpec::msm(lambda);
  return out;
}

EffectIntervalEstimate interval_for_design(const DesignFit& design, const SensitivitySpec& spec) {
  spec.validate();
  if (spec.model == SensitivityModel::msm)
    return msm_extrema(design.variant_outcome, design.variant_weight,
                       design.treated_component, spec.parameter);
  EffectIntervalEstimate out = vbm_interval(design.att, design.moments, spec.parameter);
  return out;
}

std::pair<double, double> ReplicateStats::interval_at(const SensitivitySpec& spec) const {
  if (spec.model == SensitivityModel::msm) {
    return {treated_component - profile.max_mean(spec.parameter),
            treated_component - profile.min_mean(spec.parameter)};
  }
  const double bound = vbm_bias_bound(moments, spec.parameter);
  return {att - bound, att + bound};
}

ReplicateStats replicate_stats(const DesignFit& design) {
  ReplicateStats stats;
  stats.att = design.att.value;
  stats.treated_component = design.treated_component;
  stats.profile = MsmProfile(design.variant_outcome, design.variant_weight);
  stats.moments = design.moments;
  return stats;
}

BootstrapCache make_bootstrap_cache(const ObservationTable& table, const DesignSpec& design,
                                    int reps, std::uint64_t seed, int workers,
                                    Diagnostics* diag) {
  if (reps < 1) throw_config("bootstrap needs at least 1 replicate");
  table.validate();

  BootstrapCache cache;
  cache.seed = seed;
  cache.full = replicate_stats(build_design(table, design, diag));
  cache.reps.resize(static_cast<std::size_t>(reps));

  const int n = table.n();
  std::vector<int> redraw_counts(static_cast<std::size_t>(reps), 0);
  parallel_for(static_cast<std::size_t>(reps), workers, [&](std::size_t r) {
    for (int attempt = 0;; ++attempt) {
      if (attempt >= 100)
        throw_numeric("bootstrap: replicate " + std::to_string(r) +
                      " degenerate after 100 redraws");
      Rng rng = make_rng(seed, "bootstrap",
                         static_cast<std::uint64_t>(r) * 128ULL + static_cast<std::uint64_t>(attempt));
      std::uniform_int_distribution<int> pick(0, n - 1);
      std::vector<int> rows(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)] = pick(rng);
      try {
        const ObservationTable resample = table.subset(rows);
        cache.reps[r] = replicate_stats(build_design(resample, design, nullptr));
        redraw_counts[r] = attempt;
        return;
      } catch (const Error&) {
        continue;  // degenerate resample: redraw with the next derived stream
      }
    }
  });
  for (int c : redraw_counts) cache.redrawn += c;
  if (cache.redrawn * 100 > reps)
    warn_into(diag, "bootstrap: " + std::to_string(cache.redrawn) +
                        " degenerate replicates redrawn (more than 1% of " +
                        std::to_string(reps) + ")");
  return cache;
}

EffectIntervalEstimate ci_from_cache(const BootstrapCache& cache, const SensitivitySpec& spec,
                                     double alpha) {
  spec.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw_config("alpha must be in (0,1)");
  EffectIntervalEstimate out;
  const auto full = cache.full.interval_at(spec);
  out.lower = full.first;
  out.upper = full.second;
  out.point = cache.full.att;
  out.spec = spec;
  out.alpha = alpha;
  out.bootstrap_reps = static_cast<int>(cache.reps.size());

  std::vector<double> lo;
  std::vector<double> hi;
  lo.reserve(cache.reps.size());
  hi.reserve(cache.reps.size());
  for (const auto& rep : cache.reps) {
    const auto iv = rep.interval_at(spec);
    lo.push_back(iv.first);
    hi.push_back(iv.second);
  }
  out.ci_lower = quantile(std::move(lo), alpha / 2.0);
  out.ci_upper = quantile(std::move(hi), 1.0 - alpha / 2.0);
  return out;
}

EffectIntervalEstimate percentile_bootstrap_ci(const ObservationTable& table,
                                               const DesignSpec& design,
                                               const SensitivitySpec& spec, int reps,
                                               double alpha, std::uint64_t seed,
                                               int workers, Diagnostics* diag) {
  if (reps < 200)
    warn_into(diag, "bootstrap: fewer than 200 replicates; quantiles will be coarse");
  const BootstrapCache cache = make_bootstrap_cache(table, design, reps, seed, workers, diag);
  return ci_from_cache(cache, spec, alpha);
}

namespace {

constexpr double kLambdaCap = 1e4;
constexpr double kR2Cap = 1.0 - 1e-9;
constexpr double kGammaTol = 1e-3;

}  // namespace

RobustnessValue robustness_value_from_cache(const BootstrapCache& cache, SensitivityModel model,
                                            double alpha) {
  auto rejects = [&](double gamma) {
    const SensitivitySpec spec =
        model == SensitivityModel::vbm ? SensitivitySpec::vbm(gamma) : SensitivitySpec::msm(gamma);
    return ci_from_cache(cache, spec, alpha).excludes_zero();
  };

  RobustnessValue out;
  const double null_gamma = model == SensitivityModel::vbm ? 0.0 : 1.0;
  if (!rejects(null_gamma)) {
    out.status = RobustnessValue::Status::not_significant;
    out.value = null_gamma;
    return out;
  }
  const double cap = model == SensitivityModel::vbm ? kR2Cap : kLambdaCap;

  double lo = null_gamma;  // rejects
  double hi;               // first known non-rejecting point, if any
  if (model == SensitivityModel::vbm) {
    hi = cap;
    if (rejects(hi)) {
      out.status = RobustnessValue::Status::unbounded;
      out.value = cap;
      return out;
    }
  } else {
    hi = 2.0;
    while (rejects(hi)) {
      lo = hi;
      hi *= 2.0;
      if (hi > cap) {
        out.status = RobustnessValue::Status::unbounded;
        out.value = std::numeric_limits<double>::infinity();
        return out;
      }
    }
  }
  while (hi - lo > kGammaTol) {
    const double mid = 0.5 * (lo + hi);
    if (rejects(mid))
      lo = mid;
    else
      hi = mid;
  }
  out.value = 0.5 * (lo + hi);
  return out;
}

RobustnessValue robustness_value(const ObservationTable& table, const DesignSpec& design,
                                 SensitivityModel model, double alpha, int reps,
                                 std::uint64_t seed, int workers, Diagnostics* diag) {
  const BootstrapCache cache = make_bootstrap_cache(table, design, reps, seed, workers, diag);
  return robustness_value_from_cache(cache, model, alpha);
}

}  // namespace dsense
