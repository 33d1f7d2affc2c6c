#include "dsense/design_sensitivity.hpp"

#include <cmath>
#include <limits>

namespace dsense {

namespace {

WeightMoments moments_of(const Eigen::VectorXd& outcome, const Eigen::VectorXd& weight) {
  const int m = static_cast<int>(outcome.size());
  if (m < 2) throw_data("favorable situation needs at least 2 control units");
  const double w_mean = weight.mean();
  const double y_mean = outcome.mean();
  double sww = 0.0;
  double syy = 0.0;
  double swy = 0.0;
  double wy_sum = 0.0;
  double w_sum = 0.0;
  for (int i = 0; i < m; ++i) {
    const double dw = weight[i] - w_mean;
    const double dy = outcome[i] - y_mean;
    sww += dw * dw;
    syy += dy * dy;
    swy += dw * dy;
    wy_sum += weight[i] * outcome[i];
    w_sum += weight[i];
  }
  WeightMoments mom;
  mom.n_controls = m;
  mom.var_w = sww / (m - 1);
  mom.var_y = syy / (m - 1);
  if (sww <= 0.0 || syy <= 0.0) {
    mom.zero_variance = true;
    mom.cor_wy = 0.0;
  } else {
    mom.cor_wy = std::clamp(swy / std::sqrt(sww * syy), -1.0, 1.0);
  }
  mom.mean_wy = wy_sum / w_sum;
  return mom;
}

constexpr double kSentinelEps = 1e-12;

}  // namespace

void FavorableSituation::validate() const {
  if (!(tau > 0.0))
    throw_config("favorable situation requires a positive hypothesized effect");
  if (control_outcome.size() != control_weight.size() || control_outcome.size() == 0)
    throw_config("favorable situation control sample is empty or misaligned");
}

FavorableSituation make_situation(double tau, Eigen::VectorXd control_outcome,
                                  Eigen::VectorXd control_weight, SituationVariant variant) {
  FavorableSituation s;
  s.tau = tau;
  s.control_outcome = std::move(control_outcome);
  s.control_weight = std::move(control_weight);
  s.variant = variant;
  s.validate();
  s.moments = moments_of(s.control_outcome, s.control_weight);
  return s;
}

FavorableSituation situation_from_design(const DesignFit& design, double tau) {
  SituationVariant variant = SituationVariant::standard;
  if (design.att.estimator_kind == EstimatorKind::trimmed) variant = SituationVariant::trimmed;
  if (design.att.estimator_kind == EstimatorKind::augmented) variant = SituationVariant::augmented;
  return make_situation(tau, design.variant_outcome, design.variant_weight, variant);
}

DesignSensitivityResult ds_vbm_from_moments(double tau, const WeightMoments& moments) {
  if (!(tau > 0.0)) throw_config("design sensitivity requires a positive hypothesized effect");
  DesignSensitivityResult out;
  out.model = SensitivityModel::vbm;
  const double cor2 = moments.cor_wy * moments.cor_wy;
  const double denom = (1.0 - cor2) * moments.var_w * moments.var_y;
  if (moments.zero_variance || moments.var_w <= 0.0 || moments.var_y <= 0.0 || denom <= 0.0) {
    // an empty confounding neighborhood cannot move the estimate
    out.value = 1.0 - kSentinelEps;
    out.attained = false;
    out.no_confounding_possible = true;
    return out;
  }
  const double a2 = tau * tau / denom;
  out.value = a2 / (1.0 + a2);
  return out;
}

DesignSensitivityResult ds_vbm(const FavorableSituation& situation) {
  situation.validate();
  return ds_vbm_from_moments(situation.tau, situation.moments);
}

double msm_rhs(const FavorableSituation& situation, double lambda) {
  if (!(lambda >= 1.0)) throw_config("msm_rhs requires lambda >= 1");
  const MsmProfile profile(situation.control_outcome, situation.control_weight);
  return profile.max_mean(lambda);
}

DesignSensitivityResult ds_msm(const FavorableSituation& situation) {
  situation.validate();
  const MsmProfile profile(situation.control_outcome, situation.control_weight);
  const double target = profile.hajek_mean() + situation.tau;

  DesignSensitivityResult out;
  out.model = SensitivityModel::msm;
  constexpr double kCap = 1e4;

  // sample boundedness: the tilted mean can never exceed the largest outcome
  if (target >= profile.sup_outcome()) {
    out.value = std::numeric_limits<double>::infinity();
    out.attained = false;
    return out;
  }

  double lo = 1.0;  // rhs(1) = hajek mean < target since tau > 0
  double hi = 2.0;
  while (profile.max_mean(hi) < target) {
    lo = hi;
    hi *= 2.0;
    if (hi > kCap) {
      // root exists above the search cap; report it as unattained
      out.value = std::numeric_limits<double>::infinity();
      out.attained = false;
      out.bracket_lo = lo;
      out.bracket_hi = hi;
      return out;
    }
  }

  const double tol_f = 1e-6 * (1.0 + std::abs(target));
  double mid = hi;
  double resid = profile.max_mean(hi) - target;
  int iter = 0;
  for (; iter < 200; ++iter) {
    mid = 0.5 * (lo + hi);
    resid = profile.max_mean(mid) - target;
    if (resid < 0.0)
      lo = mid;
    else
      hi = mid;
    if (hi - lo < 1e-8 * std::max(1.0, mid) && std::abs(resid) <= tol_f) break;
    if (hi - lo < 1e-13 * std::max(1.0, mid)) break;
  }
  out.value = mid;
  out.iterations = iter;
  out.bracket_lo = lo;
  out.bracket_hi = hi;
  out.residual = resid;
  return out;
}

GainVerdict augmentation_gain(const WeightMoments& moments_y, const WeightMoments& moments_e) {
  GainVerdict v;
  const double cor_wy2 = moments_y.cor_wy * moments_y.cor_wy;
  const double cor_we2 = moments_e.cor_wy * moments_e.cor_wy;
  if (cor_we2 >= 1.0) {
    v.undefined = true;
    return v;
  }
  v.lhs = moments_e.var_y;  // var(e | Z=0)
  v.rhs = (1.0 - cor_wy2) / (1.0 - cor_we2) * moments_y.var_y;
  v.improves = v.lhs < v.rhs;
  return v;
}

GainVerdict trimming_gain(const WeightMoments& moments_full, const WeightMoments& moments_trim) {
  GainVerdict v;
  const double cor2 = moments_full.cor_wy * moments_full.cor_wy;
  const double cor_trim2 = moments_trim.cor_wy * moments_trim.cor_wy;
  if (cor_trim2 >= 1.0 || moments_full.var_w <= 0.0 || moments_trim.var_y <= 0.0) {
    v.undefined = true;
    return v;
  }
  v.factor_a = moments_trim.var_w / moments_full.var_w;
  v.factor_b = (1.0 - cor2) / (1.0 - cor_trim2);
  v.factor_c = moments_full.var_y / moments_trim.var_y;
  v.lhs = v.factor_a;
  v.rhs = v.factor_b * v.factor_c;
  v.improves = v.lhs < v.rhs;
  return v;
}

void PowerInput::validate() const {
  if (!(n > 0.0)) throw_config("power input: n must be positive");
  if (!(sigma_w > 0.0 && sigma_nu > 0.0))
    throw_config("power input: sigma_w and sigma_nu must be positive");
  if (!(alpha > 0.0 && alpha < 1.0)) throw_config("power input: alpha must be in (0,1)");
}

double power_formula(const PowerInput& input) {
  input.validate();
  const double z = normal_quantile(1.0 - input.alpha);
  const double arg =
      (z * input.sigma_nu + std::sqrt(input.n) * (input.xi - input.tau_w)) / input.sigma_w;
  return 1.0 - normal_cdf(arg);
}

PowerInput power_inputs_from_cache(const BootstrapCache& cache, const SensitivitySpec& spec,
                                   int n_units, double alpha) {
  spec.validate();
  if (cache.reps.size() < 2) throw_config("power inputs need at least 2 bootstrap replicates");
  const double root_n = std::sqrt(static_cast<double>(n_units));
  double att_sum = 0.0;
  double low_sum = 0.0;
  std::vector<double> atts;
  std::vector<double> lows;
  atts.reserve(cache.reps.size());
  lows.reserve(cache.reps.size());
  for (const auto& rep : cache.reps) {
    atts.push_back(rep.att);
    lows.push_back(rep.interval_at(spec).first);
    att_sum += atts.back();
    low_sum += lows.back();
  }
  const double k = static_cast<double>(atts.size());
  const double att_mean = att_sum / k;
  const double low_mean = low_sum / k;
  double att_ss = 0.0;
  double low_ss = 0.0;
  for (std::size_t i = 0; i < atts.size(); ++i) {
    att_ss += (atts[i] - att_mean) * (atts[i] - att_mean);
    low_ss += (lows[i] - low_mean) * (lows[i] - low_mean);
  }
  PowerInput input;
  input.n = static_cast<double>(n_units);
  input.alpha = alpha;
  input.tau_w = cache.full.att;
  input.xi = cache.full.att - cache.full.interval_at(spec).first;
  input.sigma_w = root_n * std::sqrt(att_ss / (k - 1.0));
  input.sigma_nu = root_n * std::sqrt(low_ss / (k - 1.0));
  return input;
}

PowerInput power_inputs_from_bootstrap(const ObservationTable& table, const DesignSpec& design,
                                       const SensitivitySpec& spec, int reps, std::uint64_t seed,
                                       double alpha, int workers, Diagnostics* diag) {
  const BootstrapCache cache = make_bootstrap_cache(table, design, reps, seed, workers, diag);
  return power_inputs_from_cache(cache, spec, table.n(), alpha);
}

}  // namespace dsense
