#include <doctest.h>

#include <cmath>

#include "dsense/design_sensitivity.hpp"
#include "dsense/simulation.hpp"
#include "helpers.hpp"

using namespace dsense;

namespace {

WeightMoments moments(double var_w, double var_y, double cor) {
  WeightMoments m;
  m.var_w = var_w;
  m.var_y = var_y;
  m.cor_wy = cor;
  m.n_controls = 1000;
  return m;
}

FavorableSituation two_point(double tau) {
  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  Eigen::VectorXd w(2);
  w << 1.0, 1.0;
  return make_situation(tau, y, w);
}

}  // namespace

TEST_CASE("ds_vbm closed form: unit case and degenerate limits") {
  CHECK(ds_vbm_from_moments(1.0, moments(1, 1, 0)).value == doctest::Approx(0.5));
  // tau -> 0 gives no robustness
  CHECK(ds_vbm_from_moments(1e-9, moments(1, 1, 0)).value == doctest::Approx(0.0).epsilon(1e-6));
  // reference moment set
  CHECK(ds_vbm_from_moments(1.0, moments(1.29, 1.82, 0.54)).value ==
        doctest::Approx(0.375).epsilon(0.01));
}

TEST_CASE("ds_vbm flags degenerate variances") {
  const DesignSensitivityResult r = ds_vbm_from_moments(1.0, moments(0.0, 1.0, 0.0));
  CHECK(r.no_confounding_possible);
  CHECK(r.value >= 1.0 - 1e-9);
  CHECK(r.value < 1.0);
}

TEST_CASE("ds_vbm equals the bisection root of bound(r2) = tau") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> unif(0.05, 3.0);
  std::uniform_real_distribution<double> cor_dist(-0.95, 0.95);
  for (int trial = 0; trial < 100; ++trial) {
    const WeightMoments m = moments(unif(rng), unif(rng), cor_dist(rng));
    const double tau = unif(rng);
    const double closed = ds_vbm_from_moments(tau, m).value;
    // independent route: bisect the monotone bias bound on r2
    double lo = 0.0;
    double hi = 1.0 - 1e-15;
    for (int i = 0; i < 200; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (vbm_bias_bound(m, mid) < tau)
        lo = mid;
      else
        hi = mid;
      if (hi - lo < 1e-14) break;
    }
    CHECK(closed == doctest::Approx(0.5 * (lo + hi)).epsilon(1e-10));
  }
}

TEST_CASE("msm_rhs identities") {
  const FavorableSituation s = two_point(0.25);
  CHECK(msm_rhs(s, 1.0) == doctest::Approx(0.5));  // hajek mean at lambda 1
  // two-point equal-mass sample at lambda 2: 4/(4+1) = 0.8
  CHECK(msm_rhs(s, 2.0) == doctest::Approx(0.8));
  // oracle: the theta objective is piecewise constant between the two atoms,
  // so a dense theta grid reduces to the three distinct cutoffs
  double best = -1e300;
  for (double cut : {0.0, 1.0, 2.0}) {
    const double lam = 2.0;
    double num = 0.0;
    double den = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double yv = i == 0 ? 1.0 : 0.0;
      const double scale = i < cut ? lam : 1.0 / lam;
      num += scale * yv;
      den += scale;
    }
    best = std::max(best, num / den);
  }
  CHECK(msm_rhs(s, 2.0) == doctest::Approx(best));
}

TEST_CASE("msm_rhs is nondecreasing in lambda on random samples") {
  std::mt19937_64 rng(18);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.1, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int m = 3 + static_cast<int>(rng() % 20);
    Eigen::VectorXd y(m);
    Eigen::VectorXd w(m);
    for (int i = 0; i < m; ++i) {
      y[i] = normal(rng);
      w[i] = unif(rng);
    }
    const FavorableSituation s = make_situation(0.5, y, w);
    double last = -1e300;
    for (double lambda : {1.0, 1.5, 2.0, 3.0, 5.0, 10.0}) {
      const double value = msm_rhs(s, lambda);
      CHECK(value >= last - 1e-13);
      last = value;
    }
  }
}

TEST_CASE("msm_rhs approaches the largest outcome as lambda grows") {
  std::mt19937_64 rng(19);
  std::normal_distribution<double> normal;
  Eigen::VectorXd y(12);
  Eigen::VectorXd w(12);
  for (int i = 0; i < 12; ++i) {
    y[i] = normal(rng);
    w[i] = 0.5 + 0.1 * i;
  }
  const FavorableSituation s = make_situation(1.0, y, w);
  CHECK(msm_rhs(s, 1e6) == doctest::Approx(y.maxCoeff()).epsilon(1e-6));
}

TEST_CASE("ds_msm solves the two-point estimating equation analytically") {
  // target 0.75 = lambda^2/(lambda^2+1) -> lambda = sqrt(3)
  const DesignSensitivityResult r = ds_msm(two_point(0.25));
  CHECK(r.attained);
  CHECK(std::abs(r.value - std::sqrt(3.0)) < 1e-6);
  CHECK(std::abs(r.residual) <= 1e-6 * (1.0 + 0.75));
}

TEST_CASE("ds_msm returns the infinity sentinel beyond the sample bound") {
  const DesignSensitivityResult r = ds_msm(two_point(0.6));  // target 1.1 > max outcome 1
  CHECK_FALSE(r.attained);
  CHECK(std::isinf(r.value));
}

TEST_CASE("ds_msm rejects nonpositive effects") {
  Eigen::VectorXd y(2);
  y << 1.0, 0.0;
  Eigen::VectorXd w(2);
  w << 1.0, 1.0;
  CHECK_THROWS_AS(make_situation(0.0, y, w), Error);
  CHECK_THROWS_AS(make_situation(-0.5, y, w), Error);
}

TEST_CASE("ds_msm root verification on sampled situations") {
  std::mt19937_64 rng(20);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.2, 1.8);
  for (int trial = 0; trial < 50; ++trial) {
    const int m = 50 + static_cast<int>(rng() % 100);
    Eigen::VectorXd y(m);
    Eigen::VectorXd w(m);
    for (int i = 0; i < m; ++i) {
      y[i] = normal(rng) * 2.0;
      w[i] = unif(rng);
    }
    const FavorableSituation s = make_situation(0.4, y, w);
    const DesignSensitivityResult r = ds_msm(s);
    if (!r.attained) continue;
    const double target = s.moments.mean_wy + s.tau;
    CHECK(std::abs(msm_rhs(s, r.value) - target) <= 1e-6 * (1.0 + std::abs(target)));
  }
}

TEST_CASE("ds monotonicity and invariances") {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> unif(0.2, 1.8);
  const int m = 200;
  Eigen::VectorXd y(m);
  Eigen::VectorXd w(m);
  for (int i = 0; i < m; ++i) {
    y[i] = normal(rng) * 1.5 + 0.3;
    w[i] = unif(rng);
  }
  w /= w.mean();

  SUBCASE("increasing tau increases both design sensitivities") {
    double last_vbm = -1.0;
    double last_msm = 0.0;
    for (double tau : {0.2, 0.4, 0.8, 1.2}) {
      const FavorableSituation s = make_situation(tau, y, w);
      const double v = ds_vbm(s).value;
      const DesignSensitivityResult r = ds_msm(s);
      CHECK(v > last_vbm);
      if (r.attained) {
        CHECK(r.value > last_msm);
        last_msm = r.value;
      }
      last_vbm = v;
    }
  }

  SUBCASE("joint scaling (y, tau) -> (cy, c tau) leaves both unchanged") {
    const double c = 2.75;
    const FavorableSituation base = make_situation(0.5, y, w);
    const FavorableSituation scaled = make_situation(0.5 * c, (y.array() * c).matrix(), w);
    CHECK(ds_vbm(base).value == doctest::Approx(ds_vbm(scaled).value).epsilon(1e-10));
    const DesignSensitivityResult rb = ds_msm(base);
    const DesignSensitivityResult rs = ds_msm(scaled);
    REQUIRE(rb.attained);
    REQUIRE(rs.attained);
    CHECK(rb.value == doctest::Approx(rs.value).epsilon(1e-7));
  }

  SUBCASE("location shift y -> y + c leaves both unchanged") {
    const FavorableSituation base = make_situation(0.5, y, w);
    const FavorableSituation shifted = make_situation(0.5, (y.array() + 4.2).matrix(), w);
    CHECK(ds_vbm(base).value == doctest::Approx(ds_vbm(shifted).value).epsilon(1e-10));
    const DesignSensitivityResult rb = ds_msm(base);
    const DesignSensitivityResult rs = ds_msm(shifted);
    REQUIRE(rb.attained);
    REQUIRE(rs.attained);
    CHECK(rb.value == doctest::Approx(rs.value).epsilon(1e-7));
  }
}

TEST_CASE("augmentation gain: identity model gives no strict gain") {
  const WeightMoments base = moments(1.3, 2.0, 0.5);
  const GainVerdict v = augmentation_gain(base, base);
  CHECK_FALSE(v.improves);
  CHECK(v.lhs == doctest::Approx(v.rhs));
}

TEST_CASE("augmentation gain on the reference row") {
  // var(e)=1.01, cor(w,Y)=0.54, cor(w,e)=0, var(Y)=1.84 -> rhs ~ 1.304
  const GainVerdict v = augmentation_gain(moments(1.3, 1.84, 0.54), moments(1.3, 1.01, 0.0));
  CHECK(v.improves);
  CHECK(v.rhs == doctest::Approx(1.304).epsilon(0.01));
}

TEST_CASE("augmentation gain agrees with the closed-form design sensitivities") {
  std::mt19937_64 rng(22);
  std::uniform_real_distribution<double> var_dist(0.1, 3.0);
  std::uniform_real_distribution<double> cor_dist(-0.9, 0.9);
  for (int trial = 0; trial < 100; ++trial) {
    const double var_w = var_dist(rng);
    const double tau = var_dist(rng);
    const WeightMoments y_mom = moments(var_w, var_dist(rng), cor_dist(rng));
    const WeightMoments e_mom = moments(var_w, var_dist(rng), cor_dist(rng));
    const GainVerdict v = augmentation_gain(y_mom, e_mom);
    const double plain = ds_vbm_from_moments(tau, y_mom).value;
    const double aug = ds_vbm_from_moments(tau, e_mom).value;
    CHECK(v.improves == (aug > plain));
  }
}

TEST_CASE("trimming gain: no trimming means no strict gain") {
  const WeightMoments base = moments(1.5, 2.0, 0.4);
  const GainVerdict v = trimming_gain(base, base);
  CHECK_FALSE(v.improves);
  CHECK(v.lhs == doctest::Approx(1.0));
  CHECK(v.rhs == doctest::Approx(1.0));
}

TEST_CASE("trimming gain on the reference values") {
  // var(Y)=2.48, var(Y|trim)=2.4, cor=0.5, cor_trim=0.6 -> rhs ~ 1.211
  const WeightMoments full = moments(3.5, 2.48, 0.5);
  const WeightMoments trim = moments(1.7, 2.40, 0.6);
  const GainVerdict v = trimming_gain(full, trim);
  CHECK(v.rhs == doctest::Approx(1.211).epsilon(0.005));
  CHECK(v.lhs < 1.0);
  CHECK(v.improves);
  CHECK(v.factor_b == doctest::Approx((1 - 0.25) / (1 - 0.36)).epsilon(1e-12));
  CHECK(v.factor_c == doctest::Approx(2.48 / 2.40).epsilon(1e-12));
}

TEST_CASE("trimming gain agrees with the closed-form design sensitivities") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> var_dist(0.1, 3.0);
  std::uniform_real_distribution<double> cor_dist(-0.9, 0.9);
  for (int trial = 0; trial < 100; ++trial) {
    const double tau = var_dist(rng);  // constant effect: same tau both sides
    const WeightMoments full = moments(var_dist(rng), var_dist(rng), cor_dist(rng));
    const WeightMoments trim = moments(var_dist(rng), var_dist(rng), cor_dist(rng));
    const GainVerdict v = trimming_gain(full, trim);
    const double plain = ds_vbm_from_moments(tau, full).value;
    const double trimmed = ds_vbm_from_moments(tau, trim).value;
    CHECK(v.improves == (trimmed > plain));
  }
}

TEST_CASE("power formula evaluations") {
  PowerInput input;
  input.n = 100;
  input.tau_w = 1.0;
  input.xi = 0.0;
  input.sigma_w = 2.0;
  input.sigma_nu = 2.0;
  input.alpha = 0.05;
  // 1 - Phi(1.645 - 5) ~ 0.9996
  CHECK(power_formula(input) == doctest::Approx(1.0 - normal_cdf(1.644853627 - 5.0)).epsilon(1e-9));

  // at the phase boundary xi = tau the sample size drops out
  input.xi = input.tau_w;
  const double boundary = power_formula(input);
  input.n = 100000;
  CHECK(power_formula(input) == doctest::Approx(boundary).epsilon(1e-12));
  CHECK(boundary == doctest::Approx(1.0 - normal_cdf(1.644853627)).epsilon(1e-9));

  // past the boundary power collapses with n; below it power saturates
  input.xi = input.tau_w + 0.2;
  CHECK(power_formula(input) < 0.01);
  input.xi = input.tau_w - 0.2;
  CHECK(power_formula(input) > 0.99);
}

TEST_CASE("power inputs from the bootstrap collapse at the null parameter") {
  DgpConfig config;
  config.n = 5000;
  config.seed = 61;
  const ObservationTable t = sample_dgp(config);
  const PowerInput input = power_inputs_from_bootstrap(t, DesignSpec::plain(),
                                                       SensitivitySpec::msm(1.0), 300, 62);
  CHECK(input.xi == doctest::Approx(0.0));
  CHECK(input.sigma_nu == doctest::Approx(input.sigma_w).epsilon(0.10));
  const PowerInput vbm_null = power_inputs_from_bootstrap(t, DesignSpec::plain(),
                                                          SensitivitySpec::vbm(0.0), 300, 62);
  CHECK(vbm_null.xi == doctest::Approx(0.0));
}
