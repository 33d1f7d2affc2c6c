#include <doctest.h>

#include "dsense/simulation.hpp"

using namespace dsense;

TEST_CASE("sample_dgp is deterministic and beta_tau = 0 matches the constant-effect stream") {
  DgpConfig config;
  config.n = 5000;
  config.seed = 71;
  const ObservationTable a = sample_dgp(config);
  const ObservationTable b = sample_dgp(config);
  CHECK(a.outcome == b.outcome);
  CHECK(a.treatment == b.treatment);

  DgpConfig hetero = config;
  hetero.beta_tau = 0.0;
  const ObservationTable c = sample_dgp(hetero);
  CHECK(a.outcome == c.outcome);
  CHECK(a.covariates == c.covariates);
}

TEST_CASE("beta_pi = 0 gives a balanced design") {
  DgpConfig config;
  config.beta_pi = 0.0;
  config.n = 100000;
  config.seed = 72;
  const ObservationTable t = sample_dgp(config);
  CHECK(std::abs(static_cast<double>(t.n_treated()) / t.n() - 0.5) < 0.01);
}

TEST_CASE("base process control-outcome variance at scale") {
  DgpConfig config;
  config.n = 1000000;
  config.seed = 73;
  const ObservationTable t = sample_dgp(config);
  const std::vector<int> controls = t.control_indices();
  double mean = 0.0;
  for (int r : controls) mean += t.outcome[r];
  mean /= static_cast<double>(controls.size());
  double ss = 0.0;
  for (int r : controls) ss += (t.outcome[r] - mean) * (t.outcome[r] - mean);
  const double var = ss / (static_cast<double>(controls.size()) - 1.0);
  CHECK(var == doctest::Approx(1.82).epsilon(0.03 / 1.82));
}

TEST_CASE("heterogeneous effects enter through the covariate") {
  DgpConfig config;
  config.beta_tau = 2.0;
  config.tau0 = 0.5;
  config.n = 10;
  config.seed = 74;
  const ObservationTable t = sample_dgp(config);
  const Eigen::VectorXd effects = individual_effects(config, t);
  for (int i = 0; i < t.n(); ++i)
    CHECK(effects[i] == doctest::Approx(0.5 + 2.0 * t.covariates(i, 0)));
}

TEST_CASE("drivers sweep reproduces reference rows at reduced scale") {
  // smoke-level check: n = 1e5 keeps the row within a loose window
  std::vector<DriversParams> grid = {{1.0, 1.0, 1.0, 1.0}};
  const auto rows = sweep_drivers(grid, 100000, 75, 1);
  REQUIRE(rows.size() == 1);
  CHECK_FALSE(rows[0].failed);
  CHECK(rows[0].lambda_tilde == doctest::Approx(2.55).epsilon(0.08));
  CHECK(rows[0].r2_tilde == doctest::Approx(0.37).epsilon(0.10));
}

TEST_CASE("misspecification sweep: noise model changes nothing") {
  const auto rows = sweep_misspecification({1.0}, {MisspecModel::correct, MisspecModel::noise},
                                           1.5, 100000, 76, 1);
  REQUIRE(rows.size() == 2);
  const MisspecResult& correct = rows[0];
  const MisspecResult& noise = rows[1];
  CHECK_FALSE(correct.failed);
  CHECK_FALSE(noise.failed);
  // same draw within the block: plain columns coincide
  CHECK(correct.lambda_tilde == doctest::Approx(noise.lambda_tilde));
  CHECK(std::abs(noise.lambda_aug - noise.lambda_tilde) < 0.02);
  CHECK(std::abs(noise.r2_aug - noise.r2_tilde) < 0.005);
  // the correct model strictly helps
  CHECK(correct.lambda_aug > correct.lambda_tilde + 0.5);
  CHECK(std::abs(correct.cor_we) < 0.05);
}

TEST_CASE("heterogeneity sweep calibrates tau0 and orders the trimmed effect") {
  const auto rows = sweep_heterogeneity({0.0, 2.0}, heterogeneity_defaults(), 200000, 77, 1);
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0].failed);
  CHECK_FALSE(rows[1].failed);
  CHECK(rows[0].tau0 == doctest::Approx(2.23).epsilon(0.01));
  CHECK(rows[0].trimmed_att == doctest::Approx(2.23).epsilon(0.01));
  // positive effect-weight correlation: trimming lowers the estimand
  CHECK(rows[1].trimmed_att < 2.0);
  CHECK(rows[1].trimmed_att == doctest::Approx(1.70).epsilon(0.05 / 1.70));
}

TEST_CASE("correlation block: marginal DS flat, variance-model DS u-shaped") {
  // the correlation block varies beta_y with sigma_y matched so that the
  // outcome variance stays fixed; only the weight-outcome correlation moves
  std::vector<DriversParams> grid;
  for (auto [by, sy] : {std::pair{-1.4, 0.46}, {-0.6, 1.24}, {0.0, 1.35},
                        {0.6, 1.24},  {1.4, 0.46}})
    grid.push_back({1.0, by, 1.0, sy});
  const auto rows = sweep_drivers(grid, 600000, 79, 1);
  double lam_min = 1e300;
  double lam_max = -1e300;
  for (const auto& row : rows) {
    REQUIRE_FALSE(row.failed);
    lam_min = std::min(lam_min, row.lambda_tilde);
    lam_max = std::max(lam_max, row.lambda_tilde);
  }
  CHECK(lam_max - lam_min < 0.15);
  // |cor| = 0.75 endpoints beat the cor = 0 middle
  CHECK(rows[0].r2_tilde > rows[2].r2_tilde);
  CHECK(rows[4].r2_tilde > rows[2].r2_tilde);
  CHECK(rows[2].r2_tilde == doctest::Approx(0.30).epsilon(0.10));
  CHECK(rows[4].r2_tilde == doctest::Approx(0.49).epsilon(0.08));
}

TEST_CASE("sweeps record failures without aborting") {
  std::vector<DriversParams> grid = {{1.0, 1.0, 1.0, 1.0}, {-1.0, 1.0, 1.0, 1.0}};
  Diagnostics diag;
  const auto rows = sweep_drivers(grid, 2000, 78, 1, &diag);
  REQUIRE(rows.size() == 2);
  CHECK_FALSE(rows[0].failed);
  CHECK(rows[1].failed);  // negative effect violates the situation precondition
  CHECK_FALSE(diag.warnings().empty());
}
