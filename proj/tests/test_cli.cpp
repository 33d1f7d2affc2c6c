#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "dsense/cli.hpp"

using namespace dsense;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("dsense_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig parse(std::vector<std::string> args) {
  std::vector<const char*> argv = {"dsense"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return parse_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace

TEST_CASE("config validation catches bad inputs") {
  RunConfig config;
  config.command = "nonsense";
  CHECK_THROWS_AS(config.validate(), Error);
  config.command = "fit";
  config.input_path = "x.csv";
  config.covariate_cols = {"x"};
  config.trim_propensity = 0.9;
  config.trim_weight = 3.0;
  CHECK_THROWS_AS(config.validate(), Error);
  config.trim_weight.reset();
  CHECK_NOTHROW(config.validate());
  config.alpha = 1.5;
  CHECK_THROWS_AS(config.validate(), Error);
}

TEST_CASE("flag parsing builds the design menu") {
  const RunConfig config = parse({"fit", "--input", "a.csv", "--covariate-cols", "x1,x2",
                                  "--trim-propensity", "0.9", "--augment", "ols",
                                  "--lambda", "1,2,5", "--seed", "31"});
  CHECK(config.command == "fit");
  CHECK(config.covariate_cols == std::vector<std::string>{"x1", "x2"});
  CHECK(config.design_menu().size() == 3);
  CHECK(config.lambda_values == std::vector<double>{1.0, 2.0, 5.0});
  CHECK(config.seed == 31);
}

TEST_CASE("environment seed is the fallback and flags win") {
  setenv("DSENSE_SEED", "777", 1);
  const RunConfig from_env = parse({"fit", "--input", "a.csv", "--covariate-cols", "x"});
  CHECK(from_env.seed == 777);
  const RunConfig from_flag =
      parse({"fit", "--input", "a.csv", "--covariate-cols", "x", "--seed", "5"});
  CHECK(from_flag.seed == 5);
  unsetenv("DSENSE_SEED");
}

TEST_CASE("exit codes distinguish config, data and numeric errors") {
  TempDir dir;
  RunConfig config;
  config.command = "fit";
  config.out_dir = (dir.path / "out").string();
  config.covariate_cols = {"x"};
  config.input_path = (dir.path / "missing.csv").string();
  CHECK(run(config) == 3);  // data error: file absent
  config.input_path = "";
  CHECK(run(config) == 2);  // config error: no input
}

TEST_CASE("simulate then fit end to end with report echo rerun") {
  TempDir dir;
  RunConfig sim;
  sim.command = "simulate";
  sim.dgp.n = 2000;
  sim.seed = 99;
  sim.out_dir = (dir.path / "sim").string();
  REQUIRE(run(sim) == 0);
  REQUIRE(fs::exists(dir.path / "sim" / "sample.csv"));

  RunConfig fit;
  fit.command = "fit";
  fit.input_path = (dir.path / "sim" / "sample.csv").string();
  fit.outcome_col = "y";
  fit.treatment_col = "z";
  fit.covariate_cols = {"x"};
  fit.trim_propensity = 0.9;
  fit.out_dir = (dir.path / "fit1").string();
  REQUIRE(run(fit) == 0);
  REQUIRE(fs::exists(dir.path / "fit1" / "report.json"));
  REQUIRE(fs::exists(dir.path / "fit1" / "weights.csv"));

  // inner-module warnings surface in the report diagnostics
  const std::string report = slurp(dir.path / "fit1" / "report.json");
  CHECK(report.find("\"diagnostics\"") != std::string::npos);
  CHECK(report.find("trimming dropped") != std::string::npos);

  // rerun from the echoed config: bit-identical outputs
  RunConfig rerun = parse({"--config", (dir.path / "fit1" / "report.json").string(),
                           "--out-dir", (dir.path / "fit2").string()});
  REQUIRE(run(rerun) == 0);
  const std::string r1 = slurp(dir.path / "fit1" / "weights.csv");
  const std::string r2 = slurp(dir.path / "fit2" / "weights.csv");
  CHECK(r1 == r2);
}

TEST_CASE("sensitivity command writes intervals and robustness values") {
  TempDir dir;
  RunConfig sim;
  sim.command = "simulate";
  sim.dgp.n = 900;
  sim.seed = 100;
  sim.out_dir = dir.path.string();
  REQUIRE(run(sim) == 0);

  RunConfig sens;
  sens.command = "sensitivity";
  sens.input_path = (dir.path / "sample.csv").string();
  sens.covariate_cols = {"x"};
  sens.lambda_values = {1.0, 1.5};
  sens.r2_values = {0.05};
  sens.reps = 80;
  sens.seed = 101;
  sens.workers = 2;
  sens.out_dir = (dir.path / "sens").string();
  REQUIRE(run(sens) == 0);
  const std::string csv = slurp(dir.path / "sens" / "sensitivity.csv");
  CHECK(csv.find("design,model,gamma,lower,upper,point,ci_lower,ci_upper,reject_null") !=
        std::string::npos);
  CHECK(csv.find("msm,1.5") != std::string::npos);
  CHECK(csv.find("vbm,0.05") != std::string::npos);
}

TEST_CASE("design-sensitivity command writes the tau-curve layout") {
  TempDir dir;
  RunConfig sim;
  sim.command = "simulate";
  sim.dgp.n = 3000;
  sim.seed = 102;
  sim.out_dir = dir.path.string();
  REQUIRE(run(sim) == 0);

  RunConfig ds;
  ds.command = "design-sensitivity";
  ds.input_path = (dir.path / "sample.csv").string();
  ds.covariate_cols = {"x"};
  ds.tau_grid = {0.5, 1.0};
  ds.trim_propensity = 0.9;
  ds.augment = "ols";
  ds.out_dir = (dir.path / "ds").string();
  REQUIRE(run(ds) == 0);
  const std::string csv = slurp(dir.path / "ds" / "design_sensitivity.csv");
  CHECK(csv.find("tau,r2_plain,lambda_plain,r2_trimmed") != std::string::npos);
  CHECK(csv.find("r2_augmented(ols),lambda_augmented(ols)") != std::string::npos);
}

TEST_CASE("power-split command emits the power-table layout") {
  TempDir dir;
  RunConfig sim;
  sim.command = "simulate";
  sim.dgp.n = 700;
  sim.seed = 103;
  sim.out_dir = dir.path.string();
  REQUIRE(run(sim) == 0);

  RunConfig ps;
  ps.command = "power-split";
  ps.input_path = (dir.path / "sample.csv").string();
  ps.covariate_cols = {"x"};
  ps.lambda_values = {1.0};
  ps.r2_values = {0.0};
  ps.splits = 4;
  ps.reps = 50;
  ps.seed = 104;
  ps.augment = "ols";
  ps.out_dir = (dir.path / "power").string();
  REQUIRE(run(ps) == 0);
  const std::string csv = slurp(dir.path / "power" / "power_table.csv");
  CHECK(csv.find("model,gamma,full_plain,full_augmented(ols),plain,augmented(ols),chosen") !=
        std::string::npos);
}

TEST_CASE("simulate sweep emits the drivers layout") {
  TempDir dir;
  RunConfig sim;
  sim.command = "simulate";
  sim.sweep = "drivers";
  sim.dgp.n = 4000;  // smoke scale; the acceptance suite runs the full size
  sim.seed = 105;
  sim.out_dir = dir.path.string();
  REQUIRE(run(sim) == 0);
  const std::string csv = slurp(dir.path / "drivers.csv");
  CHECK(csv.find("tau,beta_y,beta_pi,sigma_y,var_y,var_w,cor_wy,lambda_tilde,r2_tilde,failed") !=
        std::string::npos);
  // 8 + 5 + 6 + 15 grid rows plus the header
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 35);
}
