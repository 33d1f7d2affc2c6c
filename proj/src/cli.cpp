#include "dsense/cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

namespace dsense {

using nlohmann::json;

namespace {

void write_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw_data("cannot open output file: " + tmp);
    out << content;
    if (!out) throw_data("failed writing " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

std::string csv_num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

json spec_to_json(const SensitivitySpec& spec) {
  return {{"model", spec.model == SensitivityModel::vbm ? "vbm" : "msm"},
          {"parameter", spec.parameter}};
}

json interval_to_json(const EffectIntervalEstimate& e) {
  json j = {{"lower", e.lower},   {"upper", e.upper},
            {"point", e.point},   {"alpha", e.alpha},
            {"bootstrap_reps", e.bootstrap_reps}, {"spec", spec_to_json(e.spec)}};
  if (e.ci_lower) j["ci_lower"] = *e.ci_lower;
  if (e.ci_upper) j["ci_upper"] = *e.ci_upper;
  return j;
}

json ds_to_json(const DesignSensitivityResult& r) {
  json j = {{"model", r.model == SensitivityModel::vbm ? "vbm" : "msm"},
            {"attained", r.attained},
            {"iterations", r.iterations},
            {"residual", r.residual}};
  if (std::isinf(r.value))
    j["value"] = "inf";
  else
    j["value"] = r.value;
  if (r.no_confounding_possible) j["no_confounding_possible"] = true;
  return j;
}

json config_to_json(const RunConfig& c) {
  json j;
  j["command"] = c.command;
  j["input"] = c.input_path;
  j["outcome_col"] = c.outcome_col;
  j["treatment_col"] = c.treatment_col;
  j["covariate_cols"] = c.covariate_cols;
  if (c.trim_propensity) j["trim_propensity"] = *c.trim_propensity;
  if (c.trim_weight) j["trim_weight"] = *c.trim_weight;
  j["augment"] = c.augment;
  j["lambda"] = c.lambda_values;
  j["r2"] = c.r2_values;
  j["tau_grid"] = c.tau_grid;
  j["reps"] = c.reps;
  j["alpha"] = c.alpha;
  j["seed"] = c.seed;
  j["planning_fraction"] = c.planning_fraction;
  j["splits"] = c.splits;
  j["outcome_sim"] = c.outcome_sim;
  if (c.proxy_r2) j["proxy_r2"] = *c.proxy_r2;
  j["sweep"] = c.sweep;
  j["dgp"] = {{"mu_x", c.dgp.mu_x},       {"sigma_x", c.dgp.sigma_x},
              {"beta_pi", c.dgp.beta_pi}, {"beta_y", c.dgp.beta_y},
              {"sigma_y", c.dgp.sigma_y}, {"tau0", c.dgp.tau0},
              {"beta_tau", c.dgp.beta_tau}, {"n", c.dgp.n}};
  j["misspec_tau"] = c.misspec_tau;
  j["workers"] = c.workers;
  j["out_dir"] = c.out_dir;
  return j;
}

void config_from_json(const json& j, RunConfig* c) {
  const json& cfg = j.contains("config") ? j.at("config") : j;
  if (cfg.contains("command")) c->command = cfg.at("command").get<std::string>();
  if (cfg.contains("input")) c->input_path = cfg.at("input").get<std::string>();
  if (cfg.contains("outcome_col")) c->outcome_col = cfg.at("outcome_col").get<std::string>();
  if (cfg.contains("treatment_col")) c->treatment_col = cfg.at("treatment_col").get<std::string>();
  if (cfg.contains("covariate_cols"))
    c->covariate_cols = cfg.at("covariate_cols").get<std::vector<std::string>>();
  if (cfg.contains("trim_propensity")) c->trim_propensity = cfg.at("trim_propensity").get<double>();
  if (cfg.contains("trim_weight")) c->trim_weight = cfg.at("trim_weight").get<double>();
  if (cfg.contains("augment")) c->augment = cfg.at("augment").get<std::string>();
  if (cfg.contains("lambda")) c->lambda_values = cfg.at("lambda").get<std::vector<double>>();
  if (cfg.contains("r2")) c->r2_values = cfg.at("r2").get<std::vector<double>>();
  if (cfg.contains("tau_grid")) c->tau_grid = cfg.at("tau_grid").get<std::vector<double>>();
  if (cfg.contains("reps")) c->reps = cfg.at("reps").get<int>();
  if (cfg.contains("alpha")) c->alpha = cfg.at("alpha").get<double>();
  if (cfg.contains("seed")) c->seed = cfg.at("seed").get<std::uint64_t>();
  if (cfg.contains("planning_fraction"))
    c->planning_fraction = cfg.at("planning_fraction").get<double>();
  if (cfg.contains("splits")) c->splits = cfg.at("splits").get<int>();
  if (cfg.contains("outcome_sim")) c->outcome_sim = cfg.at("outcome_sim").get<bool>();
  if (cfg.contains("proxy_r2")) c->proxy_r2 = cfg.at("proxy_r2").get<double>();
  if (cfg.contains("sweep")) c->sweep = cfg.at("sweep").get<std::string>();
  if (cfg.contains("dgp")) {
    const json& d = cfg.at("dgp");
    if (d.contains("mu_x")) c->dgp.mu_x = d.at("mu_x").get<double>();
    if (d.contains("sigma_x")) c->dgp.sigma_x = d.at("sigma_x").get<double>();
    if (d.contains("beta_pi")) c->dgp.beta_pi = d.at("beta_pi").get<double>();
    if (d.contains("beta_y")) c->dgp.beta_y = d.at("beta_y").get<double>();
    if (d.contains("sigma_y")) c->dgp.sigma_y = d.at("sigma_y").get<double>();
    if (d.contains("tau0")) c->dgp.tau0 = d.at("tau0").get<double>();
    if (d.contains("beta_tau")) c->dgp.beta_tau = d.at("beta_tau").get<double>();
    if (d.contains("n")) c->dgp.n = d.at("n").get<int>();
  }
  if (cfg.contains("misspec_tau")) c->misspec_tau = cfg.at("misspec_tau").get<double>();
  if (cfg.contains("workers")) c->workers = cfg.at("workers").get<int>();
  if (cfg.contains("out_dir")) c->out_dir = cfg.at("out_dir").get<std::string>();
}

}  // namespace

void RunConfig::validate() const {
  static const std::vector<std::string> commands = {
      "fit", "sensitivity", "design-sensitivity", "plan", "power-split", "simulate"};
  if (std::find(commands.begin(), commands.end(), command) == commands.end())
    throw_config("unknown command '" + command + "'");
  if (command != "simulate" && input_path.empty())
    throw_config("--input is required for command '" + command + "'");
  if (command != "simulate" && covariate_cols.empty())
    throw_config("--covariate-cols is required for command '" + command + "'");
  if (trim_propensity && trim_weight)
    throw_config("choose one of --trim-propensity and --trim-weight");
  if (trim_propensity && !(*trim_propensity > 0.5 && *trim_propensity <= 1.0))
    throw_config("--trim-propensity must lie in (0.5, 1]");
  if (trim_weight && !(*trim_weight > 0.0)) throw_config("--trim-weight must be positive");
  if (augment != "none" && augment != "ols" && augment.rfind("column:", 0) != 0)
    throw_config("--augment must be none, ols or column:<name>");
  if (!(alpha > 0.0 && alpha < 1.0)) throw_config("--alpha must be in (0,1)");
  if (reps < 2) throw_config("--reps must be at least 2");
  if (splits < 1) throw_config("--splits must be at least 1");
  if (!(planning_fraction > 0.0 && planning_fraction < 1.0))
    throw_config("--planning-fraction must be in (0,1)");
  for (double l : lambda_values)
    if (!(l >= 1.0)) throw_config("--lambda values must be >= 1");
  for (double r : r2_values)
    if (!(r >= 0.0 && r < 1.0)) throw_config("--r2 values must be in [0,1)");
  for (double t : tau_grid)
    if (!(t > 0.0)) throw_config("--tau-grid values must be positive");
  if (proxy_r2 && !(*proxy_r2 >= 0.0 && *proxy_r2 < 1.0))
    throw_config("--proxy-r2 must be in [0,1)");
  if (!sweep.empty() && sweep != "drivers" && sweep != "heterogeneity" &&
      sweep != "misspecification")
    throw_config("--sweep must be drivers, heterogeneity or misspecification");
  if (workers < 0) throw_config("--workers must be nonnegative");
}

TrimRule RunConfig::trim_rule() const {
  if (trim_propensity) return TrimRule::propensity(*trim_propensity);
  if (trim_weight) return TrimRule::weight(*trim_weight);
  return TrimRule::none();
}

std::vector<DesignSpec> RunConfig::design_menu() const {
  std::vector<DesignSpec> menu = {DesignSpec::plain()};
  if (trim_propensity || trim_weight) menu.push_back(DesignSpec::trimmed(trim_rule()));
  if (augment == "ols") menu.push_back(DesignSpec::augmented(OutcomeModelSpec::ols()));
  if (augment.rfind("column:", 0) == 0)
    menu.push_back(DesignSpec::augmented(OutcomeModelSpec::external()));
  return menu;
}

RunConfig parse_cli(int argc, const char* const* argv) {
  RunConfig config;
  if (const char* env_seed = std::getenv("DSENSE_SEED")) {
    config.seed = std::strtoull(env_seed, nullptr, 10);
  }

  // pass 1: load the config file, if any, so that flags override its values
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      std::ifstream in(argv[i + 1]);
      if (!in) throw_config(std::string("cannot open config file: ") + argv[i + 1]);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw_config(std::string("config JSON parse error: ") + e.what());
      }
      config_from_json(j, &config);
      break;
    }
  }

  CLI::App app{"dsense: sensitivity analysis and design sensitivity for weighted observational studies"};

  std::string config_path;
  std::string covariate_csv;
  std::string lambda_csv;
  std::string r2_csv;
  std::string tau_csv;

  app.add_option("--config", config_path, "JSON config file (flags override it)");
  app.add_option("--input", config.input_path, "input CSV path");
  app.add_option("--outcome-col", config.outcome_col, "outcome column name");
  app.add_option("--treatment-col", config.treatment_col, "treatment column name");
  app.add_option("--covariate-cols", covariate_csv, "comma-separated covariate columns");
  app.add_option("--trim-propensity", config.trim_propensity, "propensity cutoff in (0.5,1]");
  app.add_option("--trim-weight", config.trim_weight, "raw weight cutoff");
  app.add_option("--augment", config.augment, "none | ols | column:<name>");
  app.add_option("--lambda", lambda_csv, "comma-separated marginal-model parameters");
  app.add_option("--r2", r2_csv, "comma-separated variance-model parameters");
  app.add_option("--tau-grid", tau_csv, "comma-separated hypothesized effects");
  app.add_option("--reps", config.reps, "bootstrap replicates");
  app.add_option("--alpha", config.alpha, "test level");
  app.add_option("--seed", config.seed, "top-level seed");
  app.add_option("--planning-fraction", config.planning_fraction, "planning share");
  app.add_option("--splits", config.splits, "number of planning splits");
  app.add_flag("--outcome-sim", config.outcome_sim, "simulate outcomes from a planning model");
  app.add_option("--proxy-r2", config.proxy_r2, "proxy outcome model r2");
  app.add_option("--sweep", config.sweep, "simulate: drivers | heterogeneity | misspecification");
  app.add_option("--sim-n", config.dgp.n, "simulate: sample size");
  app.add_option("--sim-tau", config.dgp.tau0, "simulate: effect");
  app.add_option("--sim-beta-pi", config.dgp.beta_pi, "simulate: treatment slope");
  app.add_option("--sim-beta-y", config.dgp.beta_y, "simulate: outcome slope");
  app.add_option("--sim-sigma-y", config.dgp.sigma_y, "simulate: noise sd");
  app.add_option("--sim-beta-tau", config.dgp.beta_tau, "simulate: effect slope");
  app.add_option("--sim-mu-x", config.dgp.mu_x, "simulate: covariate mean");
  app.add_option("--sim-sigma-x", config.dgp.sigma_x, "simulate: covariate sd");
  app.add_option("--misspec-tau", config.misspec_tau, "misspecification sweep effect");
  app.add_option("--workers", config.workers, "worker threads (0 = hardware)");
  app.add_option("--out-dir", config.out_dir, "output directory");

  std::vector<std::string> positional;
  app.add_option("command", positional, "fit | sensitivity | design-sensitivity | plan | power-split | simulate");

  try {
    app.parse(argc, const_cast<char**>(argv));
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      // --help
      std::cout << app.help() << std::endl;
      std::exit(0);
    }
    throw_config(std::string("flag parsing failed: ") + e.what());
  }

  if (!positional.empty()) config.command = positional.front();
  if (!covariate_csv.empty()) {
    config.covariate_cols.clear();
    std::stringstream ss(covariate_csv);
    std::string item;
    while (std::getline(ss, item, ',')) config.covariate_cols.push_back(item);
  }
  auto parse_list = [](const std::string& csv) {
    std::vector<double> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
    return out;
  };
  if (!lambda_csv.empty()) config.lambda_values = parse_list(lambda_csv);
  if (!r2_csv.empty()) config.r2_values = parse_list(r2_csv);
  if (!tau_csv.empty()) config.tau_grid = parse_list(tau_csv);
  return config;
}

namespace {

CsvSchema schema_of(const RunConfig& config) {
  CsvSchema schema;
  schema.outcome_col = config.outcome_col;
  schema.treatment_col = config.treatment_col;
  schema.covariate_cols = config.covariate_cols;
  if (config.augment.rfind("column:", 0) == 0)
    schema.prediction_col = config.augment.substr(std::string("column:").size());
  return schema;
}

std::vector<SensitivitySpec> specs_of(const RunConfig& config) {
  std::vector<SensitivitySpec> specs;
  for (double l : config.lambda_values) specs.push_back(SensitivitySpec::msm(l));
  for (double r : config.r2_values) specs.push_back(SensitivitySpec::vbm(r));
  if (specs.empty()) specs.push_back(SensitivitySpec::msm(1.0));
  return specs;
}

int effective_workers(const RunConfig& config) {
  return config.workers == 0 ? default_workers() : config.workers;
}

json run_fit(const RunConfig& config, Diagnostics* diag, std::vector<std::string>* csv_names,
             std::vector<std::string>* csv_bodies) {
  const ObservationTable table = load_csv(config.input_path, schema_of(config));
  json results;
  std::ostringstream weights_csv;
  weights_csv << "design,unit_id,propensity,weight,kept\n";
  for (const DesignSpec& design : config.design_menu()) {
    const DesignFit fit = build_design(table, design, diag);
    json entry;
    entry["design"] = design.name();
    entry["att"] = fit.att.value;
    entry["n_treated_used"] = fit.att.n_treated_used;
    entry["n_controls_used"] = fit.att.n_controls_used;
    entry["control_mean_component"] = fit.att.control_mean_component;
    entry["treated_mean_component"] = fit.att.treated_mean_component;
    entry["propensity"] = {{"converged", fit.propensity.converged},
                           {"iterations", fit.propensity.iterations},
                           {"gradient_norm", fit.propensity.gradient_norm},
                           {"separation_suspected", fit.propensity.separation_suspected}};
    std::vector<double> coefs(fit.propensity.coefficients.data(),
                              fit.propensity.coefficients.data() + fit.propensity.coefficients.size());
    entry["propensity"]["coefficients"] = coefs;
    entry["moments"] = {{"var_w", fit.moments.var_w},
                        {"var_y", fit.moments.var_y},
                        {"cor_wy", fit.moments.cor_wy},
                        {"mean_wy", fit.moments.mean_wy},
                        {"n_controls", fit.moments.n_controls}};
    if (fit.model) {
      entry["outcome_model"] = {{"training_r2", fit.model->training_r2},
                                {"residual_variance", fit.model->residual_variance}};
    }
    if (fit.weights.equivalent_weight_cutoff)
      entry["equivalent_weight_cutoff"] = *fit.weights.equivalent_weight_cutoff;
    results["designs"].push_back(entry);

    const std::vector<int> controls = table.control_indices();
    for (std::size_t k = 0; k < controls.size(); ++k) {
      weights_csv << design.name() << ',' << table.unit_ids[static_cast<std::size_t>(controls[k])]
                  << ',' << csv_num(fit.propensity.fitted_probabilities[controls[k]]) << ','
                  << csv_num(fit.weights.control_weights[static_cast<Eigen::Index>(k)]) << ','
                  << int(fit.weights.kept_control[k]) << '\n';
    }
  }
  csv_names->push_back("weights.csv");
  csv_bodies->push_back(weights_csv.str());
  return results;
}

json run_sensitivity(const RunConfig& config, Diagnostics* diag,
                     std::vector<std::string>* csv_names, std::vector<std::string>* csv_bodies) {
  const ObservationTable table = load_csv(config.input_path, schema_of(config));
  const std::vector<SensitivitySpec> specs = specs_of(config);
  const int workers = effective_workers(config);
  json results;
  std::ostringstream csv;
  csv << "design,model,gamma,lower,upper,point,ci_lower,ci_upper,reject_null\n";
  std::size_t design_index = 0;
  for (const DesignSpec& design : config.design_menu()) {
    const BootstrapCache cache =
        make_bootstrap_cache(table, design, config.reps,
                             derive_seed(config.seed, "cli-sensitivity", design_index), workers, diag);
    json entry;
    entry["design"] = design.name();
    entry["att"] = cache.full.att;
    for (const SensitivitySpec& spec : specs) {
      const EffectIntervalEstimate e = ci_from_cache(cache, spec, config.alpha);
      entry["intervals"].push_back(interval_to_json(e));
      csv << design.name() << ',' << (spec.model == SensitivityModel::vbm ? "vbm" : "msm") << ','
          << csv_num(spec.parameter) << ',' << csv_num(e.lower) << ',' << csv_num(e.upper) << ','
          << csv_num(e.point) << ',' << csv_num(*e.ci_lower) << ',' << csv_num(*e.ci_upper) << ','
          << (e.excludes_zero() ? 1 : 0) << '\n';
    }
    for (SensitivityModel model : {SensitivityModel::msm, SensitivityModel::vbm}) {
      const RobustnessValue rv = robustness_value_from_cache(cache, model, config.alpha);
      json rj;
      rj["model"] = model == SensitivityModel::vbm ? "vbm" : "msm";
      rj["status"] = rv.status == RobustnessValue::Status::ok
                         ? "ok"
                         : (rv.status == RobustnessValue::Status::not_significant
                                ? "not_significant_at_null"
                                : "unbounded");
      if (std::isinf(rv.value))
        rj["value"] = "inf";
      else
        rj["value"] = rv.value;
      entry["robustness_value"].push_back(rj);
    }
    entry["note"] =
        "interval endpoints bound the effect interval from outside; they are not sharp";
    results["designs"].push_back(entry);
    ++design_index;
  }
  csv_names->push_back("sensitivity.csv");
  csv_bodies->push_back(csv.str());
  return results;
}

json run_design_sensitivity(const RunConfig& config, Diagnostics* diag,
                            std::vector<std::string>* csv_names,
                            std::vector<std::string>* csv_bodies) {
  const ObservationTable table = load_csv(config.input_path, schema_of(config));
  std::vector<double> taus = config.tau_grid;
  if (taus.empty()) throw_config("design-sensitivity needs --tau-grid");
  const std::vector<DesignSpec> menu = config.design_menu();

  std::vector<DesignFit> fits;
  const PropensityFit pfit = fit_logistic(table, diag);
  for (const DesignSpec& design : menu) fits.push_back(build_design_with_fit(table, pfit, design, diag));

  json results;
  std::ostringstream csv;
  csv << "tau";
  for (const DesignSpec& design : menu) csv << ",r2_" << design.name() << ",lambda_" << design.name();
  csv << '\n';
  for (double tau : taus) {
    csv << csv_num(tau);
    json row;
    row["tau"] = tau;
    for (std::size_t d = 0; d < menu.size(); ++d) {
      const FavorableSituation situation = situation_from_design(fits[d], tau);
      const DesignSensitivityResult r2 = ds_vbm(situation);
      const DesignSensitivityResult lam = ds_msm(situation);
      csv << ',' << csv_num(r2.value) << ','
          << (std::isinf(lam.value) ? "inf" : csv_num(lam.value));
      json cell;
      cell["design"] = menu[d].name();
      cell["vbm"] = ds_to_json(r2);
      cell["msm"] = ds_to_json(lam);
      row["designs"].push_back(cell);
    }
    csv << '\n';
    results["curve"].push_back(row);
  }
  // gain criteria against the plain design
  for (std::size_t d = 1; d < menu.size(); ++d) {
    const GainVerdict verdict = menu[d].kind == EstimatorKind::trimmed
                                    ? trimming_gain(fits[0].moments, fits[d].moments)
                                    : augmentation_gain(fits[0].moments, fits[d].moments);
    json gj;
    gj["design"] = menu[d].name();
    gj["criterion"] = menu[d].kind == EstimatorKind::trimmed ? "trimming" : "augmentation";
    gj["improves"] = verdict.improves;
    gj["undefined"] = verdict.undefined;
    gj["lhs"] = verdict.lhs;
    gj["rhs"] = verdict.rhs;
    if (menu[d].kind == EstimatorKind::trimmed) {
      gj["factor_a"] = verdict.factor_a;
      gj["factor_b"] = verdict.factor_b;
      gj["factor_c"] = verdict.factor_c;
    }
    results["gain_criteria"].push_back(gj);
  }
  csv_names->push_back("design_sensitivity.csv");
  csv_bodies->push_back(csv.str());
  return results;
}

json run_plan(const RunConfig& config, Diagnostics* diag, std::vector<std::string>* csv_names,
              std::vector<std::string>* csv_bodies) {
  const ObservationTable table = load_csv(config.input_path, schema_of(config));
  std::vector<double> taus = config.tau_grid;
  if (taus.empty()) throw_config("plan needs --tau-grid");

  PlanningConfig pc;
  pc.fraction = config.planning_fraction;
  pc.n_splits = config.splits;
  pc.menu = config.design_menu();
  pc.lambda_values = config.lambda_values.empty() ? std::vector<double>{1.5} : config.lambda_values;
  pc.r2_values = config.r2_values.empty() ? std::vector<double>{0.1} : config.r2_values;
  pc.alpha = config.alpha;
  pc.bootstrap_reps = config.reps;
  pc.seed = config.seed;
  pc.outcome_sim = config.outcome_sim;
  pc.proxy_r2 = config.proxy_r2;

  json results;
  std::ostringstream csv;
  csv << "tau,design,model,value,attained\n";
  for (double tau : taus) {
    const std::vector<PlanningDsResult> ds =
        config.outcome_sim ? ds_from_planning_simulated(table, pc, tau, diag)
                           : ds_from_planning(table, pc, tau, diag);
    for (const PlanningDsResult& r : ds) {
      json row;
      row["tau"] = tau;
      row["design"] = r.design.name();
      row["vbm"] = ds_to_json(r.vbm);
      row["msm"] = ds_to_json(r.msm);
      results["planning_ds"].push_back(row);
      csv << csv_num(tau) << ',' << r.design.name() << ",vbm," << csv_num(r.vbm.value) << ','
          << (r.vbm.attained ? 1 : 0) << '\n';
      csv << csv_num(tau) << ',' << r.design.name() << ",msm,"
          << (std::isinf(r.msm.value) ? "inf" : csv_num(r.msm.value)) << ','
          << (r.msm.attained ? 1 : 0) << '\n';
    }
    if (config.proxy_r2) {
      // proxy outcome model on the planning controls' outcomes
      const SplitResult split =
          split_planning(table, pc.fraction, SplitMode::controls_only, pc.seed);
      const ProxyOutcome proxy = proxy_outcome(split.planning.outcome, *config.proxy_r2,
                                               derive_seed(pc.seed, "cli-proxy", 0));
      PlanningConfig proxy_pc = pc;
      proxy_pc.menu = {DesignSpec::plain()};
      // swap residuals in as outcomes for the augmented-by-proxy situation
      ObservationTable proxied = table;
      for (int i = 0; i < split.planning.n(); ++i)
        proxied.outcome[split.planning.unit_ids[static_cast<std::size_t>(i)]] =
            proxy.residuals[i];
      const std::vector<PlanningDsResult> pr = ds_from_planning(proxied, proxy_pc, tau, diag);
      json row;
      row["tau"] = tau;
      row["design"] = "proxy(r2=" + std::to_string(*config.proxy_r2) + ")";
      row["realized_r2"] = proxy.realized_r2;
      row["vbm"] = ds_to_json(pr[0].vbm);
      row["msm"] = ds_to_json(pr[0].msm);
      results["planning_ds"].push_back(row);
      csv << csv_num(tau) << ",proxy,vbm," << csv_num(pr[0].vbm.value) << ','
          << (pr[0].vbm.attained ? 1 : 0) << '\n';
      csv << csv_num(tau) << ",proxy,msm,"
          << (std::isinf(pr[0].msm.value) ? "inf" : csv_num(pr[0].msm.value)) << ','
          << (pr[0].msm.attained ? 1 : 0) << '\n';
    }
  }
  csv_names->push_back("planning_ds.csv");
  csv_bodies->push_back(csv.str());
  return results;
}

json run_power_split(const RunConfig& config, Diagnostics* diag,
                     std::vector<std::string>* csv_names, std::vector<std::string>* csv_bodies) {
  const ObservationTable table = load_csv(config.input_path, schema_of(config));
  PlanningConfig pc;
  pc.fraction = config.planning_fraction;
  pc.n_splits = config.splits;
  pc.menu = config.design_menu();
  pc.lambda_values = config.lambda_values;
  pc.r2_values = config.r2_values;
  pc.alpha = config.alpha;
  pc.bootstrap_reps = config.reps;
  pc.seed = config.seed;
  const PowerTable pt = power_by_splitting(table, pc, effective_workers(config), diag);

  json results;
  std::ostringstream csv;
  csv << "model,gamma";
  for (const auto& name : pt.estimator_names) csv << ",full_" << name;
  for (const auto& name : pt.estimator_names) csv << ',' << name;
  if (pt.has_chosen) csv << ",chosen";
  csv << '\n';
  for (std::size_t q = 0; q < pt.specs.size(); ++q) {
    const bool vbm = pt.specs[q].model == SensitivityModel::vbm;
    csv << (vbm ? "vbm" : "msm") << ',' << csv_num(pt.specs[q].parameter);
    for (std::size_t d = 0; d < pt.estimator_names.size(); ++d)
      csv << ',' << pt.full_sample_reject[q][d];
    for (std::size_t d = 0; d < pt.proportions[q].size(); ++d)
      csv << ',' << csv_num(pt.proportions[q][d]);
    csv << '\n';

    json row;
    row["model"] = vbm ? "vbm" : "msm";
    row["gamma"] = pt.specs[q].parameter;
    row["full_sample_reject"] = pt.full_sample_reject[q];
    row["power"] = pt.proportions[q];
    results["rows"].push_back(row);
  }
  results["estimators"] = pt.estimator_names;
  results["has_chosen_column"] = pt.has_chosen;
  results["selection_frequency"] = {{"vbm", pt.selection_frequency[0]},
                                    {"msm", pt.selection_frequency[1]}};
  results["n_splits_used"] = pt.n_splits_used;
  results["n_splits_failed"] = pt.n_splits_failed;
  csv_names->push_back("power_table.csv");
  csv_bodies->push_back(csv.str());
  return results;
}

json run_simulate(const RunConfig& config, Diagnostics* diag,
                  std::vector<std::string>* csv_names, std::vector<std::string>* csv_bodies) {
  const int workers = effective_workers(config);
  json results;
  if (config.sweep.empty()) {
    DgpConfig dgp = config.dgp;
    dgp.seed = config.seed;
    const ObservationTable table = sample_dgp(dgp);
    std::ostringstream csv;
    csv.precision(17);
    csv << "y,z,x\n";
    for (int i = 0; i < table.n(); ++i)
      csv << table.outcome[i] << ',' << table.treatment[i] << ',' << table.covariates(i, 0) << '\n';
    csv_names->push_back("sample.csv");
    csv_bodies->push_back(csv.str());
    results["n"] = table.n();
    results["n_treated"] = table.n_treated();
    return results;
  }
  if (config.sweep == "drivers") {
    const auto rows = sweep_drivers(drivers_grid(), config.dgp.n, config.seed, workers, diag);
    std::ostringstream csv;
    csv << "tau,beta_y,beta_pi,sigma_y,var_y,var_w,cor_wy,lambda_tilde,r2_tilde,failed\n";
    for (const auto& row : rows) {
      csv << csv_num(row.params.tau) << ',' << csv_num(row.params.beta_y) << ','
          << csv_num(row.params.beta_pi) << ',' << csv_num(row.params.sigma_y) << ','
          << csv_num(row.var_y) << ',' << csv_num(row.var_w) << ',' << csv_num(row.cor_wy) << ','
          << csv_num(row.lambda_tilde) << ',' << csv_num(row.r2_tilde) << ',' << row.failed << '\n';
      results["rows"].push_back({{"tau", row.params.tau},
                                 {"beta_y", row.params.beta_y},
                                 {"beta_pi", row.params.beta_pi},
                                 {"sigma_y", row.params.sigma_y},
                                 {"var_y", row.var_y},
                                 {"var_w", row.var_w},
                                 {"cor_wy", row.cor_wy},
                                 {"lambda_tilde", row.lambda_tilde},
                                 {"r2_tilde", row.r2_tilde},
                                 {"failed", row.failed}});
    }
    csv_names->push_back("drivers.csv");
    csv_bodies->push_back(csv.str());
    return results;
  }
  if (config.sweep == "misspecification") {
    const auto rows = sweep_misspecification(misspec_sigma_grid(), misspec_model_grid(),
                                             config.misspec_tau, config.dgp.n, config.seed,
                                             workers, diag);
    std::ostringstream csv;
    csv << "sigma_y,model,cor_wy,var_y,cor_we,var_e,lambda,lambda_aug,lambda_change,"
           "r2,r2_aug,r2_change,failed\n";
    for (const auto& row : rows) {
      csv << csv_num(row.sigma_y) << ',' << misspec_model_name(row.model) << ','
          << csv_num(row.cor_wy) << ',' << csv_num(row.var_y) << ',' << csv_num(row.cor_we) << ','
          << csv_num(row.var_e) << ',' << csv_num(row.lambda_tilde) << ','
          << csv_num(row.lambda_aug) << ',' << csv_num(row.lambda_aug - row.lambda_tilde) << ','
          << csv_num(row.r2_tilde) << ',' << csv_num(row.r2_aug) << ','
          << csv_num(row.r2_aug - row.r2_tilde) << ',' << row.failed << '\n';
      results["rows"].push_back({{"sigma_y", row.sigma_y},
                                 {"model", misspec_model_name(row.model)},
                                 {"cor_wy", row.cor_wy},
                                 {"var_y", row.var_y},
                                 {"cor_we", row.cor_we},
                                 {"var_e", row.var_e},
                                 {"lambda_tilde", row.lambda_tilde},
                                 {"lambda_aug", row.lambda_aug},
                                 {"r2_tilde", row.r2_tilde},
                                 {"r2_aug", row.r2_aug},
                                 {"failed", row.failed}});
    }
    csv_names->push_back("misspecification.csv");
    csv_bodies->push_back(csv.str());
    return results;
  }
  // heterogeneity
  const auto rows = sweep_heterogeneity(heterogeneity_beta_tau_grid(), heterogeneity_defaults(),
                                        config.dgp.n, config.seed, workers, diag);
  std::ostringstream csv;
  csv << "beta_tau,tau0,trimmed_att,lambda,lambda_trim,lambda_change,r2,r2_trim,r2_change,"
         "var_y,var_y_trim,cor_wy,cor_trim,var_w,var_w_trim,failed\n";
  for (const auto& row : rows) {
    csv << csv_num(row.beta_tau) << ',' << csv_num(row.tau0) << ',' << csv_num(row.trimmed_att)
        << ',' << csv_num(row.lambda_tilde) << ',' << csv_num(row.lambda_trim) << ','
        << csv_num(row.lambda_trim - row.lambda_tilde) << ',' << csv_num(row.r2_tilde) << ','
        << csv_num(row.r2_trim) << ',' << csv_num(row.r2_trim - row.r2_tilde) << ','
        << csv_num(row.var_y) << ',' << csv_num(row.var_y_trim) << ',' << csv_num(row.cor_wy)
        << ',' << csv_num(row.cor_trim) << ',' << csv_num(row.var_w) << ','
        << csv_num(row.var_w_trim) << ',' << row.failed << '\n';
    results["rows"].push_back({{"beta_tau", row.beta_tau},
                               {"tau0", row.tau0},
                               {"trimmed_att", row.trimmed_att},
                               {"lambda_tilde", row.lambda_tilde},
                               {"lambda_trim", row.lambda_trim},
                               {"r2_tilde", row.r2_tilde},
                               {"r2_trim", row.r2_trim},
                               {"failed", row.failed}});
  }
  csv_names->push_back("heterogeneity.csv");
  csv_bodies->push_back(csv.str());
  return results;
}

}  // namespace

int run(const RunConfig& config) {
  try {
    config.validate();
    std::filesystem::create_directories(config.out_dir);

    Diagnostics diag;
    std::vector<std::string> csv_names;
    std::vector<std::string> csv_bodies;
    json results;
    if (config.command == "fit") {
      results = run_fit(config, &diag, &csv_names, &csv_bodies);
    } else if (config.command == "sensitivity") {
      results = run_sensitivity(config, &diag, &csv_names, &csv_bodies);
    } else if (config.command == "design-sensitivity") {
      results = run_design_sensitivity(config, &diag, &csv_names, &csv_bodies);
    } else if (config.command == "plan") {
      results = run_plan(config, &diag, &csv_names, &csv_bodies);
    } else if (config.command == "power-split") {
      results = run_power_split(config, &diag, &csv_names, &csv_bodies);
    } else {
      results = run_simulate(config, &diag, &csv_names, &csv_bodies);
    }

    json report;
    report["command"] = config.command;
    report["seed"] = config.seed;
    report["config"] = config_to_json(config);
    report["results"] = results;
    report["diagnostics"] = diag.warnings();
    report["outputs"] = csv_names;
    const std::filesystem::path dir(config.out_dir);
    write_atomic((dir / "report.json").string(), report.dump(2) + "\n");
    for (std::size_t i = 0; i < csv_names.size(); ++i)
      write_atomic((dir / csv_names[i]).string(), csv_bodies[i]);
    for (const auto& w : diag.warnings()) std::cerr << "warning: " << w << '\n';
    std::cout << "wrote " << (dir / "report.json").string() << '\n';
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::config:
        return 2;
      case ErrorKind::data:
        return 3;
      case ErrorKind::numeric:
        return 4;
    }
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
}

int run_cli(int argc, const char* const* argv) {
  try {
    const RunConfig config = parse_cli(argc, argv);
    return run(config);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == ErrorKind::config ? 2 : (e.kind() == ErrorKind::data ? 3 : 4);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace dsense
