#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dsense/cli.hpp"
#include "dsense/design_sensitivity.hpp"
#include "dsense/planning.hpp"
#include "dsense/sensitivity.hpp"
#include "dsense/simulation.hpp"

namespace py = pybind11;
using namespace dsense;

namespace {

std::vector<bool> to_bools(const std::vector<char>& mask) {
  return std::vector<bool>(mask.begin(), mask.end());
}

}  // namespace

PYBIND11_MODULE(_dsense, m) {
  m.doc() = "Sensitivity analysis and design sensitivity for weighted observational studies";

  py::register_exception<Error>(m, "DsenseError");

  // ------------------------------------------------------------------ data
  py::class_<ObservationTable>(m, "ObservationTable")
      .def_readonly("outcome", &ObservationTable::outcome)
      .def_readonly("treatment", &ObservationTable::treatment)
      .def_readonly("covariates", &ObservationTable::covariates)
      .def_readonly("unit_ids", &ObservationTable::unit_ids)
      .def_property_readonly("n", &ObservationTable::n)
      .def_property_readonly("n_treated", &ObservationTable::n_treated)
      .def_property_readonly("n_controls", &ObservationTable::n_controls)
      .def("subset", &ObservationTable::subset, py::arg("rows"));

  m.def(
      "make_table",
      [](Eigen::VectorXd y, Eigen::VectorXi z, Eigen::MatrixXd x) {
        return make_table(std::move(y), std::move(z), std::move(x));
      },
      py::arg("outcome"), py::arg("treatment"), py::arg("covariates"));

  m.def(
      "load_csv",
      [](const std::string& path, const std::string& outcome_col,
         const std::string& treatment_col, const std::vector<std::string>& covariate_cols,
         const std::optional<std::string>& prediction_col) {
        return load_csv(path, {outcome_col, treatment_col, covariate_cols, prediction_col});
      },
      py::arg("path"), py::arg("outcome_col"), py::arg("treatment_col"),
      py::arg("covariate_cols"), py::arg("prediction_col") = std::nullopt);
  m.def("write_csv", &write_csv, py::arg("table"), py::arg("path"));

  py::enum_<SplitMode>(m, "SplitMode")
      .value("controls_only", SplitMode::controls_only)
      .value("full_split", SplitMode::full_split);

  py::class_<SplitResult>(m, "SplitResult")
      .def_readonly("planning", &SplitResult::planning)
      .def_readonly("analysis", &SplitResult::analysis)
      .def_readonly("seed", &SplitResult::seed);

  m.def("split_planning", &split_planning, py::arg("table"), py::arg("fraction"),
        py::arg("mode") = SplitMode::controls_only, py::arg("seed") = 0);

  // ------------------------------------------------------------ propensity
  py::class_<PropensityFit>(m, "PropensityFit")
      .def_readonly("coefficients", &PropensityFit::coefficients)
      .def_readonly("fitted_probabilities", &PropensityFit::fitted_probabilities)
      .def_readonly("converged", &PropensityFit::converged)
      .def_readonly("iterations", &PropensityFit::iterations)
      .def_readonly("gradient_norm", &PropensityFit::gradient_norm)
      .def_readonly("separation_suspected", &PropensityFit::separation_suspected);

  m.def(
      "fit_logistic", [](const ObservationTable& t) { return fit_logistic(t); },
      py::arg("table"));

  py::class_<TrimRule>(m, "TrimRule")
      .def_static("none", &TrimRule::none)
      .def_static("propensity", &TrimRule::propensity, py::arg("cutoff"))
      .def_static("weight", &TrimRule::weight, py::arg("cutoff"));

  py::class_<WeightSet>(m, "WeightSet")
      .def_readonly("control_weights", &WeightSet::control_weights)
      .def_readonly("normalized", &WeightSet::normalized)
      .def_property_readonly("kept_control",
                             [](const WeightSet& w) { return to_bools(w.kept_control); })
      .def_property_readonly("kept_treated",
                             [](const WeightSet& w) { return to_bools(w.kept_treated); })
      .def_property_readonly("equivalent_weight_cutoff",
                             [](const WeightSet& w) { return w.equivalent_weight_cutoff; })
      .def_property_readonly("n_kept_controls", &WeightSet::n_kept_controls);

  m.def(
      "att_weights",
      [](const PropensityFit& fit, const ObservationTable& t, bool normalize) {
        return att_weights(fit, t, normalize);
      },
      py::arg("fit"), py::arg("table"), py::arg("normalize") = true);
  m.def(
      "trim_weights",
      [](const WeightSet& w, const PropensityFit& fit, const ObservationTable& t,
         const TrimRule& rule) { return trim_weights(w, fit, t, rule); },
      py::arg("weights"), py::arg("fit"), py::arg("table"), py::arg("rule"));

  py::class_<WeightMoments>(m, "WeightMoments")
      .def(py::init([](double var_w, double var_y, double cor_wy) {
             WeightMoments mom;
             mom.var_w = var_w;
             mom.var_y = var_y;
             mom.cor_wy = cor_wy;
             return mom;
           }),
           py::arg("var_w"), py::arg("var_y"), py::arg("cor_wy"))
      .def_readonly("var_w", &WeightMoments::var_w)
      .def_readonly("var_y", &WeightMoments::var_y)
      .def_readonly("cor_wy", &WeightMoments::cor_wy)
      .def_readonly("mean_wy", &WeightMoments::mean_wy)
      .def_readonly("n_controls", &WeightMoments::n_controls)
      .def_readonly("zero_variance", &WeightMoments::zero_variance);

  m.def("weight_moments", &weight_moments, py::arg("weights"), py::arg("table"),
        py::arg("outcome_override") = std::nullopt);

  // ------------------------------------------------------------ estimators
  py::class_<OutcomeModel>(m, "OutcomeModel")
      .def_readonly("coefficients", &OutcomeModel::coefficients)
      .def_readonly("training_r2", &OutcomeModel::training_r2)
      .def_readonly("residual_variance", &OutcomeModel::residual_variance)
      .def("predict", &OutcomeModel::predict, py::arg("table"));

  py::class_<OutcomeModelSpec>(m, "OutcomeModelSpec")
      .def_static("ols", &OutcomeModelSpec::ols)
      .def_static("external", &OutcomeModelSpec::external);

  py::enum_<EstimatorKind>(m, "EstimatorKind")
      .value("plain", EstimatorKind::plain)
      .value("augmented", EstimatorKind::augmented)
      .value("trimmed", EstimatorKind::trimmed);

  py::class_<AttEstimate>(m, "AttEstimate")
      .def_readonly("value", &AttEstimate::value)
      .def_readonly("estimator_kind", &AttEstimate::estimator_kind)
      .def_readonly("n_treated_used", &AttEstimate::n_treated_used)
      .def_readonly("n_controls_used", &AttEstimate::n_controls_used)
      .def_readonly("treated_mean_component", &AttEstimate::treated_mean_component)
      .def_readonly("control_mean_component", &AttEstimate::control_mean_component);

  m.def("fit_outcome_model", &fit_outcome_model, py::arg("table"), py::arg("spec"));
  m.def("hajek_att", &hajek_att, py::arg("table"), py::arg("weights"));
  m.def("augmented_att", &augmented_att, py::arg("table"), py::arg("weights"), py::arg("model"));
  m.def("residualize", &residualize, py::arg("table"), py::arg("model"));

  // ---------------------------------------------------------------- design
  py::class_<DesignSpec>(m, "DesignSpec")
      .def_static("plain", &DesignSpec::plain)
      .def_static("trimmed", &DesignSpec::trimmed, py::arg("rule"))
      .def_static("augmented", &DesignSpec::augmented,
                  py::arg("model") = OutcomeModelSpec::ols())
      .def("name", &DesignSpec::name);

  py::class_<DesignFit>(m, "DesignFit")
      .def_readonly("propensity", &DesignFit::propensity)
      .def_readonly("weights", &DesignFit::weights)
      .def_readonly("att", &DesignFit::att)
      .def_readonly("variant_outcome", &DesignFit::variant_outcome)
      .def_readonly("variant_weight", &DesignFit::variant_weight)
      .def_readonly("treated_component", &DesignFit::treated_component)
      .def_readonly("moments", &DesignFit::moments);

  m.def(
      "build_design",
      [](const ObservationTable& t, const DesignSpec& spec) { return build_design(t, spec); },
      py::arg("table"), py::arg("design"));

  // ----------------------------------------------------------- sensitivity
  py::enum_<SensitivityModel>(m, "SensitivityModel")
      .value("vbm", SensitivityModel::vbm)
      .value("msm", SensitivityModel::msm);

  py::class_<SensitivitySpec>(m, "SensitivitySpec")
      .def_static("vbm", &SensitivitySpec::vbm, py::arg("r2"))
      .def_static("msm", &SensitivitySpec::msm, py::arg("lambda_"))
      .def_readonly("model", &SensitivitySpec::model)
      .def_readonly("parameter", &SensitivitySpec::parameter);

  py::class_<EffectIntervalEstimate>(m, "EffectIntervalEstimate")
      .def_readonly("lower", &EffectIntervalEstimate::lower)
      .def_readonly("upper", &EffectIntervalEstimate::upper)
      .def_readonly("point", &EffectIntervalEstimate::point)
      .def_readonly("ci_lower", &EffectIntervalEstimate::ci_lower)
      .def_readonly("ci_upper", &EffectIntervalEstimate::ci_upper)
      .def_readonly("alpha", &EffectIntervalEstimate::alpha)
      .def_readonly("bootstrap_reps", &EffectIntervalEstimate::bootstrap_reps)
      .def("excludes_zero", &EffectIntervalEstimate::excludes_zero);

  m.def("vbm_interval", &vbm_interval, py::arg("estimate"), py::arg("moments"), py::arg("r2"));
  m.def("vbm_bias_bound", &vbm_bias_bound, py::arg("moments"), py::arg("r2"));
  m.def("msm_extrema", &msm_extrema, py::arg("control_outcome"), py::arg("control_weight"),
        py::arg("treated_mean"), py::arg("lambda_"));
  m.def("interval_for_design", &interval_for_design, py::arg("design"), py::arg("spec"));
  m.def(
      "percentile_bootstrap_ci",
      [](const ObservationTable& t, const DesignSpec& d, const SensitivitySpec& s, int reps,
         double alpha, std::uint64_t seed, int workers) {
        return percentile_bootstrap_ci(t, d, s, reps, alpha, seed, workers);
      },
      py::arg("table"), py::arg("design"), py::arg("spec"), py::arg("reps") = 1000,
      py::arg("alpha") = 0.05, py::arg("seed") = 0, py::arg("workers") = 1);

  py::class_<RobustnessValue> rv(m, "RobustnessValue");
  py::enum_<RobustnessValue::Status>(rv, "Status")
      .value("ok", RobustnessValue::Status::ok)
      .value("not_significant", RobustnessValue::Status::not_significant)
      .value("unbounded", RobustnessValue::Status::unbounded);
  rv.def_readonly("value", &RobustnessValue::value)
      .def_readonly("status", &RobustnessValue::status);

  m.def(
      "robustness_value",
      [](const ObservationTable& t, const DesignSpec& d, SensitivityModel model, double alpha,
         int reps, std::uint64_t seed, int workers) {
        return robustness_value(t, d, model, alpha, reps, seed, workers);
      },
      py::arg("table"), py::arg("design"), py::arg("model"), py::arg("alpha") = 0.05,
      py::arg("reps") = 1000, py::arg("seed") = 0, py::arg("workers") = 1);

  // ---------------------------------------------------- design sensitivity
  py::enum_<SituationVariant>(m, "SituationVariant")
      .value("standard", SituationVariant::standard)
      .value("trimmed", SituationVariant::trimmed)
      .value("augmented", SituationVariant::augmented);

  py::class_<FavorableSituation>(m, "FavorableSituation")
      .def_readonly("tau", &FavorableSituation::tau)
      .def_readonly("control_outcome", &FavorableSituation::control_outcome)
      .def_readonly("control_weight", &FavorableSituation::control_weight)
      .def_readonly("variant", &FavorableSituation::variant)
      .def_readonly("moments", &FavorableSituation::moments);

  m.def("make_situation", &make_situation, py::arg("tau"), py::arg("control_outcome"),
        py::arg("control_weight"), py::arg("variant") = SituationVariant::standard);
  m.def("situation_from_design", &situation_from_design, py::arg("design"), py::arg("tau"));

  py::class_<DesignSensitivityResult>(m, "DesignSensitivityResult")
      .def_readonly("model", &DesignSensitivityResult::model)
      .def_readonly("value", &DesignSensitivityResult::value)
      .def_readonly("attained", &DesignSensitivityResult::attained)
      .def_readonly("no_confounding_possible",
                    &DesignSensitivityResult::no_confounding_possible)
      .def_readonly("iterations", &DesignSensitivityResult::iterations)
      .def_readonly("residual", &DesignSensitivityResult::residual);

  m.def("ds_vbm", &ds_vbm, py::arg("situation"));
  m.def("ds_vbm_from_moments", &ds_vbm_from_moments, py::arg("tau"), py::arg("moments"));
  m.def("ds_msm", &ds_msm, py::arg("situation"));
  m.def("msm_rhs", &msm_rhs, py::arg("situation"), py::arg("lambda_"));

  py::class_<GainVerdict>(m, "GainVerdict")
      .def_readonly("improves", &GainVerdict::improves)
      .def_readonly("undefined", &GainVerdict::undefined)
      .def_readonly("lhs", &GainVerdict::lhs)
      .def_readonly("rhs", &GainVerdict::rhs)
      .def_readonly("factor_a", &GainVerdict::factor_a)
      .def_readonly("factor_b", &GainVerdict::factor_b)
      .def_readonly("factor_c", &GainVerdict::factor_c);

  m.def("augmentation_gain", &augmentation_gain, py::arg("moments_y"), py::arg("moments_e"));
  m.def("trimming_gain", &trimming_gain, py::arg("moments_full"), py::arg("moments_trim"));

  py::class_<PowerInput>(m, "PowerInput")
      .def(py::init([](double n, double tau_w, double xi, double sigma_w, double sigma_nu,
                       double alpha) {
             PowerInput input;
             input.n = n;
             input.tau_w = tau_w;
             input.xi = xi;
             input.sigma_w = sigma_w;
             input.sigma_nu = sigma_nu;
             input.alpha = alpha;
             return input;
           }),
           py::arg("n"), py::arg("tau_w"), py::arg("xi"), py::arg("sigma_w"),
           py::arg("sigma_nu"), py::arg("alpha") = 0.05)
      .def_readonly("n", &PowerInput::n)
      .def_readonly("tau_w", &PowerInput::tau_w)
      .def_readonly("xi", &PowerInput::xi)
      .def_readonly("sigma_w", &PowerInput::sigma_w)
      .def_readonly("sigma_nu", &PowerInput::sigma_nu)
      .def_readonly("alpha", &PowerInput::alpha);

  m.def("power_formula", &power_formula, py::arg("input"));
  m.def(
      "power_inputs_from_bootstrap",
      [](const ObservationTable& t, const DesignSpec& d, const SensitivitySpec& s, int reps,
         std::uint64_t seed, double alpha, int workers) {
        return power_inputs_from_bootstrap(t, d, s, reps, seed, alpha, workers);
      },
      py::arg("table"), py::arg("design"), py::arg("spec"), py::arg("reps") = 1000,
      py::arg("seed") = 0, py::arg("alpha") = 0.05, py::arg("workers") = 1);

  // ------------------------------------------------------------ simulation
  py::class_<DgpConfig>(m, "DgpConfig")
      .def(py::init<>())
      .def_readwrite("mu_x", &DgpConfig::mu_x)
      .def_readwrite("sigma_x", &DgpConfig::sigma_x)
      .def_readwrite("beta_pi", &DgpConfig::beta_pi)
      .def_readwrite("beta_y", &DgpConfig::beta_y)
      .def_readwrite("sigma_y", &DgpConfig::sigma_y)
      .def_readwrite("tau0", &DgpConfig::tau0)
      .def_readwrite("beta_tau", &DgpConfig::beta_tau)
      .def_readwrite("n", &DgpConfig::n)
      .def_readwrite("seed", &DgpConfig::seed);

  m.def("sample_dgp", &sample_dgp, py::arg("config"));

  py::class_<DriversParams>(m, "DriversParams")
      .def(py::init([](double tau, double beta_y, double beta_pi, double sigma_y) {
             return DriversParams{tau, beta_y, beta_pi, sigma_y};
           }),
           py::arg("tau"), py::arg("beta_y") = 1.0, py::arg("beta_pi") = 1.0,
           py::arg("sigma_y") = 1.0)
      .def_readonly("tau", &DriversParams::tau)
      .def_readonly("beta_y", &DriversParams::beta_y)
      .def_readonly("beta_pi", &DriversParams::beta_pi)
      .def_readonly("sigma_y", &DriversParams::sigma_y);

  py::class_<DriversResult>(m, "DriversResult")
      .def_readonly("params", &DriversResult::params)
      .def_readonly("var_y", &DriversResult::var_y)
      .def_readonly("var_w", &DriversResult::var_w)
      .def_readonly("cor_wy", &DriversResult::cor_wy)
      .def_readonly("lambda_tilde", &DriversResult::lambda_tilde)
      .def_readonly("r2_tilde", &DriversResult::r2_tilde)
      .def_readonly("failed", &DriversResult::failed);

  m.def("drivers_grid", &drivers_grid);
  m.def(
      "sweep_drivers",
      [](const std::vector<DriversParams>& grid, int n, std::uint64_t seed, int workers) {
        return sweep_drivers(grid, n, seed, workers);
      },
      py::arg("grid"), py::arg("n"), py::arg("seed") = 0, py::arg("workers") = 1);

  // ----------------------------------------------------------------- planning
  py::class_<PlanningConfig>(m, "PlanningConfig")
      .def(py::init<>())
      .def_readwrite("fraction", &PlanningConfig::fraction)
      .def_readwrite("n_splits", &PlanningConfig::n_splits)
      .def_readwrite("menu", &PlanningConfig::menu)
      .def_readwrite("lambda_values", &PlanningConfig::lambda_values)
      .def_readwrite("r2_values", &PlanningConfig::r2_values)
      .def_readwrite("alpha", &PlanningConfig::alpha)
      .def_readwrite("bootstrap_reps", &PlanningConfig::bootstrap_reps)
      .def_readwrite("seed", &PlanningConfig::seed)
      .def_readwrite("outcome_sim", &PlanningConfig::outcome_sim)
      .def_readwrite("split_mode", &PlanningConfig::split_mode);

  py::class_<PlanningDsResult>(m, "PlanningDsResult")
      .def_readonly("design", &PlanningDsResult::design)
      .def_readonly("tau", &PlanningDsResult::tau)
      .def_readonly("vbm", &PlanningDsResult::vbm)
      .def_readonly("msm", &PlanningDsResult::msm);

  m.def(
      "ds_from_planning",
      [](const ObservationTable& t, const PlanningConfig& c, double tau) {
        return ds_from_planning(t, c, tau);
      },
      py::arg("table"), py::arg("config"), py::arg("tau"));
  m.def(
      "ds_from_planning_simulated",
      [](const ObservationTable& t, const PlanningConfig& c, double tau) {
        return ds_from_planning_simulated(t, c, tau);
      },
      py::arg("table"), py::arg("config"), py::arg("tau"));

  py::class_<ProxyOutcome>(m, "ProxyOutcome")
      .def_readonly("fitted", &ProxyOutcome::fitted)
      .def_readonly("residuals", &ProxyOutcome::residuals)
      .def_readonly("realized_r2", &ProxyOutcome::realized_r2);

  m.def("proxy_outcome", &proxy_outcome, py::arg("outcomes"), py::arg("r2"), py::arg("seed") = 0);

  py::class_<PowerTable>(m, "PowerTable")
      .def_readonly("estimator_names", &PowerTable::estimator_names)
      .def_readonly("has_chosen", &PowerTable::has_chosen)
      .def_readonly("proportions", &PowerTable::proportions)
      .def_readonly("full_sample_reject", &PowerTable::full_sample_reject)
      .def_readonly("selection_frequency", &PowerTable::selection_frequency)
      .def_readonly("n_splits_used", &PowerTable::n_splits_used)
      .def_readonly("n_splits_failed", &PowerTable::n_splits_failed)
      .def_property_readonly("specs", [](const PowerTable& t) {
        std::vector<std::pair<std::string, double>> out;
        for (const auto& s : t.specs)
          out.emplace_back(s.model == SensitivityModel::vbm ? "vbm" : "msm", s.parameter);
        return out;
      });

  m.def(
      "power_by_splitting",
      [](const ObservationTable& t, const PlanningConfig& c, int workers) {
        return power_by_splitting(t, c, workers);
      },
      py::arg("table"), py::arg("config"), py::arg("workers") = 1);

  // --------------------------------------------------------------- utilities
  m.def("normal_cdf", &normal_cdf, py::arg("x"));
  m.def("normal_quantile", &normal_quantile, py::arg("p"));
  m.def("derive_seed", &derive_seed, py::arg("seed"), py::arg("purpose"), py::arg("index"));
  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<const char*> argv = {"dsense"};
        for (const auto& a : args) argv.push_back(a.c_str());
        return run_cli(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));
}
