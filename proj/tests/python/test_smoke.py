"""Smoke tests for the python bindings: a few hand-checked values and one
pass through every major operation."""

import math

import numpy as np
import pytest

import dsense


def small_table(n=400, seed=3, tau=1.0):
    cfg = dsense.DgpConfig()
    cfg.n = n
    cfg.seed = seed
    cfg.tau0 = tau
    return dsense.sample_dgp(cfg)


def test_table_roundtrip_and_shapes():
    t = small_table()
    assert t.n == 400
    assert t.n_treated + t.n_controls == 400
    assert t.covariates.shape == (400, 1)


def test_hajek_hand_value():
    y = np.array([2.0, 4.0, 1.0, 3.0])
    z = np.array([1, 1, 0, 0], dtype=np.int32)
    x = np.array([[0.0], [1.0], [0.0], [1.0]])  # balanced across arms: flat fit
    t = dsense.make_table(y, z, x)
    fit = dsense.fit_logistic(t)
    ws = dsense.att_weights(fit, t)
    est = dsense.hajek_att(t, ws)
    # equal weights, so the difference of arm means
    assert est.value == pytest.approx(3.0 - 2.0)


def test_msm_extrema_hand_value():
    e = dsense.msm_extrema(np.array([1.0, 0.0]), np.array([1.0, 1.0]), 1.0, 2.0)
    assert e.lower == pytest.approx(1.0 - 0.8)
    assert e.upper == pytest.approx(1.0 - 0.2)


def test_design_sensitivity_closed_forms():
    mom = dsense.WeightMoments(var_w=1.0, var_y=1.0, cor_wy=0.0)
    assert dsense.ds_vbm_from_moments(1.0, mom).value == pytest.approx(0.5)

    situation = dsense.make_situation(0.25, np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    result = dsense.ds_msm(situation)
    assert result.attained
    assert result.value == pytest.approx(math.sqrt(3.0), abs=1e-6)


def test_full_pipeline_with_bootstrap():
    t = small_table(n=600, seed=11)
    design = dsense.DesignSpec.trimmed(dsense.TrimRule.propensity(0.9))
    fit = dsense.build_design(t, design)
    assert fit.att.value == pytest.approx(1.0, abs=0.6)

    ci = dsense.percentile_bootstrap_ci(
        t, design, dsense.SensitivitySpec.msm(1.2), reps=120, alpha=0.05, seed=4
    )
    assert ci.ci_lower < ci.lower <= ci.upper < ci.ci_upper

    rv = dsense.robustness_value(
        t, dsense.DesignSpec.plain(), dsense.SensitivityModel.msm, reps=120, seed=5
    )
    assert rv.status in (
        dsense.RobustnessValue.Status.ok,
        dsense.RobustnessValue.Status.not_significant,
    )


def test_power_formula_value():
    p = dsense.power_formula(
        dsense.PowerInput(n=100, tau_w=1.0, xi=0.0, sigma_w=2.0, sigma_nu=2.0, alpha=0.05)
    )
    assert p == pytest.approx(1.0 - dsense.normal_cdf(dsense.normal_quantile(0.95) - 5.0))


def test_planning_and_power_split():
    t = small_table(n=900, seed=21)
    cfg = dsense.PlanningConfig()
    cfg.fraction = 0.3
    cfg.n_splits = 4
    cfg.menu = [dsense.DesignSpec.plain(), dsense.DesignSpec.augmented()]
    cfg.lambda_values = [1.0]
    cfg.r2_values = [0.0]
    cfg.bootstrap_reps = 60
    cfg.seed = 6

    ds = dsense.ds_from_planning(t, cfg, 1.0)
    assert len(ds) == 2
    assert 0.0 < ds[0].vbm.value < 1.0

    table = dsense.power_by_splitting(t, cfg, workers=2)
    assert table.has_chosen
    assert table.n_splits_used == 4
    assert len(table.proportions) == 2  # one lambda row + one r2 row


def test_errors_are_typed():
    with pytest.raises(dsense.DsenseError):
        dsense.load_csv("/nonexistent/file.csv", "y", "z", ["x"])
    with pytest.raises(dsense.DsenseError):
        dsense.msm_extrema(np.array([1.0]), np.array([1.0]), 0.0, 0.5)  # lambda < 1


def test_determinism_across_workers():
    t = small_table(n=500, seed=31)
    a = dsense.percentile_bootstrap_ci(
        t, dsense.DesignSpec.plain(), dsense.SensitivitySpec.msm(1.5), reps=80, seed=9, workers=1
    )
    b = dsense.percentile_bootstrap_ci(
        t, dsense.DesignSpec.plain(), dsense.SensitivitySpec.msm(1.5), reps=80, seed=9, workers=3
    )
    assert a.ci_lower == b.ci_lower
    assert a.ci_upper == b.ci_upper
