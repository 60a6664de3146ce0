import math

import numpy as np
import pytest

from app.core.errors import InvalidConfig, ValidationFailed
from app.schemas.model import (
    CustomCost,
    ModelParams,
    PiecewiseLinearCost,
    PiecewisePolynomialCost,
    QuadraticCost,
    ValidationReport,
    setup_cost,
)
from app.services.model_service import load_model_config, model_from_mapping, require_valid, validate
from tests.conftest import BASE_PARAMS, CONFIG_DIR, make_model


def _assumptions(report):
    return {v.assumption for v in report.violations}


def test_setup_cost_steps_at_threshold():
    params = ModelParams(**BASE_PARAMS)
    assert setup_cost(0.0, params) == 0.0
    assert setup_cost(-1.0, params) == 0.0
    assert setup_cost(1e-9, params) == 4.0
    assert setup_cost(4.0, params) == 4.0
    assert setup_cost(4.0 + 1e-6, params) == 7.0
    np.testing.assert_array_equal(setup_cost(np.array([0.0, 2.0, 5.0]), params), [0.0, 4.0, 7.0])


def test_setup_cost_without_threshold_is_constant():
    params = ModelParams(**BASE_PARAMS).with_q(math.inf)
    assert setup_cost(1e6, params) == 4.0


def test_params_must_be_finite():
    with pytest.raises(ValueError):
        ModelParams(**{**BASE_PARAMS, "mu": float("nan")})
    assert ModelParams(**{**BASE_PARAMS, "Q": math.inf}).Q == math.inf


def test_table_models_are_valid(baseline_model, quadratic_model):
    for model in (baseline_model, quadratic_model):
        report = validate(model.params, model.cost)
        assert report.ok
        assert report.violations == []


def test_all_violations_are_reported():
    model = make_model(PiecewiseLinearCost(h=0.0, p=0.12), K2=9.0)
    report = validate(model.params, model.cost)
    assert not report.ok
    assert {"Assumption 2", "A3"} <= _assumptions(report)


def test_setup_costs_must_increase():
    model = make_model(K2=4.0)
    assert "Assumption 2" in _assumptions(validate(model.params, model.cost))


def test_zero_drift_is_reported_not_raised():
    model = make_model(mu=0.0)
    report = validate(model.params, model.cost)
    assert "positivity" in _assumptions(report)


def test_weak_backorder_cost_fails_a4():
    # -p + beta k is not below -beta K1 / Q
    model = make_model(PiecewiseLinearCost(h=0.08, p=0.001))
    report = validate(model.params, model.cost)
    assert "A4" in _assumptions(report)
    with pytest.raises(ValidationFailed) as exc:
        require_valid(model)
    assert exc.value.exit_code == 2
    assert exc.value.report is not None


def test_strong_discount_fails_a4(strong_model):
    report = validate(strong_model.params, strong_model.cost)
    assert "A4" in _assumptions(report)


def test_piecewise_polynomial_checks_are_sampled():
    cost = PiecewisePolynomialCost(left=[0.0, -0.12], right=[0.0, 0.08, 0.01])
    report = validate(ModelParams(**BASE_PARAMS), cost)
    assert report.ok
    assert any("sampled" in note for note in report.notes)


def test_custom_cost_concavity_is_found():
    cost = CustomCost(
        g=lambda x: np.abs(x) - 0.01 * np.asarray(x) ** 2,
        dg=lambda x: np.sign(x) - 0.02 * np.asarray(x),
        d2g=lambda x: -0.02 * np.ones_like(np.asarray(x, dtype=float)),
        a=0.0, b=1.0, n=1, dg_left=-1.0, dg_right=1.0,
    )
    report = validate(ModelParams(**BASE_PARAMS), cost)
    assert "A1" in _assumptions(report)


def test_validation_report_ok_flag_must_match():
    with pytest.raises(ValueError):
        ValidationReport(ok=False, violations=[])


def test_load_shipped_config():
    model = load_model_config(str(CONFIG_DIR / "baseline.cfg"))
    assert model.params.mu == pytest.approx(0.2)
    assert model.params.Q == pytest.approx(4.0)
    assert isinstance(model.cost, PiecewiseLinearCost)
    assert load_model_config(str(CONFIG_DIR / "quadratic.cfg"), q=7.0).params.Q == 7.0


def test_missing_config_file():
    with pytest.raises(InvalidConfig) as exc:
        load_model_config(str(CONFIG_DIR / "does-not-exist.cfg"))
    assert exc.value.exit_code == 1


def test_config_errors(tmp_path):
    base = "mu = 0.2\nsigma = 0.6\nbeta = 0.01\nk = 0.85\nK1 = 4\nK2 = 7\nQ = 4\n"
    cases = {
        "unknown.cfg": base + "g.kind = quadratic\ng.alpha = 0.01\ng.h = 1\n",
        "kind.cfg": base + "g.kind = cubic\n",
        "number.cfg": base.replace("0.85", "cheap") + "g.kind = quadratic\ng.alpha = 0.01\n",
        "missing.cfg": base.replace("K2 = 7\n", "") + "g.kind = quadratic\ng.alpha = 0.01\n",
    }
    for name, text in cases.items():
        path = tmp_path / name
        path.write_text(text)
        with pytest.raises(InvalidConfig):
            load_model_config(str(path))


def test_mapping_with_q_override_needs_no_q_key():
    values = {"mu": "0.2", "sigma": "0.6", "beta": "0.01", "k": "0.85", "K1": "4", "K2": "7",
              "g.kind": "quadratic", "g.alpha": "0.01"}
    model = model_from_mapping(values, q=2.5)
    assert model.params.Q == 2.5
    assert isinstance(model.cost, QuadraticCost)
