import math

import numpy as np
import pytest
from scipy.integrate import quad

from app.core.config import settings
from app.core.errors import InvalidConfig
from app.schemas.model import QuadraticCost
from app.schemas.policy import BandPolicy, CustomPolicy, GeneralizedPolicy
from app.schemas.simulation import SimConfig
from app.services.kernel_service import Kernel
from app.services.policy_service import order_up_to, policy_evaluator
from app.services.simulation_service import simulate_dc, tail_bound, targets
from tests.conftest import make_model

NEVER = CustomPolicy(s=-math.inf, target=lambda x: x)


@pytest.fixture(scope="module")
def baseline_q3_policies(baseline_reports):
    """Optimal baseline levels at Q = 3, priced below under strong discounting."""
    report = baseline_reports[3.0]
    return {
        "band1": BandPolicy(s=report.sol1.s, S=report.sol1.S),
        "band2": BandPolicy(s=report.sol2.s, S=report.sol2.S),
        "generalized": GeneralizedPolicy.from_report(report),
    }


@pytest.mark.parametrize("cfg", [
    SimConfig(dt=0.0, horizon=1.0, n_paths=10),
    SimConfig(dt=0.1, horizon=-1.0, n_paths=10),
    SimConfig(dt=2.0, horizon=1.0, n_paths=10),
    SimConfig(dt=0.1, horizon=1.0, n_paths=1),
])
def test_invalid_configurations(baseline_model, cfg):
    with pytest.raises(InvalidConfig):
        simulate_dc(baseline_model, BandPolicy(s=-1.0, S=1.0), 0.0, cfg)


def test_vectorised_targets_match_order_up_to():
    policies = [
        BandPolicy(s=-1.0, S=2.0),
        GeneralizedPolicy(s1=-2.0, S1=1.0, Q=3.0, s_low=-3.5, s_bar=2.5),
        CustomPolicy(s=0.0, target=lambda x: 1.0 - 0.5 * x),
    ]
    z = np.linspace(-6.0, 2.0, 81)
    for policy in policies:
        levels = targets(policy, z)
        for x, level in zip(z, levels):
            expected = order_up_to(policy, x)
            if expected is None:
                assert np.isnan(level)
            else:
                assert level == pytest.approx(expected)


def test_custom_policy_must_order_upwards():
    policy = CustomPolicy(s=0.0, target=lambda x: x - 1.0)
    with pytest.raises(InvalidConfig):
        targets(policy, np.array([-1.0, 1.0]))


def test_never_ordering_matches_holding_integral():
    alpha, mu, sigma, beta, horizon = 0.01, 0.2, 0.6, 0.5, 20.0
    model = make_model(QuadraticCost(alpha=alpha), mu=mu, sigma=sigma, beta=beta)
    cfg = SimConfig(dt=1e-2, horizon=horizon, n_paths=4000, master_seed=3)
    estimate = simulate_dc(model, NEVER, 0.0, cfg)

    expected, _ = quad(lambda t: math.exp(-beta * t) * alpha * (mu ** 2 * t ** 2 + sigma ** 2 * t), 0.0, horizon)
    assert estimate.ordering_cost == 0.0
    assert estimate.discounted_orders == 0.0
    assert estimate.mean == pytest.approx(expected, abs=4 * estimate.std_err + 0.01 * expected)
    assert estimate.n_steps == 2000


def test_estimates_do_not_depend_on_blocks_or_workers(baseline_model, monkeypatch):
    policy = BandPolicy(s=-1.0, S=2.0)
    cfg = SimConfig(dt=1e-2, horizon=2.0, n_paths=37, master_seed=11)
    reference = simulate_dc(baseline_model, policy, 0.0, cfg)

    monkeypatch.setattr(settings, "SIM_BLOCK_PATHS", 5)
    monkeypatch.setattr(settings, "IMPULSE_BAND_THREADS", 3)
    blocked = simulate_dc(baseline_model, policy, 0.0, cfg)
    assert blocked.mean == reference.mean
    assert blocked.std_err == reference.std_err

    other = simulate_dc(baseline_model, policy, 0.0, cfg.model_copy(update={"master_seed": 12}))
    assert other.mean != reference.mean


def test_initial_order_is_undiscounted(baseline_model):
    policy = BandPolicy(s=-1.0, S=2.0)
    cfg = SimConfig(dt=1e-2, horizon=0.02, n_paths=4, master_seed=1)
    estimate = simulate_dc(baseline_model, policy, -3.0, cfg)
    # one order of 5 units at t = 0 costs K2 + 5 k
    assert estimate.discounted_orders >= 1.0
    assert estimate.ordering_cost >= 7.0 + 5 * 0.85


def test_tail_bound_shrinks_with_horizon(baseline_model):
    policy = BandPolicy(s=-1.0, S=2.0)
    short = tail_bound(baseline_model, policy, 0.0, SimConfig(dt=1e-2, horizon=10.0, n_paths=10))
    long = tail_bound(baseline_model, policy, 0.0, SimConfig(dt=1e-2, horizon=400.0, n_paths=10))
    assert short > long > 0.0
    assert tail_bound(baseline_model, NEVER, 0.0, SimConfig(dt=1e-2, horizon=10.0, n_paths=10)) > 0.0


def test_tail_bound_counts_order_cycles_not_steps(strong_model, baseline_q3_policies):
    cfg = SimConfig(dt=1e-3, horizon=40.0, n_paths=10)
    for policy in baseline_q3_policies.values():
        assert tail_bound(strong_model, policy, -2.0, cfg) < 1e-3

    # same levels as band1, but a custom map has no fixed jump and is bounded per step
    band1 = baseline_q3_policies["band1"]
    custom = CustomPolicy(s=band1.s, target=lambda x: band1.S)
    assert tail_bound(strong_model, custom, -2.0, cfg) > tail_bound(strong_model, band1, -2.0, cfg)


def test_equal_setups_without_unit_cost_charge_the_setup_per_order():
    model = make_model(beta=0.5, k=0.0, K1=4.0, K2=4.0, Q=3.0)
    cfg = SimConfig(dt=1e-2, horizon=5.0, n_paths=200, master_seed=5)
    estimate = simulate_dc(model, BandPolicy(s=-2.0, S=2.0), -3.0, cfg)
    assert estimate.discounted_orders >= 1.0
    assert estimate.ordering_cost == pytest.approx(4.0 * estimate.discounted_orders, rel=1e-12)


@pytest.mark.slow
def test_equal_setups_without_unit_cost_match_closed_form():
    model = make_model(beta=0.5, k=0.0, K1=4.0, K2=4.0, Q=3.0)
    policy = BandPolicy(s=-2.0, S=2.0)
    closed = policy_evaluator(Kernel(model), policy)(-1.0)
    cfg = SimConfig(dt=1e-3, horizon=40.0, n_paths=20_000, master_seed=9)
    estimate = simulate_dc(model, policy, -1.0, cfg)
    assert estimate.ordering_cost == pytest.approx(4.0 * estimate.discounted_orders, rel=1e-12)
    tolerance = max(3 * estimate.std_err + estimate.tail_bound, 0.01 * abs(closed))
    assert estimate.mean == pytest.approx(closed, abs=tolerance)


@pytest.mark.slow
@pytest.mark.parametrize("name,x0", [
    ("band1", -6.0), ("band1", -2.0), ("band1", 0.0),
    ("band2", -6.0), ("band2", -2.0), ("band2", 0.0),
    ("generalized", -6.0), ("generalized", -2.5), ("generalized", -2.0), ("generalized", 0.0),
])
def test_monte_carlo_matches_closed_form(strong_model, strong_kernel, baseline_q3_policies, name, x0):
    policy = baseline_q3_policies[name]
    closed = policy_evaluator(strong_kernel, policy)(x0)
    cfg = SimConfig(dt=1e-3, horizon=40.0, n_paths=20_000, master_seed=7)
    estimate = simulate_dc(strong_model, policy, x0, cfg)
    assert estimate.tail_bound < 1e-3
    tolerance = max(3 * estimate.std_err + estimate.tail_bound, 0.01 * abs(closed))
    assert estimate.mean == pytest.approx(closed, abs=tolerance)


@pytest.mark.slow
@pytest.mark.parametrize("name", ["band1", "generalized"])
def test_halving_the_step_moves_the_estimate_within_noise(strong_model, baseline_q3_policies, name):
    policy = baseline_q3_policies[name]
    coarse = simulate_dc(strong_model, policy, -2.0, SimConfig(dt=2e-3, horizon=20.0, n_paths=20_000, master_seed=13))
    fine = simulate_dc(strong_model, policy, -2.0, SimConfig(dt=1e-3, horizon=20.0, n_paths=20_000, master_seed=13))
    noise = 3 * math.sqrt(coarse.std_err ** 2 + fine.std_err ** 2)
    assert abs(coarse.mean - fine.mean) < max(noise, 0.005 * abs(fine.mean))
