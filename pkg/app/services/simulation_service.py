"""
Monte Carlo estimates of discounted policy costs.

Paths are simulated in blocks with one random stream per path, derived from
(master_seed, path index), so estimates do not depend on block size or the
number of worker threads.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma

from ..core.config import settings
from ..core.errors import InvalidConfig
from ..schemas.model import setup_cost
from ..schemas.policy import BandPolicy, CustomPolicy, GeneralizedPolicy, Policy
from ..schemas.simulation import SimConfig, SimEstimate
from .kernel_service import roots

logger = logging.getLogger(__name__)


def _check_config(cfg: SimConfig) -> int:
    if not (cfg.dt > 0 and cfg.horizon > 0):
        raise InvalidConfig(f"dt and horizon must be positive, got dt={cfg.dt}, horizon={cfg.horizon}")
    if cfg.dt > cfg.horizon:
        raise InvalidConfig(f"dt={cfg.dt} exceeds the horizon {cfg.horizon}")
    if cfg.n_paths < 2:
        raise InvalidConfig("at least two paths are needed for a standard error")
    return int(round(cfg.horizon / cfg.dt))


def targets(policy: Policy, z: np.ndarray) -> np.ndarray:
    """Vectorised order-up-to map; NaN where the policy does not order."""
    if isinstance(policy, BandPolicy):
        return np.where(z <= policy.s, policy.S, np.nan)
    if isinstance(policy, GeneralizedPolicy):
        level = np.where(z > policy.S1 - policy.Q, policy.S1,
                         np.where(z >= policy.s_low, z + policy.Q, policy.s_bar))
        return np.where(z <= policy.s1, level, np.nan)
    if isinstance(policy, CustomPolicy):
        out = np.full(z.shape, np.nan)
        hit = z <= policy.s
        out[hit] = [float(policy.target(x)) for x in z[hit]]
        if np.any(out[hit] <= z[hit]):
            raise InvalidConfig("custom policy must order up to a level above the current one")
        return out
    raise InvalidConfig(f"unsupported policy {type(policy).__name__}")


def _trigger(policy: Policy) -> float:
    """Level at or below which the policy orders."""
    return policy.s1 if isinstance(policy, GeneralizedPolicy) else policy.s


def _policy_levels(policy: Policy) -> List[float]:
    if isinstance(policy, BandPolicy):
        return [policy.s, policy.S]
    if isinstance(policy, GeneralizedPolicy):
        return [policy.s1, policy.S1, policy.s_bar, policy.s_low]
    return [policy.s] if math.isfinite(policy.s) else []


def _order(policy, z: np.ndarray, params, discount: float, ordering: np.ndarray, orders: np.ndarray) -> None:
    """Apply any orders the policy places at levels z, in place."""
    level = targets(policy, z)
    hit = ~np.isnan(level)
    if hit.any():
        jump = level[hit] - z[hit]
        ordering[hit] += discount * (setup_cost(jump, params) + params.k * jump)
        orders[hit] += discount
        z[hit] = level[hit]


def _simulate_block(model, policy, x0: float, cfg: SimConfig, n_steps: int, first: int, last: int):
    params, g = model.params, model.cost.value
    mu, sigma, dt = params.mu, params.sigma, cfg.dt
    streams = [
        np.random.default_rng(np.random.SeedSequence(entropy=cfg.master_seed, spawn_key=(i,)))
        for i in range(first, last)
    ]
    size = last - first
    z = np.full(size, float(x0))
    holding = np.zeros(size)
    ordering = np.zeros(size)
    orders = np.zeros(size)
    discount = np.exp(-params.beta * dt * np.arange(n_steps + 1))

    # the initial level may already call for an order
    _order(policy, z, params, 1.0, ordering, orders)

    chunk = max(1, settings.SIM_CHUNK_STEPS)
    scale = sigma * math.sqrt(dt)
    trigger = _trigger(policy)
    for start in range(0, n_steps, chunk):
        width = min(chunk, n_steps - start)
        noise = np.stack([rng.standard_normal(width) for rng in streams])
        for j in range(width):
            step = start + j
            holding += (discount[step] * dt) * np.asarray(g(z), dtype=float)
            moved = z - mu * dt + scale * noise[:, j]
            # a path crossing the trigger during the step orders from the trigger itself
            z = np.where((z > trigger) & (moved <= trigger), trigger, moved)
            _order(policy, z, params, discount[step + 1], ordering, orders)
    return holding, ordering, orders


def _cycle_jump(policy: Policy) -> Optional[float]:
    """
    Jump of every order placed after time 0, or None when it is not fixed.

    Band and generalized policies are only re-triggered from the clamped
    trigger level, so each of those orders moves the level by the same amount.
    """
    if isinstance(policy, CustomPolicy):
        return None
    trigger = _trigger(policy)
    jump = float(targets(policy, np.array([trigger]))[0]) - trigger
    return jump if jump > 0 else None


def tail_bound(model, policy: Policy, x0: float, cfg: SimConfig) -> float:
    """
    Upper bound on the discounted cost accrued after the horizon.

    Holding: |Z_t| <= R + mu t + 2 sigma sup|B| with R covering the start, the
    policy levels and one step of overshoot, Doob's maximal inequality for the
    moments of sup|B|, and the polynomial growth bound of the cost.

    Ordering: after time 0 a band or generalized policy orders a fixed jump w
    from its trigger, and the next order needs the level to fall by w again,
    whose discount factor is at most exp(-lambda2 w). The discounted number
    of orders after T is then at most exp(-beta T) / (1 - exp(-lambda2 w)).
    Custom policies fall back to one order per step.
    """
    params = model.params
    a, b, n = model.cost.growth_witness()
    mu, sigma, beta, dt, T = params.mu, params.sigma, params.beta, cfg.dt, cfg.horizon
    levels = _policy_levels(policy)
    radius = max([abs(x0)] + [abs(level) for level in levels]) + 6.0 * sigma * math.sqrt(dt)
    top = max(levels) if levels else abs(x0)
    p = max(n, 2)
    moment = (2.0 ** (p / 2.0) * gamma((p + 1) / 2.0) / math.sqrt(math.pi)) ** (1.0 / p) * p / (p - 1.0)

    def reach(t):
        return radius + mu * t + 2.0 * sigma * moment * math.sqrt(t)

    holding, _ = quad(lambda t: math.exp(-beta * t) * (abs(a) + abs(b) * reach(t) ** n), T, np.inf)
    if not levels:
        return float(holding)

    jump = _cycle_jump(policy)
    if jump is not None:
        per_order = float(setup_cost(jump, params)) + params.k * jump
        cycles = math.exp(-beta * T) / -math.expm1(-roots(params).lambda2 * jump)
        ordering = per_order * cycles
    else:
        ordering, _ = quad(
            lambda t: math.exp(-beta * t) / dt * (max(params.K1, params.K2) + params.k * (abs(top) + reach(t))),
            T, np.inf,
        )
    logger.debug("Tail bound: holding %.3g, ordering %.3g", holding, ordering)
    return float(holding + ordering)


def simulate_dc(model, policy: Policy, x0: float, cfg: SimConfig) -> SimEstimate:
    """
    Monte Carlo estimate of the discounted cost of a policy from level x0.

    Args:
        model: Inventory model (holding cost callables must accept numpy arrays)
        policy: Band, generalized or custom policy
        x0: Initial inventory level
        cfg: Discretisation and sampling configuration

    Returns:
        SimEstimate with standard error and truncation bound
    """
    n_steps = _check_config(cfg)
    block = max(1, settings.SIM_BLOCK_PATHS)
    bounds = [(first, min(first + block, cfg.n_paths)) for first in range(0, cfg.n_paths, block)]
    logger.info(
        "Simulating %d paths x %d steps in %d blocks on %d workers",
        cfg.n_paths, n_steps, len(bounds), settings.worker_count,
    )

    with ThreadPoolExecutor(max_workers=settings.worker_count) as pool:
        parts = list(pool.map(lambda b: _simulate_block(model, policy, x0, cfg, n_steps, *b), bounds))

    holding = np.concatenate([part[0] for part in parts])
    ordering = np.concatenate([part[1] for part in parts])
    orders = np.concatenate([part[2] for part in parts])
    totals = holding + ordering

    return SimEstimate(
        mean=float(np.sum(totals) / cfg.n_paths),
        std_err=float(np.std(totals, ddof=1) / math.sqrt(cfg.n_paths)),
        n_paths=cfg.n_paths,
        n_steps=n_steps,
        tail_bound=tail_bound(model, policy, x0, cfg),
        discount_at_horizon=math.exp(-model.params.beta * cfg.horizon),
        holding_cost=float(np.sum(holding) / cfg.n_paths),
        ordering_cost=float(np.sum(ordering) / cfg.n_paths),
        discounted_orders=float(np.sum(orders) / cfg.n_paths),
    )
