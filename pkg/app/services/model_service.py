import logging
import os
from typing import Dict, List, Mapping, Optional

import numpy as np
from dotenv import dotenv_values

from ..core.errors import InvalidConfig, ValidationFailed
from ..schemas.model import (
    CustomCost,
    InventoryModel,
    ModelParams,
    PiecewiseLinearCost,
    QuadraticCost,
    ValidationReport,
    Violation,
)

logger = logging.getLogger(__name__)

# Symmetric sampling grid for the assumptions that can only be falsified
SAMPLE_GRID = np.concatenate([np.arange(-100.0, 100.0 + 0.25, 0.5), [-1e-6, 1e-6]])
A4_SAMPLE_POINT = -1e6
SAMPLE_TOL = 1e-12

PARAM_KEYS = ("mu", "sigma", "beta", "k", "K1", "K2", "Q")
COST_KEYS = {
    "piecewise_linear": ("g.h", "g.p"),
    "quadratic": ("g.alpha",),
}


def _check_params(params: ModelParams) -> List[Violation]:
    violations = []
    for name in ("mu", "sigma", "beta", "Q", "K1"):
        value = getattr(params, name)
        if not value > 0:
            violations.append(Violation(
                assumption="positivity",
                detail=f"{name} must be > 0, got {value}",
                witness=value,
            ))
    if params.k < 0:
        violations.append(Violation(
            assumption="positivity", detail=f"k must be >= 0, got {params.k}", witness=params.k
        ))
    if not params.K1 < params.K2 <= 2.0 * params.K1:
        violations.append(Violation(
            assumption="Assumption 2",
            detail=f"requires K1 < K2 <= 2*K1, got K1={params.K1}, K2={params.K2}",
            witness=params.K2,
        ))
    return violations


def _check_shape_exact(cost) -> List[Violation]:
    """A1-A3 for the built-in families, from their parameters."""
    violations = []
    if isinstance(cost, PiecewiseLinearCost):
        if cost.h <= 0:
            violations.append(Violation(
                assumption="A3", detail=f"g'(x) = h must be > 0 for x > 0, got h={cost.h}", witness=cost.h
            ))
        if cost.p <= 0:
            violations.append(Violation(
                assumption="A3", detail=f"g'(x) = -p must be < 0 for x < 0, got p={cost.p}", witness=cost.p
            ))
    elif isinstance(cost, QuadraticCost):
        if cost.alpha <= 0:
            violations.append(Violation(
                assumption="A1", detail=f"alpha must be > 0 for a convex g, got {cost.alpha}", witness=cost.alpha
            ))
    return violations


def _check_shape_sampled(cost) -> List[Violation]:
    """A1-A3 on the sampling grid; can falsify but never prove."""
    violations = []
    g0 = float(cost.value(0.0))
    if abs(g0) > SAMPLE_TOL:
        violations.append(Violation(assumption="A1", detail=f"g(0) must be 0, got {g0}", witness=0.0))

    xs = SAMPLE_GRID[SAMPLE_GRID != 0.0]
    d1 = np.array([float(cost.first(x)) for x in xs])
    d2 = np.array([float(cost.second(x)) for x in xs])

    bad = xs[d2 < -SAMPLE_TOL]
    if bad.size:
        violations.append(Violation(
            assumption="A1", detail=f"g'' < 0 at {bad.size} sampled points (not convex)", witness=float(bad[0])
        ))
    if not np.all(np.isfinite(d2)):
        violations.append(Violation(
            assumption="A2", detail="g'' is not finite at some sampled point",
            witness=float(xs[~np.isfinite(d2)][0]),
        ))
    bad = xs[((xs < 0) & (d1 >= 0)) | ((xs > 0) & (d1 <= 0))]
    if bad.size:
        violations.append(Violation(
            assumption="A3", detail="g' must be < 0 on x < 0 and > 0 on x > 0", witness=float(bad[0])
        ))
    if cost.dg_left0 >= 0 and cost.dg_right0 <= 0:
        violations.append(Violation(
            assumption="A3", detail="one-sided derivatives at 0 give a flat cost", witness=0.0
        ))
    if cost.dg_left0 > cost.dg_right0:
        violations.append(Violation(
            assumption="A1", detail="g'(0-) > g'(0+) contradicts convexity", witness=cost.dg_left0 - cost.dg_right0
        ))
    return violations


def _check_a4(params: ModelParams, cost) -> Optional[Violation]:
    limit = cost.dg_limit_neg_inf()
    if limit is None:
        limit = float(cost.first(A4_SAMPLE_POINT))
    rhs = -params.beta * params.K1 / params.Q if np.isfinite(params.Q) else 0.0
    lhs = limit + params.beta * params.k
    if lhs < rhs:
        return None
    return Violation(
        assumption="A4",
        detail=f"lim g'(-inf) + beta*k = {lhs:.6g} must be < -beta*K1/Q = {rhs:.6g}",
        witness=lhs,
    )


def _check_a5(cost) -> Optional[Violation]:
    a, b, n = cost.growth_witness()
    values = np.array([float(cost.value(x)) for x in SAMPLE_GRID])
    bound = a + b * np.abs(SAMPLE_GRID) ** n
    bad = SAMPLE_GRID[values > bound + SAMPLE_TOL * (1.0 + bound)]
    if a < 0 or b < 0 or bad.size:
        return Violation(
            assumption="A5",
            detail=f"g(x) <= {a} + {b}|x|^{n} fails on the sampling grid",
            witness=float(bad[0]) if bad.size else None,
        )
    return None


def validate(params: ModelParams, g) -> ValidationReport:
    """
    Check the modelling assumptions the solver relies on.

    Args:
        params: Model parameters
        g: Holding/backorder cost

    Returns:
        ValidationReport listing every violation found (not just the first)
    """
    violations = _check_params(params)
    notes = []

    if g.sampled:
        violations.extend(_check_shape_sampled(g))
        notes.append("A1-A3 checked by sampling on [-100, 100] (sampled)")
    else:
        violations.extend(_check_shape_exact(g))

    a4 = _check_a4(params, g)
    if a4 is not None:
        violations.append(a4)
    if isinstance(g, CustomCost):
        notes.append(f"A4 limit sampled at g'({A4_SAMPLE_POINT:g})")

    a5 = _check_a5(g)
    if a5 is not None:
        violations.append(a5)
    notes.append("A5 checked against the declared polynomial bound on the sampling grid")

    for violation in violations:
        logger.debug("Validation: %s %s", violation.assumption, violation.detail)

    return ValidationReport(ok=not violations, violations=violations, notes=notes)


def require_valid(model: InventoryModel) -> ValidationReport:
    """Validate and raise ValidationFailed when any assumption is violated."""
    report = validate(model.params, model.cost)
    if not report.ok:
        summary = "; ".join(f"{v.assumption}: {v.detail}" for v in report.violations)
        raise ValidationFailed(f"model violates its assumptions: {summary}", report=report)
    return report


def _number(values: Mapping[str, Optional[str]], key: str) -> float:
    raw = values.get(key)
    if raw is None or str(raw).strip() == "":
        raise InvalidConfig(f"missing key '{key}'")
    try:
        return float(raw)
    except ValueError:
        raise InvalidConfig(f"key '{key}' is not a number: {raw!r}")


def model_from_mapping(values: Mapping[str, Optional[str]], q: Optional[float] = None) -> InventoryModel:
    """
    Build a model from flat key/value pairs.

    Args:
        values: Raw config values (keys mu, sigma, beta, k, K1, K2, Q, g.kind, g.*)
        q: Optional threshold overriding the Q key

    Returns:
        InventoryModel
    """
    kind = (values.get("g.kind") or "").strip()
    if kind not in COST_KEYS:
        raise InvalidConfig(f"unknown g.kind {kind!r}; expected one of {sorted(COST_KEYS)}")

    allowed = set(PARAM_KEYS) | {"g.kind"} | set(COST_KEYS[kind])
    unknown = sorted(set(values) - allowed)
    if unknown:
        raise InvalidConfig(f"unknown keys for g.kind={kind}: {', '.join(unknown)}")

    fields: Dict[str, float] = {}
    for key in PARAM_KEYS:
        if key == "Q" and q is not None:
            fields[key] = float(q)
            continue
        fields[key] = _number(values, key)

    try:
        params = ModelParams(**fields)
        if kind == "piecewise_linear":
            cost = PiecewiseLinearCost(h=_number(values, "g.h"), p=_number(values, "g.p"))
        else:
            cost = QuadraticCost(alpha=_number(values, "g.alpha"))
    except ValueError as e:
        raise InvalidConfig(f"invalid model values: {e}")

    return InventoryModel(params=params, cost=cost)


def load_model_config(path: str, q: Optional[float] = None) -> InventoryModel:
    """
    Parse a model file.

    Args:
        path: Path to a flat ``key = value`` file
        q: Optional threshold overriding the file's Q

    Returns:
        InventoryModel
    """
    if not os.path.isfile(path):
        raise InvalidConfig(f"config file not found: {path}")
    values = dotenv_values(path)
    logger.debug("Loaded %d keys from %s", len(values), path)
    return model_from_mapping(values, q=q)
