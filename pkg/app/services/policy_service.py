import logging
import math
from typing import Callable, List, Optional, Sequence

import numpy as np

from ..core.errors import RegimeError
from ..schemas.model import setup_cost
from ..schemas.policy import (
    BandPolicy,
    CompareRow,
    CostCurve,
    CostPoint,
    CustomPolicy,
    GeneralizedPolicy,
    Policy,
    ValueFunction,
)
from ..schemas.solution import BandSolution, RegimeReport
from .kernel_service import Kernel
from .solver_service import band_edges

logger = logging.getLogger(__name__)


def order_up_to(policy: Policy, x: float) -> Optional[float]:
    """
    Level the policy orders up to from inventory level x.

    Args:
        policy: Band, generalized or custom policy
        x: Pre-order inventory level

    Returns:
        Target level, or None when the policy does not order at x
    """
    if isinstance(policy, BandPolicy):
        return policy.S if x <= policy.s else None
    if isinstance(policy, GeneralizedPolicy):
        if x > policy.s1:
            return None
        if x > policy.S1 - policy.Q:
            return policy.S1
        if x >= policy.s_low:
            return x + policy.Q
        return policy.s_bar
    if isinstance(policy, CustomPolicy):
        return float(policy.target(x)) if x <= policy.s else None
    raise TypeError(f"unsupported policy {type(policy).__name__}")


def band_evaluator(kernel: Kernel, s: float, S: float, q: Optional[float] = None,
                   setup: Optional[float] = None) -> Callable[[float], float]:
    """
    Discounted cost of an arbitrary (s, S) band as a function of the initial level.

    Args:
        kernel: Model kernel
        s: Reorder level
        S: Order-up-to level
        q: Threshold overriding the model's Q
        setup: Setup cost used for A(s, S); defaults to K(S - s)

    Returns:
        Callable x -> DC(x, (s, S))
    """
    params = kernel.params if q is None else kernel.params.with_q(q)
    k = params.k
    A = kernel.big_a(s, S, setup_cost(S - s, params) if setup is None else setup)
    v_top = kernel.v(A, S)

    def cost(x: float) -> float:
        if x > s:
            return kernel.v(A, x)
        # jump S - x can cross Q even when S - s does not
        return v_top + setup_cost(S - x, params) + k * (S - x)

    return cost


def dc_band(kernel: Kernel, s: float, S: float, x: float, q: Optional[float] = None,
            setup: Optional[float] = None) -> float:
    """Discounted cost of the (s, S) band from initial level x."""
    return band_evaluator(kernel, s, S, q=q, setup=setup)(x)


def _require_generalized(report: RegimeReport) -> None:
    if report.regime != "S1PlusGeneralized":
        raise RegimeError(f"generalized policy is not defined in regime {report.regime}")


def _generalized_cost(kernel: Kernel, policy: GeneralizedPolicy) -> Callable[[float], float]:
    p = kernel.params
    s1, S1, q = policy.s1, policy.S1, policy.Q
    # the band part never orders more than Q
    A = kernel.big_a(s1, S1, p.K1)
    v_top = kernel.v(A, S1)
    v_bar = kernel.v(A, policy.s_bar)

    def cost(x: float) -> float:
        if x > s1:
            return kernel.v(A, x)
        if x > S1 - q:
            return v_top + p.K1 + p.k * (S1 - x)
        if x >= policy.s_low:
            return kernel.v(A, x + q) + p.K1 + p.k * q
        return v_bar + p.K2 + p.k * (policy.s_bar - x)

    return cost


def policy_evaluator(kernel: Kernel, policy: Policy) -> Callable[[float], float]:
    """
    Closed-form discounted cost of a band or generalized policy with the given levels.

    The levels need not be optimal for the kernel's model.

    Raises:
        TypeError: for custom policies, which have no closed form
    """
    if isinstance(policy, BandPolicy):
        return band_evaluator(kernel, policy.s, policy.S)
    if isinstance(policy, GeneralizedPolicy):
        return _generalized_cost(kernel, policy)
    raise TypeError(f"no closed-form cost for {type(policy).__name__}")


def generalized_evaluator(kernel: Kernel, report: RegimeReport) -> Callable[[float], float]:
    _require_generalized(report)
    return _generalized_cost(kernel, GeneralizedPolicy.from_report(report))


def dc_generalized(kernel: Kernel, report: RegimeReport, x: float) -> float:
    """Discounted cost of the generalized (s1, {S*(x)}) policy from initial level x."""
    return generalized_evaluator(kernel, report)(x)


def compare(kernel: Kernel, report: RegimeReport, xs: Sequence[float]) -> List[CompareRow]:
    """
    Costs of both optimal bands and, when defined, the generalized policy on a grid.

    Each band is priced with the setup cost of its own problem (K1 for OP1, K2 for OP2).

    Args:
        kernel: Model kernel
        report: Regime report for the threshold being compared
        xs: Initial inventory levels

    Returns:
        One CompareRow per grid point with the cheapest policy tagged
    """
    q = report.Q
    band1 = band_evaluator(kernel, report.sol1.s, report.sol1.S, q=q, setup=report.sol1.setup)
    band2 = band_evaluator(kernel, report.sol2.s, report.sol2.S, q=q, setup=report.sol2.setup)
    generalized = generalized_evaluator(kernel, report) if report.regime == "S1PlusGeneralized" else None

    rows = []
    for x in np.asarray(xs, dtype=float):
        costs = {"band1": band1(x), "band2": band2(x)}
        if generalized is not None:
            costs["generalized"] = generalized(x)
        best = min(costs, key=costs.get)
        rows.append(CompareRow(x=float(x), best=best, **costs))
    return rows


def cost_curves(rows: Sequence[CompareRow]) -> List[CostCurve]:
    """Split comparison rows into one curve per policy."""
    curves = []
    for tag in ("band1", "band2", "generalized"):
        points = [CostPoint(x=row.x, cost=getattr(row, tag)) for row in rows if getattr(row, tag) is not None]
        if points:
            curves.append(CostCurve(policy_tag=tag, points=points))
    return curves


def value_function_v(kernel: Kernel, A: float) -> ValueFunction:
    """v_A itself; it solves the continuation equation on the whole line."""
    return ValueFunction(
        name=f"v(A={A:.6g})",
        f=lambda x: kernel.v(A, x),
        df=lambda x: kernel.dv(A, x),
        d2f=lambda x: kernel.d2v(A, x),
        kinks=[0.0],
    )


def value_function_band(kernel: Kernel, solution: BandSolution) -> ValueFunction:
    """
    Value function of an optimal band in its own problem: v_A* above s, linear below.

    Applied to the OP2 solution this is the candidate V2 for the (s2, S2) regime.
    """
    A, s, S = solution.a_star, solution.s, solution.S
    k = kernel.params.k
    v_top = kernel.v(A, S)

    def f(x):
        return kernel.v(A, x) if x >= s else v_top + solution.setup + k * (S - x)

    return ValueFunction(
        name=f"V[{solution.problem}]",
        f=f,
        df=lambda x: kernel.dv(A, x) if x >= s else -k,
        d2f=lambda x: kernel.d2v(A, x) if x >= s else 0.0,
        kinks=[s, 0.0],
        continuation=(s, math.inf),
    )


def value_function_generalized(kernel: Kernel, report: RegimeReport) -> ValueFunction:
    """Discounted cost of the generalized policy with its branchwise derivatives."""
    _require_generalized(report)
    A = report.sol1.a_star
    k = kernel.params.k
    s1, S1, q, s_low = report.sol1.s, report.sol1.S, report.Q, report.s_low

    def df(x):
        if x > s1:
            return kernel.dv(A, x)
        if s_low <= x <= S1 - q:
            return kernel.dv(A, x + q)
        return -k

    def d2f(x):
        if x > s1:
            return kernel.d2v(A, x)
        if s_low <= x <= S1 - q:
            return kernel.d2v(A, x + q)
        return 0.0

    return ValueFunction(
        name="DC[generalized]",
        f=generalized_evaluator(kernel, report),
        df=df,
        d2f=d2f,
        kinks=sorted({s_low, S1 - q, s1, 0.0, -q}),
        continuation=(s1, math.inf),
    )


def lower_bound_v1(kernel: Kernel, sol1: BandSolution) -> ValueFunction:
    """
    Lower-bound candidate V1 for the K1 problem.

    With s1-bar <= s1 < S1 <= S1-bar the roots of v1' = -k, V1 follows v1 above
    s1-bar and continues with slope -k below it.
    """
    A = sol1.a_star
    k = kernel.params.k
    edges = band_edges(kernel, A)
    # v1' touches -k only at the minimizer when the band is degenerate
    s_edge = edges[0] if edges is not None else sol1.x_star
    v_edge = kernel.v(A, s_edge)

    return ValueFunction(
        name="V1",
        f=lambda x: kernel.v(A, x) if x >= s_edge else v_edge + k * (s_edge - x),
        df=lambda x: kernel.dv(A, x) if x >= s_edge else -k,
        d2f=lambda x: kernel.d2v(A, x) if x >= s_edge else 0.0,
        kinks=[s_edge, 0.0],
        continuation=(s_edge, math.inf),
    )
