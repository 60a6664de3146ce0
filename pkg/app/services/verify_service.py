"""
Numerical checks that back the closed forms: lower-bound conditions for
candidate value functions, quasi-convexity of dv, and a brute-force grid
oracle for the two constrained band problems.
"""
import logging
import math
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..core.errors import OutOfRange
from ..schemas.model import setup_cost
from ..schemas.policy import ValueFunction
from ..schemas.solution import BandSolution
from ..schemas.verification import CheckReport, OracleResult
from .kernel_service import Kernel

logger = logging.getLogger(__name__)

HJB_TOL = 1e-7
GAP_TOL = 1e-8
KINK_RADIUS = 1e-6
DIFF_TOL = 1e-10
ORACLE_WIDTH_TOL = 1e-9
ORACLE_A_TOL = 1e-8
MAX_LISTED_FAILURES = 20
DEFAULT_SEED = 20240601


def _log_outcome(report: CheckReport) -> CheckReport:
    if report.passed:
        logger.info("Check %s passed (worst value %s)", report.check, report.worst_value)
    else:
        logger.warning(
            "Check %s failed at %d of %d points; worst %s at %s",
            report.check, report.n_failures, report.n_points, report.worst_value, report.worst_point,
        )
    return report


def _away_from_kinks(xs: np.ndarray, kinks: Iterable[float], radius: float) -> np.ndarray:
    keep = np.ones(xs.shape, dtype=bool)
    for z in kinks:
        keep &= np.abs(xs - z) > radius
    return xs[keep]


def _kink_sides(kinks: Iterable[float], radius: float) -> np.ndarray:
    """Points just left and right of each finite kink, outside the skipped radius."""
    finite = [float(z) for z in kinks if math.isfinite(z)]
    return np.array([z + side * 2.0 * radius for z in finite for side in (-1.0, 1.0)])


def hjb_residual(kernel: Kernel, vf: ValueFunction, x: float) -> float:
    """(1/2) sigma^2 f'' - mu f' - beta f + g at x."""
    p = kernel.params
    return (
        0.5 * p.sigma ** 2 * vf.d2f(x) - p.mu * vf.df(x) - p.beta * vf.f(x) + float(kernel.cost.value(x))
    )


def hjb_check(kernel: Kernel, vf: ValueFunction, grid: Sequence[float], tol: float = HJB_TOL,
              kink_radius: float = KINK_RADIUS) -> CheckReport:
    """
    Generator inequality Gamma f - beta f + g >= 0 off the kink set.

    On the continuation region of f the residual must also vanish to tol.
    Both one-sided limits at every declared kink are evaluated in addition to
    the grid, since a violation may live on a window narrower than the grid step.

    Args:
        kernel: Model kernel
        vf: Candidate value function
        grid: Evaluation points
        tol: Allowed negative residual (and continuation mismatch)
        kink_radius: Points this close to a kink are skipped

    Returns:
        CheckReport with the minimum residual as worst value
    """
    xs = np.union1d(
        _away_from_kinks(np.asarray(grid, dtype=float), vf.kinks, kink_radius),
        _kink_sides(vf.kinks, kink_radius),
    )
    residuals = np.array([hjb_residual(kernel, vf, x) for x in xs])
    lo, hi = vf.continuation
    inside = (xs > lo) & (xs < hi)

    failing = (residuals < -tol) | (inside & (np.abs(residuals) >= tol))
    worst = int(np.argmin(residuals)) if xs.size else None
    max_inside = float(np.max(np.abs(residuals[inside]))) if inside.any() else 0.0
    failures = [[float(x), float(r)] for x, r in zip(xs[failing], residuals[failing])]

    return _log_outcome(CheckReport(
        check=f"hjb[{vf.name}]",
        passed=not failures,
        worst_point=[float(xs[worst])] if worst is not None else None,
        worst_value=float(residuals[worst]) if worst is not None else None,
        n_points=int(xs.size),
        n_failures=len(failures),
        failures=failures[:MAX_LISTED_FAILURES],
        details={"min_residual": float(residuals.min()) if xs.size else 0.0,
                 "max_abs_continuation": max_inside},
    ))


def stratified_pairs(breakpoints: Sequence[float], q: float, n_pairs: int, seed: int = DEFAULT_SEED,
                     max_jump: Optional[float] = None) -> np.ndarray:
    """
    Deterministic pairs x1 < x2 concentrated around the breakpoints.

    Gaps are drawn from three strata: short, straddling the threshold Q, and long.

    Returns:
        Array of shape (n_pairs, 2)
    """
    rng = np.random.default_rng(seed)
    anchors = np.asarray(sorted(set(float(b) for b in breakpoints)) or [0.0])
    span_lo, span_hi = anchors.min() - 10.0, anchors.max() + 10.0
    q_scale = q if math.isfinite(q) else 5.0
    longest = max_jump if max_jump is not None else 4.0 * max(q_scale, 5.0)

    near = rng.integers(0, 2, size=n_pairs).astype(bool)
    x2 = np.where(
        near,
        rng.choice(anchors, size=n_pairs) + rng.normal(0.0, 0.5, size=n_pairs),
        rng.uniform(span_lo, span_hi, size=n_pairs),
    )
    stratum = rng.integers(0, 3, size=n_pairs)
    gaps = np.select(
        [stratum == 0, stratum == 1],
        [rng.uniform(1e-4, 1.0, size=n_pairs), q_scale + rng.uniform(-0.1, 0.1, size=n_pairs)],
        rng.uniform(1e-4, longest, size=n_pairs),
    )
    gaps = np.clip(gaps, 1e-4, longest)
    return np.column_stack([x2 - gaps, x2])


def intervention_gap_check(kernel: Kernel, vf: ValueFunction, n_pairs: int = 10_000,
                           pairs: Optional[np.ndarray] = None, breakpoints: Optional[Sequence[float]] = None,
                           q: Optional[float] = None, setup: Optional[Callable[[float], float]] = None,
                           max_jump: Optional[float] = None, seed: int = DEFAULT_SEED,
                           tol: float = GAP_TOL) -> CheckReport:
    """
    Intervention inequality f(x2) - f(x1) >= -K(x2 - x1) - k (x2 - x1) for x1 < x2.

    Args:
        kernel: Model kernel
        vf: Candidate value function
        n_pairs: Number of sampled pairs when pairs is not given
        pairs: Explicit (x1, x2) pairs
        breakpoints: Levels the sampler concentrates on (defaults to the kinks of vf)
        q: Threshold overriding the model's Q
        setup: Setup cost of a jump; defaults to the two-step cost
        max_jump: Largest jump considered (orders above it are not admissible)
        seed: Sampler seed
        tol: Allowed violation

    Returns:
        CheckReport with the smallest slack as worst value
    """
    params = kernel.params if q is None else kernel.params.with_q(q)
    if setup is None:
        def setup(d):
            return setup_cost(d, params)
    if pairs is None:
        points = list(breakpoints) if breakpoints is not None else list(vf.kinks)
        for z in list(points):
            if math.isfinite(params.Q):
                points.extend([z - params.Q, z + params.Q])
        pairs = stratified_pairs(points, params.Q, n_pairs, seed=seed, max_jump=max_jump)
    pairs = np.asarray(pairs, dtype=float)

    slack = np.empty(len(pairs))
    for i, (x1, x2) in enumerate(pairs):
        d = x2 - x1
        slack[i] = vf.f(x2) - vf.f(x1) + setup(d) + params.k * d

    failing = slack < -tol
    worst = int(np.argmin(slack))
    failures = [[float(a), float(b), float(v)] for (a, b), v in zip(pairs[failing], slack[failing])]
    return _log_outcome(CheckReport(
        check=f"gap[{vf.name}]",
        passed=not failures,
        worst_point=[float(pairs[worst, 0]), float(pairs[worst, 1])],
        worst_value=float(slack[worst]),
        n_points=int(len(pairs)),
        n_failures=len(failures),
        failures=failures[:MAX_LISTED_FAILURES],
    ))


def growth_check(kernel: Kernel, vf: ValueFunction, grid: Sequence[float],
                 kink_radius: float = KINK_RADIUS) -> CheckReport:
    """
    Growth conditions on f': bounded on x < 0, polynomial on x >= 0.

    Boundedness is judged by comparing |f'| on the leftmost quarter of the
    negative grid with the rest; the polynomial degree is estimated between the
    largest positive grid point and the one nearest its half, then compared
    with the degree of the cost's growth bound.
    """
    xs = _away_from_kinks(np.asarray(grid, dtype=float), vf.kinks, kink_radius)
    neg = np.sort(xs[xs < 0])
    pos = np.sort(xs[xs >= 0])
    notes = []
    details = {}
    passed = True

    if neg.size >= 4:
        slopes = np.abs([vf.df(x) for x in neg])
        cut = neg.size // 4
        far, rest = slopes[:cut].max(), slopes[cut:].max()
        details["max_abs_slope_negative"] = float(slopes.max())
        if far > rest * (1.0 + 1e-6) + 1e-9:
            passed = False
            notes.append("|f'| keeps growing towards -inf")

    _, _, n = kernel.cost.growth_witness()
    if pos.size >= 2 and pos[-1] > 0:
        top = pos[-1]
        half = pos[np.argmin(np.abs(pos - top / 2.0))]
        if half > 0:
            degree = (math.log1p(abs(vf.df(top))) - math.log1p(abs(vf.df(half)))) / math.log(top / half)
            details["slope_degree_positive"] = float(degree)
            if degree > n + 0.5:
                passed = False
                notes.append(f"f' grows faster than degree {n} on x >= 0")

    return _log_outcome(CheckReport(
        check=f"growth[{vf.name}]",
        passed=passed,
        n_points=int(xs.size),
        n_failures=0 if passed else 1,
        details=details,
        notes=notes,
    ))


def grid_oracle(kernel: Kernel, which: str, s_range: Sequence[float], S_range: Sequence[float],
                resolution: float, q: Optional[float] = None) -> OracleResult:
    """
    Exhaustive maximization of A(s, S) over a rectangular grid.

    Args:
        kernel: Model kernel
        which: "OP1" (width <= Q, setup K1) or "OP2" (width >= Q, setup K2)
        s_range: (min, max) of reorder levels
        S_range: (min, max) of order-up-to levels
        resolution: Grid step
        q: Threshold overriding the model's Q

    Returns:
        OracleResult with the best admissible grid point
    """
    if which not in ("OP1", "OP2"):
        raise ValueError(f"which must be OP1 or OP2, got {which!r}")
    p = kernel.params
    q = p.Q if q is None else float(q)
    setup = p.K1 if which == "OP1" else p.K2

    s_grid = np.arange(s_range[0], s_range[1] + resolution / 2.0, resolution)
    S_grid = np.arange(S_range[0], S_range[1] + resolution / 2.0, resolution)
    lam_s = np.array([kernel.cap_lambda1(x) + kernel.cap_lambda2(x) for x in s_grid])
    lam_S = np.array([kernel.cap_lambda1(x) + kernel.cap_lambda2(x) for x in S_grid])

    s_mat = s_grid[:, None]
    S_mat = S_grid[None, :]
    width = S_mat - s_mat
    if which == "OP1":
        admissible = (width > 0) & (width <= q + ORACLE_WIDTH_TOL)
    else:
        admissible = (width > 0) & (width >= q - ORACLE_WIDTH_TOL)

    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        denominator = -np.exp(-kernel.lam2 * S_mat) * np.expm1(kernel.lam2 * width)
        values = kernel.lam2 ** 2 / denominator * (
            lam_S[None, :] - lam_s[:, None] + (setup + p.k * width) / kernel.c
        )
    values = np.where(admissible & np.isfinite(values), values, -np.inf)

    i, j = np.unravel_index(int(np.argmax(values)), values.shape)
    logger.debug("Grid oracle %s: best (%.4f, %.4f) among %d points", which, s_grid[i], S_grid[j], int(admissible.sum()))
    return OracleResult(
        which=which,
        s=float(s_grid[i]),
        S=float(S_grid[j]),
        a=float(values[i, j]),
        step=resolution,
        n_candidates=int(admissible.sum()),
    )


def quasiconvexity_check(kernel: Kernel, A: float, grid: Sequence[float], tol: float = DIFF_TOL) -> CheckReport:
    """
    dv(A, .) decreases then increases on the grid, with one sign change of its differences.

    Raises:
        OutOfRange: A outside (A-low, A-high)
    """
    bounds = kernel.a_bounds()
    if not bounds.a_low < A < bounds.a_high:
        raise OutOfRange(f"A={A:.8g} outside ({bounds.a_low:.8g}, {bounds.a_high:.8g})")

    xs = np.sort(np.asarray(grid, dtype=float))
    slopes = kernel.curve(A, xs, order=1)
    diffs = np.diff(slopes)
    signs = np.sign(np.where(np.abs(diffs) <= tol, 0.0, diffs))
    signs = signs[signs != 0]
    changes = np.flatnonzero(signs[1:] != signs[:-1])

    passed = signs.size > 0 and len(changes) == 1 and signs[0] < 0 < signs[-1]
    minimizer = float(xs[int(np.argmin(slopes))])

    return _log_outcome(CheckReport(
        check=f"quasiconvexity[A={A:.6g}]",
        passed=bool(passed),
        worst_point=[minimizer],
        worst_value=float(slopes.min()),
        n_points=int(xs.size),
        n_failures=0 if passed else int(len(changes)),
        details={"sign_changes": float(len(changes)), "grid_minimizer": minimizer},
    ))


def oracle_check(kernel: Kernel, solution: BandSolution, resolution: float = 0.01, span: float = 2.0,
                 q: Optional[float] = None) -> CheckReport:
    """
    Compare a solved band with the grid oracle on a window around it.

    The window is centred on (s, S), which is itself a grid point, so no grid
    point may beat the solver's A*. The distance to the oracle maximizer is
    reported but not judged: interior maxima sit on flat ridges.
    """
    which = solution.problem
    best = grid_oracle(
        kernel, which,
        (solution.s - span, solution.s + span),
        (solution.S - span, solution.S + span),
        resolution, q=q,
    )
    distance = max(abs(best.s - solution.s), abs(best.S - solution.S))
    excess = best.a - solution.a_star
    passed = excess <= ORACLE_A_TOL * max(1.0, abs(solution.a_star))
    return _log_outcome(CheckReport(
        check=f"oracle[{which}]",
        passed=passed,
        worst_point=[best.s, best.S],
        worst_value=excess,
        n_points=best.n_candidates,
        n_failures=0 if passed else 1,
        details={"oracle_a": best.a, "solver_a": solution.a_star, "step": resolution, "distance": distance},
    ))


def dominance_check(name: str, lower: Callable[[float], float], upper: Callable[[float], float],
                    grid: Sequence[float], equal_from: Optional[float] = None,
                    tol: float = GAP_TOL) -> CheckReport:
    """
    lower(x) <= upper(x) on the grid, with equality to tol on [equal_from, inf).

    Args:
        name: Label of the pair being compared
        lower: Candidate lower bound
        upper: Cost it should minorize
        grid: Evaluation points
        equal_from: Level from which both functions must agree
        tol: Allowed excess and mismatch

    Returns:
        CheckReport with the smallest margin upper - lower as worst value
    """
    xs = np.asarray(grid, dtype=float)
    margins = np.array([upper(x) - lower(x) for x in xs])
    failing = margins < -tol
    if equal_from is not None:
        failing |= (xs >= equal_from) & (np.abs(margins) > tol)
    worst = int(np.argmin(margins))
    failures = [[float(x), float(m)] for x, m in zip(xs[failing], margins[failing])]
    return _log_outcome(CheckReport(
        check=f"dominance[{name}]",
        passed=not failures,
        worst_point=[float(xs[worst])],
        worst_value=float(margins[worst]),
        n_points=int(xs.size),
        n_failures=len(failures),
        failures=failures[:MAX_LISTED_FAILURES],
    ))
