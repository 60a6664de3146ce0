import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Sequence, Tuple

from ..core.config import settings
from ..core.errors import (
    ConvergenceFailure,
    InvalidConfig,
    InvariantViolation,
    NoBracket,
    OutOfRange,
    RegimeError,
)
from ..schemas.solution import BandSolution, QSweepRow, RegimeReport, SweepResult
from .kernel_service import Kernel, find_root

logger = logging.getLogger(__name__)

PASTE_TOL = 1e-8
WIDTH_TOL = 1e-9
ENDPOINT_TOL = 1e-10
RHO_TOL = 1e-6


def _threshold(kernel: Kernel, q: Optional[float]) -> float:
    q = kernel.params.Q if q is None else float(q)
    if not q > 0:
        raise OutOfRange(f"threshold Q must be > 0, got {q}")
    return q


def _a_interval(kernel: Kernel) -> Tuple[float, float, float]:
    """Search interval for A strictly inside (A-low, A-high), and the A tolerance."""
    bounds = kernel.a_bounds()
    delta = 1e-9 * (bounds.a_high - bounds.a_low)
    xtol = 1e-12 * max(1.0, abs(bounds.a_low), abs(bounds.a_high))
    return bounds.a_low + delta, bounds.a_high - delta, xtol


def _expand(f, start: float, direction: float) -> float:
    """Walk away from start in doubling steps until f turns positive."""
    step = 1.0
    x = start + direction * step
    while f(x) <= 0.0:
        step *= 2.0
        x = start + direction * step
        if abs(x) > abs(settings.X_STAR_LEFT_CAP):
            raise NoBracket(f"no sign change within {settings.X_STAR_LEFT_CAP:g} of {start:.6g}")
    return x


def band_edges(kernel: Kernel, A: float, x_star: Optional[float] = None) -> Optional[Tuple[float, float]]:
    """
    The two roots of dv(A, .) = -k around the minimizer of dv(A, .).

    Returns:
        (s, S), or None when dv(A, .) stays above -k
    """
    xs = kernel.x_star(A) if x_star is None else x_star
    k = kernel.params.k

    def excess(x):
        return kernel.dv(A, x) + k

    if excess(xs) >= 0.0:
        return None
    s, _ = find_root(excess, _expand(excess, xs, -1.0), xs)
    S, _ = find_root(excess, xs, _expand(excess, xs, 1.0))
    return s, S


def kappa(kernel: Kernel, A: float) -> float:
    """
    Setup cost implied by A for an unconstrained band: v(s) - v(S) - k(S - s).

    Zero when the band for A is empty. Strictly decreasing in A.
    """
    edges = band_edges(kernel, A)
    if edges is None:
        return 0.0
    s, S = edges
    return kernel.v(A, s) - kernel.v(A, S) - kernel.params.k * (S - s)


def tight_position(kernel: Kernel, A: float, q: float, x_star: Optional[float] = None) -> float:
    """Unique s in [x* - Q, x*] with dv(A, s) = dv(A, s + Q)."""
    xs = kernel.x_star(A) if x_star is None else x_star
    s, _ = find_root(lambda s: kernel.dv(A, s) - kernel.dv(A, s + q), xs - q, xs)
    return s


def kappa_q(kernel: Kernel, A: float, q: float) -> Tuple[float, float]:
    """
    Setup cost implied by A for a band of width exactly Q.

    Returns:
        (v(s) - v(s + Q) - kQ, s)
    """
    s = tight_position(kernel, A, q)
    return kernel.v(A, s) - kernel.v(A, s + q) - kernel.params.k * q, s


def _solve_for_a(kernel: Kernel, implied_setup, setup: float, label: str) -> Tuple[float, int]:
    lo, hi, xtol = _a_interval(kernel)
    try:
        return find_root(lambda A: implied_setup(A) - setup, lo, hi, xtol=xtol,
                         maxiter=settings.A_BISECTION_MAX_ITER)
    except NoBracket as e:
        raise NoBracket(
            f"{label}: implied setup cost does not cross {setup:g} on A in ({lo:.8g}, {hi:.8g}); "
            f"the model is probably invalid ({e.message})"
        )


def _interior(kernel: Kernel, setup: float) -> BandSolution:
    """Interior band for a setup cost, memoised on the kernel."""
    with kernel.memo_lock:
        cached = kernel.interior_bands.get(setup)
    if cached is not None:
        return cached
    A, iterations = _solve_for_a(kernel, lambda a: kappa(kernel, a), setup, "interior band")
    xs = kernel.x_star(A)
    edges = band_edges(kernel, A, xs)
    if edges is None:
        raise ConvergenceFailure(f"interior band collapsed at A={A:.10g}")
    s, S = edges
    logger.debug("Interior band for K=%g: s=%.6f S=%.6f A=%.8f (%d iterations)", setup, s, S, A, iterations)
    solution = BandSolution(
        problem="unconstrained",
        s=s,
        S=S,
        a_star=A,
        setup=setup,
        boundary_tight=False,
        smooth_paste=kernel.dv(A, s),
        x_star=xs,
        iterations=iterations,
    )
    with kernel.memo_lock:
        return kernel.interior_bands.setdefault(setup, solution)


def _tight(kernel: Kernel, setup: float, q: float, problem: str) -> BandSolution:
    A, iterations = _solve_for_a(kernel, lambda a: kappa_q(kernel, a, q)[0], setup, f"{problem} tight band")
    xs = kernel.x_star(A)
    s = tight_position(kernel, A, q, xs)
    return BandSolution(
        problem=problem,
        s=s,
        S=s + q,
        a_star=A,
        setup=setup,
        boundary_tight=True,
        smooth_paste=kernel.dv(A, s),
        x_star=xs,
        iterations=iterations,
    )


def solve_unconstrained(kernel: Kernel, setup: float) -> BandSolution:
    """
    Smooth-pasting band for a constant setup cost and no quantity constraint.

    Args:
        kernel: Model kernel
        setup: Setup cost per order

    Returns:
        BandSolution with dv(a_star, s) = dv(a_star, S) = -k
    """
    return _interior(kernel, float(setup))


def solve_op1(kernel: Kernel, q: Optional[float] = None) -> BandSolution:
    """
    Best band with setup cost K1 among bands of width at most Q.

    Args:
        kernel: Model kernel
        q: Threshold overriding the model's Q (math.inf for no constraint)

    Returns:
        BandSolution for OP1
    """
    q = _threshold(kernel, q)
    k = kernel.params.k
    interior = _interior(kernel, kernel.params.K1)
    if not math.isfinite(q) or interior.width <= q:
        logger.info("OP1 Q=%g: interior band (%.6f, %.6f), A*=%.8f", q, interior.s, interior.S, interior.a_star)
        return interior.model_copy(update={"problem": "OP1"})

    solution = _tight(kernel, kernel.params.K1, q, "OP1")
    if solution.smooth_paste > -k + PASTE_TOL:
        raise InvariantViolation(f"OP1 tight band has dv(s) = {solution.smooth_paste:.10g} > -k")
    logger.info("OP1 Q=%g: tight band (%.6f, %.6f), A*=%.8f", q, solution.s, solution.S, solution.a_star)
    return solution


def solve_op2(kernel: Kernel, q: Optional[float] = None) -> BandSolution:
    """
    Best band with setup cost K2 among bands of width at least Q.

    Args:
        kernel: Model kernel
        q: Threshold overriding the model's Q

    Returns:
        BandSolution for OP2
    """
    q = _threshold(kernel, q)
    if not math.isfinite(q):
        raise OutOfRange("OP2 needs a finite threshold Q")
    k = kernel.params.k
    interior = _interior(kernel, kernel.params.K2)
    if interior.width >= q:
        logger.info("OP2 Q=%g: interior band (%.6f, %.6f), A*=%.8f", q, interior.s, interior.S, interior.a_star)
        return interior.model_copy(update={"problem": "OP2"})

    solution = _tight(kernel, kernel.params.K2, q, "OP2")
    if solution.smooth_paste < -k - PASTE_TOL:
        raise InvariantViolation(f"OP2 tight band has dv(s) = {solution.smooth_paste:.10g} < -k")
    logger.info("OP2 Q=%g: tight band (%.6f, %.6f), A*=%.8f", q, solution.s, solution.S, solution.a_star)
    return solution


def _require_generalized(sol1: BandSolution, sol2: BandSolution) -> None:
    if sol1.a_star <= sol2.a_star:
        raise RegimeError(
            f"A1*={sol1.a_star:.8g} <= A2*={sol2.a_star:.8g}: the (s2, S2) band is optimal everywhere"
        )


def s_bar(kernel: Kernel, sol1: BandSolution, sol2: BandSolution) -> float:
    """Order-up-to level used below s-low: root of dv(A1*, .) = -k on [S1, inf)."""
    _require_generalized(sol1, sol2)
    if not sol1.boundary_tight:
        return sol1.S
    k = kernel.params.k

    def excess(x):
        return kernel.dv(sol1.a_star, x) + k

    if excess(sol1.S) >= 0.0:
        return sol1.S
    root, _ = find_root(excess, sol1.S, _expand(excess, sol1.S, 1.0))
    return root


def indifference(kernel: Kernel, sol1: BandSolution, s_bar_value: float, x: float, q: float) -> float:
    """H(x): ordering Q at cost K1 minus ordering up to S-bar at cost K2."""
    p = kernel.params
    A = sol1.a_star
    return (kernel.v(A, x + q) + p.K1 + p.k * q) - (kernel.v(A, s_bar_value) + p.K2 + p.k * (s_bar_value - x))


def s_low(kernel: Kernel, sol1: BandSolution, sol2: BandSolution, s_bar_value: float,
          q: Optional[float] = None) -> float:
    """
    Indifference level s-low in [s1 - Q, S1 - Q] where H vanishes.

    Args:
        kernel: Model kernel
        sol1: OP1 solution
        sol2: OP2 solution (regime check)
        s_bar_value: S-bar for sol1
        q: Threshold overriding the model's Q

    Returns:
        s-low
    """
    _require_generalized(sol1, sol2)
    q = _threshold(kernel, q)
    lo, hi = sol1.s - q, sol1.S - q

    def h(x):
        return indifference(kernel, sol1, s_bar_value, x, q)

    h_lo, h_hi = h(lo), h(hi)
    if abs(h_lo) <= ENDPOINT_TOL:
        return lo
    if abs(h_hi) <= ENDPOINT_TOL:
        return hi
    if h_lo < 0.0 or h_hi > 0.0:
        raise NoBracket(f"H does not change sign on [{lo:.6g}, {hi:.6g}] (H={h_lo:.6g}, {h_hi:.6g})")
    root, _ = find_root(h, lo, hi)
    return root


def xi(kernel: Kernel, sol1: BandSolution, sol2: BandSolution, s_bar_value: float, s_low_value: float) -> float:
    """Xi(s-low) = mu k + g(s-low) - beta (v1(S-bar) + K2 + k (S-bar - s-low))."""
    _require_generalized(sol1, sol2)
    p = kernel.params
    return (
        p.mu * p.k
        + float(kernel.cost.value(s_low_value))
        - p.beta * (kernel.v(sol1.a_star, s_bar_value) + p.K2 + p.k * (s_bar_value - s_low_value))
    )


def classify(kernel: Kernel, q: Optional[float] = None) -> RegimeReport:
    """
    Solve both constrained problems and decide which policy regime is optimal.

    Args:
        kernel: Model kernel
        q: Threshold overriding the model's Q

    Returns:
        RegimeReport; S-bar, s-low and Xi are set only for the generalized regime
    """
    q = _threshold(kernel, q)
    sol1 = solve_op1(kernel, q)
    sol2 = solve_op2(kernel, q)

    if sol1.a_star <= sol2.a_star:
        if not (sol1.boundary_tight and not sol2.boundary_tight and sol2.width > q + WIDTH_TOL):
            raise InvariantViolation(
                f"A1* <= A2* at Q={q:g} but widths are {sol1.width:.8g} and {sol2.width:.8g}"
            )
        logger.info("Q=%g: S2Everywhere (A1*=%.6f <= A2*=%.6f)", q, sol1.a_star, sol2.a_star)
        return RegimeReport(regime="S2Everywhere", Q=q, sol1=sol1, sol2=sol2)

    if not sol1.s > sol2.s:
        raise InvariantViolation(f"A1* > A2* at Q={q:g} but s1={sol1.s:.8g} <= s2={sol2.s:.8g}")
    upper = s_bar(kernel, sol1, sol2)
    lower = s_low(kernel, sol1, sol2, upper, q)
    value = xi(kernel, sol1, sol2, upper, lower)
    logger.info("Q=%g: S1PlusGeneralized, S-bar=%.6f s-low=%.6f Xi=%.6f", q, upper, lower, value)
    return RegimeReport(
        regime="S1PlusGeneralized",
        Q=q,
        sol1=sol1,
        sol2=sol2,
        s_bar=upper,
        s_low=lower,
        xi=value,
        xi_nonneg=value >= 0.0,
    )


def sweep_q(kernel: Kernel, q_values: Sequence[float]) -> SweepResult:
    """
    Classify the model for each threshold in increasing order.

    Args:
        kernel: Model kernel
        q_values: Strictly increasing positive thresholds

    Returns:
        SweepResult with one row per Q and the unconstrained-band summary
    """
    qs = [float(q) for q in q_values]
    if not qs:
        raise InvalidConfig("threshold grid is empty")
    if qs[0] <= 0 or any(b <= a for a, b in zip(qs, qs[1:])):
        raise InvalidConfig("threshold grid must be positive and strictly increasing")

    unconstrained = solve_unconstrained(kernel, kernel.params.K1)
    q_dagger = unconstrained.width

    with ThreadPoolExecutor(max_workers=settings.worker_count) as pool:
        reports = list(pool.map(lambda q: classify(kernel, q), qs))
    rows = [QSweepRow.from_report(report) for report in reports]

    q_low = next((row.Q for row in rows if row.xi is not None and row.xi >= 0.0), None)
    tail = [row for row in rows if row.Q >= q_dagger - WIDTH_TOL and row.xi is not None]
    increasing = None
    rho = None
    if len(tail) >= 2:
        increasing = all(b.xi > a.xi for a, b in zip(tail, tail[1:]))
    if tail:
        offsets = [row.s_low + row.Q for row in tail]
        if max(offsets) - min(offsets) <= RHO_TOL:
            rho = offsets[0]

    logger.info("Swept %d thresholds; Q-dagger=%.6f, first Q with Xi >= 0: %s", len(rows), q_dagger, q_low)
    return SweepResult(
        rows=rows,
        q_dagger=q_dagger,
        unconstrained=unconstrained,
        q_low=q_low,
        xi_increasing_above_q_dagger=increasing,
        rho=rho,
    )
