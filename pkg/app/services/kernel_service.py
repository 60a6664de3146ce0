"""
Analytic building blocks of the band problem.

A Kernel bundles a model with its characteristic roots and an integral
backend. Costs that are polynomial on each half-line use exact closed forms;
any other cost (or an explicit request) goes through adaptive quadrature.
"""
import logging
import math
import threading
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial import polynomial as poly
from scipy.integrate import quad
from scipy.optimize import bisect

from ..core.config import settings
from ..core.errors import ConvergenceFailure, DegenerateBand, InvalidConfig, NoBracket, OutOfRange, QuadratureFailure
from ..schemas.model import InventoryModel, ModelParams, Quadrature
from ..schemas.solution import ABounds, Roots

logger = logging.getLogger(__name__)

EXP_CLIP = 700.0
MIN_BAND_WIDTH = 1e-12
BACKENDS = ("auto", "closed_form", "quadrature")


def _exp(t: float) -> float:
    return math.exp(min(t, EXP_CLIP))


def roots(params: ModelParams) -> Roots:
    """
    Characteristic roots lambda1, lambda2 of (1/2)sigma^2 r^2 + mu r - beta = 0 (up to sign).

    Args:
        params: Model parameters

    Returns:
        Roots with lambda1 * lambda2 = 2 beta / sigma^2
    """
    variance = params.sigma ** 2
    disc = math.sqrt(params.mu ** 2 + 2.0 * params.beta * variance)
    # the smaller root comes from the product identity to avoid cancellation
    if params.mu >= 0:
        lambda1 = (params.mu + disc) / variance
        lambda2 = 2.0 * params.beta / (params.mu + disc)
    else:
        lambda2 = (-params.mu + disc) / variance
        lambda1 = 2.0 * params.beta / (-params.mu + disc)
    return Roots(lambda1=lambda1, lambda2=lambda2)


def find_root(f: Callable[[float], float], a: float, b: float,
              xtol: Optional[float] = None, maxiter: int = 200) -> Tuple[float, int]:
    """
    Bracketed bisection on [a, b].

    Returns:
        (root, iterations)
    """
    xtol = settings.ROOT_XTOL if xtol is None else xtol
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a, 0
    if fb == 0.0:
        return b, 0
    if np.sign(fa) == np.sign(fb):
        raise NoBracket(f"no sign change on [{a:.6g}, {b:.6g}] (f(a)={fa:.6g}, f(b)={fb:.6g})")
    root, info = bisect(f, a, b, xtol=xtol, maxiter=maxiter, full_output=True, disp=False)
    if not info.converged:
        raise ConvergenceFailure(f"bisection on [{a:.6g}, {b:.6g}] did not converge in {maxiter} iterations")
    return float(root), info.iterations


def _kernel_series(p: Polynomial, lam: float, alternating: bool) -> Polynomial:
    """sum_j (+-1)^j p^(j) / lam^(j+1), the exponential transform of a polynomial."""
    total = Polynomial([0.0])
    term = p
    for j in range(p.degree() + 1):
        sign = -1.0 if (alternating and j % 2) else 1.0
        total = total + term * (sign / lam ** (j + 1))
        term = term.deriv()
    return total


class _PiecewiseTransform:
    """Lambda-type integrals of a function that is polynomial on each half-line."""

    def __init__(self, left: Polynomial, right: Polynomial, lam1: float, lam2: float):
        self.lam1 = lam1
        self.lam2 = lam2
        r1_left = _kernel_series(left, lam1, alternating=False)
        r1_right = _kernel_series(right, lam1, alternating=False)
        r2_left = _kernel_series(left, lam2, alternating=True)
        r2_right = _kernel_series(right, lam2, alternating=True)
        self._r1_left = r1_left.coef
        self._r1_right = r1_right.coef
        self._r2_left = r2_left.coef
        self._r2_right = r2_right.coef
        self._r1_jump = float(r1_right(0.0) - r1_left(0.0))
        self._r2_left0 = float(r2_left(0.0))
        self._r2_right0 = float(r2_right(0.0))

    def upper(self, x: float) -> float:
        """int_x^inf e^{lam1 (x-y)} f(y) dy."""
        if x >= 0.0:
            return float(poly.polyval(x, self._r1_right))
        return float(poly.polyval(x, self._r1_left)) + _exp(self.lam1 * x) * self._r1_jump

    def lower(self, x: float) -> float:
        """int_0^x e^{-lam2 (x-y)} f(y) dy, signed."""
        if x >= 0.0:
            return float(poly.polyval(x, self._r2_right)) - _exp(-self.lam2 * x) * self._r2_right0
        return float(poly.polyval(x, self._r2_left)) - _exp(-self.lam2 * x) * self._r2_left0


class _ClosedFormBackend:
    name = "closed_form"

    def __init__(self, model: InventoryModel, lam1: float, lam2: float):
        left, right = model.cost.pieces()
        self._g = _PiecewiseTransform(left, right, lam1, lam2)
        self._g2 = _PiecewiseTransform(left.deriv(2), right.deriv(2), lam1, lam2)
        self._bounds = self._a_bounds(left.deriv(), right.deriv(), lam1, lam2)

    @staticmethod
    def _a_bounds(dleft: Polynomial, dright: Polynomial, lam1: float, lam2: float) -> Tuple[float, float]:
        a_low, a_high = 0.0, 0.0
        term = dleft
        for j in range(dleft.degree() + 1):
            a_low += (-1.0) ** j * float(term(0.0)) / lam2 ** j
            term = term.deriv()
        term = dright
        for j in range(dright.degree() + 1):
            a_high += float(term(0.0)) / lam1 ** j
            term = term.deriv()
        return a_low, a_high

    def cap_lambda1(self, x: float) -> float:
        return self._g.upper(x)

    def cap_lambda2(self, x: float) -> float:
        return self._g.lower(x)

    def upper_g2(self, x: float) -> float:
        return self._g2.upper(x)

    def lower_g2(self, x: float) -> float:
        return self._g2.lower(x)

    def a_bounds(self) -> Tuple[float, float]:
        return self._bounds


class _QuadratureBackend:
    name = "quadrature"

    def __init__(self, model: InventoryModel, lam1: float, lam2: float, quadrature: Quadrature):
        self.cost = model.cost
        self.lam1 = lam1
        self.lam2 = lam2
        self.quadrature = quadrature
        self._bounds = None

    def _integrate(self, f: Callable[[float], float], a: float, b: float) -> float:
        lo, hi = min(a, b), max(a, b)
        points = [0.0] if lo < 0.0 < hi else None
        result = quad(
            f, a, b,
            epsabs=self.quadrature.abs_tol,
            epsrel=self.quadrature.rel_tol,
            limit=self.quadrature.max_subdivisions,
            points=points,
            full_output=1,
        )
        # quad only appends a message when QUADPACK reports a problem
        if len(result) > 3:
            raise QuadratureFailure(f"quadrature on [{a:.6g}, {b:.6g}] failed: {result[3]}")
        return float(result[0])

    def _tail(self, lam: float, x: float) -> float:
        """Length beyond which e^{-lam u} (a + b (|x|+u)^(n+1)) drops below the tolerance."""
        a, b, n = self.cost.growth_witness()
        cutoff = self.quadrature.abs_tol / self.quadrature.tail_factor
        length = 1.0
        for _ in range(64):
            bound = (abs(a) + abs(b) * (abs(x) + length) ** (n + 1)) * math.exp(-lam * length)
            if bound < cutoff:
                return length
            length *= 2.0
        raise QuadratureFailure(f"no tail truncation point found for lambda={lam:.6g}")

    def cap_lambda1(self, x: float) -> float:
        g = self.cost.value
        return self._integrate(lambda y: math.exp(self.lam1 * (x - y)) * float(g(y)), x, x + self._tail(self.lam1, x))

    def cap_lambda2(self, x: float) -> float:
        g = self.cost.value
        return self._integrate(lambda y: math.exp(-self.lam2 * (x - y)) * float(g(y)), 0.0, x)

    def upper_g2(self, x: float) -> float:
        g2 = self.cost.second
        return self._integrate(lambda y: math.exp(self.lam1 * (x - y)) * float(g2(y)), x, x + self._tail(self.lam1, x))

    def lower_g2(self, x: float) -> float:
        g2 = self.cost.second
        return self._integrate(lambda y: math.exp(-self.lam2 * (x - y)) * float(g2(y)), 0.0, x)

    def a_bounds(self) -> Tuple[float, float]:
        if self._bounds is None:
            dg = self.cost.first
            a_low = self.lam2 * self._integrate(
                lambda y: math.exp(self.lam2 * y) * float(dg(y)), -self._tail(self.lam2, 0.0), 0.0
            )
            a_high = self.lam1 * self._integrate(
                lambda y: math.exp(-self.lam1 * y) * float(dg(y)), 0.0, self._tail(self.lam1, 0.0)
            )
            self._bounds = (a_low, a_high)
        return self._bounds


class Kernel:
    """
    Value-function kernel of a model: roots, Lambda integrals, A(s, S) and v_A.

    Instances are immutable after construction apart from the memo of solved
    interior bands, which is guarded by a lock, and are safe to share between threads.
    """

    def __init__(self, model: InventoryModel, quadrature: Optional[Quadrature] = None, backend: str = "auto"):
        if backend not in BACKENDS:
            raise InvalidConfig(f"unknown kernel backend {backend!r}")
        self.model = model
        self.params = model.params
        self.cost = model.cost
        self.roots = roots(model.params)
        self.lam1 = self.roots.lambda1
        self.lam2 = self.roots.lambda2
        # common factor 2 / (sigma^2 (lambda1 + lambda2))
        self.c = 2.0 / (self.params.sigma ** 2 * (self.lam1 + self.lam2))
        self._jump = self.cost.jump0
        self._dg_left0 = self.cost.dg_left0
        self._dg_right0 = self.cost.dg_right0
        # interior band solutions keyed by setup cost, filled by the solver
        self.interior_bands: Dict[float, object] = {}
        self.memo_lock = threading.Lock()

        if backend == "auto":
            backend = "closed_form" if self.cost.pieces() is not None else "quadrature"
        if backend == "closed_form":
            if self.cost.pieces() is None:
                raise InvalidConfig(f"closed-form backend needs a piecewise polynomial cost, got {self.cost.kind}")
            self._backend = _ClosedFormBackend(model, self.lam1, self.lam2)
        else:
            self._backend = _QuadratureBackend(model, self.lam1, self.lam2, quadrature or settings.quadrature())
        logger.debug(
            "Kernel %s: lambda1=%.8g lambda2=%.8g backend=%s",
            self.cost.kind, self.lam1, self.lam2, self._backend.name,
        )

    @property
    def backend(self) -> str:
        return self._backend.name

    # Integrals

    def cap_lambda1(self, x: float) -> float:
        return self._backend.cap_lambda1(float(x))

    def cap_lambda2(self, x: float) -> float:
        return self._backend.cap_lambda2(float(x))

    def a_bounds(self) -> ABounds:
        a_low, a_high = self._backend.a_bounds()
        return ABounds(a_low=a_low, a_high=a_high)

    def big_a(self, s: float, S: float, setup: float) -> float:
        """
        Objective A(s, S) for a band with the given setup cost.

        Args:
            s: Reorder level
            S: Order-up-to level
            setup: Setup cost charged per order

        Returns:
            A value; maximizing it minimizes the band's discounted cost
        """
        width = S - s
        if width < MIN_BAND_WIDTH:
            raise DegenerateBand(f"band ({s:.6g}, {S:.6g}) is narrower than {MIN_BAND_WIDTH:g}")
        sum_upper = self.cap_lambda1(S) + self.cap_lambda2(S)
        sum_lower = self.cap_lambda1(s) + self.cap_lambda2(s)
        # e^{-lambda2 S} - e^{-lambda2 s}, without cancellation
        denominator = -_exp(-self.lam2 * S) * math.expm1(self.lam2 * width)
        order_cost = setup + self.params.k * width
        return self.lam2 ** 2 / denominator * (sum_upper - sum_lower + order_cost / self.c)

    # Value function and derivatives

    def v(self, A: float, x: float) -> float:
        x = float(x)
        return self.c * (
            self.cap_lambda1(x) + self.cap_lambda2(x) - A * _exp(-self.lam2 * x) / self.lam2 ** 2
        )

    def dv(self, A: float, x: float) -> float:
        x = float(x)
        return self.c * (
            self.lam1 * self.cap_lambda1(x) - self.lam2 * self.cap_lambda2(x) + A * _exp(-self.lam2 * x) / self.lam2
        )

    def d2v(self, A: float, x: float) -> float:
        x = float(x)
        upper = self._backend.upper_g2(x)
        lower = self._backend.lower_g2(x)
        decay = _exp(-self.lam2 * x)
        if x >= 0.0:
            return self.c * (upper - (A - self._dg_right0) * decay + lower)
        return self.c * (upper + self._jump * _exp(self.lam1 * x) - (A - self._dg_left0) * decay + lower)

    def d3v(self, A: float, x: float) -> float:
        x = float(x)
        upper = self._backend.upper_g2(x)
        lower = self._backend.lower_g2(x)
        decay = _exp(-self.lam2 * x)
        if x >= 0.0:
            return self.c * (self.lam1 * upper + self.lam2 * (A - self._dg_right0) * decay - self.lam2 * lower)
        return self.c * (
            self.lam1 * (upper + self._jump * _exp(self.lam1 * x))
            + self.lam2 * (A - self._dg_left0) * decay
            - self.lam2 * lower
        )

    def curve(self, A: float, xs, order: int = 0) -> np.ndarray:
        """Evaluate v_A (or its derivative of the given order) on a grid."""
        fn = (self.v, self.dv, self.d2v, self.d3v)[order]
        return np.array([fn(A, x) for x in np.asarray(xs, dtype=float)])

    def x_star(self, A: float) -> float:
        """
        Unique minimizer of dv(A, .), a negative root of d2v(A, .).

        Raises:
            OutOfRange: A outside (A-low, A-high)
        """
        bounds = self.a_bounds()
        if not bounds.a_low < A < bounds.a_high:
            raise OutOfRange(f"A={A:.8g} outside ({bounds.a_low:.8g}, {bounds.a_high:.8g})")

        lo = -1.0
        while self.d2v(A, lo) >= 0.0:
            lo *= 2.0
            if lo < settings.X_STAR_LEFT_CAP:
                raise NoBracket(f"d2v(A={A:.8g}, .) has no sign change above {settings.X_STAR_LEFT_CAP:g}")
        root, _ = find_root(lambda x: self.d2v(A, x), lo, 0.0)
        return root
