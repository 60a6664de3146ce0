from typing import Annotated, Any, Callable, List, Literal, Optional, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class ModelParams(BaseModel):
    """Brownian inventory model with a two-step setup cost.

    Construction only requires finite numbers; the modelling assumptions are
    reported by ``model_service.validate`` so a bad model can be inspected.
    """
    model_config = ConfigDict(frozen=True)

    mu: float = Field(..., description="Demand drift rate (items/time)")
    sigma: float = Field(..., description="Demand volatility (items/sqrt(time))")
    beta: float = Field(..., description="Discount rate (1/time)")
    k: float = Field(..., description="Proportional order cost (cost/item)")
    K1: float = Field(..., description="Setup cost for order quantities in (0, Q]")
    K2: float = Field(..., description="Setup cost for order quantities above Q")
    Q: float = Field(..., description="Quantity threshold (items)")

    @field_validator("mu", "sigma", "beta", "k", "K1", "K2", "Q")
    def must_be_finite(cls, v, info):
        # Q may be +inf to express the unconstrained problem
        if info.field_name == "Q" and v == float("inf"):
            return v
        if not np.isfinite(v):
            raise ValueError(f"{info.field_name} must be a finite number")
        return v

    def with_q(self, q: float) -> "ModelParams":
        return self.model_copy(update={"Q": q})


QUANTITY_RTOL = 1e-12


def setup_cost(xi, params: ModelParams):
    """Two-step setup cost K(xi): K1 for 0 < xi <= Q, K2 above Q, nothing for xi <= 0.

    Quantities within QUANTITY_RTOL of Q count as Q, so a band solved with
    S = s + Q is charged K1 whatever the rounding of S - s.
    """
    xi = np.asarray(xi, dtype=float)
    cost = np.where(xi > params.Q * (1.0 + QUANTITY_RTOL), params.K2, params.K1)
    cost = np.where(xi > 0.0, cost, 0.0)
    return cost if cost.ndim else float(cost)


class _HoldingCostBase(BaseModel):
    model_config = ConfigDict(frozen=True)

    def value(self, x):
        raise NotImplementedError

    def first(self, x):
        raise NotImplementedError

    def second(self, x):
        """g'' away from the kink at 0 (right-hand value at 0)."""
        raise NotImplementedError

    @property
    def dg_left0(self) -> float:
        raise NotImplementedError

    @property
    def dg_right0(self) -> float:
        raise NotImplementedError

    @property
    def jump0(self) -> float:
        """g'(0+) - g'(0-)."""
        return self.dg_right0 - self.dg_left0

    def growth_witness(self) -> Tuple[float, float, int]:
        """(a, b, n) with g(x) <= a + b|x|^n."""
        raise NotImplementedError

    def dg_limit_neg_inf(self) -> Optional[float]:
        """Exact lim g'(x) as x -> -inf, or None when it can only be sampled."""
        return None

    def pieces(self) -> Optional[Tuple[Polynomial, Polynomial]]:
        """(left, right) polynomials when g is polynomial on each half-line."""
        return None

    @property
    def sampled(self) -> bool:
        """Whether assumption checks for this family can only be sampled."""
        return False


class PiecewiseLinearCost(_HoldingCostBase):
    """g(x) = h x+ + p x-."""
    kind: Literal["piecewise_linear"] = "piecewise_linear"
    h: float = Field(..., description="Holding cost rate per item")
    p: float = Field(..., description="Backorder cost rate per item")

    def value(self, x):
        return self.h * np.maximum(x, 0.0) + self.p * np.maximum(np.negative(x), 0.0)

    def first(self, x):
        return np.where(np.asarray(x) < 0.0, -self.p, self.h) * 1.0

    def second(self, x):
        return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0

    @property
    def dg_left0(self) -> float:
        return -self.p

    @property
    def dg_right0(self) -> float:
        return self.h

    def growth_witness(self) -> Tuple[float, float, int]:
        return 0.0, max(self.h, self.p), 1

    def dg_limit_neg_inf(self) -> Optional[float]:
        return -self.p

    def pieces(self) -> Optional[Tuple[Polynomial, Polynomial]]:
        return Polynomial([0.0, -self.p]), Polynomial([0.0, self.h])


class QuadraticCost(_HoldingCostBase):
    """g(x) = alpha x^2."""
    kind: Literal["quadratic"] = "quadratic"
    alpha: float = Field(..., description="Quadratic cost coefficient")

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = self.alpha * x * x
        return out if out.ndim else float(out)

    def first(self, x):
        out = 2.0 * self.alpha * np.asarray(x, dtype=float)
        return out if out.ndim else float(out)

    def second(self, x):
        out = np.full_like(np.asarray(x, dtype=float), 2.0 * self.alpha)
        return out if out.ndim else float(out)

    @property
    def dg_left0(self) -> float:
        return 0.0

    @property
    def dg_right0(self) -> float:
        return 0.0

    def growth_witness(self) -> Tuple[float, float, int]:
        return 0.0, self.alpha, 2

    def dg_limit_neg_inf(self) -> Optional[float]:
        return -np.inf if self.alpha > 0 else 0.0

    def pieces(self) -> Optional[Tuple[Polynomial, Polynomial]]:
        quad = Polynomial([0.0, 0.0, self.alpha])
        return quad, quad


class PiecewisePolynomialCost(_HoldingCostBase):
    """g given by one polynomial on x < 0 and another on x >= 0 (ascending coefficients)."""
    kind: Literal["piecewise_polynomial"] = "piecewise_polynomial"
    left: List[float] = Field(..., min_length=1, description="Coefficients on x < 0")
    right: List[float] = Field(..., min_length=1, description="Coefficients on x >= 0")

    def _polys(self) -> Tuple[Polynomial, Polynomial]:
        return Polynomial(self.left), Polynomial(self.right)

    def _pick(self, x, left, right):
        x = np.asarray(x, dtype=float)
        out = np.where(x < 0.0, left(x), right(x))
        return out if out.ndim else float(out)

    def value(self, x):
        left, right = self._polys()
        return self._pick(x, left, right)

    def first(self, x):
        left, right = self._polys()
        return self._pick(x, left.deriv(), right.deriv())

    def second(self, x):
        left, right = self._polys()
        return self._pick(x, left.deriv(2), right.deriv(2))

    @property
    def dg_left0(self) -> float:
        return float(self._polys()[0].deriv()(0.0))

    @property
    def dg_right0(self) -> float:
        return float(self._polys()[1].deriv()(0.0))

    def growth_witness(self) -> Tuple[float, float, int]:
        coeffs = np.abs(np.concatenate([self.left, self.right]))
        n = max(len(self.left), len(self.right)) - 1
        return float(coeffs.sum()), float(coeffs.sum()), max(n, 1)

    def dg_limit_neg_inf(self) -> Optional[float]:
        slope = self._polys()[0].deriv()
        if slope.degree() == 0:
            return float(slope.coef[0])
        # leading term of g' evaluated at -inf
        lead = slope.coef[-1] * (-1.0) ** slope.degree()
        return -np.inf if lead < 0 else np.inf

    def pieces(self) -> Optional[Tuple[Polynomial, Polynomial]]:
        return self._polys()

    @property
    def sampled(self) -> bool:
        return True


class CustomCost(_HoldingCostBase):
    """User-supplied g with its first two derivatives.

    The callables should accept numpy arrays when the cost is used in simulation.
    """
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["custom"] = "custom"
    g: Callable[[Any], Any]
    dg: Callable[[Any], Any]
    d2g: Callable[[Any], Any]
    a: float = Field(..., description="Polynomial bound intercept")
    b: float = Field(..., description="Polynomial bound scale")
    n: int = Field(..., ge=1, description="Polynomial bound degree")
    dg_left: float = Field(..., description="g'(0-)")
    dg_right: float = Field(..., description="g'(0+)")

    def value(self, x):
        return self.g(x)

    def first(self, x):
        return self.dg(x)

    def second(self, x):
        return self.d2g(x)

    @property
    def dg_left0(self) -> float:
        return self.dg_left

    @property
    def dg_right0(self) -> float:
        return self.dg_right

    def growth_witness(self) -> Tuple[float, float, int]:
        return self.a, self.b, self.n

    @property
    def sampled(self) -> bool:
        return True


HoldingCost = Annotated[
    Union[PiecewiseLinearCost, QuadraticCost, PiecewisePolynomialCost, CustomCost],
    Field(discriminator="kind"),
]

# JSON-expressible subset used by config files and the HTTP API
SerializableHoldingCost = Annotated[
    Union[PiecewiseLinearCost, QuadraticCost, PiecewisePolynomialCost],
    Field(discriminator="kind"),
]


class InventoryModel(BaseModel):
    """Model parameters together with the holding/backorder cost."""
    model_config = ConfigDict(frozen=True)

    params: ModelParams
    cost: HoldingCost

    def with_q(self, q: float) -> "InventoryModel":
        return self.model_copy(update={"params": self.params.with_q(q)})


class ModelSpec(BaseModel):
    """Request body form of an inventory model (no callables)."""
    params: ModelParams
    cost: SerializableHoldingCost

    def to_model(self) -> InventoryModel:
        return InventoryModel(params=self.params, cost=self.cost)


class Quadrature(BaseModel):
    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(1e-10, gt=0)
    abs_tol: float = Field(1e-12, gt=0)
    max_subdivisions: int = Field(200, ge=1)
    # tail cut where kernel * growth bound drops below abs_tol / tail_factor
    tail_factor: float = Field(10.0, gt=0)


class Violation(BaseModel):
    model_config = ConfigDict(frozen=True)

    assumption: str
    detail: str
    witness: Optional[float] = None


class ValidationReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    ok: bool
    violations: List[Violation] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def ok_matches_violations(self):
        if self.ok != (len(self.violations) == 0):
            raise ValueError("ok must be true exactly when there are no violations")
        return self
