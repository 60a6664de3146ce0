from typing import Annotated, Callable, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

ORDER_TOL = 1e-9


class BandPolicy(BaseModel):
    """(s, S): order up to S whenever the level is at or below s."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["band"] = "band"
    s: float
    S: float

    @model_validator(mode="after")
    def check_band(self):
        if not self.s < self.S:
            raise ValueError(f"band needs s < S, got s={self.s}, S={self.S}")
        return self


class GeneralizedPolicy(BaseModel):
    """Band (s1, S1) whose order-up-to level depends on how far below S1 - Q the level fell."""
    model_config = ConfigDict(frozen=True)

    kind: Literal["generalized"] = "generalized"
    s1: float
    S1: float
    Q: float
    s_low: float
    s_bar: float

    @model_validator(mode="after")
    def check_levels(self):
        if not (self.s_low <= self.S1 - self.Q + ORDER_TOL
                and self.S1 - self.Q <= self.s1 + ORDER_TOL
                and self.s1 < self.S1 <= self.s_bar + ORDER_TOL):
            raise ValueError("generalized policy needs s_low <= S1 - Q <= s1 < S1 <= s_bar")
        return self

    @classmethod
    def from_report(cls, report) -> "GeneralizedPolicy":
        if report.regime != "S1PlusGeneralized":
            raise ValueError(f"no generalized policy in regime {report.regime}")
        return cls(
            s1=report.sol1.s,
            S1=report.sol1.S,
            Q=report.Q,
            s_low=report.s_low,
            s_bar=report.s_bar,
        )


class CustomPolicy(BaseModel):
    """Trigger level s with a user-supplied order-up-to map y(x) > x for x <= s."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    kind: Literal["custom"] = "custom"
    s: float
    target: Callable[[float], float]


Policy = Annotated[Union[BandPolicy, GeneralizedPolicy, CustomPolicy], Field(discriminator="kind")]


class CostPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    cost: float


class CostCurve(BaseModel):
    model_config = ConfigDict(frozen=True)

    policy_tag: str
    points: List[CostPoint]

    @field_validator("points")
    def finite_costs(cls, v):
        if not all(np.isfinite(p.cost) and np.isfinite(p.x) for p in v):
            raise ValueError("cost curve values must be finite")
        return v


class CompareRow(BaseModel):
    model_config = ConfigDict(frozen=True)

    x: float
    band1: float
    band2: float
    generalized: Optional[float] = None
    best: Literal["band1", "band2", "generalized"]


class ValueFunction(BaseModel):
    """Candidate value function with its derivatives, kink set and continuation region."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    name: str
    f: Callable[[float], float]
    df: Callable[[float], float]
    d2f: Callable[[float], float]
    kinks: List[float] = Field(default_factory=list)
    continuation: Tuple[float, float] = (-np.inf, np.inf)
