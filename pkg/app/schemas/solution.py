from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field


class Roots(BaseModel):
    """Characteristic roots of the discounted generator."""
    model_config = ConfigDict(frozen=True)

    lambda1: float = Field(..., gt=0)
    lambda2: float = Field(..., gt=0)


class ABounds(BaseModel):
    model_config = ConfigDict(frozen=True)

    a_low: float
    a_high: float


class BandSolution(BaseModel):
    """Optimal band of one of the two constrained problems."""
    model_config = ConfigDict(frozen=True)

    problem: Literal["OP1", "OP2", "unconstrained"]
    s: float = Field(..., description="Reorder level")
    S: float = Field(..., description="Order-up-to level")
    a_star: float = Field(..., description="Optimal objective value A*")
    setup: float = Field(..., description="Setup cost the band was solved for")
    boundary_tight: bool = Field(..., description="Whether the quantity constraint S - s = Q is active")
    smooth_paste: float = Field(..., description="dv(a_star, s), equal to dv(a_star, S)")
    x_star: float = Field(..., description="Minimizer of dv(a_star, .)")
    iterations: int = 0

    @computed_field
    @property
    def width(self) -> float:
        return self.S - self.s


class RegimeReport(BaseModel):
    model_config = ConfigDict(frozen=True)

    regime: Literal["S2Everywhere", "S1PlusGeneralized"]
    Q: float
    sol1: BandSolution
    sol2: BandSolution
    s_bar: Optional[float] = None
    s_low: Optional[float] = None
    xi: Optional[float] = None
    xi_nonneg: Optional[bool] = None


class QSweepRow(BaseModel):
    """One row of a threshold sweep; S-bar, s-low and Xi are blank when (s2, S2) is optimal."""
    model_config = ConfigDict(frozen=True)

    Q: float
    s1: float
    S1: float
    a1_star: float
    s2: float
    S2: float
    a2_star: float
    s_bar: Optional[float] = None
    s_low: Optional[float] = None
    xi: Optional[float] = None

    @classmethod
    def from_report(cls, report: RegimeReport) -> "QSweepRow":
        return cls(
            Q=report.Q,
            s1=report.sol1.s,
            S1=report.sol1.S,
            a1_star=report.sol1.a_star,
            s2=report.sol2.s,
            S2=report.sol2.S,
            a2_star=report.sol2.a_star,
            s_bar=report.s_bar,
            s_low=report.s_low,
            xi=report.xi,
        )


class SweepResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    rows: List[QSweepRow]
    q_dagger: float = Field(..., description="Width of the unconstrained K1 band")
    unconstrained: BandSolution
    q_low: Optional[float] = Field(None, description="Smallest swept Q with Xi >= 0")
    xi_increasing_above_q_dagger: Optional[bool] = None
    rho: Optional[float] = Field(None, description="s_low + Q on the swept Q >= Q-dagger rows, when constant")
