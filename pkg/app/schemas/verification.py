from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


class CheckReport(BaseModel):
    """Outcome of one numerical check; failures are data, not exceptions."""
    model_config = ConfigDict(frozen=True)

    check: str
    passed: bool
    worst_point: Optional[List[float]] = Field(None, description="Grid point (or pair) with the smallest margin")
    worst_value: Optional[float] = Field(None, description="Smallest margin found")
    n_points: int = 0
    n_failures: int = 0
    failures: List[List[float]] = Field(default_factory=list, description="First failing points with their values")
    details: Dict[str, float] = Field(default_factory=dict)
    notes: List[str] = Field(default_factory=list)


class OracleResult(BaseModel):
    model_config = ConfigDict(frozen=True)

    which: Literal["OP1", "OP2"]
    s: float
    S: float
    a: float
    step: float
    n_candidates: int


class VerificationSummary(BaseModel):
    model_config = ConfigDict(frozen=True)

    passed: bool
    checks: List[CheckReport]
