from typing import List, Optional

from pydantic import BaseModel, Field

from .model import ModelSpec


class SolveRequest(BaseModel):
    model: ModelSpec
    q: Optional[float] = Field(None, gt=0, description="Threshold overriding model.params.Q")


class TableRequest(BaseModel):
    model: ModelSpec
    q_values: List[float] = Field(..., min_length=1, description="Strictly increasing thresholds")


class CompareRequest(BaseModel):
    model: ModelSpec
    q: Optional[float] = Field(None, gt=0)
    x_min: float = -12.0
    x_max: float = 4.0
    points: int = Field(200, ge=2, le=10_000)
