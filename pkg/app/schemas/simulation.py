from pydantic import BaseModel, ConfigDict, Field


class SimConfig(BaseModel):
    """Euler discretisation of the controlled inventory process.

    Consistency (positive step, step within horizon, at least one path) is
    checked by the simulator, which reports it as an invalid configuration.
    """
    model_config = ConfigDict(frozen=True)

    dt: float = Field(1e-3, description="Time step")
    horizon: float = Field(40.0, description="Simulated horizon T")
    n_paths: int = Field(20_000, description="Number of sample paths")
    master_seed: int = Field(7, description="Seed every per-path stream derives from")


class SimEstimate(BaseModel):
    model_config = ConfigDict(frozen=True)

    mean: float = Field(..., description="Mean discounted cost over the paths")
    std_err: float = Field(..., ge=0)
    n_paths: int
    n_steps: int
    tail_bound: float = Field(..., ge=0, description="Upper bound on the cost ignored after the horizon")
    discount_at_horizon: float = Field(..., description="e^{-beta T}")
    holding_cost: float = Field(..., description="Mean discounted holding/backorder part")
    ordering_cost: float = Field(..., description="Mean discounted ordering part")
    discounted_orders: float = Field(..., description="Mean discounted number of orders")
