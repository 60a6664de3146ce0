# app/api/v1/endpoints/solver.py
from fastapi import APIRouter

from ....dependencies import check_q_values, domain_errors, kernel_for
from ....schemas.requests import SolveRequest, TableRequest
from ....schemas.solution import RegimeReport, SweepResult
from ....services import solver_service

# Create solver router
router = APIRouter()


# Solve both band problems for one threshold
@router.post("/solve", response_model=RegimeReport)
def solve(request: SolveRequest):
    """
    Optimal bands of the K1 and K2 problems and the regime they imply.

    S-bar, s-low and Xi are included when the generalized policy applies.
    """
    with domain_errors():
        kernel = kernel_for(request.model, request.q)
        return solver_service.classify(kernel)


# Sweep a grid of thresholds
@router.post("/table", response_model=SweepResult)
def table(request: TableRequest):
    q_values = check_q_values(request.q_values)
    with domain_errors():
        kernel = kernel_for(request.model)
        return solver_service.sweep_q(kernel, q_values)
