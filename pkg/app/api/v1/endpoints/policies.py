# app/api/v1/endpoints/policies.py
from typing import List

import numpy as np
from fastapi import APIRouter, HTTPException, status

from ....dependencies import domain_errors, kernel_for
from ....schemas.policy import CompareRow
from ....schemas.requests import CompareRequest
from ....services import policy_service, solver_service

# Create policies router
router = APIRouter()


# Compare the candidate policies on a grid of initial levels
@router.post("/compare", response_model=List[CompareRow])
def compare(request: CompareRequest):
    """
    Discounted costs of both optimal bands and, when it applies, the generalized policy.
    """
    if not request.x_min < request.x_max:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail="x_min must be below x_max"
        )
    with domain_errors():
        kernel = kernel_for(request.model, request.q)
        report = solver_service.classify(kernel)
        return policy_service.compare(kernel, report, np.linspace(request.x_min, request.x_max, request.points))
