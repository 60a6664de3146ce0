from contextlib import contextmanager
import logging
from typing import List, Optional

from fastapi import HTTPException, status

from app.core.errors import ImpulseBandError, InvalidConfig, ValidationFailed
from app.schemas.model import ModelSpec
from app.services import model_service
from app.services.kernel_service import Kernel

# Set up logger
logger = logging.getLogger(__name__)


@contextmanager
def domain_errors():
    """
    Translate domain errors raised inside an endpoint into HTTP errors.

    Raises:
        HTTPException: 422 for invalid or assumption-violating models, 409 for solver failures
    """
    try:
        yield
    except (InvalidConfig, ValidationFailed) as e:
        logger.warning(f"Rejected model: {e.message}")
        detail = e.message
        if isinstance(e, ValidationFailed) and e.report is not None:
            detail = {"message": e.message, "report": e.report.model_dump(mode="json")}
        raise HTTPException(status_code=status.HTTP_422_UNPROCESSABLE_ENTITY, detail=detail)
    except ImpulseBandError as e:
        logger.warning(f"Solver failure: {e.message}")
        raise HTTPException(status_code=status.HTTP_409_CONFLICT, detail=e.message)


def kernel_for(spec: ModelSpec, q: Optional[float] = None) -> Kernel:
    """
    Validated kernel for a request model.

    Args:
        spec: Model from the request body
        q: Optional threshold overriding spec.params.Q

    Returns:
        Kernel of the validated model
    """
    model = spec.to_model()
    if q is not None:
        model = model.with_q(q)
    model_service.require_valid(model)
    return Kernel(model)


def check_q_values(q_values: List[float]) -> List[float]:
    """
    Validate a threshold grid for a sweep.

    Raises:
        HTTPException: If the grid is not positive and strictly increasing
    """
    if q_values[0] <= 0 or any(b <= a for a, b in zip(q_values, q_values[1:])):
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail="q_values must be positive and strictly increasing"
        )
    if len(q_values) > 200:
        raise HTTPException(
            status_code=status.HTTP_422_UNPROCESSABLE_ENTITY,
            detail="At most 200 thresholds per sweep"
        )
    return q_values
