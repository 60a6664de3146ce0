# app/api/v1/endpoints/models.py
from fastapi import APIRouter

from ....dependencies import domain_errors
from ....schemas.model import ModelSpec, ValidationReport
from ....services import model_service

# Create models router
router = APIRouter()


# Validate a model against the solver's assumptions
@router.post("/validate", response_model=ValidationReport)
def validate_model(spec: ModelSpec):
    """
    Report every violated assumption of a model; violations are data, not errors.
    """
    with domain_errors():
        model = spec.to_model()
        return model_service.validate(model.params, model.cost)
