from fastapi import APIRouter

# Import endpoint routers
from app.api.v1.endpoints.models import router as models_router
from app.api.v1.endpoints.policies import router as policies_router
from app.api.v1.endpoints.solver import router as solver_router

# Main router for API v1
api_router = APIRouter()

# Include the endpoint routers
api_router.include_router(models_router, prefix="/models", tags=["Models"])
api_router.include_router(solver_router, prefix="/solver", tags=["Solver"])
api_router.include_router(policies_router, prefix="/policies", tags=["Policies"])
