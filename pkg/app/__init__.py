from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware

from .api.v1.router import api_router
from .core.config import settings

# Version
__version__ = "1.0.0"


# Create and configure the FastAPI app
def create_app() -> FastAPI:
    """Initialize and configure the FastAPI application."""
    app = FastAPI(
        title=settings.PROJECT_NAME,
        description="Optimal (s, S) and generalized ordering policies for Brownian inventory with a two-step setup cost",
        version=__version__,
        docs_url="/docs",
        redoc_url="/redoc",
    )

    # Set up CORS
    app.add_middleware(
        CORSMiddleware,
        allow_origins=settings.allowed_origins,
        allow_credentials=True,
        allow_methods=["*"],
        allow_headers=["*"],
    )

    # Include API routers
    app.include_router(api_router, prefix=settings.API_V1_STR)

    # Root endpoint
    @app.get("/", tags=["Root"])
    async def root():
        """
        Root endpoint providing basic information about the API.
        """
        return {
            "message": "Impulse band solver API",
            "version": __version__,
            "documentation": "/docs"
        }

    # Health check endpoint
    @app.get("/health", tags=["Health"])
    async def health_check():
        return {"status": "healthy"}

    return app
