from pydantic_settings import BaseSettings
from typing import List
import json


class Settings(BaseSettings):
    """
    Application settings loaded from environment variables.
    """
    # API configuration
    PROJECT_NAME: str = "Impulse Band Solver API"
    API_V1_STR: str = "/api/v1"

    # Server settings
    HOST: str = "0.0.0.0"
    PORT: int = 8000
    RELOAD: bool = False

    # CORS settings
    ALLOWED_ORIGINS: List[str] = ["*"]

    # Logging settings
    LOGGING_LEVEL: str = "INFO"

    # Quadrature (custom holding costs and backend cross-checks)
    QUAD_REL_TOL: float = 1e-10
    QUAD_ABS_TOL: float = 1e-12
    QUAD_MAX_SUBDIVISIONS: int = 200

    # Root finding
    ROOT_XTOL: float = 1e-12
    A_BISECTION_MAX_ITER: int = 200
    X_STAR_LEFT_CAP: float = -1e6

    # Worker cap for sweeps and simulation
    IMPULSE_BAND_THREADS: int = 1

    # Output
    CSV_PRECISION: int = 6

    # Monte Carlo: paths per worker block and Euler steps drawn per random chunk
    SIM_BLOCK_PATHS: int = 10000
    SIM_CHUNK_STEPS: int = 500

    @property
    def allowed_origins(self) -> List[str]:
        if isinstance(self.ALLOWED_ORIGINS, str):
            try:
                return json.loads(self.ALLOWED_ORIGINS)
            except Exception:
                return [self.ALLOWED_ORIGINS]
        return self.ALLOWED_ORIGINS

    @property
    def worker_count(self) -> int:
        return max(1, self.IMPULSE_BAND_THREADS)

    def quadrature(self):
        """Quadrature tolerances for the kernel's integral backend."""
        from app.schemas.model import Quadrature

        return Quadrature(
            rel_tol=self.QUAD_REL_TOL,
            abs_tol=self.QUAD_ABS_TOL,
            max_subdivisions=self.QUAD_MAX_SUBDIVISIONS,
        )

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"


# Create settings instance
settings = Settings()
