from pathlib import Path

import pytest
from fastapi.testclient import TestClient

# Import the main application
from app.main import app
from app.schemas.model import InventoryModel, ModelParams, PiecewiseLinearCost, QuadraticCost
from app.services.kernel_service import Kernel
from app.services.solver_service import classify, sweep_q

# Model data shared by the published tables
BASE_PARAMS = {"mu": 0.2, "sigma": 0.6, "beta": 0.01, "k": 0.85, "K1": 4.0, "K2": 7.0, "Q": 4.0}
TABLE_QS = [float(q) for q in range(1, 11)]
CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def make_model(cost=None, **overrides) -> InventoryModel:
    """Baseline parameters with optional overrides."""
    params = ModelParams(**{**BASE_PARAMS, **overrides})
    return InventoryModel(params=params, cost=cost or PiecewiseLinearCost(h=0.08, p=0.12))


@pytest.fixture(scope="session")
def baseline_model():
    return make_model()


@pytest.fixture(scope="session")
def quadratic_model():
    return make_model(QuadraticCost(alpha=0.01))


@pytest.fixture(scope="session")
def strong_model():
    """Strongly discounted dynamics used for Monte Carlo comparisons."""
    return make_model(beta=0.5, Q=3.0)


@pytest.fixture(scope="session")
def baseline_kernel(baseline_model):
    return Kernel(baseline_model)


@pytest.fixture(scope="session")
def quadratic_kernel(quadratic_model):
    return Kernel(quadratic_model)


@pytest.fixture(scope="session")
def strong_kernel(strong_model):
    return Kernel(strong_model)


@pytest.fixture(scope="session")
def baseline_sweep(baseline_kernel):
    """Q = 1..10 sweep, solved once per session."""
    return sweep_q(baseline_kernel, TABLE_QS)


@pytest.fixture(scope="session")
def quadratic_sweep(quadratic_kernel):
    return sweep_q(quadratic_kernel, TABLE_QS)


@pytest.fixture(scope="session")
def baseline_reports(baseline_kernel):
    """Regime reports for the baseline model keyed by Q."""
    return {q: classify(baseline_kernel, q) for q in (1.0, 3.0, 4.0)}


@pytest.fixture(scope="function")
def client():
    """Create a test client for the FastAPI app."""
    with TestClient(app) as c:
        yield c


@pytest.fixture
def baseline_payload():
    """Baseline model as an API request body."""
    return {
        "params": dict(BASE_PARAMS),
        "cost": {"kind": "piecewise_linear", "h": 0.08, "p": 0.12},
    }
