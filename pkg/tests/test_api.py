import pytest

from app import __version__
from app.core.errors import ConvergenceFailure
from app.services import solver_service


def test_root(client):
    """Test the root endpoint"""
    response = client.get("/")

    # Assert response
    assert response.status_code == 200
    data = response.json()
    assert data["version"] == __version__
    assert data["documentation"] == "/docs"


def test_health(client):
    """Test the health check endpoint"""
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json() == {"status": "healthy"}


def test_validate_reports_violations(client, baseline_payload):
    """Test that assumption violations come back as data"""
    baseline_payload["cost"]["p"] = 0.001
    response = client.post("/api/v1/models/validate", json=baseline_payload)

    # Assert response
    assert response.status_code == 200
    data = response.json()
    assert data["ok"] is False
    assert "A4" in [v["assumption"] for v in data["violations"]]


def test_validate_valid_model(client, baseline_payload):
    """Test validating the baseline model"""
    response = client.post("/api/v1/models/validate", json=baseline_payload)
    assert response.status_code == 200
    assert response.json()["ok"] is True


def test_solve(client, baseline_payload):
    """Test solving the baseline model at its own threshold"""
    response = client.post("/api/v1/solver/solve", json={"model": baseline_payload})

    # Assert response
    assert response.status_code == 200
    data = response.json()
    assert data["regime"] == "S1PlusGeneralized"
    assert data["sol1"]["s"] == pytest.approx(-2.7991, abs=2e-3)
    assert data["sol1"]["width"] == pytest.approx(4.0)
    assert data["s_low"] == pytest.approx(-5.2712, abs=2e-3)
    assert data["xi_nonneg"] is True


def test_solve_with_threshold_override(client, baseline_payload):
    """Test that q overrides the model's threshold"""
    response = client.post("/api/v1/solver/solve", json={"model": baseline_payload, "q": 1.0})
    assert response.status_code == 200
    data = response.json()
    assert data["regime"] == "S2Everywhere"
    assert data["s_bar"] is None


def test_solve_rejects_invalid_model(client, baseline_payload):
    """Test that a model violating the assumptions is rejected with its report"""
    baseline_payload["params"]["K2"] = 3.0
    response = client.post("/api/v1/solver/solve", json={"model": baseline_payload})

    # Assert response
    assert response.status_code == 422
    detail = response.json()["detail"]
    assert detail["report"]["ok"] is False


def test_solve_rejects_malformed_body(client, baseline_payload):
    """Test request validation"""
    response = client.post("/api/v1/solver/solve", json={"model": baseline_payload, "q": -1.0})
    assert response.status_code == 422

    baseline_payload["cost"] = {"kind": "cubic"}
    response = client.post("/api/v1/solver/solve", json={"model": baseline_payload})
    assert response.status_code == 422


def test_solver_failure_is_a_conflict(client, baseline_payload, monkeypatch):
    """Test that solver failures map to 409"""
    def fail(kernel, q=None):
        raise ConvergenceFailure("bisection stalled")

    monkeypatch.setattr(solver_service, "classify", fail)
    response = client.post("/api/v1/solver/solve", json={"model": baseline_payload})
    assert response.status_code == 409
    assert response.json()["detail"] == "bisection stalled"


def test_table(client, baseline_payload):
    """Test a threshold sweep"""
    response = client.post("/api/v1/solver/table", json={"model": baseline_payload, "q_values": [2.0, 7.0, 8.0]})

    # Assert response
    assert response.status_code == 200
    data = response.json()
    assert [row["Q"] for row in data["rows"]] == [2.0, 7.0, 8.0]
    assert data["rows"][0]["xi"] is None
    assert data["rows"][2]["S2"] == pytest.approx(3.2507, abs=2e-3)
    assert data["q_dagger"] == pytest.approx(6.0138, abs=4e-3)
    assert data["q_low"] == 7.0


def test_table_rejects_unsorted_grid(client, baseline_payload):
    """Test that the threshold grid must increase"""
    response = client.post("/api/v1/solver/table", json={"model": baseline_payload, "q_values": [3.0, 2.0]})
    assert response.status_code == 422

    response = client.post("/api/v1/solver/table", json={"model": baseline_payload, "q_values": []})
    assert response.status_code == 422


def test_compare(client, baseline_payload):
    """Test policy comparison on a grid"""
    body = {"model": baseline_payload, "x_min": -8.0, "x_max": 2.0, "points": 11}
    response = client.post("/api/v1/policies/compare", json=body)

    # Assert response
    assert response.status_code == 200
    rows = response.json()
    assert len(rows) == 11
    assert rows[0]["x"] == -8.0
    assert rows[0]["best"] == "generalized"
    for row in rows:
        assert row[row["best"]] <= min(row["band1"], row["band2"], row["generalized"]) + 1e-12


def test_compare_rejects_empty_range(client, baseline_payload):
    """Test that x_min must be below x_max"""
    body = {"model": baseline_payload, "x_min": 2.0, "x_max": 2.0}
    response = client.post("/api/v1/policies/compare", json=body)
    assert response.status_code == 422
