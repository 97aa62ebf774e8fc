import numpy as np
from fastapi.testclient import TestClient

from spincm.service import app

client = TestClient(app)

TODA_CFG = {
    "algebra": {"series": "A", "rank": 2},
    "pi_prime": [1, 2],
    "system": "spin-toda",
    "initial": {"x": [0.1, -0.2], "p": [0.3, 0.0],
                "spin": {"1,0": 0.5, "-1,0": -0.4, "0,1": 0.6, "0,-1": -0.5}},
    "time": {"t_max": 0.5, "dt": 0.001},
    "method": "rk4",
}


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    assert resp.json()["status"] == "ok"


def test_simulate_endpoint():
    resp = client.post("/simulate", json=TODA_CFG)
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["status"] == "complete"
    assert doc["columns"][0] == "t"
    assert len(doc["rows"]) == 501
    # energy monitor is flat along the flow
    k = doc["columns"].index("energy")
    energies = [row[k] for row in doc["rows"]]
    assert max(energies) - min(energies) < 1e-8


def test_solve_exact_endpoint():
    cfg = dict(TODA_CFG, method="exact")
    resp = client.post("/solve-exact", json=cfg)
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["status"] == "complete"
    assert doc["diagnostics"]["factorization_residual"] < 1e-9


def test_compare_endpoint():
    cfg = dict(TODA_CFG, method="both", time={"t_max": 0.5, "dt": 1e-4})
    resp = client.post("/compare", json=cfg)
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["passed"] is True
    assert doc["max_deviation"] <= 1e-6


def test_verify_endpoint():
    resp = client.post("/verify", json={"suite": "mdybe",
                                        "algebra": {"series": "A", "rank": 2},
                                        "cases": 10, "seed": 3})
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["passed"] is True
    assert doc["report"]["max_residual"] < 1e-10


def test_validation_is_422():
    bad = dict(TODA_CFG, pi_prime=[7])
    assert client.post("/simulate", json=bad).status_code == 422
    # schema-level failure (missing required field)
    assert client.post("/simulate", json={"system": "spin-toda"}).status_code == 422
    # domain-level failure routed through the orchestration layer
    cm = dict(TODA_CFG, system="spin-cm", method="exact",
              initial={"q": [0.0, 0.0], "p": [0.0, 0.0], "spin": {"1,0": 0.5}})
    resp = client.post("/solve-exact", json=cm)
    assert resp.status_code == 422
