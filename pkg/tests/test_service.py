import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from nskstab.service.app import app


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


BODY = {
    "profile": {"kind": "linear", "params": [1.0, 1.0]},
    "physics": {"g": 1.0, "mu": 0.1, "sigma": 0.02, "L": 1.0},
    "numerics": {"n_elements": 32},
}


def test_health(client):
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json()["status"] == "ok"


def test_sigma_critical_endpoint(client):
    r = client.post("/v1/sigma-critical", json=BODY)
    assert r.status_code == 200
    doc = r.json()
    assert doc["sigma_c"] == pytest.approx(1.0 / math.pi ** 2, abs=1e-4)
    assert doc["subcritical"] is True
    assert doc["table"][0]["k"] == 1.0
    assert len(doc["config_hash"]) == 16


def test_gamma_spectrum_endpoint(client):
    r = client.post("/v1/gamma-spectrum",
                    json={**BODY, "k": math.pi, "lambda": 0.1, "count": 3})
    assert r.status_code == 200
    doc = r.json()
    assert len(doc["gammas"]) == 3
    assert doc["gammas"] == sorted(doc["gammas"], reverse=True)
    assert doc["n_positive"] >= 1


def test_dispersion_endpoint_with_rows(client):
    r = client.post("/v1/dispersion", json={**BODY, "include_rows": True})
    assert r.status_code == 200
    doc = r.json()
    assert doc["stable"] is False
    assert doc["Lambda"] is not None
    assert doc["Lambda"] <= doc["lambda_bound"] + 1e-12
    assert len(doc["rows"]) == len(doc["S"])
    assert len(doc["S_Lambda"]) <= len(doc["S"])


def test_modes_endpoint_documents(client):
    r = client.post("/v1/modes", json={**BODY, "j": 1})
    assert r.status_code == 200
    doc = r.json()
    assert len(doc["documents"]) == 1
    md = doc["documents"][0]["metadata"]
    assert md["j"] == 1 and md["lambda"] > 0
    cols = doc["documents"][0]["columns"]
    assert cols["phi"][0] == 0.0 and abs(cols["phi"][-1]) < 1e-15


def test_evolve_endpoint(client):
    r = client.post("/v1/evolve", json={**BODY, "include_trajectory": True,
                                        "t_end": 20.0})
    assert r.status_code == 200
    doc = r.json()
    assert doc["lambda1"] is not None
    assert doc["lambda_est"] == pytest.approx(doc["lambda1"], rel=1e-2)
    assert doc["energy_drift"] <= 1e-8
    assert len(doc["trajectory"]) >= 10


def test_instability_plan_endpoint_and_document_reuse(client):
    r = client.post("/v1/modes", json=BODY)
    docs = r.json()["documents"]
    body = {**BODY, "coefficients": [1.0, 0.01], "delta": 0.01,
            "epsilon0": 0.1, "mode_documents": docs}
    r2 = client.post("/v1/instability-plan", json=body)
    assert r2.status_code == 200
    plan = r2.json()
    assert plan["admissible"] is True
    assert plan["T_delta"] > 0
    assert plan["mode_documents_recomputed"] is False
    # recomputed route gives the same escape time (it depends on lambdas)
    r3 = client.post("/v1/instability-plan",
                     json={k: v for k, v in body.items() if k != "mode_documents"})
    assert r3.json()["T_delta"] == pytest.approx(plan["T_delta"], rel=1e-9)


def test_check_endpoint(client):
    r = client.post("/v1/check", json=BODY)
    assert r.status_code == 200
    doc = r.json()
    assert doc["all_passed"] is True
    assert len(doc["results"]) >= 15


def test_invalid_profile_yields_422(client):
    bad = {**BODY, "profile": {"kind": "linear", "params": [1.0, -1.0]}}
    r = client.post("/v1/sigma-critical", json=bad)
    assert r.status_code == 422
    assert "not increasing" in r.json()["detail"]


def test_schema_validation_yields_422(client):
    bad = {**BODY, "physics": {"g": -1.0, "mu": 0.1, "sigma": 0.0, "L": 1.0}}
    r = client.post("/v1/sigma-critical", json=bad)
    assert r.status_code == 422


def test_missing_params_yields_422(client):
    bad = {**BODY, "profile": {"kind": "linear"}}
    r = client.post("/v1/sigma-critical", json=bad)
    assert r.status_code == 422
