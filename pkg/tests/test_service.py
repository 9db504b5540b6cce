"""HTTP service endpoints."""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from fbstci import CiTestSpec, ci_test_from_tables, sample_dataset
from fbstci.service import app
from conftest import CI_TRUE_COUNTS, PX, PY_GIVEN_X, PZ_GIVEN_X

client = TestClient(app)

MODEL_BODY = {
    "k": 3, "r": 3, "c": 3,
    "px": PX, "py_given_x": PY_GIVEN_X,
    "mode": "z_given_x", "pz": PZ_GIVEN_X,
}


def test_health():
    resp = client.get("/health")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["version"]


def test_generate_matches_library(ci_true_model):
    resp = client.post("/generate", json={"model": MODEL_BODY, "n": 50, "seed": 9})
    assert resp.status_code == 200
    body = resp.json()
    assert body["cardinalities"] == [3, 3, 3]
    expected = sample_dataset(ci_true_model, 50, seed=9)
    assert np.array_equal(np.array(body["records"]), expected.records)


def test_generate_rejects_bad_model():
    bad = dict(MODEL_BODY, px=[0.5, 0.2, 0.2])
    resp = client.post("/generate", json={"model": bad, "n": 10, "seed": 0})
    assert resp.status_code == 422


def test_ci_test_tables_matches_library(ci_true_tables):
    params = {"seed": 3, "n_samples": 20_000, "n_bins": 50, "axis_mode": "both"}
    resp = client.post("/ci-test-tables", json={
        "tables": [CI_TRUE_COUNTS[x] for x in (1, 2, 3)], **params,
    })
    assert resp.status_code == 200
    body = resp.json()
    report = ci_test_from_tables(ci_true_tables, CiTestSpec(**params))
    assert body["composite"]["vertical"] == report.composite_vertical
    assert body["composite"]["horizontal"] == list(report.composite_horizontal)
    assert [s["n"] for s in body["slices"]] == [1507, 1034, 2459]
    assert body["schema_version"] == "1"


def test_ci_test_records_roundtrip(ci_true_model):
    ds = sample_dataset(ci_true_model, 1500, seed=4)
    resp = client.post("/ci-test", json={
        "records": ds.records.tolist(),
        "seed": 5, "n_samples": 10_000, "n_bins": 20, "axis_mode": "vertical",
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["composite"]["horizontal"] is None
    assert 0.0 <= body["composite"]["vertical"] <= 1.0
    assert len(body["slices"]) == 3


def test_ci_test_constant_column_is_422():
    resp = client.post("/ci-test", json={
        "records": [[1, 1, 1], [1, 1, 2], [2, 1, 2]],
        "seed": 0, "n_samples": 1000, "n_bins": 10,
    })
    assert resp.status_code == 422
    assert "'Y'" in resp.json()["detail"]


def test_ci_test_pydantic_validation():
    resp = client.post("/ci-test", json={
        "records": [[1, 1, 1]], "seed": -1, "n_samples": 1000, "n_bins": 10,
    })
    assert resp.status_code == 422


def test_lognormal_demo_endpoint():
    resp = client.post("/lognormal-demo", json={
        "mu1": 0.0, "sigma1": 1.0, "mu2": 0.0, "sigma2": 1.0,
        "n_bins": 50, "axis_mode": "horizontal",
    })
    assert resp.status_code == 200
    body = resp.json()
    assert len(body["log_f_left"]) == 50
    assert sum(body["mass"]) == pytest.approx(1.0, abs=1e-9)
    assert body["analytic_cdf_right"][-1] == pytest.approx(1.0, abs=1e-6)
    # condensed bounds track the analytic law
    for lo, f in zip(body["cdf_lower"], body["analytic_cdf_left"]):
        assert lo - 0.05 <= f
