from fastapi.testclient import TestClient

from server import app

client = TestClient(app)

MODEL = {"alphabet_x": 2, "alphabet_y": 2, "alphabet_xhat": 2, "channel": [[0.8, 0.2], [0.2, 0.8]],
         "sequence": [0] * 8 + [1] * 8}


def test_health():
    assert client.get("/health").json() == {"status": "ok"}


def test_header_bits():
    body = client.get("/growth/bits", params={"states": 2}).json()
    assert body["total"] == 18
    assert client.get("/growth/bits", params={"states": 1, "max_delay": 1}).json()["total"] == 6
    assert client.get("/growth/bits", params={"states": 0}).status_code == 400


def test_sweep():
    rows = client.post("/growth/sweep", json={"theta": 0.5, "ns": [1000, 10000]}).json()
    assert [r["M_n"] for r in rows] == [31, 100]
    assert rows[0]["header_bits_per_n"] > rows[1]["header_bits_per_n"]


def test_maxent():
    body = client.post("/maxent", json={"rho0": [0.0, 1.0], "delta": 0.5}).json()
    assert abs(body["phi"] - 1.0) < 1e-12
    assert client.post("/maxent", json={"rho0": [0.5, 1.0], "delta": 0.1}).status_code == 400


def test_fsm_opt():
    body = client.post("/fsm-opt", json={"model": MODEL, "params": {"rate": 0.0}}).json()
    assert abs(body["distortion"] - 0.2) < 1e-9
    assert body["feasible"]


def test_fsm_opt_over_budget():
    resp = client.post("/fsm-opt", json={"model": MODEL, "budget": 1})
    assert resp.status_code == 413
    assert resp.json()["error"] == "BudgetExceeded"


def test_drf():
    body = client.post("/drf", json={"model": MODEL, "params": {"lambda_count": 4, "restarts": 2}}).json()
    assert body["hull"][0][0] == 0.0
    assert len(body["points"]) >= 2


def test_drf_needs_source():
    model = {k: v for k, v in MODEL.items() if k != "sequence"}
    assert client.post("/drf", json={"model": model}).status_code == 400


def test_invalid_model_rejected():
    bad = dict(MODEL, channel=[[0.5, 0.4], [0.1, 0.9]])
    resp = client.post("/fsm-opt", json={"model": bad})
    assert resp.status_code == 400
    assert resp.json()["error"] == "NonStochasticRow"
    malformed = {k: v for k, v in MODEL.items() if k != "channel"}
    assert client.post("/fsm-opt", json={"model": malformed}).status_code == 422
