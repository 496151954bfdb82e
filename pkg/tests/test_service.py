"""HTTP API surface: plans, runs with polling, reports, heatmaps, simulate."""

import time

import pytest
from fastapi.testclient import TestClient

from rplids.service.app import create_app


@pytest.fixture(scope="module")
def client():
    with TestClient(create_app()) as c:
        yield c


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_config_exposes_every_default(client):
    data = client.get("/config").json()
    assert data["values"]["trickle_imin_s"] == 4.0
    assert "loss_probability = " in data["text"]
    assert "warmup_s = " in data["text"]


def test_topology_endpoint(client):
    data = client.get("/topology").json()
    assert data["cols"] == 6 and data["rows"] == 5
    assert len(data["nodes"]) == 30
    root = next(n for n in data["nodes"] if n["id"] == 0)
    assert root["level"] == 0
    assert data["table"].startswith("id,x,y,level")


def test_plan_generation_counts(client):
    resp = client.post("/plans", json={"rq": 1}).json()
    assert resp["count"] == 1827
    resp = client.post("/plans", json={"rq": 3, "scheme": "50"}).json()
    assert resp["count"] == 31626
    assert all(s["scheme"] == "majority50" for s in resp["scenarios"][:5])


def test_plan_rq3_needs_scheme(client):
    assert client.post("/plans", json={"rq": 3}).status_code == 422


def test_plan_writes_file(client, tmp_path):
    path = str(tmp_path / "plan.txt")
    resp = client.post("/plans", json={"rq": 1, "output_path": path}).json()
    assert resp["path"] == path
    assert len(open(path).readlines()) == 1827


def _tiny_scenarios():
    return [
        {
            "rq": 1, "attack": "BH", "attacker": 2, "arch": "CIDwL",
            "id_nodes": [0], "scheme": None, "seed": 1, "horizon_s": 1200.0,
            "attack_start_s": 600.0, "sf_drop_prob": 0.5, "hf_interval_s": 2.0,
        }
    ]


def test_run_job_lifecycle(client, tmp_path):
    out = str(tmp_path / "results.csv")
    payload = {
        "scenarios": _tiny_scenarios(),
        "output_path": out,
        "cache_dir": str(tmp_path / "cache"),
        "jobs": 1,
    }
    job = client.post("/runs", json=payload).json()
    job_id = job["job_id"]
    deadline = time.time() + 120
    while job["state"] in ("pending", "running"):
        assert time.time() < deadline, "run job did not finish"
        time.sleep(0.2)
        job = client.get(f"/runs/{job_id}").json()
    assert job["state"] == "done", job
    assert job["summary"]["computed"] == 1
    listing = client.get("/runs").json()
    assert any(j["job_id"] == job_id for j in listing)
    # results usable by the report endpoint
    resp = client.post("/reports", json={"results_path": out, "table": "root-accuracy"})
    assert resp.status_code == 200
    table = resp.json()
    assert table["columns"][0] == "attack"
    assert table["rows"]


def test_run_rejects_bad_plan(client, tmp_path):
    bad = _tiny_scenarios()
    bad[0]["id_nodes"] = [2]  # ID == attacker
    resp = client.post("/runs", json={
        "scenarios": bad, "output_path": str(tmp_path / "r.csv"),
        "cache_dir": str(tmp_path / "c"),
    })
    assert resp.status_code == 422


def test_run_requires_exactly_one_source(client, tmp_path):
    resp = client.post("/runs", json={
        "output_path": str(tmp_path / "r.csv"), "cache_dir": str(tmp_path / "c"),
    })
    assert resp.status_code == 422


def test_unknown_job(client):
    assert client.get("/runs/doesnotexist").status_code == 404


def test_report_unknown_table(client, tmp_path):
    path = tmp_path / "r.csv"
    path.write_text(",".join([
        "scenario_id", "rq", "attack", "attacker", "arch", "scheme", "id_nodes",
        "accuracy", "tpr", "fpr", "extra_msgs", "extra_bytes", "seed", "horizon",
    ]) + "\n")
    resp = client.post("/reports", json={"results_path": str(path), "table": "nope"})
    assert resp.status_code == 422


def test_report_missing_file(client):
    resp = client.post("/reports", json={"results_path": "/no/such/file.csv", "table": "best"})
    assert resp.status_code == 404


def test_simulate_endpoint(client):
    resp = client.post("/simulate", json={"horizon_s": 120.0, "include_trace": True, "trace_limit": 5})
    assert resp.status_code == 200
    data = resp.json()
    assert len(data["digest"]) == 16
    assert len(data["trace_head"]) == 5
    assert data["event_count"] > 100
    # determinism across calls
    again = client.post("/simulate", json={"horizon_s": 120.0}).json()
    assert again["digest"] == data["digest"]


def test_simulate_attack_validation(client):
    resp = client.post("/simulate", json={"attack": "BH", "horizon_s": 60.0})
    assert resp.status_code == 422
    resp = client.post("/simulate", json={"attack": "BH", "attacker": 99, "horizon_s": 60.0})
    assert resp.status_code == 422
