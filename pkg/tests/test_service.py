import json
import threading
import time

import pytest
from fastapi.testclient import TestClient

from amrule.orchestrator import Run
from amrule.service import create_app

from conftest import small_run_config


@pytest.fixture
def paused_run(small_dataset, tmp_path):
    """A run executing in a worker thread, paused at the first annotation."""
    data_dir, _ = small_dataset
    cfg = small_run_config(data_dir, annotator="api", iterations=1)
    run = Run(cfg, tmp_path / "api_run")
    worker = threading.Thread(target=run.run_all, daemon=True)
    worker.start()
    deadline = time.time() + 60
    while time.time() < deadline:
        if run.stage == "annotation" and run.sessions.current is not None:
            break
        time.sleep(0.05)
    else:
        pytest.fail("run never paused at annotation")
    return run, worker


def test_annotation_api_contract(paused_run):
    run, worker = paused_run
    client = TestClient(create_app(run))

    status = client.get("/api/run/status").json()
    assert status["iteration"] == 1
    assert status["stage"] == "annotation"

    session = client.get("/api/sessions/current").json()
    assert session["state"] == "open"
    candidates = client.get("/api/sessions/current/candidates").json()
    assert candidates
    assert candidates[0]["examples"], "candidates carry annotator context"

    # premature finalize is a conflict
    assert client.post("/api/sessions/current/finalize").status_code == 409

    # invalid verdict kind -> 422 with the server's message
    first = candidates[0]["rule"]
    wrong = "range" if first["kind"] != "range" else "exact_match"
    params = {"direction": "ge"} if wrong == "range" else {}
    resp = client.post("/api/sessions/current/decisions",
                       json={"rule_id": first["id"], "verdict": wrong, "params": params})
    assert resp.status_code == 422

    # unknown rule id -> 404
    resp = client.post("/api/sessions/current/decisions",
                       json={"rule_id": "ghost", "verdict": "abstain"})
    assert resp.status_code == 404

    # decide everything (abstain is valid on any candidate); repeat one POST
    for cand in candidates:
        payload = {"rule_id": cand["rule"]["id"], "verdict": "abstain", "params": {}}
        assert client.post("/api/sessions/current/decisions", json=payload).status_code == 200
    dup = client.post("/api/sessions/current/decisions",
                      json={"rule_id": candidates[0]["rule"]["id"],
                            "verdict": "abstain", "params": {}})
    assert dup.status_code == 200  # idempotent resubmission

    done = client.post("/api/sessions/current/finalize")
    assert done.status_code == 200
    assert done.json()["accepted"] == []

    worker.join(timeout=60)
    assert not worker.is_alive()
    assert run.done

    metrics = client.get("/api/metrics").json()
    assert metrics == run.metrics_doc()
    assert metrics["final"]["completed_iterations"] == 1
