"""Secondary acceptance: the workbench against a live paused run.

Launches the annotation service over a 2-iteration planted run, lets the
TypeScript contract test (frontend/tests/contract.test.ts) list the b=10
candidates, replay the scripted decisions, and finalize each session; then
verifies the served run produced the same rules.json as the headless
reference and that the metrics endpoint the panel renders equals the run
directory's metrics.json exactly.
"""

import json
import shutil
import socket
import subprocess
import threading
import time
from pathlib import Path

import httpx
import pytest

from amrule.orchestrator import Run, RunConfig
from amrule.synth import SynthConfig, synth_generate

from test_acceptance import PLANTED_RUN, PLANTED_SYNTH

REPO = Path(__file__).resolve().parents[1]
FRONTEND = REPO / "frontend"

pytestmark = pytest.mark.skipif(
    shutil.which("npx") is None or not (FRONTEND / "node_modules").exists(),
    reason="frontend toolchain not installed (run `npm install` in frontend/)")


def free_port() -> int:
    with socket.socket() as sock:
        sock.bind(("127.0.0.1", 0))
        return sock.getsockname()[1]


@pytest.fixture(scope="module")
def planted_pair(tmp_path_factory):
    """Reference headless run + a config factory for the served twin."""
    base = tmp_path_factory.mktemp("ui")
    data = base / "data"
    synth_generate(SynthConfig(**PLANTED_SYNTH)).write(data)

    def config(**overrides) -> RunConfig:
        cfg = dict(PLANTED_RUN)
        cfg.update(iterations=2,
                   catalog_a=str(data / "catalog_a.jsonl"),
                   catalog_b=str(data / "catalog_b.jsonl"),
                   copurchase=str(data / "copurchase.csv"),
                   unlabeled=str(data / "unlabeled.csv"),
                   truth_rules=str(data / "rules_truth.json"))
        cfg.update(overrides)
        return RunConfig(**cfg)

    reference = Run(config(), base / "reference")
    reference.run_all()
    return base, config, reference


def test_ui_contract_against_live_run(planted_pair):
    base, config, reference = planted_pair
    import uvicorn

    from amrule.service import create_app

    served = Run(config(annotator="api"), base / "served")
    worker = threading.Thread(target=served.run_all, daemon=True)
    worker.start()

    port = free_port()
    app = create_app(served, static_dir=FRONTEND / "dist")
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port,
                                           log_level="error"))
    server_thread = threading.Thread(target=server.run, daemon=True)
    server_thread.start()
    url = f"http://127.0.0.1:{port}"
    deadline = time.time() + 30
    while time.time() < deadline:
        try:
            httpx.get(url + "/api/run/status", timeout=1).raise_for_status()
            break
        except Exception:
            time.sleep(0.1)
    else:
        pytest.fail("annotation service did not come up")

    try:
        # static workbench is served alongside the API
        index = httpx.get(url + "/", timeout=5)
        assert index.status_code == 200 and "annotation workbench" in index.text

        env = {
            "AMRULE_API": url,
            "AMRULE_DECISIONS": str(base / "reference" / "decisions.jsonl"),
            "AMRULE_BUDGET": str(PLANTED_RUN["budget"]),
            "PATH": __import__("os").environ["PATH"],
            "HOME": __import__("os").environ.get("HOME", "/root"),
        }
        proc = subprocess.run(
            ["npx", "vitest", "run", "tests/contract.test.ts"],
            cwd=FRONTEND, env=env, capture_output=True, text=True, timeout=600)
        assert proc.returncode == 0, f"vitest failed:\n{proc.stdout}\n{proc.stderr}"

        worker.join(timeout=120)
        assert not worker.is_alive() and served.done

        # the interactive run must reproduce the headless run's rule sets
        for t in (1, 2):
            ref = json.loads((reference.iter_dir(t) / "rules.json").read_text())
            got = json.loads((served.iter_dir(t) / "rules.json").read_text())
            assert got == ref, f"iteration {t} rules diverge"

        # the metrics panel's source equals metrics.json exactly
        panel = httpx.get(url + "/api/metrics", timeout=5).json()
        on_disk = json.loads((base / "served" / "metrics.json").read_text())
        assert panel == on_disk

        # and byte-for-byte against the reference run's metrics
        assert ((base / "served" / "metrics.json").read_bytes()
                == (base / "reference" / "metrics.json").read_bytes())
        print("[PASS] ui-contract: workbench listed the session, replayed the "
              "scripted decisions, run resumed; rules.json and metrics match")
    finally:
        server.should_exit = True
        server_thread.join(timeout=10)
