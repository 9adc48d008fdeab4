"""HTTP annotation service: hosts sessions for the browser workbench.

The run loop executes in a background thread and blocks at each annotation
stage; this service exposes the pending session, accepts decisions, and
resumes the loop on finalize.  Static workbench assets are served from a
``frontend/dist`` directory when one exists next to the run directory or in
the repository root.
"""

from __future__ import annotations

import threading
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .annotation import (
    AnnotationDecision,
    DecisionValidationError,
    IncompleteSessionError,
    SessionConflictError,
    UnknownRuleError,
)
from .orchestrator import Run


class DecisionIn(BaseModel):
    rule_id: str
    verdict: str
    params: dict = Field(default_factory=dict)
    annotator: str = "ui"


def create_app(run: Run, static_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="amrule annotation service")

    @app.get("/api/run/status")
    def run_status():
        return run.status()

    @app.get("/api/sessions/current")
    def current_session():
        session = run.sessions.current
        if session is None:
            raise HTTPException(status_code=404, detail="no session yet")
        return session.to_dict()

    @app.get("/api/sessions/current/candidates")
    def current_candidates():
        session = run.sessions.current
        if session is None:
            raise HTTPException(status_code=404, detail="no session yet")
        return [c.to_dict() for c in session.candidates]

    @app.post("/api/sessions/current/decisions")
    def submit_decision(payload: DecisionIn):
        decision = AnnotationDecision(rule_id=payload.rule_id,
                                      verdict=payload.verdict,
                                      params=payload.params,
                                      annotator=payload.annotator)
        try:
            session = run.submit_api_decision(decision)
        except UnknownRuleError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        except DecisionValidationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except SessionConflictError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"decided": len(session.decisions), "pending": session.pending}

    @app.post("/api/sessions/current/finalize")
    def finalize_session():
        try:
            accepted = run.finalize_api_session()
        except IncompleteSessionError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        except SessionConflictError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc
        return {"accepted": [r.to_dict() for r in accepted]}

    @app.get("/api/metrics")
    def metrics():
        return JSONResponse(run.metrics_doc())

    static = _find_static(static_dir)
    if static is not None:
        app.mount("/", StaticFiles(directory=static, html=True), name="workbench")
    return app


def _find_static(static_dir: str | Path | None) -> Path | None:
    candidates = []
    if static_dir:
        candidates.append(Path(static_dir))
    here = Path(__file__).resolve()
    for base in (Path.cwd(), *here.parents):
        candidates.append(base / "frontend" / "dist")
    for cand in candidates:
        if cand.is_dir() and (cand / "index.html").exists():
            return cand
    return None


def serve(run: Run, host: str = "127.0.0.1", port: int = 8765,
          static_dir: str | Path | None = None) -> None:
    """Run the iteration loop in the background and serve the annotation API."""
    import uvicorn

    app = create_app(run, static_dir=static_dir)
    worker = threading.Thread(target=run.run_all, name="amrule-run", daemon=True)
    worker.start()
    uvicorn.run(app, host=host, port=port, log_level="warning")
