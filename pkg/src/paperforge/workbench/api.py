"""Local HTTP API over one project: the human-in-the-loop surface.

Read-heavy with a small mutation set; every mutation routes through the
same project operations as the CLI, so both surfaces produce identical
persisted artifacts. JSON in, JSON out.
"""
from __future__ import annotations

import socket

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from ..errors import (
    EpisodeResolved,
    OutOfOrderStage,
    PaperforgeError,
    PortInUse,
    RejectedRefinement,
    UnbalancedTimer,
    ValidationErrorsPresent,
)
from ..extraction import validate_division
from .metrics import project_metrics
from .project import Project

_CONFLICTS = (
    ValidationErrorsPresent,
    OutOfOrderStage,
    EpisodeResolved,
    RejectedRefinement,
    UnbalancedTimer,
)


def make_app(project: Project) -> FastAPI:
    app = FastAPI(title="paperforge workbench", docs_url=None, redoc_url=None)
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(PaperforgeError)
    async def domain_error(request: Request, exc: PaperforgeError):
        status = 409 if isinstance(exc, _CONFLICTS) else 400
        body = {"error": type(exc).__name__, "detail": str(exc)}
        if isinstance(exc, ValidationErrorsPresent):
            body["findings"] = [str(f) for f in exc.findings]
        return JSONResponse(status_code=status, content=body)

    @app.exception_handler(KeyError)
    async def missing(request: Request, exc: KeyError):
        return JSONResponse(status_code=404, content={"error": "NotFound", "detail": str(exc)})

    @app.exception_handler(FileNotFoundError)
    async def missing_file(request: Request, exc: FileNotFoundError):
        return JSONResponse(status_code=404, content={"error": "NotFound", "detail": str(exc)})

    @app.get("/state")
    def get_state():
        return project.state.to_dict()

    @app.get("/division")
    def get_division():
        division = project.division()
        report = validate_division(division, project.metadata().system_inputs)
        return {
            "division": division.to_dict(),
            "findings": {
                "errors": [str(f) for f in report.errors],
                "warnings": [str(f) for f in report.warnings],
            },
        }

    @app.get("/modules/{name}/artifacts")
    def get_module_artifacts(name: str):
        unit = project.unit(name)  # KeyError -> 404 via FileNotFoundError guard below
        artifacts = {"unit": unit.to_dict(), "files": {p: t for p, t in unit.files}}
        scot_path = project.dir / "scots" / f"{name}.scot.md"
        if scot_path.is_file():
            artifacts["scot"] = scot_path.read_text("utf-8")
        secots = {}
        for path in sorted((project.dir / "secots").glob(f"{name}.*.secot.md")):
            secots[path.name.split(".")[1]] = path.read_text("utf-8")
        if secots:
            artifacts["secots"] = secots
        tests = {}
        for path in sorted((project.dir / "tests").glob(f"{name}.*.tests.json")):
            tests[path.name.split(".")[1]] = path.read_text("utf-8")
        if tests:
            artifacts["tests"] = tests
        return artifacts

    @app.get("/transcripts")
    def get_transcripts():
        sessions = []
        transcripts_dir = project.dir / "transcripts"
        if transcripts_dir.is_dir():
            from ..gateway import load_transcript

            for path in sorted(transcripts_dir.glob("*.jsonl")):
                transcript = load_transcript(path)
                sessions.append(
                    {
                        "session_id": transcript.session_id,
                        "backend": transcript.backend_name,
                        "stage": transcript.stage,
                        "records": [r.to_dict() for r in transcript.records],
                    }
                )
        return {"sessions": sessions}

    @app.get("/repairs")
    def get_repairs():
        return {"episodes": [e.to_dict() for e in project.episodes()]}

    @app.get("/metrics")
    def get_metrics():
        return project_metrics(project.dir).to_dict()

    @app.post("/division/approve")
    async def post_approve(request: Request):
        body = await request.json()
        division = project.approve(actor=body.get("actor", ""))
        return {"division": division.to_dict()}

    @app.post("/division/refine")
    async def post_refine(request: Request):
        body = await request.json()
        division = project.refine(feedback=body.get("feedback", ""))
        return {"division": division.to_dict()}

    @app.post("/repairs/{error_id}/human-prompt")
    async def post_human_prompt(error_id: str, request: Request):
        body = await request.json()
        episode = project.human_repair(error_id, body.get("text", ""))
        return {"episode": episode.to_dict()}

    @app.post("/stages/{name}/run")
    def post_run_stage(name: str):
        state = project.run_stage(name)
        return state.to_dict()

    @app.post("/timers/paper-reading")
    async def post_timer(request: Request):
        body = await request.json()
        project.record_timer(body.get("action", ""))
        return {"ok": True}

    return app


def serve_api(project: Project, port: int, host: str = "127.0.0.1") -> None:
    """Run the API server (blocking). Raises PortInUse before binding."""
    import uvicorn

    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.bind((host, port))
    except OSError:
        raise PortInUse(port) from None
    finally:
        probe.close()
    uvicorn.run(make_app(project), host=host, port=port, log_level="warning")
