"""REST surface over the project store and job runner.

All domain validation lives in projects/jobs; handlers translate HTTP
bodies to decisions and jobs, and EviSynthError subclasses to problem
JSON ({code, message, detail}) with a stable status mapping.
"""

from __future__ import annotations

import itertools
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from .. import pipeline as pl
from ..core import PicoQuestion, validate_pico
from ..errors import EviSynthError
from .errors import ArtifactMissing, DecisionInvalid, ProjectNotFound, StudyNotFound
from .jobs import JobRunner
from .projects import load_state, record_decision
from .store import ProjectStore

_STATUS_BY_CODE = {
    "not_found": 404,
    "artifact_missing": 404,
    "illegal_stage": 409,
    "project_busy": 409,
    "unknown_target": 422,
    "validation_error": 422,
    "pico_invalid": 422,
}

# endpoint path segment -> stored artifact name
_ARTIFACT_ROUTES = {
    "queries": "queries",
    "studies": "studies",
    "criteria": "criteria",
    "matrix": "screening",
    "fields": "fields",
    "extraction": "extraction",
    "outcomes": "outcome",
    "effects": "results",
}

_PUT_KINDS = {
    "queries": "set_queries",
    "criteria": "set_criteria",
    "fields": "set_fields",
    "outcomes": "set_outcome",
}


def create_app(
    store_root: str | Path,
    gateway,
    client,
    max_workers: int = 2,
    token: str | None = None,
    ui_dir: str | Path | None = None,
) -> FastAPI:
    store = ProjectStore(store_root)
    runner = JobRunner(store, gateway, client, max_workers=max_workers)

    @asynccontextmanager
    async def _lifespan(_app: FastAPI):
        yield
        runner.shutdown()

    app = FastAPI(title="evisynth", docs_url=None, redoc_url=None, lifespan=_lifespan)
    app.state.store = store
    app.state.runner = runner
    ids = itertools.count(1)
    for existing in store.list_projects():  # resume numbering after restart
        next(ids)

    @app.exception_handler(EviSynthError)
    async def _domain_error(_request: Request, exc: EviSynthError):
        status = _STATUS_BY_CODE.get(exc.code, 400)
        return JSONResponse(status_code=status, content=exc.problem())

    if token is not None:

        @app.middleware("http")
        async def _bearer_gate(request: Request, call_next):
            if request.headers.get("authorization") != f"Bearer {token}":
                return JSONResponse(
                    status_code=401,
                    content={"code": "unauthorized", "message": "missing or wrong bearer token", "detail": None},
                )
            return await call_next(request)

    def _state(project_id: str):
        store.require(project_id)
        return load_state(store, project_id)

    def _envelope(project_id: str, name: str, extra: dict | None = None) -> dict:
        state = _state(project_id)
        if name not in state.heads:
            raise ArtifactMissing(name)
        content = store.read_artifact(project_id, name, state.heads[name])
        out = {
            "name": name,
            "version": state.heads[name],
            "stale": name in state.stale,
            "content": content,
        }
        if extra:
            out.update(extra)
        return out

    @app.post("/projects", status_code=201)
    async def create_project(request: Request):
        body = await request.json()
        if not isinstance(body, dict) or "pico" not in body:
            raise DecisionInvalid("body must be an object with a 'pico' field")
        pico = validate_pico(PicoQuestion.from_dict(body["pico"]))
        project_id = f"p{next(ids):04d}"
        while store.exists(project_id):
            project_id = f"p{next(ids):04d}"
        store.create(project_id, {"id": project_id, "pico": pico.to_dict()})
        return {"id": project_id, "stage": "search"}

    @app.get("/projects")
    async def list_projects():
        return {"projects": store.list_projects()}

    @app.get("/projects/{project_id}")
    async def get_project(project_id: str):
        state = _state(project_id)
        active = runner.active_job(project_id)
        out = state.to_dict()
        out["busy"] = active is not None
        out["active_job"] = active.id if active else None
        return out

    @app.put("/projects/{project_id}/pico")
    async def put_pico(project_id: str, request: Request):
        store.require(project_id)
        pico = await request.json()
        event = record_decision(store, project_id, {"kind": "set_pico", "pico": pico})
        return {"seq": event["seq"]}

    @app.post("/projects/{project_id}/jobs", status_code=202)
    async def submit_job(project_id: str, request: Request):
        store.require(project_id)
        body = await request.json()
        if not isinstance(body, dict) or "kind" not in body:
            raise DecisionInvalid("body must be an object with a 'kind' field")
        job = runner.submit(project_id, body["kind"], body.get("params") or {})
        return job.to_dict()

    @app.get("/projects/{project_id}/jobs")
    async def project_jobs(project_id: str):
        store.require(project_id)
        return {"jobs": [j.to_dict() for j in runner.jobs_for(project_id)]}

    @app.get("/jobs/{job_id}")
    async def get_job(job_id: str):
        return runner.get(job_id).to_dict()

    @app.post("/projects/{project_id}/decisions", status_code=201)
    async def post_decision(project_id: str, request: Request):
        store.require(project_id)
        decision = await request.json()
        if not isinstance(decision, dict):
            raise DecisionInvalid("decision must be a JSON object")
        event = record_decision(store, project_id, decision)
        return event

    @app.get("/projects/{project_id}/studies")
    async def get_studies(project_id: str):
        state = _state(project_id)
        return _envelope(
            project_id,
            "studies",
            extra={"excluded_pmids": sorted(state.excluded_pmids, key=int)},
        )

    for segment, artifact_name in _ARTIFACT_ROUTES.items():
        if segment == "studies":
            continue

        def _getter(project_id: str, name: str = artifact_name):
            return _envelope(project_id, name)

        app.get(f"/projects/{{project_id}}/{segment}")(_getter)

    for segment, decision_kind in _PUT_KINDS.items():

        async def _putter(
            project_id: str, request: Request, kind: str = decision_kind
        ):
            store.require(project_id)
            content = await request.json()
            event = record_decision(
                store, project_id, {"kind": kind, "content": content}
            )
            return {"seq": event["seq"], "version": event["version"]}

        app.put(f"/projects/{{project_id}}/{segment}")(_putter)

    @app.get("/projects/{project_id}/documents/{pmid}")
    async def get_document(project_id: str, pmid: str):
        # the chunked source document extraction ran over, for citation display
        state = _state(project_id)
        if "studies" not in state.heads:
            raise ArtifactMissing("studies")
        content = store.read_artifact(project_id, "studies", state.heads["studies"])
        studies = pl.StudiesArtifact.from_dict(content)
        record = next((s for s in studies.studies if s.pmid == pmid), None)
        if record is None:
            raise StudyNotFound(pmid)
        doc = pl.document_for_study(record, client)
        return {
            "pmid": doc.pmid,
            "chunks": [
                {"id": c.id, "section_path": c.section_path, "text": c.text}
                for c in doc.chunks
            ],
        }

    @app.get("/projects/{project_id}/pooled")
    async def get_pooled(project_id: str):
        env = _envelope(project_id, "synthesis")
        content = {k: v for k, v in env["content"].items() if k != "forest_svg"}
        return {**env, "name": "pooled", "content": content}

    @app.get("/projects/{project_id}/forest.svg")
    async def get_forest(project_id: str):
        env = _envelope(project_id, "synthesis")
        return Response(content=env["content"]["forest_svg"], media_type="image/svg+xml")

    @app.get("/projects/{project_id}/export")
    async def export_project(project_id: str):
        state = _state(project_id)
        artifacts = {
            name: store.read_artifact(project_id, name, version)
            for name, version in sorted(state.heads.items())
        }
        return {
            "project": state.to_dict(),
            "artifacts": artifacts,
            "events": store.read_events(project_id),
        }

    if ui_dir is not None:
        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
