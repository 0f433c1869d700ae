"""Asynchronous stage jobs: a bounded worker pool, an in-memory job
registry, and the kind -> pipeline-call dispatch."""

from __future__ import annotations

import concurrent.futures
import threading
from dataclasses import dataclass, field

from .. import pipeline as pl
from ..core import PicoQuestion, StudyRecord
from ..errors import EviSynthError
from ..extraction import FieldSpec
from ..screening import AggregationStrategy, CriteriaSet
from ..synthesis import OutcomeSpec
from .errors import JobNotFound, ProjectBusy
from .projects import (
    JOB_RULES,
    ProjectState,
    check_job_legal,
    load_state,
    record_job_artifact,
)
from .store import ProjectStore

TERMINAL = ("succeeded", "failed")


@dataclass
class JobRecord:
    id: str
    project_id: str
    kind: str
    params: dict
    status: str = "queued"
    progress: float = 0.0
    error: dict | None = None
    artifact: dict | None = None  # {"name": ..., "version": ...} on success
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def _set(self, **updates) -> None:
        with self._lock:
            if self.status in TERMINAL:
                raise RuntimeError(f"job {self.id} is terminal")
            for key, value in updates.items():
                setattr(self, key, value)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "project_id": self.project_id,
            "kind": self.kind,
            "params": self.params,
            "status": self.status,
            "progress": self.progress,
            "error": self.error,
            "artifact": self.artifact,
        }


def _included_studies(state: ProjectState, studies: pl.StudiesArtifact) -> list[StudyRecord]:
    return [s for s in studies.studies if s.pmid not in state.excluded_pmids]


def execute_job(
    store: ProjectStore, state: ProjectState, kind: str, params: dict, gateway, client
) -> dict:
    """Run one stage job against the project's current artifact heads and
    return the new artifact content (not yet committed)."""
    pico = PicoQuestion.from_dict(state.pico)

    def head(name: str) -> dict:
        return store.read_artifact(state.id, name, state.heads[name])

    if kind == "generate_queries":
        artifact = pl.generate_queries_stage(pico, gateway, client, cap=params.get("cap"))
        return artifact.to_dict()
    if kind == "run_search":
        queries = pl.QueriesArtifact.from_dict(head("queries"))
        return pl.run_search_stage(queries, client, cap=params.get("cap")).to_dict()
    if kind == "generate_criteria":
        return pl.generate_criteria_stage(pico, gateway).to_dict()
    if kind == "run_screening":
        criteria = CriteriaSet.from_dict(head("criteria"))
        studies = pl.StudiesArtifact.from_dict(head("studies"))
        strategy = (
            AggregationStrategy.from_dict(params["strategy"])
            if "strategy" in params
            else None
        )
        return pl.run_screening_stage(
            pico,
            criteria,
            studies.studies,
            gateway,
            strategy=strategy,
            use_full_text=bool(params.get("use_full_text", False)),
        ).to_dict()
    if kind == "run_extraction":
        fields = [FieldSpec.from_dict(f) for f in head("fields")["fields"]]
        studies = pl.StudiesArtifact.from_dict(head("studies"))
        return pl.run_extraction_stage(
            _included_studies(state, studies), fields, gateway, client=client
        ).to_dict()
    if kind == "run_results":
        outcome = OutcomeSpec.from_dict(head("outcome"))
        studies = pl.StudiesArtifact.from_dict(head("studies"))
        return pl.run_results_stage(
            _included_studies(state, studies), outcome, gateway, client=client
        ).to_dict()
    if kind == "run_pooling":
        results = pl.ResultsArtifact.from_dict(head("results"))
        return pl.run_pooling_stage(
            results.effect_rows(), method=params.get("method", "random_dl")
        ).to_dict()
    raise ValueError(f"unknown job kind {kind!r}")


class JobRunner:
    """Bounded pool executing at most one active job per project."""

    def __init__(self, store: ProjectStore, gateway, client, max_workers: int = 2):
        self.store = store
        self.gateway = gateway
        self.client = client
        self._pool = concurrent.futures.ThreadPoolExecutor(max_workers=max_workers)
        self._jobs: dict[str, JobRecord] = {}
        self._guard = threading.Lock()
        self._counter = 0

    def submit(self, project_id: str, kind: str, params: dict | None = None) -> JobRecord:
        params = dict(params or {})
        with self.store.lock(project_id):
            state = load_state(self.store, project_id)
            check_job_legal(state, kind)
            active = self.active_job(project_id)
            if active is not None:
                raise ProjectBusy(project_id, active.id)
            with self._guard:
                self._counter += 1
                job = JobRecord(
                    id=f"j{self._counter:04d}",
                    project_id=project_id,
                    kind=kind,
                    params=params,
                )
                self._jobs[job.id] = job
        self._pool.submit(self._run, job)
        return job

    def get(self, job_id: str) -> JobRecord:
        try:
            return self._jobs[job_id]
        except KeyError:
            raise JobNotFound(job_id) from None

    def active_job(self, project_id: str) -> JobRecord | None:
        with self._guard:
            for job in self._jobs.values():
                if job.project_id == project_id and job.status not in TERMINAL:
                    return job
        return None

    def jobs_for(self, project_id: str) -> list[JobRecord]:
        with self._guard:
            return [j for j in self._jobs.values() if j.project_id == project_id]

    def _run(self, job: JobRecord) -> None:
        job._set(status="running", progress=0.1)
        try:
            state = load_state(self.store, job.project_id)
            content = execute_job(
                self.store, state, job.kind, job.params, self.gateway, self.client
            )
            name, version = record_job_artifact(
                self.store, job.project_id, job.kind, job.id, content
            )
        except EviSynthError as exc:
            job._set(status="failed", error=exc.problem())
        except Exception as exc:  # noqa: BLE001 - boundary: job must reach a terminal state
            job._set(status="failed", error={"code": "job_error", "message": str(exc), "detail": None})
        else:
            job._set(status="succeeded", progress=1.0, artifact={"name": name, "version": version})

    def shutdown(self) -> None:
        self._pool.shutdown(wait=True)
