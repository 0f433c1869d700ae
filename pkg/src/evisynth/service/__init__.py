"""Project-scoped HTTP service: persistence, stage jobs, decisions."""

from .app import create_app
from .errors import (
    ArtifactMissing,
    DecisionInvalid,
    IllegalStage,
    JobNotFound,
    ProjectBusy,
    ProjectNotFound,
    UnknownTarget,
)
from .jobs import JobRecord, JobRunner, execute_job
from .projects import (
    ADVANCES,
    DECISION_KINDS,
    DEPENDENTS,
    JOB_RULES,
    STAGES,
    ProjectState,
    check_job_legal,
    fold,
    load_state,
    record_decision,
    record_job_artifact,
    verify_replay,
)
from .store import ProjectStore

__all__ = [
    "ADVANCES",
    "ArtifactMissing",
    "DECISION_KINDS",
    "DEPENDENTS",
    "DecisionInvalid",
    "IllegalStage",
    "JOB_RULES",
    "JobNotFound",
    "JobRecord",
    "JobRunner",
    "ProjectBusy",
    "ProjectNotFound",
    "ProjectState",
    "ProjectStore",
    "STAGES",
    "UnknownTarget",
    "check_job_legal",
    "create_app",
    "execute_job",
    "fold",
    "load_state",
    "record_decision",
    "record_job_artifact",
    "verify_replay",
]
