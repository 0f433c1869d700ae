"""Service-level errors, each mapping to one problem-JSON code."""

from __future__ import annotations

from ..errors import EviSynthError


class ProjectNotFound(EviSynthError):
    code = "not_found"

    def __init__(self, project_id: str):
        super().__init__(f"no project {project_id!r}")
        self.project_id = project_id


class JobNotFound(EviSynthError):
    code = "not_found"

    def __init__(self, job_id: str):
        super().__init__(f"no job {job_id!r}")
        self.job_id = job_id


class StudyNotFound(EviSynthError):
    code = "not_found"

    def __init__(self, pmid: str):
        super().__init__(f"no study {pmid!r} in the project")
        self.pmid = pmid


class ArtifactMissing(EviSynthError):
    """An endpoint or job needs an artifact no stage has produced yet."""

    code = "artifact_missing"

    def __init__(self, name: str):
        super().__init__(f"artifact {name!r} has not been produced yet")
        self.name = name


class IllegalStage(EviSynthError):
    """The job kind is not legal at the project's current stage."""

    code = "illegal_stage"


class ProjectBusy(EviSynthError):
    """At most one job may be queued or running per project."""

    code = "project_busy"

    def __init__(self, project_id: str, job_id: str):
        super().__init__(f"project {project_id!r} already has active job {job_id!r}")
        self.job_id = job_id


class UnknownTarget(EviSynthError):
    """A decision referenced an artifact element that does not exist."""

    code = "unknown_target"


class DecisionInvalid(EviSynthError):
    """A decision payload is structurally unusable."""

    code = "validation_error"
