"""Directory-backed project store: versioned JSON artifacts plus an
append-only event log per project.

Layout:

    <root>/<project_id>/
      project.json              id + the pico the project was created with
      events.jsonl              one event per line, seq-numbered
      artifacts/<name>.v<N>.json

Artifact writes go through a temp file and os.replace, so a version file
is either absent or complete; appending the event that references it is
the commit point.
"""

from __future__ import annotations

import json
import os
import re
import threading
from pathlib import Path

from ..core import canonical_json
from .errors import ArtifactMissing, ProjectNotFound

_ARTIFACT_FILE_RE = re.compile(r"^([a-z_]+)\.v(\d+)\.json$")
_ID_RE = re.compile(r"^[a-z0-9][a-z0-9-]{0,63}$")


class ProjectStore:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.RLock] = {}
        self._locks_guard = threading.Lock()

    def lock(self, project_id: str) -> threading.RLock:
        """Per-project mutex serializing writes (handlers vs job workers)."""
        with self._locks_guard:
            if project_id not in self._locks:
                self._locks[project_id] = threading.RLock()
            return self._locks[project_id]

    def _dir(self, project_id: str) -> Path:
        if not _ID_RE.match(project_id):
            raise ProjectNotFound(project_id)
        return self.root / project_id

    def create(self, project_id: str, meta: dict) -> None:
        directory = self._dir(project_id)
        directory.mkdir(parents=True)
        (directory / "artifacts").mkdir()
        self._write_atomic(directory / "project.json", canonical_json(meta))
        (directory / "events.jsonl").touch()

    def exists(self, project_id: str) -> bool:
        try:
            return (self._dir(project_id) / "project.json").is_file()
        except ProjectNotFound:
            return False

    def require(self, project_id: str) -> None:
        if not self.exists(project_id):
            raise ProjectNotFound(project_id)

    def list_projects(self) -> list[str]:
        return sorted(
            p.name for p in self.root.iterdir() if (p / "project.json").is_file()
        )

    def read_meta(self, project_id: str) -> dict:
        self.require(project_id)
        return json.loads((self._dir(project_id) / "project.json").read_text(encoding="utf-8"))

    # -- events -------------------------------------------------------

    def append_event(self, project_id: str, event: dict) -> dict:
        """Assign the next seq and append. Caller holds the project lock."""
        self.require(project_id)
        path = self._dir(project_id) / "events.jsonl"
        seq = self._event_count(path)
        stamped = {"seq": seq, **event}
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(stamped, ensure_ascii=False) + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        return stamped

    def read_events(self, project_id: str) -> list[dict]:
        self.require(project_id)
        path = self._dir(project_id) / "events.jsonl"
        events = []
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    events.append(json.loads(line))
        return events

    @staticmethod
    def _event_count(path: Path) -> int:
        count = 0
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    count += 1
        return count

    # -- artifacts ----------------------------------------------------

    def write_artifact(self, project_id: str, name: str, version: int, content: dict) -> None:
        self.require(project_id)
        path = self._dir(project_id) / "artifacts" / f"{name}.v{version}.json"
        self._write_atomic(path, canonical_json(content))

    def read_artifact(self, project_id: str, name: str, version: int) -> dict:
        self.require(project_id)
        path = self._dir(project_id) / "artifacts" / f"{name}.v{version}.json"
        if not path.is_file():
            raise ArtifactMissing(f"{name}.v{version}")
        return json.loads(path.read_text(encoding="utf-8"))

    def artifact_versions(self, project_id: str) -> dict[str, list[int]]:
        self.require(project_id)
        versions: dict[str, list[int]] = {}
        for path in (self._dir(project_id) / "artifacts").iterdir():
            m = _ARTIFACT_FILE_RE.match(path.name)
            if m:
                versions.setdefault(m.group(1), []).append(int(m.group(2)))
        return {name: sorted(vs) for name, vs in sorted(versions.items())}

    @staticmethod
    def _write_atomic(path: Path, text: str) -> None:
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
