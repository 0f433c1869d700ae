"""Project state, the event log that defines it, and decision handling.

A project is its creation record plus an append-only event log. Folding
the log yields the current state (stage, artifact heads, staleness,
exclusions); user decisions that derive new artifact versions do so via
pure transforms of the previous version, which is what makes the log
replayable: re-deriving every decision-produced version from its
predecessor must reproduce the stored bytes exactly.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .. import pipeline as pl
from ..core import PicoQuestion, canonical_json, validate_pico
from ..extraction import FieldSpec
from ..extraction.fields import CellValue, parse_value
from ..screening import AggregationStrategy, CriteriaSet, UnknownCriterion
from ..synthesis import OutcomeSpec
from .errors import DecisionInvalid, IllegalStage, UnknownTarget
from .store import ProjectStore

STAGES = ("search", "screening", "extraction", "synthesis", "done")

# artifact -> artifacts invalidated when it changes (one hop, never cascaded)
DEPENDENTS: dict[str, tuple[str, ...]] = {
    "pico": ("queries", "criteria"),
    "queries": ("studies",),
    "criteria": ("screening",),
    "studies": ("screening", "extraction", "results"),
    "fields": ("extraction",),
    "outcome": ("results",),
    "extraction": ("results",),
    "results": ("synthesis",),
}

# job kind -> (stage where legal, artifacts it reads, artifact it writes)
JOB_RULES: dict[str, tuple[str, tuple[str, ...], str]] = {
    "generate_queries": ("search", (), "queries"),
    "run_search": ("search", ("queries",), "studies"),
    "generate_criteria": ("screening", (), "criteria"),
    "run_screening": ("screening", ("criteria", "studies"), "screening"),
    "run_extraction": ("extraction", ("fields", "studies"), "extraction"),
    "run_results": ("extraction", ("outcome", "studies"), "results"),
    "run_pooling": ("synthesis", ("results",), "synthesis"),
}

# job kinds whose success moves the project forward
ADVANCES: dict[str, str] = {
    "run_search": "screening",
    "run_screening": "extraction",
    "run_results": "synthesis",
    "run_pooling": "done",
}

DECISION_KINDS = frozenset(
    {
        "set_pico",
        "set_queries",
        "set_criteria",
        "set_fields",
        "set_outcome",
        "set_study_included",
        "edit_criterion",
        "correct_cell",
        "set_aggregation",
        "reset_to_stage",
    }
)

# the artifact a decision kind edits, for staleness marking
_EDITS: dict[str, str] = {
    "set_pico": "pico",
    "set_queries": "queries",
    "set_criteria": "criteria",
    "set_fields": "fields",
    "set_outcome": "outcome",
    "set_study_included": "studies",
    "edit_criterion": "criteria",
    "correct_cell": "extraction",
    "set_aggregation": "screening",
}


@dataclass
class ProjectState:
    id: str
    pico: dict
    stage: str = "search"
    heads: dict[str, int] = field(default_factory=dict)
    stale: set[str] = field(default_factory=set)
    excluded_pmids: set[str] = field(default_factory=set)
    events: list[dict] = field(default_factory=list)

    @property
    def decisions(self) -> list[dict]:
        return [e for e in self.events if e["kind"] in DECISION_KINDS]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "pico": self.pico,
            "stage": self.stage,
            "artifacts": {
                name: {"version": v, "stale": name in self.stale}
                for name, v in sorted(self.heads.items())
            },
            "excluded_pmids": sorted(self.excluded_pmids, key=int),
            "decisions": self.decisions,
        }


def fold(meta: dict, events: list[dict]) -> ProjectState:
    """Replay the event log into current project state. Pure."""
    state = ProjectState(id=meta["id"], pico=meta["pico"])
    for event in events:
        kind = event["kind"]
        if kind == "artifact_written":
            state.heads[event["name"]] = event["version"]
            state.stale.discard(event["name"])
            continue
        if kind == "stage_advanced":
            state.stage = event["stage"]
            continue
        if kind not in DECISION_KINDS:
            raise DecisionInvalid(f"unknown event kind {kind!r} in log")
        if kind == "set_pico":
            state.pico = event["pico"]
        elif kind == "set_study_included":
            if event["included"]:
                state.excluded_pmids.discard(event["pmid"])
            else:
                state.excluded_pmids.add(event["pmid"])
        elif kind == "reset_to_stage":
            state.stage = event["stage"]
        if "artifact" in event:  # decision derived a new artifact version
            state.heads[event["artifact"]] = event["version"]
            state.stale.discard(event["artifact"])
        edited = _EDITS.get(kind)
        if edited:
            for dependent in DEPENDENTS.get(edited, ()):
                if dependent in state.heads:
                    state.stale.add(dependent)
    state.events = list(events)
    return state


def load_state(store: ProjectStore, project_id: str) -> ProjectState:
    return fold(store.read_meta(project_id), store.read_events(project_id))


def check_job_legal(state: ProjectState, kind: str) -> None:
    if kind not in JOB_RULES:
        raise DecisionInvalid(f"unknown job kind {kind!r}")
    stage, needs, _ = JOB_RULES[kind]
    if state.stage != stage:
        raise IllegalStage(
            f"{kind} is only legal at stage {stage!r}; project is at {state.stage!r}"
        )
    for name in needs:
        if name not in state.heads:
            raise IllegalStage(f"{kind} needs the {name!r} artifact, which does not exist yet")


# -- decision validation and artifact transforms ----------------------


def _require_keys(decision: dict, keys: tuple[str, ...]) -> None:
    missing = [k for k in keys if k not in decision]
    if missing:
        raise DecisionInvalid(f"decision {decision.get('kind')!r} missing {missing}")


def _validated_content(kind: str, content: dict) -> dict:
    """Canonicalize PUT-style payloads through their dataclasses so a
    stored artifact is always the library's own serialization."""
    try:
        if kind == "set_queries":
            return pl.QueriesArtifact.from_dict(content).to_dict()
        if kind == "set_criteria":
            return CriteriaSet.from_dict(content).to_dict()
        if kind == "set_fields":
            specs = [FieldSpec.from_dict(f) for f in content["fields"]]
            if not specs:
                raise ValueError("fields must be non-empty")
            names = [s.name for s in specs]
            if len(names) != len(set(names)):
                raise ValueError("field names must be unique")
            return {"fields": [s.to_dict() for s in specs]}
        if kind == "set_outcome":
            return OutcomeSpec.from_dict(content).to_dict()
    except (KeyError, TypeError, ValueError) as exc:
        raise DecisionInvalid(f"{kind}: {exc}") from exc
    raise DecisionInvalid(f"{kind} does not carry content")


def apply_edit_criterion(prev: dict, decision: dict) -> dict:
    criteria = CriteriaSet.from_dict(prev)
    target = decision["criterion_id"]
    if target not in {c.id for c in criteria.criteria}:
        raise UnknownTarget(f"no criterion {target!r}")
    text = decision["text"]
    if not str(text).strip():
        raise DecisionInvalid("criterion text must be non-empty")
    out = dict(prev)
    out["criteria"] = [
        {**c, "text": text} if c["id"] == target else dict(c) for c in prev["criteria"]
    ]
    return CriteriaSet.from_dict(out).to_dict()


def apply_correct_cell(prev: dict, decision: dict) -> dict:
    pmid, field_name = decision["pmid"], decision["field"]
    rows = [dict(r) for r in prev["rows"]]
    for row in rows:
        if row["pmid"] != pmid:
            continue
        cells = [dict(c) for c in row["cells"]]
        for cell in cells:
            if cell["field"] != field_name:
                continue
            was = CellValue.from_dict(cell["value"]).render()
            cell["value"] = parse_value(str(decision["value"])).to_dict()
            cell["rationale"] = f"reviewer correction (was {was!r})"
            row["cells"] = cells
            out = dict(prev)
            out["rows"] = rows
            return pl.ExtractionArtifact.from_dict(out).to_dict()
    raise UnknownTarget(f"no extracted cell for study {pmid!r}, field {field_name!r}")


def apply_set_aggregation(prev: dict, decision: dict) -> dict:
    try:
        strategy = AggregationStrategy.from_dict(decision["strategy"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DecisionInvalid(f"set_aggregation: {exc}") from exc
    screening = pl.ScreeningArtifact.from_dict(prev)
    try:
        return pl.rerank(screening.matrix, strategy).to_dict()
    except UnknownCriterion as exc:
        raise UnknownTarget(str(exc)) from exc


def derive_decision_artifact(
    store: ProjectStore, state: ProjectState, decision: dict
) -> tuple[str, dict] | None:
    """Compute the artifact version a decision produces, if any.

    Pure given the store's existing content — the replay oracle re-runs
    this for every logged decision and compares bytes.
    """
    kind = decision["kind"]
    if kind in ("set_queries", "set_criteria", "set_fields", "set_outcome"):
        _require_keys(decision, ("content",))
        name = {
            "set_queries": "queries",
            "set_criteria": "criteria",
            "set_fields": "fields",
            "set_outcome": "outcome",
        }[kind]
        return name, _validated_content(kind, decision["content"])
    if kind == "edit_criterion":
        _require_keys(decision, ("criterion_id", "text"))
        if "criteria" not in state.heads:
            raise UnknownTarget("no criteria artifact to edit")
        prev = store.read_artifact(state.id, "criteria", state.heads["criteria"])
        return "criteria", apply_edit_criterion(prev, decision)
    if kind == "correct_cell":
        _require_keys(decision, ("pmid", "field", "value"))
        if "extraction" not in state.heads:
            raise UnknownTarget("no extraction artifact to correct")
        prev = store.read_artifact(state.id, "extraction", state.heads["extraction"])
        return "extraction", apply_correct_cell(prev, decision)
    if kind == "set_aggregation":
        _require_keys(decision, ("strategy",))
        if "screening" not in state.heads:
            raise UnknownTarget("no screening artifact to re-rank")
        prev = store.read_artifact(state.id, "screening", state.heads["screening"])
        return "screening", apply_set_aggregation(prev, decision)
    return None


def validate_decision(store: ProjectStore, state: ProjectState, decision: dict) -> None:
    """Checks for decisions that do not derive artifacts."""
    kind = decision.get("kind")
    if kind not in DECISION_KINDS:
        raise DecisionInvalid(f"unknown decision kind {kind!r}")
    if kind == "set_pico":
        _require_keys(decision, ("pico",))
        try:
            validate_pico(PicoQuestion.from_dict(decision["pico"]))
        except Exception as exc:
            raise DecisionInvalid(f"set_pico: {exc}") from exc
    elif kind == "set_study_included":
        _require_keys(decision, ("pmid", "included"))
        if "studies" not in state.heads:
            raise UnknownTarget("no studies artifact yet")
        studies = store.read_artifact(state.id, "studies", state.heads["studies"])
        if decision["pmid"] not in studies["pmids"]:
            raise UnknownTarget(f"no study {decision['pmid']!r} in the project")
    elif kind == "reset_to_stage":
        _require_keys(decision, ("stage",))
        target = decision["stage"]
        if target not in STAGES:
            raise DecisionInvalid(f"unknown stage {target!r}")
        if STAGES.index(target) >= STAGES.index(state.stage):
            raise IllegalStage(
                f"reset must move backward; project is at {state.stage!r}"
            )


def record_decision(store: ProjectStore, project_id: str, decision: dict) -> dict:
    """Validate, derive any artifact version, and append the event.

    Caller-facing commit path for POST /decisions and the PUT endpoints.
    """
    with store.lock(project_id):
        state = load_state(store, project_id)
        validate_decision(store, state, decision)
        derived = derive_decision_artifact(store, state, decision)
        event = {k: v for k, v in decision.items()}
        event["ts"] = time.time()
        if derived is not None:
            name, content = derived
            version = state.heads.get(name, 0) + 1
            store.write_artifact(project_id, name, version, content)
            event["artifact"] = name
            event["version"] = version
        return store.append_event(project_id, event)


def record_job_artifact(
    store: ProjectStore, project_id: str, job_kind: str, job_id: str, content: dict
) -> tuple[str, int]:
    """Commit a finished job's artifact and any stage advance."""
    name = JOB_RULES[job_kind][2]
    with store.lock(project_id):
        state = load_state(store, project_id)
        version = state.heads.get(name, 0) + 1
        store.write_artifact(project_id, name, version, content)
        store.append_event(
            project_id,
            {
                "kind": "artifact_written",
                "name": name,
                "version": version,
                "job_kind": job_kind,
                "job_id": job_id,
                "ts": time.time(),
            },
        )
        next_stage = ADVANCES.get(job_kind)
        if next_stage and state.stage == JOB_RULES[job_kind][0]:
            store.append_event(
                project_id,
                {"kind": "stage_advanced", "stage": next_stage, "ts": time.time()},
            )
    return name, version


def verify_replay(store: ProjectStore, project_id: str) -> list[str]:
    """Re-derive every decision-produced artifact version from its
    predecessor and compare with what the store holds. Returns the list
    of mismatches (empty when the log replays exactly)."""
    meta = store.read_meta(project_id)
    events = store.read_events(project_id)
    mismatches: list[str] = []
    walked = ProjectState(id=meta["id"], pico=meta["pico"])
    for event in events:
        kind = event["kind"]
        if kind in DECISION_KINDS and "artifact" in event:
            rederived = derive_decision_artifact(store, walked, event)
            if rederived is None:
                mismatches.append(f"seq {event['seq']}: expected a derived artifact")
            else:
                name, content = rederived
                stored = store.read_artifact(project_id, event["artifact"], event["version"])
                if name != event["artifact"] or canonical_json(content) != canonical_json(stored):
                    mismatches.append(
                        f"seq {event['seq']}: {event['artifact']}.v{event['version']} "
                        "does not replay to the stored content"
                    )
        walked = fold(meta, walked.events + [event])
    live = fold(meta, events)
    if walked.to_dict() != live.to_dict():
        mismatches.append("incremental fold disagrees with whole-log fold")
    return mismatches
