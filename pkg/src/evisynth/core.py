"""Core domain types: review questions, study records, labels, and ids.

Everything downstream (search, screening, extraction, synthesis, the
service) builds on the types in this module. All value types are frozen
dataclasses with canonical snake_case JSON via ``to_dict``/``from_dict``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import IntEnum
from typing import TYPE_CHECKING, Iterable, NewType

from .errors import EviSynthError

if TYPE_CHECKING:  # pragma: no cover - import cycle guard, typing only
    from .extraction.chunking import ChunkedDocument

ProjectId = NewType("ProjectId", str)
JobId = NewType("JobId", str)
CriterionId = NewType("CriterionId", str)

# Chunk ids: "c" followed by at least four digits (c0001, c0042, c12345).
_CHUNK_ID_RE = re.compile(r"^c\d{4,}$")
_PMID_RE = re.compile(r"^\d+$")


def is_chunk_id(value: str) -> bool:
    return bool(_CHUNK_ID_RE.match(value))


def make_chunk_id(index: int) -> str:
    """Sequential chunk id, 1-based: make_chunk_id(1) == 'c0001'."""
    if index < 1:
        raise ValueError(f"chunk index must be >= 1, got {index}")
    return f"c{index:04d}"


class PicoValidationError(EviSynthError):
    """Raised by validate_pico; ``errors`` lists every violated rule."""

    code = "pico_invalid"

    def __init__(self, errors: list[str]):
        super().__init__(f"invalid review question: {', '.join(errors)}", detail=errors)
        self.errors = errors


class EligibilityLabel(IntEnum):
    """Per-criterion screening verdict. No other integers are representable."""

    INELIGIBLE = -1
    UNCERTAIN = 0
    ELIGIBLE = 1


@dataclass(frozen=True)
class PicoQuestion:
    """A review question in population/intervention/comparison/outcome form."""

    title: str
    population: str
    intervention: str
    comparison: str = ""
    outcome: str = ""

    def to_dict(self) -> dict:
        return {
            "title": self.title,
            "population": self.population,
            "intervention": self.intervention,
            "comparison": self.comparison,
            "outcome": self.outcome,
        }

    @classmethod
    def from_dict(cls, data: dict) -> PicoQuestion:
        return cls(
            title=data["title"],
            population=data["population"],
            intervention=data["intervention"],
            comparison=data.get("comparison", ""),
            outcome=data.get("outcome", ""),
        )


def validate_pico(question: PicoQuestion) -> PicoQuestion:
    """Trim all fields and check the non-emptiness rules.

    Returns the normalized question, or raises PicoValidationError listing
    every violated rule (population and intervention must be non-empty after
    trimming; comparison may be empty).
    """
    trimmed = PicoQuestion(
        title=question.title.strip(),
        population=question.population.strip(),
        intervention=question.intervention.strip(),
        comparison=question.comparison.strip(),
        outcome=question.outcome.strip(),
    )
    errors: list[str] = []
    if not trimmed.population:
        errors.append("EmptyPopulation")
    if not trimmed.intervention:
        errors.append("EmptyIntervention")
    if errors:
        raise PicoValidationError(errors)
    return trimmed


@dataclass(frozen=True)
class StudyRecord:
    """One retrieved study. ``abstract`` may be empty; ``full_content`` is
    the chunked full text when it has been fetched."""

    pmid: str
    title: str
    abstract: str = ""
    year: int | None = None
    mesh_terms: tuple[str, ...] = ()
    full_content: "ChunkedDocument | None" = field(default=None, compare=False)

    def __post_init__(self):
        if not _PMID_RE.match(self.pmid):
            raise ValueError(f"pmid must be a non-empty digit string, got {self.pmid!r}")

    def to_dict(self) -> dict:
        return {
            "pmid": self.pmid,
            "title": self.title,
            "abstract": self.abstract,
            "year": self.year,
            "mesh_terms": list(self.mesh_terms),
            "full_content": self.full_content.to_dict() if self.full_content else None,
        }

    @classmethod
    def from_dict(cls, data: dict) -> StudyRecord:
        full = data.get("full_content")
        if full is not None:
            from .extraction.chunking import ChunkedDocument

            full = ChunkedDocument.from_dict(full)
        return cls(
            pmid=data["pmid"],
            title=data["title"],
            abstract=data.get("abstract", ""),
            year=data.get("year"),
            mesh_terms=tuple(data.get("mesh_terms", ())),
            full_content=full,
        )


def dedupe_studies(records: Iterable[StudyRecord]) -> list[StudyRecord]:
    """Drop later duplicates by pmid, keeping first occurrences in order.

    Idempotent: dedupe_studies(dedupe_studies(x)) == dedupe_studies(x).
    """
    seen: set[str] = set()
    out: list[StudyRecord] = []
    for record in records:
        if record.pmid not in seen:
            seen.add(record.pmid)
            out.append(record)
    return out


def canonical_json(data: object) -> str:
    """Stable JSON rendering used for every artifact written to disk."""
    return json.dumps(data, indent=2, ensure_ascii=False) + "\n"
