"""Benchmark corpus loading.

A benchmark is one JSON document holding annotated reviews: the review
question, the ground-truth study set, the candidate pool the pipeline is
expected to rank (the truth is always contained in the candidates; at most
2000 candidates per review), and per-study truth for field extraction and
outcome rows.

Schema, informally::

    {
      "reviews": [
        {
          "id": "r01",
          "topic": "oncology",                # optional grouping attribute
          "pico": {"title": ..., "population": ..., "intervention": ...,
                   "comparison": ..., "outcome": ...},
          "ground_truth_pmids": ["1001", ...],
          "candidate_pmids": ["1001", ...],   # ordered, deduplicated
          "field_truth": {                    # optional
            "1001": {"sample_size": 96, "blinding": "ABSENT"}
          },
          "outcome_truth": {                  # optional
            "1001": {"overall survival": {"a": 12, "n1": 60, "c": 18, "n2": 60}}
          }
        }
      ]
    }

Shape problems raise SchemaError; well-formed files whose contents break a
review invariant raise InvariantViolation naming the review id.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from ..core import PicoQuestion, validate_pico
from ..errors import EviSynthError
from ..extraction import ABSENT
from ..synthesis import EffectRow, RowInvariantViolation

MAX_CANDIDATES_PER_REVIEW = 2000

_PMID_RE = re.compile(r"^\d+$")


class SchemaError(EviSynthError):
    code = "schema_error"


class InvariantViolation(EviSynthError):
    code = "invariant_violation"


@dataclass(frozen=True)
class BenchmarkReview:
    """One annotated review. Invariants are enforced at construction so a
    review is valid wherever it came from, file or code."""

    id: str
    pico: PicoQuestion
    ground_truth_pmids: frozenset[str]
    candidate_pmids: tuple[str, ...]
    field_truth: dict = field(default_factory=dict)  # (pmid, field) -> value | ABSENT
    outcome_truth: dict = field(default_factory=dict)  # (pmid, outcome) -> EffectRow
    topic: str = ""

    def __post_init__(self):
        if not self.id or not isinstance(self.id, str):
            raise SchemaError("review id must be a non-empty string")
        for pmid in self.candidate_pmids:
            if not _PMID_RE.match(pmid):
                raise SchemaError(f"review {self.id}: bad candidate pmid {pmid!r}")
        if len(set(self.candidate_pmids)) != len(self.candidate_pmids):
            raise InvariantViolation(f"review {self.id}: duplicate candidate pmids")
        if len(self.candidate_pmids) > MAX_CANDIDATES_PER_REVIEW:
            raise InvariantViolation(
                f"review {self.id}: {len(self.candidate_pmids)} candidates exceed "
                f"the {MAX_CANDIDATES_PER_REVIEW} cap"
            )
        missing = self.ground_truth_pmids - set(self.candidate_pmids)
        if missing:
            raise InvariantViolation(
                f"review {self.id}: ground-truth pmids not in candidates: "
                + ", ".join(sorted(missing, key=int))
            )
        for key in self.field_truth:
            if not (isinstance(key, tuple) and len(key) == 2):
                raise SchemaError(f"review {self.id}: field_truth keys must be (pmid, field)")
        for (pmid, outcome), row in self.outcome_truth.items():
            if not isinstance(row, EffectRow):
                raise SchemaError(f"review {self.id}: outcome truth for {pmid} is not a row")
            if row.pmid != pmid:
                raise InvariantViolation(
                    f"review {self.id}: outcome row pmid {row.pmid} filed under {pmid}"
                )


def _require(raw: dict, key: str, context: str):
    if key not in raw:
        raise SchemaError(f"{context}: missing required key {key!r}")
    return raw[key]


def _string_list(value, context: str) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SchemaError(f"{context}: expected a list of strings")
    return value


def _parse_review(raw: object, ordinal: int) -> BenchmarkReview:
    context = f"review #{ordinal}"
    if not isinstance(raw, dict):
        raise SchemaError(f"{context}: expected an object")
    review_id = _require(raw, "id", context)
    if not isinstance(review_id, str) or not review_id:
        raise SchemaError(f"{context}: id must be a non-empty string")
    context = f"review {review_id}"

    pico_raw = _require(raw, "pico", context)
    if not isinstance(pico_raw, dict):
        raise SchemaError(f"{context}: pico must be an object")
    try:
        pico = validate_pico(PicoQuestion.from_dict(pico_raw))
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"{context}: bad pico: {exc}") from exc

    truth = _string_list(_require(raw, "ground_truth_pmids", context), f"{context} truth")
    candidates = _string_list(
        _require(raw, "candidate_pmids", context), f"{context} candidates"
    )

    field_truth: dict = {}
    for pmid, table in (raw.get("field_truth") or {}).items():
        if not isinstance(table, dict):
            raise SchemaError(f"{context}: field_truth[{pmid}] must be an object")
        for name, value in table.items():
            field_truth[(pmid, name)] = ABSENT if value == "ABSENT" else value

    outcome_truth: dict = {}
    for pmid, outcomes in (raw.get("outcome_truth") or {}).items():
        if not isinstance(outcomes, dict):
            raise SchemaError(f"{context}: outcome_truth[{pmid}] must be an object")
        for outcome, row_raw in outcomes.items():
            if not isinstance(row_raw, dict):
                raise SchemaError(f"{context}: outcome row for {pmid} must be an object")
            try:
                row = EffectRow.from_dict({"pmid": pmid, **row_raw})
            except (RowInvariantViolation, KeyError, TypeError) as exc:
                raise SchemaError(
                    f"{context}: bad outcome row for pmid {pmid}: {exc}"
                ) from exc
            outcome_truth[(pmid, outcome)] = row

    return BenchmarkReview(
        id=review_id,
        pico=pico,
        ground_truth_pmids=frozenset(truth),
        candidate_pmids=tuple(candidates),
        field_truth=field_truth,
        outcome_truth=outcome_truth,
        topic=str(raw.get("topic") or ""),
    )


def load_benchmark(path: str | Path) -> list[BenchmarkReview]:
    """Load and validate a benchmark file. All invariants are checked here;
    a violation names the review it came from."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        raise SchemaError("benchmark file is empty")
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"benchmark file is not valid JSON: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("reviews"), list):
        raise SchemaError("benchmark must be an object with a 'reviews' list")
    if not data["reviews"]:
        raise SchemaError("benchmark has no reviews")

    reviews: list[BenchmarkReview] = []
    seen: set[str] = set()
    for ordinal, raw in enumerate(data["reviews"], start=1):
        review = _parse_review(raw, ordinal)
        if review.id in seen:
            raise InvariantViolation(f"duplicate review id {review.id!r}")
        seen.add(review.id)
        reviews.append(review)
    return reviews
