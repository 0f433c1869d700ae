"""Eligibility screening: criteria, per-criterion verdicts, ranking, recall.

A screening run produces an EligibilityMatrix of {-1, 0, +1} labels
(study x criterion). Scores aggregate labels per study under a strategy
(plain sum, per-criterion weights, or a masked sum that ignores chosen
criteria); ranking is fully deterministic and independent of input order:
descending score, then more +1 labels, then fewer -1 labels, then
ascending pmid.
"""

from __future__ import annotations

import concurrent.futures
import csv
import io
import logging
import re
from dataclasses import dataclass

from .core import EligibilityLabel, PicoQuestion, StudyRecord
from .errors import EviSynthError
from .gateway import (
    Gateway,
    LlmOutputUnparseable,
    TemplateRegistry,
    default_registry,
    parse_structured,
)
from .search.ops import _complete_with_one_retry, _pico_slots

log = logging.getLogger(__name__)

ASPECTS = ("population", "intervention", "design", "outcome", "other")


class DimensionMismatch(EviSynthError):
    code = "dimension_mismatch"


class UnknownCriterion(EviSynthError):
    code = "unknown_criterion"

    def __init__(self, criterion_id: str):
        super().__init__(f"no criterion with id {criterion_id!r}", detail=criterion_id)
        self.criterion_id = criterion_id


class EmptyTruth(EviSynthError):
    code = "empty_truth"


@dataclass(frozen=True)
class Criterion:
    id: str
    text: str
    aspect: str | None = None
    enabled: bool = True

    def __post_init__(self):
        if not self.id or not self.text.strip():
            raise ValueError("criterion id and text must be non-empty")
        if self.aspect is not None and self.aspect not in ASPECTS:
            raise ValueError(f"unknown aspect {self.aspect!r}")

    def to_dict(self) -> dict:
        return {"id": self.id, "text": self.text, "aspect": self.aspect, "enabled": self.enabled}

    @classmethod
    def from_dict(cls, data: dict) -> Criterion:
        return cls(
            id=data["id"],
            text=data["text"],
            aspect=data.get("aspect"),
            enabled=data.get("enabled", True),
        )


@dataclass(frozen=True)
class CriteriaSet:
    criteria: tuple[Criterion, ...]
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        ids = [c.id for c in self.criteria]
        if len(ids) != len(set(ids)):
            raise ValueError("criterion ids must be unique")

    def get(self, criterion_id: str) -> Criterion:
        for c in self.criteria:
            if c.id == criterion_id:
                return c
        raise UnknownCriterion(criterion_id)

    def to_dict(self) -> dict:
        return {"criteria": [c.to_dict() for c in self.criteria], "warnings": list(self.warnings)}

    @classmethod
    def from_dict(cls, data: dict) -> CriteriaSet:
        return cls(
            criteria=tuple(Criterion.from_dict(c) for c in data["criteria"]),
            warnings=tuple(data.get("warnings", ())),
        )


@dataclass(frozen=True)
class EligibilityMatrix:
    """Rows follow ``study_ids``, columns follow ``criterion_ids``."""

    study_ids: tuple[str, ...]
    criterion_ids: tuple[str, ...]
    labels: tuple[tuple[EligibilityLabel, ...], ...]
    rationales: tuple[tuple[str, ...], ...] = ()

    def __post_init__(self):
        if len(self.labels) != len(self.study_ids):
            raise DimensionMismatch(
                f"{len(self.labels)} label rows for {len(self.study_ids)} studies"
            )
        for row in self.labels:
            if len(row) != len(self.criterion_ids):
                raise DimensionMismatch(
                    f"row of {len(row)} labels for {len(self.criterion_ids)} criteria"
                )
        object.__setattr__(
            self,
            "labels",
            tuple(tuple(EligibilityLabel(v) for v in row) for row in self.labels),
        )
        if self.rationales:
            if len(self.rationales) != len(self.study_ids) or any(
                len(r) != len(self.criterion_ids) for r in self.rationales
            ):
                raise DimensionMismatch("rationale grid does not match label grid")

    def label(self, study_id: str, criterion_id: str) -> EligibilityLabel:
        return self.labels[self.study_ids.index(study_id)][self.criterion_ids.index(criterion_id)]

    def to_dict(self) -> dict:
        return {
            "study_ids": list(self.study_ids),
            "criterion_ids": list(self.criterion_ids),
            "labels": [[int(v) for v in row] for row in self.labels],
            "rationales": [list(r) for r in self.rationales],
        }

    @classmethod
    def from_dict(cls, data: dict) -> EligibilityMatrix:
        return cls(
            study_ids=tuple(data["study_ids"]),
            criterion_ids=tuple(data["criterion_ids"]),
            labels=tuple(tuple(EligibilityLabel(v) for v in row) for row in data["labels"]),
            rationales=tuple(tuple(r) for r in data.get("rationales", ())),
        )

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["pmid", *self.criterion_ids])
        for study_id, row in zip(self.study_ids, self.labels):
            writer.writerow([study_id, *(int(v) for v in row)])
        return buf.getvalue()


@dataclass(frozen=True)
class AggregationStrategy:
    """sum | weighted (per-criterion weights) | masked (ignore criteria)."""

    kind: str
    weights: tuple[tuple[str, float], ...] = ()
    excluded: frozenset[str] = frozenset()

    def __post_init__(self):
        if self.kind not in ("sum", "weighted", "masked"):
            raise ValueError(f"unknown aggregation kind {self.kind!r}")
        object.__setattr__(self, "excluded", frozenset(self.excluded))
        object.__setattr__(self, "weights", tuple(self.weights))

    @classmethod
    def sum_(cls) -> AggregationStrategy:
        return cls(kind="sum")

    @classmethod
    def weighted(cls, weights: dict[str, float]) -> AggregationStrategy:
        return cls(kind="weighted", weights=tuple(sorted(weights.items())))

    @classmethod
    def masked(cls, excluded: set[str] | frozenset[str]) -> AggregationStrategy:
        return cls(kind="masked", excluded=frozenset(excluded))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "weights": {k: v for k, v in self.weights},
            "excluded": sorted(self.excluded),
        }

    @classmethod
    def from_dict(cls, data: dict) -> AggregationStrategy:
        return cls(
            kind=data["kind"],
            weights=tuple(sorted(data.get("weights", {}).items())),
            excluded=frozenset(data.get("excluded", ())),
        )


def aggregate(matrix: EligibilityMatrix, strategy: AggregationStrategy) -> dict[str, float]:
    """Per-study score under the strategy. Raises UnknownCriterion when a
    weight or mask references a criterion the matrix does not have."""
    for referenced in [k for k, _ in strategy.weights] + sorted(strategy.excluded):
        if referenced not in matrix.criterion_ids:
            raise UnknownCriterion(referenced)
    weight_map = dict(strategy.weights)
    scores: dict[str, float] = {}
    for study_id, row in zip(matrix.study_ids, matrix.labels):
        total: float = 0
        for criterion_id, value in zip(matrix.criterion_ids, row):
            if strategy.kind == "masked" and criterion_id in strategy.excluded:
                continue
            if strategy.kind == "weighted":
                total += weight_map.get(criterion_id, 1.0) * int(value)
            else:
                total += int(value)
        scores[study_id] = total
    return scores


TIEBREAK_TRACE = "score desc, then +1 count desc, then -1 count asc, then pmid asc"


@dataclass(frozen=True)
class RankedList:
    entries: tuple[tuple[str, float], ...]  # (study_id, score), non-increasing score
    tiebreak_trace: str = TIEBREAK_TRACE

    @property
    def study_ids(self) -> tuple[str, ...]:
        return tuple(s for s, _ in self.entries)

    def to_dict(self) -> dict:
        return {
            "entries": [{"pmid": s, "score": v} for s, v in self.entries],
            "tiebreak_trace": self.tiebreak_trace,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rank", "pmid", "score"])
        for i, (study_id, score) in enumerate(self.entries, start=1):
            writer.writerow([i, study_id, score])
        return buf.getvalue()


def rank(matrix: EligibilityMatrix, strategy: AggregationStrategy) -> RankedList:
    """Deterministic ranking, independent of the matrix's input order."""
    scores = aggregate(matrix, strategy)
    # Tiebreak counts skip masked columns too, so masking a criterion is
    # indistinguishable from deleting its column outright.
    active = [
        j for j, criterion_id in enumerate(matrix.criterion_ids)
        if not (strategy.kind == "masked" and criterion_id in strategy.excluded)
    ]
    counts: dict[str, tuple[int, int]] = {}
    for study_id, row in zip(matrix.study_ids, matrix.labels):
        plus = sum(1 for j in active if row[j] == EligibilityLabel.ELIGIBLE)
        minus = sum(1 for j in active if row[j] == EligibilityLabel.INELIGIBLE)
        counts[study_id] = (plus, minus)

    def sort_key(study_id: str):
        plus, minus = counts[study_id]
        return (-scores[study_id], -plus, minus, int(study_id))

    ordered = sorted(matrix.study_ids, key=sort_key)
    return RankedList(entries=tuple((s, scores[s]) for s in ordered))


def recall_at_k(ranked: RankedList, truth: set[str], k: int) -> float:
    """|top-k intersect truth| / |truth|; k past the end means the whole list."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if not truth:
        raise EmptyTruth("ground-truth set is empty")
    top = set(ranked.study_ids[:k])
    return len(top & truth) / len(truth)


def delta_recall(
    matrix: EligibilityMatrix, truth: set[str], criterion_id: str, k: int = 200
) -> float:
    """Leave-one-criterion-out contribution: recall@k under the plain sum
    minus recall@k with the criterion masked out."""
    if criterion_id not in matrix.criterion_ids:
        raise UnknownCriterion(criterion_id)
    full = recall_at_k(rank(matrix, AggregationStrategy.sum_()), truth, k)
    masked = recall_at_k(rank(matrix, AggregationStrategy.masked({criterion_id})), truth, k)
    return full - masked


# --- LLM-driven ops ---------------------------------------------------------

_CRITERION_LINE_RE = re.compile(r"^\s*(?:[-*]|\d+[.)])\s*(?:\[([a-z]+)\]\s*)?(.+?)\s*$")
_VERDICT_LINE_RE = re.compile(
    r"^\s*(\d+)[.):]?\s*(eligible|ineligible|uncertain)\b\s*[-—:]?\s*(.*)$", re.IGNORECASE
)
_VERDICT_VALUE = {
    "eligible": EligibilityLabel.ELIGIBLE,
    "ineligible": EligibilityLabel.INELIGIBLE,
    "uncertain": EligibilityLabel.UNCERTAIN,
}
MIN_CRITERIA = 3


def _normalize_statement(text: str) -> str:
    return " ".join(text.casefold().split())


def generate_criteria(
    pico: PicoQuestion, gateway: Gateway, registry: TemplateRegistry | None = None
) -> CriteriaSet:
    """Draft at least MIN_CRITERIA eligibility criteria from the question.

    Duplicate statements (case- and whitespace-insensitive) are dropped with
    a warning; unrecognized aspect tags are dropped with a warning.
    """
    registry = registry or default_registry()
    rendered = registry.render("generate_criteria", _pico_slots(pico))

    def parse_fn(raw: str) -> CriteriaSet:
        payload = parse_structured(raw, ["CRITERIA"]).payload("CRITERIA")
        warnings: list[str] = []
        criteria: list[Criterion] = []
        seen: set[str] = set()
        for line in payload.splitlines():
            m = _CRITERION_LINE_RE.match(line)
            if not m or not m.group(2).strip():
                continue
            aspect, text = m.group(1), m.group(2).strip()
            if aspect is not None and aspect not in ASPECTS:
                warnings.append(f"unrecognized aspect tag [{aspect}] dropped")
                aspect = None
            key = _normalize_statement(text)
            if key in seen:
                warnings.append(f"duplicate criterion dropped: {text!r}")
                continue
            seen.add(key)
            criteria.append(Criterion(id=f"e{len(criteria) + 1}", text=text, aspect=aspect))
        if len(criteria) < MIN_CRITERIA:
            raise LlmOutputUnparseable(
                f"only {len(criteria)} distinct criteria parsed; need >= {MIN_CRITERIA}"
            )
        return CriteriaSet(criteria=tuple(criteria), warnings=tuple(warnings))

    return _complete_with_one_retry(gateway, "generate_criteria", rendered, parse_fn)


@dataclass(frozen=True)
class StudyAssessment:
    labels: tuple[EligibilityLabel, ...]
    rationales: tuple[str, ...]
    warnings: tuple[str, ...] = ()


def format_criteria(criteria: CriteriaSet) -> str:
    return "\n".join(f"{i}. {c.text}" for i, c in enumerate(criteria.criteria, start=1))


def assess_study(
    pico: PicoQuestion,
    criteria: CriteriaSet,
    study: StudyRecord,
    gateway: Gateway,
    registry: TemplateRegistry | None = None,
    use_full_text: bool = False,
) -> StudyAssessment:
    """Per-criterion verdicts for one study from its title and abstract.

    A criterion with no parseable verdict gets UNCERTAIN plus a warning.
    Full text is only consulted when ``use_full_text`` is set and chunked
    content is attached to the record.
    """
    registry = registry or default_registry()
    abstract = study.abstract
    if use_full_text and study.full_content is not None:
        body = "\n\n".join(c.text for c in study.full_content.chunks)
        abstract = f"{abstract}\n\nFull text:\n{body}" if abstract else f"Full text:\n{body}"
    slots = dict(
        _pico_slots(pico),
        criteria=format_criteria(criteria),
        study_title=study.title,
        study_abstract=abstract or "(no abstract)",
    )
    rendered = registry.render("assess_study", slots)
    n = len(criteria.criteria)

    def parse_fn(raw: str) -> StudyAssessment:
        payload = parse_structured(raw, ["VERDICTS"]).payload("VERDICTS")
        verdicts: dict[int, tuple[EligibilityLabel, str]] = {}
        warnings: list[str] = []
        any_line = False
        for line in payload.splitlines():
            m = _VERDICT_LINE_RE.match(line)
            if not m:
                continue
            any_line = True
            index = int(m.group(1))
            if not 1 <= index <= n:
                warnings.append(f"verdict for unknown criterion {index} ignored")
                continue
            if index in verdicts:
                warnings.append(f"duplicate verdict for criterion {index} ignored")
                continue
            verdicts[index] = (_VERDICT_VALUE[m.group(2).lower()], m.group(3).strip())
        if not any_line:
            raise LlmOutputUnparseable("no verdict lines found")
        labels = []
        rationales = []
        for i in range(1, n + 1):
            if i in verdicts:
                label, rationale = verdicts[i]
            else:
                label, rationale = EligibilityLabel.UNCERTAIN, ""
                warnings.append(f"criterion {i}: no verdict, defaulting to uncertain")
            labels.append(label)
            rationales.append(rationale)
        return StudyAssessment(
            labels=tuple(labels), rationales=tuple(rationales), warnings=tuple(warnings)
        )

    return _complete_with_one_retry(gateway, "assess_study", rendered, parse_fn)


def build_matrix(
    pico: PicoQuestion,
    criteria: CriteriaSet,
    studies: list[StudyRecord],
    gateway: Gateway,
    registry: TemplateRegistry | None = None,
    use_full_text: bool = False,
    parallelism: int = 4,
) -> EligibilityMatrix:
    """Assess every study against every criterion. Rows keep the input study
    order regardless of completion timing."""
    if not studies:
        return EligibilityMatrix(
            study_ids=(), criterion_ids=tuple(c.id for c in criteria.criteria), labels=()
        )
    with concurrent.futures.ThreadPoolExecutor(max_workers=max(1, parallelism)) as pool:
        assessments = list(
            pool.map(
                lambda s: assess_study(
                    pico, criteria, s, gateway, registry, use_full_text=use_full_text
                ),
                studies,
            )
        )
    for study, assessment in zip(studies, assessments):
        for warning in assessment.warnings:
            log.warning("screening %s: %s", study.pmid, warning)
    return EligibilityMatrix(
        study_ids=tuple(s.pmid for s in studies),
        criterion_ids=tuple(c.id for c in criteria.criteria),
        labels=tuple(a.labels for a in assessments),
        rationales=tuple(a.rationales for a in assessments),
    )
