"""Metric suite over pipeline outputs.

Per-review metrics (search recall, the recall@K curve, extraction accuracy
by field kind, result-row accuracy with its failure-taxonomy tally, and the
leave-one-criterion-out ΔRecall) plus an equal-weight aggregate across
reviews. Each metric delegates to the owning module's arithmetic — this
module only assembles, aggregates, and renders.

Aggregation weight: every review counts equally, whatever its size; a
review that lacks a metric is simply left out of that metric's mean.
ΔRecall aggregates by criterion id, which is positional — compare across
reviews only when the criteria line up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..core import canonical_json
from ..extraction import ConfusionCounts, ExtractedCell, FieldSpec, ValueMatcher, score_extraction
from ..screening import EmptyTruth, RankedList, recall_at_k
from ..synthesis import (
    STATUS_FAILURE,
    STATUS_HALLUCINATION,
    STATUS_OK,
    STATUS_UNAVAILABLE,
    EffectRow,
)

DEFAULT_KS = (10, 20, 50, 100, 200)
EFFECT_MATCH_REL_TOL = 1e-4

TALLY_INACCURATE = "Inaccurate"
TALLY_FAILURE = "ExtractionFailure"
TALLY_UNAVAILABLE = "UnavailableData"
TALLY_HALLUCINATION = "Hallucination"
TALLY_LABELS = (TALLY_INACCURATE, TALLY_FAILURE, TALLY_UNAVAILABLE, TALLY_HALLUCINATION)

_TALLY_BY_STATUS = {
    STATUS_OK: TALLY_INACCURATE,  # ran fine, produced the wrong row
    STATUS_FAILURE: TALLY_FAILURE,
    STATUS_UNAVAILABLE: TALLY_UNAVAILABLE,
    STATUS_HALLUCINATION: TALLY_HALLUCINATION,
}


def eval_search(found: set[str] | frozenset[str], truth: set[str] | frozenset[str]) -> float:
    """|found ∩ truth| / |truth|."""
    if not truth:
        raise EmptyTruth("ground-truth set is empty")
    return len(set(found) & set(truth)) / len(truth)


def eval_screening(
    ranked: RankedList,
    truth: set[str] | frozenset[str],
    ks: tuple[int, ...] = DEFAULT_KS,
) -> tuple[tuple[int, float], ...]:
    """Recall@K curve over ascending K; K past the end of the ranking means
    recall of the whole list."""
    if list(ks) != sorted(set(ks)):
        raise ValueError("ks must be strictly ascending")
    return tuple((k, recall_at_k(ranked, set(truth), k)) for k in ks)


@dataclass(frozen=True)
class ResultRecord:
    """The pipeline's answer for one (study, outcome) pair."""

    pmid: str
    outcome: str
    status: str
    row: EffectRow | None = None

    def __post_init__(self):
        if self.status not in _TALLY_BY_STATUS:
            raise ValueError(f"unknown result status {self.status!r}")
        if self.status == STATUS_OK and self.row is None:
            raise ValueError(f"{self.pmid}: status ok requires an effect row")


def rows_match(extracted: EffectRow, truth: EffectRow) -> bool:
    """Correct iff all four counts match exactly (uncorrected cells), or —
    for precomputed effects — log_effect and se agree within 1e-4 relative."""
    if extracted.has_counts and truth.has_counts:
        return (extracted.a, extracted.n1, extracted.c, extracted.n2) == (
            truth.a,
            truth.n1,
            truth.c,
            truth.n2,
        )
    if not extracted.has_counts and not truth.has_counts:
        return math.isclose(
            extracted.log_effect, truth.log_effect, rel_tol=EFFECT_MATCH_REL_TOL
        ) and math.isclose(extracted.se, truth.se, rel_tol=EFFECT_MATCH_REL_TOL)
    return False


@dataclass(frozen=True)
class ResultScore:
    accuracy: float
    correct: int
    total: int
    tally: tuple[tuple[str, int], ...]  # only the four taxonomy labels

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "correct": self.correct,
            "total": self.total,
            "tally": dict(self.tally),
        }


def eval_results(
    records: list[ResultRecord] | tuple[ResultRecord, ...],
    truth: dict,
) -> ResultScore:
    """Score extracted effect rows against truth keyed (pmid, outcome).

    The denominator is the truth table; a truth row with no record at all
    counts as UnavailableData (the pipeline produced nothing for it), and
    records outside the truth table are ignored.
    """
    if not truth:
        raise EmptyTruth("no truth rows to score against")
    by_key: dict[tuple[str, str], ResultRecord] = {}
    for record in records:
        key = (record.pmid, record.outcome)
        if key in by_key:
            raise ValueError(f"duplicate result record for {key}")
        by_key[key] = record

    correct = 0
    tally = {label: 0 for label in TALLY_LABELS}
    for key, truth_row in sorted(truth.items()):
        record = by_key.get(key)
        if record is None:
            tally[TALLY_UNAVAILABLE] += 1
            continue
        if record.status == STATUS_OK and rows_match(record.row, truth_row):
            correct += 1
        else:
            tally[_TALLY_BY_STATUS[record.status]] += 1
    return ResultScore(
        accuracy=correct / len(truth),
        correct=correct,
        total=len(truth),
        tally=tuple(tally.items()),
    )


@dataclass(frozen=True)
class ExtractionEval:
    accuracy: float | None  # all kinds together, truth-present fields
    accuracy_by_kind: tuple[tuple[str, float | None], ...]
    counts: ConfusionCounts

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "accuracy_by_kind": dict(self.accuracy_by_kind),
            "counts": self.counts.to_dict(),
        }


def eval_extraction(
    cells_by_pmid: dict[str, tuple[ExtractedCell, ...]],
    field_truth: dict,
    fields: list[FieldSpec] | tuple[FieldSpec, ...],
    matcher: ValueMatcher | None = None,
) -> ExtractionEval:
    """Score extracted cells per study and break accuracy down by field
    kind. ``field_truth`` is keyed (pmid, field name); every truth field
    must be declared in ``fields``."""
    kind_of = {f.name: f.kind for f in fields}
    for _, name in field_truth:
        if name not in kind_of:
            raise ValueError(f"truth field {name!r} is not in the field list")

    matched: dict[str, int] = {}
    present: dict[str, int] = {}
    totals = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    for pmid in sorted(cells_by_pmid, key=int):
        truth_table = {name: value for (p, name), value in field_truth.items() if p == pmid}
        if not truth_table:
            continue
        score = score_extraction(cells_by_pmid[pmid], truth_table, matcher=matcher)
        totals["tp"] += score.counts.tp
        totals["fp"] += score.counts.fp
        totals["fn"] += score.counts.fn
        totals["tn"] += score.counts.tn
        for name, label in score.per_field:
            kind = kind_of[name]
            if label in ("match", "mismatch", "missing"):
                present[kind] = present.get(kind, 0) + 1
                if label == "match":
                    matched[kind] = matched.get(kind, 0) + 1

    by_kind = tuple(
        (kind, (matched.get(kind, 0) / present[kind]) if present.get(kind) else None)
        for kind in sorted({f.kind for f in fields})
    )
    total_present = sum(present.values())
    overall = sum(matched.values()) / total_present if total_present else None
    return ExtractionEval(
        accuracy=overall, accuracy_by_kind=by_kind, counts=ConfusionCounts(**totals)
    )


def _check_fraction(name: str, value: float | None):
    if value is not None and not (0.0 <= value <= 1.0):
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


@dataclass(frozen=True)
class ReviewMetrics:
    """Everything measured for one review. Unmeasured metrics stay None
    (or empty) and drop out of aggregation."""

    review_id: str
    search_recall: float | None = None
    recall_curve: tuple[tuple[int, float], ...] = ()
    extraction: ExtractionEval | None = None
    result_score: ResultScore | None = None
    delta_recall: tuple[tuple[str, float], ...] = ()  # criterion id -> ΔRecall

    def __post_init__(self):
        _check_fraction("search_recall", self.search_recall)
        for k, value in self.recall_curve:
            _check_fraction(f"recall@{k}", value)
        if self.extraction is not None:
            _check_fraction("extraction accuracy", self.extraction.accuracy)
            for kind, value in self.extraction.accuracy_by_kind:
                _check_fraction(f"extraction accuracy[{kind}]", value)
        if self.result_score is not None:
            _check_fraction("result accuracy", self.result_score.accuracy)
        for criterion_id, value in self.delta_recall:
            if not (-1.0 <= value <= 1.0):
                raise ValueError(f"ΔRecall[{criterion_id}] must lie in [-1, 1], got {value}")

    def to_dict(self) -> dict:
        return {
            "review_id": self.review_id,
            "search_recall": self.search_recall,
            "recall_curve": [[k, v] for k, v in self.recall_curve],
            "extraction": self.extraction.to_dict() if self.extraction else None,
            "results": self.result_score.to_dict() if self.result_score else None,
            "delta_recall": dict(self.delta_recall),
        }


def _mean(values: list[float]) -> float | None:
    return sum(values) / len(values) if values else None


@dataclass(frozen=True)
class AggregateMetrics:
    """Equal-weight means over the reviews that report each metric."""

    n_reviews: int
    search_recall: float | None
    recall_curve: tuple[tuple[int, float], ...]
    extraction_accuracy: float | None
    extraction_accuracy_by_kind: tuple[tuple[str, float | None], ...]
    extraction_counts: ConfusionCounts
    result_accuracy: float | None
    result_tally: tuple[tuple[str, int], ...]
    delta_recall: tuple[tuple[str, float], ...]

    def to_dict(self) -> dict:
        return {
            "n_reviews": self.n_reviews,
            "search_recall": self.search_recall,
            "recall_curve": [[k, v] for k, v in self.recall_curve],
            "extraction_accuracy": self.extraction_accuracy,
            "extraction_accuracy_by_kind": dict(self.extraction_accuracy_by_kind),
            "extraction_counts": self.extraction_counts.to_dict(),
            "result_accuracy": self.result_accuracy,
            "result_tally": dict(self.result_tally),
            "delta_recall": dict(self.delta_recall),
        }


def aggregate_metrics(reviews: list[ReviewMetrics] | tuple[ReviewMetrics, ...]) -> AggregateMetrics:
    recalls = [r.search_recall for r in reviews if r.search_recall is not None]

    curve_values: dict[int, list[float]] = {}
    for review in reviews:
        for k, value in review.recall_curve:
            curve_values.setdefault(k, []).append(value)

    extraction_overall: list[float] = []
    by_kind_values: dict[str, list[float]] = {}
    counts = {"tp": 0, "fp": 0, "fn": 0, "tn": 0}
    for review in reviews:
        if review.extraction is None:
            continue
        if review.extraction.accuracy is not None:
            extraction_overall.append(review.extraction.accuracy)
        for kind, value in review.extraction.accuracy_by_kind:
            if value is not None:
                by_kind_values.setdefault(kind, []).append(value)
        counts["tp"] += review.extraction.counts.tp
        counts["fp"] += review.extraction.counts.fp
        counts["fn"] += review.extraction.counts.fn
        counts["tn"] += review.extraction.counts.tn

    result_accuracies: list[float] = []
    tally = {label: 0 for label in TALLY_LABELS}
    for review in reviews:
        if review.result_score is None:
            continue
        result_accuracies.append(review.result_score.accuracy)
        for label, count in review.result_score.tally:
            tally[label] += count

    delta_values: dict[str, list[float]] = {}
    for review in reviews:
        for criterion_id, value in review.delta_recall:
            delta_values.setdefault(criterion_id, []).append(value)

    return AggregateMetrics(
        n_reviews=len(reviews),
        search_recall=_mean(recalls),
        recall_curve=tuple((k, _mean(curve_values[k])) for k in sorted(curve_values)),
        extraction_accuracy=_mean(extraction_overall),
        extraction_accuracy_by_kind=tuple(
            (kind, _mean(by_kind_values[kind])) for kind in sorted(by_kind_values)
        ),
        extraction_counts=ConfusionCounts(**counts),
        result_accuracy=_mean(result_accuracies),
        result_tally=tuple(tally.items()),
        delta_recall=tuple((cid, _mean(delta_values[cid])) for cid in sorted(delta_values)),
    )


@dataclass(frozen=True)
class MetricsReport:
    reviews: tuple[ReviewMetrics, ...]
    aggregate: AggregateMetrics = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        ordered = tuple(sorted(self.reviews, key=lambda r: r.review_id))
        object.__setattr__(self, "reviews", ordered)
        if self.aggregate is None:
            object.__setattr__(self, "aggregate", aggregate_metrics(ordered))

    def to_dict(self) -> dict:
        return {
            "reviews": [r.to_dict() for r in self.reviews],
            "aggregate": self.aggregate.to_dict(),
        }


def _num(value: float | int | None) -> str:
    if value is None:
        return "—"
    if isinstance(value, int):
        return str(value)
    return repr(value)  # repr round-trips floats exactly; the json twin must agree


def report(metrics: MetricsReport, format: str = "markdown") -> str:
    """Render the report deterministically: reviews by id, metrics by name."""
    if format == "json":
        return canonical_json(metrics.to_dict())
    if format != "markdown":
        raise ValueError(f"unknown report format {format!r}")

    lines: list[str] = ["# Evaluation report", ""]
    agg = metrics.aggregate
    lines.append(f"{agg.n_reviews} review(s); aggregates are equal-weight means.")
    lines.append("")

    ks = sorted({k for r in metrics.reviews for k, _ in r.recall_curve})
    lines.append("## Search and ranking")
    lines.append("")
    header = ["Review", "Recall"] + [f"R@{k}" for k in ks]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for review in metrics.reviews:
        curve = dict(review.recall_curve)
        row = [review.review_id, _num(review.search_recall)]
        row += [_num(curve.get(k)) for k in ks]
        lines.append("| " + " | ".join(row) + " |")
    agg_curve = dict(agg.recall_curve)
    row = ["aggregate", _num(agg.search_recall)] + [_num(agg_curve.get(k)) for k in ks]
    lines.append("| " + " | ".join(row) + " |")
    lines.append("")

    kinds = sorted(
        {kind for r in metrics.reviews if r.extraction for kind, _ in r.extraction.accuracy_by_kind}
    )
    lines.append("## Extraction accuracy")
    lines.append("")
    header = ["Review", "Overall"] + kinds + ["tp", "fp", "fn", "tn"]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for review in metrics.reviews:
        if review.extraction is None:
            continue
        by_kind = dict(review.extraction.accuracy_by_kind)
        c = review.extraction.counts
        row = [review.review_id, _num(review.extraction.accuracy)]
        row += [_num(by_kind.get(kind)) for kind in kinds]
        row += [str(c.tp), str(c.fp), str(c.fn), str(c.tn)]
        lines.append("| " + " | ".join(row) + " |")
    by_kind = dict(agg.extraction_accuracy_by_kind)
    c = agg.extraction_counts
    row = ["aggregate", _num(agg.extraction_accuracy)]
    row += [_num(by_kind.get(kind)) for kind in kinds]
    row += [str(c.tp), str(c.fp), str(c.fn), str(c.tn)]
    lines.append("| " + " | ".join(row) + " |")
    lines.append("")

    lines.append("## Result extraction")
    lines.append("")
    header = ["Review", "Accuracy", "Correct", "Total", *TALLY_LABELS]
    lines.append("| " + " | ".join(header) + " |")
    lines.append("|" + "---|" * len(header))
    for review in metrics.reviews:
        if review.result_score is None:
            continue
        tally = dict(review.result_score.tally)
        row = [
            review.review_id,
            _num(review.result_score.accuracy),
            str(review.result_score.correct),
            str(review.result_score.total),
            *(str(tally.get(label, 0)) for label in TALLY_LABELS),
        ]
        lines.append("| " + " | ".join(row) + " |")
    tally = dict(agg.result_tally)
    row = ["aggregate", _num(agg.result_accuracy), "", ""]
    row += [str(tally.get(label, 0)) for label in TALLY_LABELS]
    lines.append("| " + " | ".join(row) + " |")
    lines.append("")

    lines.append("## ΔRecall by criterion")
    lines.append("")
    lines.append("| Review | Criterion | ΔRecall |")
    lines.append("|---|---|---|")
    for review in metrics.reviews:
        for criterion_id, value in sorted(review.delta_recall):
            lines.append(f"| {review.review_id} | {criterion_id} | {_num(value)} |")
    for criterion_id, value in agg.delta_recall:
        lines.append(f"| aggregate | {criterion_id} | {_num(value)} |")
    lines.append("")
    return "\n".join(lines)
