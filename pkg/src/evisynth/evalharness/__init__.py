"""Benchmark loading and the metric suite over pipeline outputs."""

from .benchmark import (
    MAX_CANDIDATES_PER_REVIEW,
    BenchmarkReview,
    InvariantViolation,
    SchemaError,
    load_benchmark,
)
from .metrics import (
    DEFAULT_KS,
    EFFECT_MATCH_REL_TOL,
    TALLY_FAILURE,
    TALLY_HALLUCINATION,
    TALLY_INACCURATE,
    TALLY_LABELS,
    TALLY_UNAVAILABLE,
    AggregateMetrics,
    ExtractionEval,
    MetricsReport,
    ResultRecord,
    ResultScore,
    ReviewMetrics,
    aggregate_metrics,
    eval_extraction,
    eval_results,
    eval_screening,
    eval_search,
    report,
    rows_match,
)

__all__ = [
    "MAX_CANDIDATES_PER_REVIEW",
    "BenchmarkReview",
    "InvariantViolation",
    "SchemaError",
    "load_benchmark",
    "DEFAULT_KS",
    "EFFECT_MATCH_REL_TOL",
    "TALLY_FAILURE",
    "TALLY_HALLUCINATION",
    "TALLY_INACCURATE",
    "TALLY_LABELS",
    "TALLY_UNAVAILABLE",
    "AggregateMetrics",
    "ExtractionEval",
    "MetricsReport",
    "ResultRecord",
    "ResultScore",
    "ReviewMetrics",
    "aggregate_metrics",
    "eval_extraction",
    "eval_results",
    "eval_screening",
    "eval_search",
    "report",
    "rows_match",
]
