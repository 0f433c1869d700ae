"""Result extraction, standardization programs, pooling, forest plots."""

from .effects import (
    DoubleZeroExcluded,
    EffectEstimate,
    EffectRow,
    EmptyInput,
    PooledResult,
    RowInvariantViolation,
    StudyEffect,
    Z95,
    compute_effect,
    pool,
    rows_to_csv,
    rows_to_json,
    study_effect,
)
from .forest import render_forest
from .program import (
    DivisionByZero,
    NoTerminal,
    ProgramEvalError,
    ProgramParseError,
    TerminalValues,
    TransformProgram,
    UnknownVariable,
    parse_program,
    round_half_away,
    run_program,
)
from .results import (
    STATUS_FAILURE,
    STATUS_HALLUCINATION,
    STATUS_OK,
    STATUS_UNAVAILABLE,
    NamedValue,
    NumericFindings,
    OutcomeSpec,
    RawFinding,
    ResultExtraction,
    Snippet,
    eval_program,
    extract_result,
    format_findings,
    standardize,
)

__all__ = [
    "DivisionByZero",
    "DoubleZeroExcluded",
    "EffectEstimate",
    "EffectRow",
    "EmptyInput",
    "NamedValue",
    "NoTerminal",
    "NumericFindings",
    "OutcomeSpec",
    "PooledResult",
    "ProgramEvalError",
    "ProgramParseError",
    "RawFinding",
    "ResultExtraction",
    "RowInvariantViolation",
    "STATUS_FAILURE",
    "STATUS_HALLUCINATION",
    "STATUS_OK",
    "STATUS_UNAVAILABLE",
    "Snippet",
    "StudyEffect",
    "TerminalValues",
    "TransformProgram",
    "UnknownVariable",
    "Z95",
    "compute_effect",
    "eval_program",
    "extract_result",
    "format_findings",
    "parse_program",
    "pool",
    "render_forest",
    "round_half_away",
    "rows_to_csv",
    "rows_to_json",
    "run_program",
    "standardize",
    "study_effect",
]
