"""Document chunking and provenance-grounded field extraction."""

from .chunking import (
    DEFAULT_MAX_CHUNK_CHARS,
    Chunk,
    ChunkedDocument,
    ChunkPolicy,
    EmptyDocument,
    InvalidChunking,
    chunk_document,
    normalize_document,
)
from .fields import (
    ABSENT,
    CellValue,
    ConfusionCounts,
    ExtractedCell,
    ExtractionOutcome,
    ExtractionScore,
    FieldSpec,
    GroundingViolation,
    ValueMatcher,
    categorical_value,
    cells_to_csv,
    cells_to_json,
    extract_fields,
    format_document,
    format_fields,
    load_truth_table,
    missing_value,
    number_value,
    parse_value,
    score_extraction,
    text_value,
    verify_grounding,
)

__all__ = [
    "ABSENT",
    "DEFAULT_MAX_CHUNK_CHARS",
    "CellValue",
    "Chunk",
    "ChunkPolicy",
    "ChunkedDocument",
    "ConfusionCounts",
    "EmptyDocument",
    "ExtractedCell",
    "ExtractionOutcome",
    "ExtractionScore",
    "FieldSpec",
    "GroundingViolation",
    "InvalidChunking",
    "ValueMatcher",
    "categorical_value",
    "cells_to_csv",
    "cells_to_json",
    "chunk_document",
    "extract_fields",
    "format_document",
    "format_fields",
    "load_truth_table",
    "missing_value",
    "normalize_document",
    "number_value",
    "parse_value",
    "score_extraction",
    "text_value",
    "verify_grounding",
]
