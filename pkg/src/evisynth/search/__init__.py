"""Search stage: boolean query AST, PubMed-syntax parsing, LLM ops."""

from __future__ import annotations

from .ast import FIELD_TAGS, MAX_DEPTH, And, InvalidQuery, Not, Or, QueryAst, Term, collect_terms
from .ops import (
    MAX_ABSTRACT_CHARS,
    MAX_CONTEXT_ABSTRACTS,
    MAX_RESULTS_PER_QUERY,
    QueryRefinement,
    RefinementNarrowed,
    SearchOutcome,
    SubsetViolation,
    generate_initial_queries,
    refine_queries,
    run_search,
    union_searches,
)
from .parser import QueryParseError, parse_query, serialize_query

__all__ = [
    "And",
    "FIELD_TAGS",
    "InvalidQuery",
    "MAX_ABSTRACT_CHARS",
    "MAX_CONTEXT_ABSTRACTS",
    "MAX_DEPTH",
    "MAX_RESULTS_PER_QUERY",
    "Not",
    "Or",
    "QueryAst",
    "QueryParseError",
    "QueryRefinement",
    "RefinementNarrowed",
    "SearchOutcome",
    "SubsetViolation",
    "Term",
    "collect_terms",
    "generate_initial_queries",
    "parse_query",
    "refine_queries",
    "run_search",
    "serialize_query",
    "union_searches",
]
