"""Stage orchestration shared by the CLI and the HTTP service.

Each stage function takes explicit inputs and returns a serializable
artifact dataclass; the CLI writes ``canonical_json(artifact.to_dict())``
to a file and the service stores the same dict, which is what makes both
front doors byte-identical to plain library calls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .core import PicoQuestion, StudyRecord, canonical_json
from .extraction import (
    ChunkedDocument,
    ExtractedCell,
    ExtractionOutcome,
    FieldSpec,
    GroundingViolation,
    chunk_document,
    extract_fields,
)
from .gateway import Gateway, LlmOutputUnparseable
from .pubmed import NotAvailable
from .screening import (
    AggregationStrategy,
    CriteriaSet,
    EligibilityMatrix,
    RankedList,
    build_matrix,
    generate_criteria,
    rank,
)
from .search import (
    generate_initial_queries,
    parse_query,
    refine_queries,
    serialize_query,
    union_searches,
)
from .synthesis import (
    STATUS_FAILURE,
    STATUS_OK,
    DivisionByZero,
    DoubleZeroExcluded,
    EffectRow,
    NumericFindings,
    OutcomeSpec,
    PooledResult,
    RowInvariantViolation,
    compute_effect,
    eval_program,
    extract_result,
    pool,
    render_forest,
    standardize,
    study_effect,
)

CONTEXT_ABSTRACTS_FOR_REFINEMENT = 5


@dataclass(frozen=True)
class QueriesArtifact:
    """Initial queries, the refinement record, and the query set later
    search runs execute (initial plus the refined query, deduplicated)."""

    initial: tuple[str, ...]
    terms_identified: tuple[str, ...]
    terms_filtered: tuple[str, ...]
    final: str
    added_terms: tuple[str, ...]
    context_pmids: tuple[str, ...]

    @property
    def executable(self) -> tuple[str, ...]:
        seen: list[str] = []
        for query in (*self.initial, self.final):
            if query not in seen:
                seen.append(query)
        return tuple(seen)

    def to_dict(self) -> dict:
        return {
            "initial": list(self.initial),
            "terms_identified": list(self.terms_identified),
            "terms_filtered": list(self.terms_filtered),
            "final": self.final,
            "added_terms": list(self.added_terms),
            "context_pmids": list(self.context_pmids),
            "executable": list(self.executable),
        }

    @classmethod
    def from_dict(cls, data: dict) -> QueriesArtifact:
        return cls(
            initial=tuple(data["initial"]),
            terms_identified=tuple(data.get("terms_identified", ())),
            terms_filtered=tuple(data.get("terms_filtered", ())),
            final=data["final"],
            added_terms=tuple(data.get("added_terms", ())),
            context_pmids=tuple(data.get("context_pmids", ())),
        )


def generate_queries_stage(
    pico: PicoQuestion, gateway: Gateway, client, cap: int | None = None
) -> QueriesArtifact:
    """The three-substep query stage: draft initial queries, run them for
    context abstracts, then refine into a final (broader) query."""
    initial = generate_initial_queries(pico, gateway)
    union, _ = union_searches(initial, client, cap=cap)
    context_pmids = list(union.pmids[:CONTEXT_ABSTRACTS_FOR_REFINEMENT])
    context = client.efetch(context_pmids) if context_pmids else []
    refinement = refine_queries(pico, initial, context, gateway)
    return QueriesArtifact(
        initial=tuple(serialize_query(q) for q in initial),
        terms_identified=refinement.terms_identified,
        terms_filtered=refinement.terms_filtered,
        final=serialize_query(refinement.final_query),
        added_terms=refinement.added_terms,
        context_pmids=tuple(context_pmids),
    )


@dataclass(frozen=True)
class StudiesArtifact:
    pmids: tuple[str, ...]  # union retrieval order
    per_query: tuple[tuple[str, int], ...]  # (query, hit total)
    studies: tuple[StudyRecord, ...]

    def study(self, pmid: str) -> StudyRecord:
        for record in self.studies:
            if record.pmid == pmid:
                return record
        raise KeyError(pmid)

    def to_dict(self) -> dict:
        return {
            "pmids": list(self.pmids),
            "per_query": [{"query": q, "total": t} for q, t in self.per_query],
            "studies": [s.to_dict() for s in self.studies],
        }

    @classmethod
    def from_dict(cls, data: dict) -> StudiesArtifact:
        return cls(
            pmids=tuple(data["pmids"]),
            per_query=tuple((e["query"], e["total"]) for e in data.get("per_query", ())),
            studies=tuple(StudyRecord.from_dict(s) for s in data["studies"]),
        )


def run_search_stage(
    queries: QueriesArtifact | list[str] | tuple[str, ...],
    client,
    cap: int | None = None,
) -> StudiesArtifact:
    query_texts = list(queries.executable if isinstance(queries, QueriesArtifact) else queries)
    asts = [parse_query(q) for q in query_texts]
    union, outcomes = union_searches(asts, client, cap=cap)
    records = client.efetch(list(union.pmids)) if union.pmids else []
    return StudiesArtifact(
        pmids=union.pmids,
        per_query=tuple((q, o.total) for q, o in zip(query_texts, outcomes)),
        studies=tuple(records),
    )


def generate_criteria_stage(pico: PicoQuestion, gateway: Gateway) -> CriteriaSet:
    return generate_criteria(pico, gateway)


@dataclass(frozen=True)
class ScreeningArtifact:
    matrix: EligibilityMatrix
    ranking: RankedList
    strategy: AggregationStrategy

    def to_dict(self) -> dict:
        return {
            "matrix": self.matrix.to_dict(),
            "ranking": self.ranking.to_dict(),
            "strategy": self.strategy.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> ScreeningArtifact:
        return cls(
            matrix=EligibilityMatrix.from_dict(data["matrix"]),
            ranking=RankedList(
                entries=tuple(
                    (e["pmid"], e["score"]) for e in data["ranking"]["entries"]
                ),
                tiebreak_trace=data["ranking"]["tiebreak_trace"],
            ),
            strategy=AggregationStrategy.from_dict(data["strategy"]),
        )


def run_screening_stage(
    pico: PicoQuestion,
    criteria: CriteriaSet,
    studies: list[StudyRecord] | tuple[StudyRecord, ...],
    gateway: Gateway,
    strategy: AggregationStrategy | None = None,
    use_full_text: bool = False,
    parallelism: int = 4,
) -> ScreeningArtifact:
    strategy = strategy or AggregationStrategy.sum_()
    matrix = build_matrix(
        pico,
        criteria,
        list(studies),
        gateway,
        use_full_text=use_full_text,
        parallelism=parallelism,
    )
    return ScreeningArtifact(matrix=matrix, ranking=rank(matrix, strategy), strategy=strategy)


def rerank(matrix: EligibilityMatrix, strategy: AggregationStrategy) -> ScreeningArtifact:
    """Re-rank an existing matrix under a different aggregation strategy —
    cheap, no LLM involved (criterion toggles in the workbench)."""
    return ScreeningArtifact(matrix=matrix, ranking=rank(matrix, strategy), strategy=strategy)


def document_for_study(study: StudyRecord, client=None) -> ChunkedDocument:
    """The chunked document extraction runs over: fetched full text when
    available, otherwise the title + abstract."""
    if study.full_content is not None:
        return study.full_content
    if client is not None:
        try:
            content, fmt = client.fetch_fulltext(study.pmid)
            return chunk_document(study.pmid, content, fmt=fmt)
        except NotAvailable:
            pass
    text = study.title if not study.abstract else f"{study.title}\n\n{study.abstract}"
    return chunk_document(study.pmid, text, fmt="text")


@dataclass(frozen=True)
class ExtractionRow:
    pmid: str
    cells: tuple[ExtractedCell, ...]
    violations: tuple[GroundingViolation, ...] = ()
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "pmid": self.pmid,
            "cells": [c.to_dict() for c in self.cells],
            "violations": [v.to_dict() for v in self.violations],
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> ExtractionRow:
        return cls(
            pmid=data["pmid"],
            cells=tuple(ExtractedCell.from_dict(c) for c in data["cells"]),
            violations=tuple(
                GroundingViolation(
                    field=v["field"],
                    reason=v["reason"],
                    chunk_ref=v.get("chunk_ref", ""),
                    advisory=v.get("advisory", False),
                )
                for v in data.get("violations", ())
            ),
            warnings=tuple(data.get("warnings", ())),
        )


@dataclass(frozen=True)
class ExtractionArtifact:
    fields: tuple[FieldSpec, ...]
    rows: tuple[ExtractionRow, ...]

    def row(self, pmid: str) -> ExtractionRow:
        for row in self.rows:
            if row.pmid == pmid:
                return row
        raise KeyError(pmid)

    def to_dict(self) -> dict:
        return {
            "fields": [f.to_dict() for f in self.fields],
            "rows": [r.to_dict() for r in self.rows],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ExtractionArtifact:
        return cls(
            fields=tuple(FieldSpec.from_dict(f) for f in data["fields"]),
            rows=tuple(ExtractionRow.from_dict(r) for r in data["rows"]),
        )


def run_extraction_stage(
    studies: list[StudyRecord] | tuple[StudyRecord, ...],
    fields: list[FieldSpec] | tuple[FieldSpec, ...],
    gateway: Gateway,
    client=None,
    per_field: bool = False,
) -> ExtractionArtifact:
    rows = []
    for study in studies:
        doc = document_for_study(study, client)
        outcome: ExtractionOutcome = extract_fields(
            doc, list(fields), gateway, per_field=per_field
        )
        rows.append(
            ExtractionRow(
                pmid=study.pmid,
                cells=outcome.cells,
                violations=outcome.violations,
                warnings=outcome.warnings,
            )
        )
    return ExtractionArtifact(fields=tuple(fields), rows=tuple(rows))


@dataclass(frozen=True)
class ResultRow:
    """One study's result extraction: the raw findings, the transform
    program, and the effect row it evaluated to (when status is ok)."""

    pmid: str
    status: str
    findings: NumericFindings = field(default_factory=NumericFindings)
    program: str = ""
    row: EffectRow | None = None
    warnings: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "pmid": self.pmid,
            "status": self.status,
            "findings": self.findings.to_dict(),
            "program": self.program,
            "row": self.row.to_dict() if self.row else None,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, data: dict) -> ResultRow:
        from .synthesis import NamedValue

        findings = NumericFindings(
            values=tuple(
                NamedValue(
                    name=v["name"],
                    value=v["value"],
                    unit=v.get("unit", ""),
                    chunk_ref=v.get("chunk_ref", ""),
                )
                for v in data.get("findings", {}).get("values", ())
            )
        )
        row_data = data.get("row")
        return cls(
            pmid=data["pmid"],
            status=data["status"],
            findings=findings,
            program=data.get("program", ""),
            row=EffectRow.from_dict(row_data) if row_data else None,
            warnings=tuple(data.get("warnings", ())),
        )


@dataclass(frozen=True)
class ResultsArtifact:
    outcome: OutcomeSpec
    rows: tuple[ResultRow, ...]

    def effect_rows(self) -> list[EffectRow]:
        return [r.row for r in self.rows if r.row is not None]

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome.to_dict(),
            "rows": [r.to_dict() for r in self.rows],
        }

    @classmethod
    def from_dict(cls, data: dict) -> ResultsArtifact:
        return cls(
            outcome=OutcomeSpec.from_dict(data["outcome"]),
            rows=tuple(ResultRow.from_dict(r) for r in data["rows"]),
        )


def run_results_stage(
    studies: list[StudyRecord] | tuple[StudyRecord, ...],
    outcome: OutcomeSpec,
    gateway: Gateway,
    client=None,
) -> ResultsArtifact:
    rows = []
    for study in studies:
        doc = document_for_study(study, client)
        extraction = extract_result(doc, outcome, gateway)
        if extraction.status != STATUS_OK:
            rows.append(
                ResultRow(
                    pmid=study.pmid,
                    status=extraction.status,
                    findings=extraction.findings,
                    warnings=extraction.warnings,
                )
            )
            continue
        try:
            program = standardize(extraction.findings, outcome, gateway)
            row = eval_program(program, extraction.findings, pmid=study.pmid)
        except (LlmOutputUnparseable, DivisionByZero, RowInvariantViolation) as exc:
            rows.append(
                ResultRow(
                    pmid=study.pmid,
                    status=STATUS_FAILURE,
                    findings=extraction.findings,
                    warnings=(*extraction.warnings, f"standardization failed: {exc}"),
                )
            )
            continue
        rows.append(
            ResultRow(
                pmid=study.pmid,
                status=STATUS_OK,
                findings=extraction.findings,
                program=program.source,
                row=row,
                warnings=extraction.warnings,
            )
        )
    return ResultsArtifact(outcome=outcome, rows=tuple(rows))


@dataclass(frozen=True)
class SynthesisArtifact:
    method: str
    estimates: tuple[tuple[str, float, float], ...]  # (pmid, log_rr, se)
    corrected_pmids: tuple[str, ...]
    excluded: tuple[tuple[str, str], ...]  # (pmid, reason)
    pooled: PooledResult
    forest_svg: str

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "estimates": [
                {"pmid": p, "log_rr": y, "se": s} for p, y, s in self.estimates
            ],
            "corrected_pmids": list(self.corrected_pmids),
            "excluded": [{"pmid": p, "reason": r} for p, r in self.excluded],
            "pooled": self.pooled.to_dict(),
            "forest_svg": self.forest_svg,
        }


def run_pooling_stage(
    rows: list[EffectRow] | tuple[EffectRow, ...],
    method: str = "random_dl",
    labels: dict[str, str] | None = None,
    title: str = "",
) -> SynthesisArtifact:
    estimates = []
    corrected = []
    excluded = []
    for row in rows:
        try:
            estimate = compute_effect(row)
        except DoubleZeroExcluded as exc:
            excluded.append((row.pmid, str(exc)))
            continue
        if estimate.row.continuity_corrected:
            corrected.append(row.pmid)
        estimates.append(estimate)
    effects = [study_effect(e) for e in estimates]
    pooled = pool(effects, method=method)
    svg = render_forest(effects, pooled, labels=labels, title=title)
    return SynthesisArtifact(
        method=method,
        estimates=tuple((e.pmid, e.log_effect, e.se) for e in effects),
        corrected_pmids=tuple(corrected),
        excluded=tuple(excluded),
        pooled=pooled,
        forest_svg=svg,
    )


def artifact_json(artifact) -> str:
    """The byte-identical serialization both front doors write."""
    return canonical_json(artifact.to_dict())
