"""Search-stage operations: query generation, refinement, and execution.

LLM output policy: a structurally unusable completion gets exactly one
corrective re-prompt (the parse error appended to the original prompt);
if the second completion is still unusable the op raises
LlmOutputUnparseable. Semantic invariant violations on well-formed output
(a filtered term list that is not a subset, a final query that drops terms)
raise immediately — re-asking cannot make a contract violation unhappen.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass

from ..core import PicoQuestion, StudyRecord
from ..errors import EviSynthError
from ..gateway import (
    CompletionRequest,
    Gateway,
    LlmOutputUnparseable,
    StructuredResponse,
    TemplateRegistry,
    default_registry,
    parse_structured,
)
from ..gateway.errors import StructureError
from .ast import QueryAst, Term, collect_terms
from .parser import QueryParseError, parse_query, serialize_query

log = logging.getLogger(__name__)

# RAG budget for refinement context: at most 20 abstracts, 1500 chars each.
MAX_CONTEXT_ABSTRACTS = 20
MAX_ABSTRACT_CHARS = 1500


class SubsetViolation(EviSynthError):
    """Filtered terms must be a subset of identified terms."""

    code = "subset_violation"


class RefinementNarrowed(EviSynthError):
    """The final query dropped terms the initial queries relied on."""

    code = "refinement_narrowed"


@dataclass(frozen=True)
class QueryRefinement:
    """Outcome of the three-substep query refinement.

    ``added_terms`` flags the term texts in the final query that are not in
    ``terms_filtered`` (refinement additions such as MeSH variants).
    """

    terms_identified: tuple[str, ...]
    terms_filtered: tuple[str, ...]
    final_query: QueryAst
    context_abstracts: tuple[str, ...]  # pmids the prompt was grounded on
    added_terms: tuple[str, ...] = ()

    def __post_init__(self):
        identified = {t.lower() for t in self.terms_identified}
        extra = [t for t in self.terms_filtered if t.lower() not in identified]
        if extra:
            raise SubsetViolation(f"filtered terms not in identified list: {extra}")

    def to_dict(self) -> dict:
        return {
            "terms_identified": list(self.terms_identified),
            "terms_filtered": list(self.terms_filtered),
            "final_query": serialize_query(self.final_query),
            "context_abstracts": list(self.context_abstracts),
            "added_terms": list(self.added_terms),
        }

    @classmethod
    def from_dict(cls, data: dict) -> QueryRefinement:
        return cls(
            terms_identified=tuple(data["terms_identified"]),
            terms_filtered=tuple(data["terms_filtered"]),
            final_query=parse_query(data["final_query"]),
            context_abstracts=tuple(data["context_abstracts"]),
            added_terms=tuple(data.get("added_terms", ())),
        )


@dataclass(frozen=True)
class SearchOutcome:
    """pmids in retrieval order (deduplicated) plus the reported hit total."""

    pmids: tuple[str, ...]
    total: int


def _pico_slots(pico: PicoQuestion) -> dict[str, str]:
    return {
        "title": pico.title,
        "population": pico.population,
        "intervention": pico.intervention,
        "comparison": pico.comparison or "(none)",
        "outcome": pico.outcome or "(not stated)",
    }


def _complete_with_one_retry(gateway: Gateway, template_id: str, rendered: str, parse_fn):
    """Run the completion, re-prompting once on structural failure."""
    raw = gateway.complete(CompletionRequest(template_id=template_id, rendered_prompt=rendered))
    try:
        return parse_fn(raw)
    except (StructureError, QueryParseError, LlmOutputUnparseable) as exc:
        corrective = (
            rendered
            + f"\nYour previous answer could not be used: {exc}."
            + " Answer again, following the required format exactly.\n"
        )
        raw2 = gateway.complete(
            CompletionRequest(template_id=template_id, rendered_prompt=corrective)
        )
        try:
            return parse_fn(raw2)
        except (StructureError, QueryParseError, LlmOutputUnparseable) as exc2:
            raise LlmOutputUnparseable(f"{template_id}: {exc2}") from exc2


_ENUMERATION_RE = re.compile(r"^\s*(?:[-*]|\d+[.)])\s*")
_WORD_RE = re.compile(r"[a-z0-9]+")


def _content_words(text: str) -> set[str]:
    # lowercase word stems (plural-insensitive), short stopwords dropped
    return {w.rstrip("s") for w in _WORD_RE.findall(text.lower()) if len(w) > 2}


def _mentions_any(query: QueryAst, words: set[str]) -> bool:
    for term in collect_terms(query):
        if _content_words(term.text) & words:
            return True
    return False


def generate_initial_queries(
    pico: PicoQuestion, gateway: Gateway, registry: TemplateRegistry | None = None
) -> list[QueryAst]:
    """Draft boolean queries from the review question.

    Guarantees at least one query, each valid and mentioning at least one
    intervention-derived term; queries failing the mention check are dropped
    with a warning.
    """
    registry = registry or default_registry()
    rendered = registry.render("initial_queries", _pico_slots(pico))
    intervention_words = _content_words(pico.intervention)

    def parse_fn(raw: str) -> list[QueryAst]:
        payload = parse_structured(raw, ["QUERIES"]).payload("QUERIES")
        queries: list[QueryAst] = []
        bad: list[str] = []
        for line in payload.splitlines():
            line = _ENUMERATION_RE.sub("", line).strip()
            if not line or line.startswith("```"):
                continue
            try:
                queries.append(parse_query(line))
            except QueryParseError as exc:
                bad.append(f"{line!r}: {exc}")
        if bad:  # salvage the parseable lines, re-prompt only if none survive
            log.warning("dropping %d malformed query line(s): %s", len(bad), "; ".join(bad))
        kept = []
        for q in queries:
            if _mentions_any(q, intervention_words):
                kept.append(q)
            else:
                log.warning("dropping query without intervention-derived term: %s", serialize_query(q))
        if not kept:
            raise LlmOutputUnparseable(
                "no usable query line" if bad else "no query mentions an intervention-derived term"
            )
        return kept

    return _complete_with_one_retry(gateway, "initial_queries", rendered, parse_fn)


def _split_terms(payload: str) -> tuple[str, ...]:
    parts: list[str] = []
    for line in payload.splitlines():
        line = _ENUMERATION_RE.sub("", line)
        parts.extend(p.strip() for p in line.split(","))
    seen: set[str] = set()
    out: list[str] = []
    for p in parts:
        if p and p.lower() not in seen:
            seen.add(p.lower())
            out.append(p)
    return tuple(out)


def refine_queries(
    pico: PicoQuestion,
    initial: list[QueryAst],
    context: list[StudyRecord],
    gateway: Gateway,
    registry: TemplateRegistry | None = None,
) -> QueryRefinement:
    """Three-substep refinement from one completion: identify terms in the
    retrieved abstracts, filter them, and emit a broadened final query."""
    registry = registry or default_registry()
    context = context[:MAX_CONTEXT_ABSTRACTS]
    abstract_block = "\n\n".join(
        f"[{r.pmid}] {r.title}\n{r.abstract[:MAX_ABSTRACT_CHARS]}" for r in context
    ) or "(no abstracts retrieved)"
    slots = dict(
        _pico_slots(pico),
        initial_queries="\n".join(serialize_query(q) for q in initial),
        context_abstracts=abstract_block,
    )
    rendered = registry.render("refine_queries", slots)
    initial_term_texts = {
        t.text.lower() for q in initial for t in collect_terms(q)
    }

    def parse_fn(raw: str) -> tuple[tuple[str, ...], tuple[str, ...], QueryAst]:
        resp: StructuredResponse = parse_structured(raw, ["STEP1", "STEP2", "STEP3"])
        identified = _split_terms(resp.payload("STEP1"))
        filtered = _split_terms(resp.payload("STEP2"))
        final_text = resp.payload("STEP3").strip().strip("`").strip()
        if not final_text:
            raise LlmOutputUnparseable("STEP3 produced an empty query")
        return identified, filtered, parse_query(final_text)

    identified, filtered, final_query = _complete_with_one_retry(
        gateway, "refine_queries", rendered, parse_fn
    )

    final_terms = {t.text.lower() for t in collect_terms(final_query)}
    dropped = sorted(initial_term_texts - final_terms)
    if dropped:
        raise RefinementNarrowed(f"final query dropped initial terms: {dropped}")
    filtered_lower = {t.lower() for t in filtered}
    added = tuple(
        sorted({t.text for t in collect_terms(final_query)
                if t.text.lower() not in filtered_lower and t.text.lower() not in initial_term_texts})
    )
    return QueryRefinement(
        terms_identified=identified,
        terms_filtered=filtered,
        final_query=final_query,
        context_abstracts=tuple(r.pmid for r in context),
        added_terms=added,
    )


# Hard ceiling per executed query; pages beyond it are never fetched.
MAX_RESULTS_PER_QUERY = 50_000


def run_search(query: QueryAst | str, client, cap: int | None = None, page_size: int = 1000) -> SearchOutcome:
    """Execute one query, paginating to exhaustion or ``cap``.

    Returns deduplicated pmids in retrieval order plus the reported total.
    A hard ceiling of MAX_RESULTS_PER_QUERY applies even when cap is None.
    """
    term = query if isinstance(query, str) else serialize_query(query)
    effective_cap = MAX_RESULTS_PER_QUERY if cap is None else min(cap, MAX_RESULTS_PER_QUERY)
    seen: set[str] = set()
    pmids: list[str] = []
    retstart = 0
    total = 0
    while True:
        page = client.esearch(term, retstart=retstart, retmax=page_size)
        total = page.total
        for pmid in page.pmids:
            if pmid not in seen:
                seen.add(pmid)
                pmids.append(pmid)
                if len(pmids) >= effective_cap:
                    return SearchOutcome(pmids=tuple(pmids), total=total)
        retstart += len(page.pmids)
        if not page.pmids or retstart >= total:
            return SearchOutcome(pmids=tuple(pmids), total=total)


def union_searches(
    queries: list[QueryAst | str], client, cap: int | None = None, page_size: int = 1000
) -> tuple[SearchOutcome, list[SearchOutcome]]:
    """Execute several queries independently and union the results.

    Union order is deterministic: by first-retrieval position across the
    per-query lists, ties broken by ascending pmid.
    """
    outcomes = [run_search(q, client, cap=cap, page_size=page_size) for q in queries]
    first_pos: dict[str, int] = {}
    for outcome in outcomes:
        for idx, pmid in enumerate(outcome.pmids):
            if pmid not in first_pos or idx < first_pos[pmid]:
                first_pos[pmid] = idx
    merged = sorted(first_pos, key=lambda p: (first_pos[p], int(p)))
    if cap is not None:
        merged = merged[:cap]
    union = SearchOutcome(pmids=tuple(merged), total=len(merged))
    return union, outcomes
