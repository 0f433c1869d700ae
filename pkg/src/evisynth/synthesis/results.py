"""Result extraction (quote, then quantify) and standardization.

One completion produces two tagged steps: STEP1 quotes the passages that
report the outcome (verbatim, per chunk), STEP2 lists the numeric values
those passages contain. A second completion writes the transform program
that turns the named values into a standard effect row.

Outcomes are classified rather than thrown away: a study that simply
doesn't report the outcome is `unavailable_data`; values citing chunks
that don't exist are dropped and the study marked `hallucination`; output
that can't be parsed even after the corrective re-prompt becomes
`extraction_failure` so batch runs can tally it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..extraction.chunking import ChunkedDocument
from ..extraction.fields import format_document
from ..gateway import (
    Gateway,
    LlmOutputUnparseable,
    TemplateRegistry,
    default_registry,
    parse_structured,
)
from ..search.ops import _complete_with_one_retry
from .effects import EffectRow
from .program import TransformProgram, parse_program, run_program

EFFECT_KINDS = ("risk_ratio", "generic_log_effect")
UNIT_TAGS = ("count", "percent", "months", "ratio", "none")

STATUS_OK = "ok"
STATUS_UNAVAILABLE = "unavailable_data"
STATUS_HALLUCINATION = "hallucination"
STATUS_FAILURE = "extraction_failure"


@dataclass(frozen=True)
class OutcomeSpec:
    endpoint: str
    cohort: str = ""
    effect_kind: str = "risk_ratio"

    def __post_init__(self):
        if not self.endpoint.strip():
            raise ValueError("outcome endpoint must be non-empty")
        if self.effect_kind not in EFFECT_KINDS:
            raise ValueError(f"unknown effect kind {self.effect_kind!r}")

    def to_dict(self) -> dict:
        return {"endpoint": self.endpoint, "cohort": self.cohort, "effect_kind": self.effect_kind}

    @classmethod
    def from_dict(cls, data: dict) -> OutcomeSpec:
        return cls(
            endpoint=data["endpoint"],
            cohort=data.get("cohort", ""),
            effect_kind=data.get("effect_kind", "risk_ratio"),
        )


@dataclass(frozen=True)
class Snippet:
    chunk_ref: str
    text: str


@dataclass(frozen=True)
class RawFinding:
    """Verbatim evidence. Constructed only from snippets verified to be
    contiguous substrings of their chunk."""

    snippets: tuple[Snippet, ...] = ()


@dataclass(frozen=True)
class NamedValue:
    name: str
    value: float
    unit: str
    chunk_ref: str


@dataclass(frozen=True)
class NumericFindings:
    values: tuple[NamedValue, ...] = ()

    def __post_init__(self):
        names = [v.name for v in self.values]
        if len(names) != len(set(names)):
            raise ValueError("finding names must be unique")

    @property
    def names(self) -> frozenset[str]:
        return frozenset(v.name for v in self.values)

    def as_env(self) -> dict[str, float]:
        return {v.name: v.value for v in self.values}

    def to_dict(self) -> dict:
        return {
            "values": [
                {"name": v.name, "value": v.value, "unit": v.unit, "chunk_ref": v.chunk_ref}
                for v in self.values
            ]
        }


@dataclass(frozen=True)
class ResultExtraction:
    status: str
    raw: RawFinding
    findings: NumericFindings
    warnings: tuple[str, ...] = ()


_SNIPPET_RE = re.compile(r'^\s*(c\d{4,})\s*:\s*"(.*)"\s*$')
_VALUE_RE = re.compile(
    r"^\s*([a-z_][a-z0-9_]*)\s*=\s*([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
    r"\s*(count|percent|months|ratio|none)\s*@\s*(c\d{4,})\s*$"
)


def extract_result(
    doc: ChunkedDocument,
    outcome: OutcomeSpec,
    gateway: Gateway,
    registry: TemplateRegistry | None = None,
) -> ResultExtraction:
    """Quote-then-quantify extraction of one outcome from one document."""
    registry = registry or default_registry()
    slots = {
        "outcome": outcome.endpoint,
        "cohort": outcome.cohort or "(whole study population)",
        "document": format_document(doc),
    }
    rendered = registry.render("extract_result", slots)

    def parse_fn(raw: str) -> ResultExtraction:
        parsed = parse_structured(raw, ["STEP1", "STEP2"])
        warnings: list[str] = []

        snippets: list[Snippet] = []
        for line in parsed.payload("STEP1").splitlines():
            if not line.strip():
                continue
            m = _SNIPPET_RE.match(line)
            if not m:
                warnings.append(f"snippet line not understood: {line.strip()!r}")
                continue
            ref, text = m.group(1), m.group(2)
            chunk = doc.get(ref)
            if chunk is None:
                warnings.append(f"snippet cites unknown chunk {ref}")
                continue
            if text not in chunk.text:
                warnings.append(f"snippet is not a verbatim quote of {ref}")
                continue
            snippets.append(Snippet(chunk_ref=ref, text=text))

        values: list[NamedValue] = []
        seen: set[str] = set()
        hallucinated = False
        any_value_line = False
        for line in parsed.payload("STEP2").splitlines():
            if not line.strip():
                continue
            any_value_line = True
            m = _VALUE_RE.match(line)
            if not m:
                warnings.append(f"value line not understood: {line.strip()!r}")
                continue
            name, number, unit, ref = m.groups()
            if ref not in doc:
                hallucinated = True
                warnings.append(f"value {name} cites nonexistent chunk {ref}; dropped")
                continue
            if name in seen:
                warnings.append(f"duplicate value name {name}; first kept")
                continue
            seen.add(name)
            values.append(NamedValue(name=name, value=float(number), unit=unit, chunk_ref=ref))

        if not any_value_line:
            status = STATUS_UNAVAILABLE
        elif hallucinated:
            status = STATUS_HALLUCINATION
        elif not values:
            # lines were present but none parsed: make the re-prompt fire
            raise LlmOutputUnparseable("no usable value lines in STEP2")
        else:
            status = STATUS_OK
        return ResultExtraction(
            status=status,
            raw=RawFinding(snippets=tuple(snippets)),
            findings=NumericFindings(values=tuple(values)),
            warnings=tuple(warnings),
        )

    try:
        return _complete_with_one_retry(gateway, "extract_result", rendered, parse_fn)
    except LlmOutputUnparseable as exc:
        return ResultExtraction(
            status=STATUS_FAILURE,
            raw=RawFinding(),
            findings=NumericFindings(),
            warnings=(f"extraction failed: {exc}",),
        )


def format_findings(findings: NumericFindings) -> str:
    return "\n".join(f"{v.name} = {v.value:g} {v.unit}" for v in findings.values)


def standardize(
    findings: NumericFindings,
    outcome: OutcomeSpec,
    gateway: Gateway,
    registry: TemplateRegistry | None = None,
) -> TransformProgram:
    """Ask for the transform program and statically validate it. A program
    that fails to parse earns one corrective re-prompt, then the error
    propagates."""
    if not findings.values:
        raise ValueError("cannot standardize empty findings")
    registry = registry or default_registry()
    slots = {
        "outcome": outcome.endpoint,
        "effect_kind": outcome.effect_kind,
        "findings": format_findings(findings),
    }
    rendered = registry.render("standardize_result", slots)
    names = findings.names

    def parse_fn(raw: str) -> TransformProgram:
        payload = parse_structured(raw, ["PROGRAM"]).payload("PROGRAM")
        return parse_program(payload, names)

    return _complete_with_one_retry(gateway, "standardize_result", rendered, parse_fn)


def eval_program(
    program: TransformProgram, findings: NumericFindings | dict[str, float], pmid: str
) -> EffectRow:
    """Run the program over the finding values and build the effect row,
    enforcing the row invariants (so e.g. events > total cannot persist)."""
    env = findings.as_env() if isinstance(findings, NumericFindings) else dict(findings)
    terminal = run_program(program, env)
    if terminal.kind == "row":
        a, n1, c, n2 = terminal.values
        return EffectRow(pmid=pmid, a=a, n1=n1, c=c, n2=n2)
    log_effect, se = terminal.values
    return EffectRow(pmid=pmid, log_effect=log_effect, se=se)
