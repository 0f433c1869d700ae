"""Field extraction with cell-level provenance, grounding checks, scoring.

Every non-missing extracted value must cite at least one chunk that exists
in the source document; anything else is downgraded to missing and the
violation is recorded rather than silently persisted. Scoring compares
cells against a truth table where each field is either a value or ABSENT
(the field is known not to be reported by the paper).
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
from dataclasses import dataclass

from ..core import canonical_json, is_chunk_id
from ..gateway import Gateway, LlmOutputUnparseable, TemplateRegistry, default_registry, parse_structured
from ..search.ops import _complete_with_one_retry
from .chunking import ChunkedDocument

VALUE_KINDS = ("text", "number", "categorical", "missing")


@dataclass(frozen=True)
class FieldSpec:
    name: str
    description: str
    kind: str = "design"  # design | population | result

    def __post_init__(self):
        if not self.name.strip():
            raise ValueError("field name must be non-empty")
        if self.kind not in ("design", "population", "result"):
            raise ValueError(f"unknown field kind {self.kind!r}")

    def to_dict(self) -> dict:
        return {"name": self.name, "description": self.description, "kind": self.kind}

    @classmethod
    def from_dict(cls, data: dict) -> FieldSpec:
        return cls(name=data["name"], description=data.get("description", ""), kind=data.get("kind", "design"))


@dataclass(frozen=True)
class CellValue:
    """Tagged union: text | number (unit optional) | categorical | missing."""

    kind: str
    text: str = ""
    number: float | None = None
    unit: str = ""

    def __post_init__(self):
        if self.kind not in VALUE_KINDS:
            raise ValueError(f"unknown value kind {self.kind!r}")
        if self.kind == "number" and self.number is None:
            raise ValueError("number value requires a number")
        if self.kind in ("text", "categorical") and not self.text:
            raise ValueError(f"{self.kind} value requires text")
        if self.kind == "missing" and (self.text or self.number is not None or self.unit):
            raise ValueError("missing value carries no payload")

    @property
    def is_missing(self) -> bool:
        return self.kind == "missing"

    def render(self) -> str:
        """Human-readable form used in exports."""
        if self.kind == "missing":
            return ""
        if self.kind == "number":
            n = self.number
            body = str(int(n)) if n is not None and float(n).is_integer() else f"{n:g}"
            return f"{body} {self.unit}".strip()
        return self.text

    def to_dict(self) -> dict:
        return {"kind": self.kind, "text": self.text, "number": self.number, "unit": self.unit}

    @classmethod
    def from_dict(cls, data: dict) -> CellValue:
        return cls(
            kind=data["kind"],
            text=data.get("text", ""),
            number=data.get("number"),
            unit=data.get("unit", ""),
        )


def missing_value() -> CellValue:
    return CellValue(kind="missing")


def number_value(value: float, unit: str = "") -> CellValue:
    return CellValue(kind="number", number=float(value), unit=unit)


def text_value(value: str) -> CellValue:
    return CellValue(kind="text", text=value)


def categorical_value(value: str) -> CellValue:
    return CellValue(kind="categorical", text=value)


@dataclass(frozen=True)
class ExtractedCell:
    field: str
    value: CellValue
    chunk_refs: tuple[str, ...] = ()
    rationale: str = ""

    def __post_init__(self):
        object.__setattr__(self, "chunk_refs", tuple(self.chunk_refs))
        if not self.value.is_missing and not self.chunk_refs:
            raise ValueError(f"non-missing cell {self.field!r} must cite at least one chunk")
        for ref in self.chunk_refs:
            if not is_chunk_id(ref):
                raise ValueError(f"cell {self.field!r} cites malformed chunk id {ref!r}")

    def to_dict(self) -> dict:
        return {
            "field": self.field,
            "value": self.value.to_dict(),
            "chunk_refs": list(self.chunk_refs),
            "rationale": self.rationale,
        }

    @classmethod
    def from_dict(cls, data: dict) -> ExtractedCell:
        return cls(
            field=data["field"],
            value=CellValue.from_dict(data["value"]),
            chunk_refs=tuple(data.get("chunk_refs", ())),
            rationale=data.get("rationale", ""),
        )


@dataclass(frozen=True)
class GroundingViolation:
    field: str
    reason: str  # malformed_ref | dangling_ref | ungrounded_value | numeric_not_found
    chunk_ref: str = ""
    advisory: bool = False

    def to_dict(self) -> dict:
        return {
            "field": self.field,
            "reason": self.reason,
            "chunk_ref": self.chunk_ref,
            "advisory": self.advisory,
        }


@dataclass(frozen=True)
class ExtractionOutcome:
    """One cell per requested field, plus everything that went wrong."""

    cells: tuple[ExtractedCell, ...]
    violations: tuple[GroundingViolation, ...] = ()
    warnings: tuple[str, ...] = ()

    def cell(self, field_name: str) -> ExtractedCell:
        for c in self.cells:
            if c.field == field_name:
                return c
        raise KeyError(field_name)

    def to_dict(self) -> dict:
        return {
            "cells": [c.to_dict() for c in self.cells],
            "violations": [v.to_dict() for v in self.violations],
            "warnings": list(self.warnings),
        }


_NUMBER_VALUE_RE = re.compile(
    r"^([-+]?\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)\s*([A-Za-z%/]*)$"
)


def parse_value(text: str) -> CellValue:
    """Classify one reported value: MISSING, a number with an optional
    one-word unit, or free text."""
    text = text.strip()
    if not text or text.upper() == "MISSING":
        return missing_value()
    m = _NUMBER_VALUE_RE.match(text)
    if m:
        return number_value(float(m.group(1)), unit=m.group(2))
    return text_value(text)


def format_document(doc: ChunkedDocument) -> str:
    blocks = []
    for chunk in doc.chunks:
        header = f"[{chunk.id}] {chunk.section_path}".rstrip()
        blocks.append(f"{header}\n{chunk.text}")
    return "\n\n".join(blocks)


def format_fields(fields: list[FieldSpec]) -> str:
    return "\n".join(f"- {f.name} ({f.kind}): {f.description}" for f in fields)


def _parse_refs(
    raw_refs: str, field_name: str, doc: ChunkedDocument, violations: list[GroundingViolation]
) -> tuple[str, ...]:
    raw_refs = raw_refs.strip()
    if raw_refs in ("", "-"):
        return ()
    kept = []
    for token in [t.strip() for t in raw_refs.split(",") if t.strip()]:
        if not is_chunk_id(token):
            violations.append(
                GroundingViolation(field=field_name, reason="malformed_ref", chunk_ref=token)
            )
        elif token not in doc:
            violations.append(
                GroundingViolation(field=field_name, reason="dangling_ref", chunk_ref=token)
            )
        elif token not in kept:
            kept.append(token)
    return tuple(kept)


def extract_fields(
    doc: ChunkedDocument,
    fields: list[FieldSpec],
    gateway: Gateway,
    registry: TemplateRegistry | None = None,
    per_field: bool = False,
) -> ExtractionOutcome:
    """Extract every requested field from a chunked document.

    Exactly one cell comes back per field. A value whose every cited chunk
    fails validation is downgraded to missing and the failure recorded —
    an ungrounded value never survives. ``per_field`` issues one completion
    per field instead of a single combined request (for long documents).
    """
    if not fields:
        raise ValueError("fields must be non-empty")
    names = [f.name for f in fields]
    if len(names) != len(set(names)):
        raise ValueError("field names must be unique")
    registry = registry or default_registry()

    if per_field:
        outcomes = [
            extract_fields(doc, [spec], gateway, registry, per_field=False) for spec in fields
        ]
        return ExtractionOutcome(
            cells=tuple(c for o in outcomes for c in o.cells),
            violations=tuple(v for o in outcomes for v in o.violations),
            warnings=tuple(w for o in outcomes for w in o.warnings),
        )

    slots = {"document": format_document(doc), "fields": format_fields(fields)}
    rendered = registry.render("extract_fields", slots)

    def parse_fn(raw: str) -> ExtractionOutcome:
        payload = parse_structured(raw, ["FIELDS"]).payload("FIELDS")
        violations: list[GroundingViolation] = []
        warnings: list[str] = []
        by_field: dict[str, ExtractedCell] = {}
        any_line = False
        for line in payload.splitlines():
            if "::" not in line:
                continue
            parts = [p.strip() for p in line.split("::")]
            if len(parts) < 3:
                warnings.append(f"short field line ignored: {line.strip()!r}")
                continue
            any_line = True
            name, raw_value = parts[0], parts[1]
            rationale = parts[3] if len(parts) > 3 else ""
            if name not in names:
                warnings.append(f"line for unrequested field {name!r} ignored")
                continue
            if name in by_field:
                warnings.append(f"duplicate line for field {name!r} ignored")
                continue
            value = parse_value(raw_value)
            refs = _parse_refs(parts[2], name, doc, violations)
            if value.is_missing:
                if refs:
                    warnings.append(f"field {name!r} reported missing; refs dropped")
                refs = ()
            elif not refs:
                violations.append(
                    GroundingViolation(field=name, reason="ungrounded_value")
                )
                value = missing_value()
            by_field[name] = ExtractedCell(
                field=name, value=value, chunk_refs=refs, rationale=rationale
            )
        if not any_line:
            raise LlmOutputUnparseable("no field lines found")
        cells = []
        for name in names:
            if name in by_field:
                cells.append(by_field[name])
            else:
                warnings.append(f"no line for field {name!r}; recorded as missing")
                cells.append(ExtractedCell(field=name, value=missing_value()))
        return ExtractionOutcome(
            cells=tuple(cells), violations=tuple(violations), warnings=tuple(warnings)
        )

    return _complete_with_one_retry(gateway, "extract_fields", rendered, parse_fn)


def _number_forms(value: float) -> tuple[str, ...]:
    forms = {f"{value:g}"}
    if float(value).is_integer():
        forms.add(str(int(value)))
    else:
        forms.add(str(value))
    return tuple(forms)


def verify_grounding(
    cells: tuple[ExtractedCell, ...] | list[ExtractedCell], doc: ChunkedDocument
) -> tuple[GroundingViolation, ...]:
    """Re-check stored cells against the document they claim to cite.

    Missing/empty/dangling refs are hard violations. A numeric value that
    does not appear as a substring of any cited chunk is flagged advisory
    only (NumericNotFound): legitimate values are often derived, e.g.
    rounded percentages.
    """
    violations: list[GroundingViolation] = []
    for cell in cells:
        if cell.value.is_missing:
            continue
        if not cell.chunk_refs:
            violations.append(GroundingViolation(field=cell.field, reason="ungrounded_value"))
            continue
        live_refs = []
        for ref in cell.chunk_refs:
            if ref not in doc:
                violations.append(
                    GroundingViolation(field=cell.field, reason="dangling_ref", chunk_ref=ref)
                )
            else:
                live_refs.append(ref)
        if not live_refs:
            violations.append(GroundingViolation(field=cell.field, reason="ungrounded_value"))
            continue
        if cell.value.kind == "number":
            haystack = " ".join(doc.get(r).text for r in live_refs)
            if not any(form in haystack for form in _number_forms(cell.value.number)):
                violations.append(
                    GroundingViolation(
                        field=cell.field,
                        reason="numeric_not_found",
                        chunk_ref=live_refs[0],
                        advisory=True,
                    )
                )
    return tuple(violations)


class _Absent:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "ABSENT"


ABSENT = _Absent()


def load_truth_table(text: str) -> dict:
    """Parse a JSON truth table: field name -> value, or the string
    "ABSENT" for fields the source is known not to report."""
    data = json.loads(text)
    if not isinstance(data, dict):
        raise ValueError("truth table must be a JSON object")
    out = {}
    for key, value in data.items():
        out[key] = ABSENT if value == "ABSENT" else value
    return out


@dataclass(frozen=True)
class ValueMatcher:
    """Decides whether an extracted value agrees with a truth value.

    Numbers compare with relative tolerance; text case-insensitively after
    whitespace collapse; ``synonyms`` maps a canonical label to the other
    spellings that should count as the same answer.
    """

    synonyms: tuple[tuple[str, tuple[str, ...]], ...] = ()
    rel_tol: float = 1e-6

    @classmethod
    def with_synonyms(cls, table: dict[str, list[str] | tuple[str, ...]]) -> ValueMatcher:
        return cls(synonyms=tuple((k, tuple(v)) for k, v in sorted(table.items())))

    @staticmethod
    def _norm(text: str) -> str:
        return " ".join(str(text).casefold().split())

    def _same_group(self, a: str, b: str) -> bool:
        for canonical, variants in self.synonyms:
            group = {self._norm(canonical), *(self._norm(v) for v in variants)}
            if a in group and b in group:
                return True
        return False

    @staticmethod
    def _as_number(value) -> float | None:
        if isinstance(value, bool):
            return None
        if isinstance(value, (int, float)):
            return float(value)
        try:
            return float(str(value).strip())
        except ValueError:
            return None

    def match(self, value: CellValue, truth) -> bool:
        if value.is_missing or isinstance(truth, _Absent):
            return False
        truth_number = self._as_number(truth)
        if value.kind == "number":
            if truth_number is None:
                return False
            return math.isclose(value.number, truth_number, rel_tol=self.rel_tol)
        # text / categorical
        cell_number = self._as_number(value.text)
        if truth_number is not None and cell_number is not None:
            return math.isclose(cell_number, truth_number, rel_tol=self.rel_tol)
        if truth_number is not None:
            return False
        a, b = self._norm(value.text), self._norm(truth)
        return a == b or self._same_group(a, b)


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int = 0
    fp: int = 0  # hallucination: value emitted, truth absent
    fn: int = 0  # missing: truth present, no value
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def precision(self) -> float | None:
        return self.tp / (self.tp + self.fp) if (self.tp + self.fp) > 0 else None

    @property
    def recall(self) -> float | None:
        return self.tp / (self.tp + self.fn) if (self.tp + self.fn) > 0 else None

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "tn": self.tn}


@dataclass(frozen=True)
class ExtractionScore:
    accuracy: float | None  # over truth-present fields; None if none present
    counts: ConfusionCounts
    per_field: tuple[tuple[str, str], ...] = ()  # field -> outcome label

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "counts": self.counts.to_dict(),
            "per_field": {k: v for k, v in self.per_field},
        }


def score_extraction(
    cells: tuple[ExtractedCell, ...] | list[ExtractedCell],
    truth: dict,
    matcher: ValueMatcher | None = None,
) -> ExtractionScore:
    """Score cells against a truth table (field -> value or ABSENT).

    Presence drives the confusion counts: a non-missing cell where truth is
    ABSENT is a hallucination (fp); a missing cell where truth has a value
    is a miss (fn). Accuracy is the fraction of truth-present fields whose
    value also agrees under the matcher.
    """
    matcher = matcher or ValueMatcher()
    by_field = {c.field: c for c in cells}
    tp = fp = fn = tn = matches = present = 0
    per_field = []
    for field_name in truth:
        truth_value = truth[field_name]
        cell = by_field.get(field_name)
        emitted = cell is not None and not cell.value.is_missing
        if isinstance(truth_value, _Absent):
            if emitted:
                fp += 1
                per_field.append((field_name, "hallucination"))
            else:
                tn += 1
                per_field.append((field_name, "true_negative"))
            continue
        present += 1
        if not emitted:
            fn += 1
            per_field.append((field_name, "missing"))
            continue
        tp += 1
        if matcher.match(cell.value, truth_value):
            matches += 1
            per_field.append((field_name, "match"))
        else:
            per_field.append((field_name, "mismatch"))
    accuracy = matches / present if present else None
    return ExtractionScore(
        accuracy=accuracy,
        counts=ConfusionCounts(tp=tp, fp=fp, fn=fn, tn=tn),
        per_field=tuple(per_field),
    )


def cells_to_csv(cells: tuple[ExtractedCell, ...] | list[ExtractedCell]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["field", "kind", "value", "unit", "chunk_refs", "rationale"])
    for cell in cells:
        writer.writerow(
            [
                cell.field,
                cell.value.kind,
                cell.value.render() if cell.value.kind != "number" else f"{cell.value.number:g}",
                cell.value.unit,
                ";".join(cell.chunk_refs),
                cell.rationale,
            ]
        )
    return buf.getvalue()


def cells_to_json(cells: tuple[ExtractedCell, ...] | list[ExtractedCell]) -> str:
    return canonical_json([c.to_dict() for c in cells])
