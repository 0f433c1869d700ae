"""Parsing of multi-section completions.

Stage prompts ask the model to answer in tagged sections ("STEP1:", …,
"QUERIES:", "VERDICTS:"). ``parse_structured`` slices the raw completion
into one payload per expected tag, tolerating prose around the sections.
Fenced code blocks are opaque: a line that looks like a section header
inside ``` fences belongs to the enclosing payload.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DuplicateSection, MissingSection


@dataclass(frozen=True)
class StructuredResponse:
    """Ordered (tag, payload) sections plus the raw completion text.

    Every payload is a contiguous substring of ``raw``.
    """

    sections: tuple[tuple[str, str], ...]
    raw: str

    def payload(self, tag: str) -> str:
        for t, p in self.sections:
            if t == tag:
                return p
        raise MissingSection(tag)


def _header_positions(raw: str, tags: set[str]) -> list[tuple[str, int, int]]:
    """(tag, header_start_offset, payload_start_offset) per header line,
    in document order, ignoring headers inside code fences."""
    out: list[tuple[str, int, int]] = []
    offset = 0
    in_fence = False
    for line in raw.splitlines(keepends=True):
        stripped = line.strip()
        if stripped.startswith("```"):
            in_fence = not in_fence
        elif not in_fence:
            head, sep, _rest = line.partition(":")
            tag = head.strip()
            if sep and tag in tags:
                payload_start = offset + line.index(":") + 1
                out.append((tag, offset, payload_start))
        offset += len(line)
    return out


def parse_structured(raw: str, expected_tags: list[str]) -> StructuredResponse:
    """Extract one payload per expected tag, in the expected order.

    Raises DuplicateSection if any expected tag heads more than one line,
    MissingSection if a tag is absent (or appears before its predecessor).
    """
    headers = _header_positions(raw, set(expected_tags))

    seen: set[str] = set()
    for tag, _, _ in headers:
        if tag in seen:
            raise DuplicateSection(tag)
        seen.add(tag)

    # Sequential match: each expected tag must appear after the previous one.
    sections: list[tuple[str, str]] = []
    cursor = 0
    for wanted in expected_tags:
        found = None
        for i, (tag, start, payload_start) in enumerate(headers):
            if tag == wanted and start >= cursor:
                found = (i, start, payload_start)
                break
        if found is None:
            raise MissingSection(wanted)
        i, start, payload_start = found
        end = headers[i + 1][1] if i + 1 < len(headers) else len(raw)
        sections.append((wanted, raw[payload_start:end].strip()))
        cursor = end
    return StructuredResponse(sections=tuple(sections), raw=raw)
