"""Prompt templates: versioned data files with ``{{slot}}`` placeholders.

Template bodies live under ``templates_data/`` as plain files so they can
be diffed and reviewed like any other data. The engine treats them as
opaque text; the only structure it knows about is the placeholder syntax
and each template's declared required slots.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import MissingSlot, UnknownSlot, UnknownTemplate

_PLACEHOLDER_RE = re.compile(r"\{\{([a-z0-9_]+)\}\}")


@dataclass(frozen=True)
class PromptTemplate:
    """A prompt with named slots. Every required slot must appear in body."""

    id: str
    body: str
    required_slots: tuple[str, ...]

    def __post_init__(self):
        present = set(_PLACEHOLDER_RE.findall(self.body))
        missing = [s for s in self.required_slots if s not in present]
        if missing:
            raise ValueError(
                f"template {self.id!r}: required slots {missing} never appear in body"
            )

    @property
    def placeholders(self) -> frozenset[str]:
        return frozenset(_PLACEHOLDER_RE.findall(self.body))


def render_template(template: PromptTemplate, slots: dict[str, str]) -> str:
    """Substitute every placeholder; pure, no side effects.

    Raises MissingSlot if any placeholder in the body is unbound and
    UnknownSlot if a provided slot never appears in the body.
    """
    placeholders = template.placeholders
    for name in slots:
        if name not in placeholders:
            raise UnknownSlot(name)
    for name in sorted(placeholders):
        if name not in slots:
            raise MissingSlot(name)
    return _PLACEHOLDER_RE.sub(lambda m: slots[m.group(1)], template.body)


def _parse_template_file(name: str, text: str) -> PromptTemplate:
    # Header lines up to the first "---" line: "id:" and "required_slots:".
    header, _, body = text.partition("\n---\n")
    fields: dict[str, str] = {}
    for line in header.splitlines():
        key, _, value = line.partition(":")
        if key.strip():
            fields[key.strip()] = value.strip()
    if "id" not in fields:
        raise ValueError(f"template file {name!r} lacks an 'id:' header")
    slots = tuple(s.strip() for s in fields.get("required_slots", "").split(",") if s.strip())
    return PromptTemplate(id=fields["id"], body=body.strip("\n") + "\n", required_slots=slots)


class TemplateRegistry:
    """Lookup of PromptTemplate by id."""

    def __init__(self, templates: list[PromptTemplate]):
        self._by_id: dict[str, PromptTemplate] = {}
        for t in templates:
            if t.id in self._by_id:
                raise ValueError(f"duplicate template id {t.id!r}")
            self._by_id[t.id] = t

    def get(self, template_id: str) -> PromptTemplate:
        try:
            return self._by_id[template_id]
        except KeyError:
            raise UnknownTemplate(template_id) from None

    def render(self, template_id: str, slots: dict[str, str]) -> str:
        return render_template(self.get(template_id), slots)

    def ids(self) -> list[str]:
        return sorted(self._by_id)


@lru_cache(maxsize=1)
def default_registry() -> TemplateRegistry:
    """The templates shipped with the package."""
    root = resources.files("evisynth.gateway") / "templates_data"
    templates = []
    for entry in sorted(root.iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".md"):
            templates.append(_parse_template_file(entry.name, entry.read_text(encoding="utf-8")))
    return TemplateRegistry(templates)
