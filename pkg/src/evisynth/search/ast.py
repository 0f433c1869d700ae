"""Boolean query AST over PubMed-style tagged terms.

Nodes: Term (text + field tag), And, Or (each with >= 2 children), Not
(single child). Trees deeper than MAX_DEPTH are rejected at construction,
as are term texts that could not survive a serialize/parse round trip
(unescaped brackets, parentheses, or bare AND/OR/NOT operator words).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from ..errors import EviSynthError

MAX_DEPTH = 12
FIELD_TAGS = ("tiab", "mh", "all")

_UNESCAPED_BRACKET_RE = re.compile(r"(?<!\\)[\[\]]")
_OPERATOR_WORD_RE = re.compile(r"(?:^|\s)(AND|OR|NOT)(?:\s|$)")


class InvalidQuery(EviSynthError):
    """Structural violation: bad arity, bad term text, unknown tag, too deep."""

    code = "invalid_query"


@dataclass(frozen=True)
class Term:
    text: str
    field_tag: str = "all"

    def __post_init__(self):
        if not self.text or self.text != self.text.strip():
            raise InvalidQuery(f"term text must be non-empty and trimmed, got {self.text!r}")
        if _UNESCAPED_BRACKET_RE.search(self.text):
            raise InvalidQuery(f"term text contains an unescaped bracket: {self.text!r}")
        if "(" in self.text or ")" in self.text:
            raise InvalidQuery(f"term text may not contain parentheses: {self.text!r}")
        if _OPERATOR_WORD_RE.search(self.text):
            raise InvalidQuery(f"term text may not contain bare AND/OR/NOT: {self.text!r}")
        if self.field_tag not in FIELD_TAGS:
            raise InvalidQuery(f"unknown field tag {self.field_tag!r}")

    @property
    def depth(self) -> int:
        return 1


def _check_children(kind: str, children: tuple) -> None:
    if len(children) < 2:
        raise InvalidQuery(f"{kind} needs >= 2 children, got {len(children)}")
    for child in children:
        if not isinstance(child, (Term, And, Or, Not)):
            raise InvalidQuery(f"{kind} child must be a query node, got {type(child).__name__}")


def _check_depth(node) -> None:
    if node.depth > MAX_DEPTH:
        raise InvalidQuery(f"query depth {node.depth} exceeds maximum {MAX_DEPTH}")


@dataclass(frozen=True)
class And:
    children: tuple["QueryAst", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        _check_children("And", self.children)
        _check_depth(self)

    @property
    def depth(self) -> int:
        return 1 + max(c.depth for c in self.children)


@dataclass(frozen=True)
class Or:
    children: tuple["QueryAst", ...]

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(self.children))
        _check_children("Or", self.children)
        _check_depth(self)

    @property
    def depth(self) -> int:
        return 1 + max(c.depth for c in self.children)


@dataclass(frozen=True)
class Not:
    child: "QueryAst"

    def __post_init__(self):
        if not isinstance(self.child, (Term, And, Or, Not)):
            raise InvalidQuery(f"Not child must be a query node, got {type(self.child).__name__}")
        _check_depth(self)

    @property
    def depth(self) -> int:
        return 1 + self.child.depth


QueryAst = Union[Term, And, Or, Not]


def collect_terms(node: QueryAst) -> list[Term]:
    """All Term leaves, left to right."""
    if isinstance(node, Term):
        return [node]
    if isinstance(node, Not):
        return collect_terms(node.child)
    out: list[Term] = []
    for child in node.children:
        out.extend(collect_terms(child))
    return out
