"""Serialize and parse the query AST in PubMed boolean syntax.

Grammar (operator words are uppercase; precedence NOT > AND > OR):

    query  := or
    or     := and ("OR" and)*
    and    := unary ("AND" unary)*
    unary  := "NOT" unary | atom
    atom   := "(" or ")" | term
    term   := text ("[" tag "]")?      tag in {tiab, mh, all}; default all

Term text runs until a bracket, parenthesis, or uppercase operator word, so
phrases with spaces (including lowercase "and"/"or") need no quoting.
``parse_query(serialize_query(ast)) == ast`` for every valid AST:
parenthesized groups parse to their own nodes and are never flattened.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from ..errors import EviSynthError
from .ast import FIELD_TAGS, And, Not, Or, QueryAst, Term


class QueryParseError(EviSynthError):
    """Malformed query text; ``offset`` is the byte position of the problem."""

    code = "query_parse_error"

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})", detail=offset)
        self.offset = offset


def serialize_query(node: QueryAst) -> str:
    if isinstance(node, Term):
        return f"{node.text}[{node.field_tag}]"
    if isinstance(node, Not):
        return f"NOT {_wrap(node.child)}"
    op = " AND " if isinstance(node, And) else " OR "
    return op.join(_wrap(c) for c in node.children)


def _wrap(node: QueryAst) -> str:
    text = serialize_query(node)
    return f"({text})" if isinstance(node, (And, Or)) else text


_OPERATOR_RE = re.compile(r"(AND|OR|NOT)(?![A-Za-z0-9])")


@dataclass(frozen=True)
class _Token:
    kind: str  # lparen | rparen | op | term
    value: str
    offset: int
    tag: str = ""


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "(":
            tokens.append(_Token("lparen", "(", i))
            i += 1
            continue
        if ch == ")":
            tokens.append(_Token("rparen", ")", i))
            i += 1
            continue
        if ch == "]":
            raise QueryParseError("unexpected ']'", i)
        m = _OPERATOR_RE.match(text, i)
        if m:
            tokens.append(_Token("op", m.group(1), i))
            i = m.end()
            continue
        # term text: runs to an unescaped bracket, a paren, or an operator word
        start = i
        while i < n:
            ch = text[i]
            if ch == "\\" and i + 1 < n and text[i + 1] in "[]":
                i += 2
                continue
            if ch in "[]()":
                break
            if _OPERATOR_RE.match(text, i) and (i == start or text[i - 1].isspace()):
                break
            i += 1
        raw = text[start:i].strip()
        if not raw:
            raise QueryParseError("expected a term", start)
        tag = ""
        if i < n and text[i] == "[":
            close = text.find("]", i)
            if close == -1:
                raise QueryParseError("unterminated field tag", i)
            tag = text[i + 1 : close].strip()
            if tag not in FIELD_TAGS:
                raise QueryParseError(f"unknown field tag [{tag}]", i)
            i = close + 1
        tokens.append(_Token("term", raw, start, tag=tag))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> _Token | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> _Token:
        tok = self.peek()
        if tok is None:
            raise QueryParseError("unexpected end of query", len(self.text))
        self.pos += 1
        return tok

    def parse(self) -> QueryAst:
        node = self.parse_or()
        tok = self.peek()
        if tok is not None:
            raise QueryParseError(f"unexpected {tok.value!r}", tok.offset)
        return node

    def parse_or(self) -> QueryAst:
        children = [self.parse_and()]
        while (tok := self.peek()) and tok.kind == "op" and tok.value == "OR":
            self.next()
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def parse_and(self) -> QueryAst:
        children = [self.parse_unary()]
        while (tok := self.peek()) and tok.kind == "op" and tok.value == "AND":
            self.next()
            children.append(self.parse_unary())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_unary(self) -> QueryAst:
        tok = self.peek()
        if tok and tok.kind == "op" and tok.value == "NOT":
            self.next()
            return Not(self.parse_unary())
        return self.parse_atom()

    def parse_atom(self) -> QueryAst:
        tok = self.next()
        if tok.kind == "lparen":
            node = self.parse_or()
            closing = self.peek()
            if closing is None or closing.kind != "rparen":
                raise QueryParseError("unbalanced parenthesis", tok.offset)
            self.next()
            return node
        if tok.kind == "term":
            return Term(text=tok.value, field_tag=tok.tag or "all")
        raise QueryParseError(f"unexpected {tok.value!r}", tok.offset)


def parse_query(text: str) -> QueryAst:
    if not text.strip():
        raise QueryParseError("empty query", 0)
    return _Parser(text).parse()
