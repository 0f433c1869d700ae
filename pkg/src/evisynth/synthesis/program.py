"""Restricted transform-program interpreter.

Instead of executing model-written Python, result standardization goes
through a tiny straight-line language: ordered `name := expression`
assignments over the extracted findings, closed by exactly one terminal
`row(events_t, total_t, events_c, total_c)` or
`row_effect(log_effect, standard_error)`. Expressions allow numbers,
defined names, + - * /, parentheses, round/floor/ceil, and pct(p, n)
(p percent of n). No loops, no calls beyond the whitelist, no I/O —
evaluation always terminates in one step per statement.

round() is half-away-from-zero (round(0.5) = 1, round(-0.5) = -1), the
convention clinical readers expect, not banker's rounding.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from ..gateway.errors import LlmOutputUnparseable


class ProgramParseError(LlmOutputUnparseable):
    """The program text does not conform to the grammar. Subclasses pin the
    two failure shapes callers branch on."""

    code = "program_parse_error"


class UnknownVariable(ProgramParseError):
    code = "unknown_variable"

    def __init__(self, name: str):
        super().__init__(f"unknown variable {name!r}")
        self.name = name


class NoTerminal(ProgramParseError):
    code = "no_terminal"


class ProgramEvalError(Exception):
    pass


class DivisionByZero(ProgramEvalError):
    pass


# --- expression AST ---------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Neg:
    child: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    func: str  # round | floor | ceil | pct
    args: tuple["Expr", ...]


Expr = "Num | Var | Neg | BinOp | Call"

FUNC_ARITY = {"round": 1, "floor": 1, "ceil": 1, "pct": 2}
TERMINALS = {"row": 4, "row_effect": 2}


@dataclass(frozen=True)
class Assignment:
    name: str
    expr: "Expr"


@dataclass(frozen=True)
class Terminal:
    kind: str  # row | row_effect
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class TransformProgram:
    assignments: tuple[Assignment, ...]
    terminal: Terminal
    source: str

    @property
    def defined_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.assignments)


_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>\d+(?:\.\d+)?(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[a-z_][a-z0-9_]*)"
    r"|(?P<assign>:=)"
    r"|(?P<op>[-+*/(),]))"
)


def _tokenize(line: str) -> list[tuple[str, str]]:
    tokens = []
    pos = 0
    while pos < len(line):
        m = _TOKEN_RE.match(line, pos)
        if not m or m.end() == pos:
            rest = line[pos:].strip()
            if not rest:
                break
            raise ProgramParseError(f"cannot read {rest[:20]!r} in line {line.strip()!r}")
        pos = m.end()
        kind = m.lastgroup
        tokens.append((kind, m.group(kind)))
    return tokens


class _ExprParser:
    def __init__(self, tokens: list[tuple[str, str]], line: str):
        self.tokens = tokens
        self.pos = 0
        self.line = line

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self) -> tuple[str, str]:
        token = self.peek()
        if token is None:
            raise ProgramParseError(f"unexpected end of line in {self.line.strip()!r}")
        self.pos += 1
        return token

    def expect(self, value: str):
        token = self.take()
        if token[1] != value:
            raise ProgramParseError(
                f"expected {value!r} but found {token[1]!r} in {self.line.strip()!r}"
            )

    def parse_expr(self):
        node = self.parse_term()
        while (token := self.peek()) and token[1] in ("+", "-"):
            self.take()
            node = BinOp(op=token[1], left=node, right=self.parse_term())
        return node

    def parse_term(self):
        node = self.parse_unary()
        while (token := self.peek()) and token[1] in ("*", "/"):
            self.take()
            node = BinOp(op=token[1], left=node, right=self.parse_unary())
        return node

    def parse_unary(self):
        token = self.peek()
        if token and token[1] == "-":
            self.take()
            return Neg(child=self.parse_unary())
        return self.parse_atom()

    def parse_atom(self):
        kind, value = self.take()
        if kind == "number":
            return Num(value=float(value))
        if kind == "name":
            nxt = self.peek()
            if nxt and nxt[1] == "(":
                return self.parse_call(value)
            return Var(name=value)
        if value == "(":
            node = self.parse_expr()
            self.expect(")")
            return node
        raise ProgramParseError(f"unexpected {value!r} in {self.line.strip()!r}")

    def parse_call(self, func: str):
        if func not in FUNC_ARITY:
            raise ProgramParseError(f"unknown function {func!r}")
        self.expect("(")
        args = [self.parse_expr()]
        while (token := self.peek()) and token[1] == ",":
            self.take()
            args.append(self.parse_expr())
        self.expect(")")
        if len(args) != FUNC_ARITY[func]:
            raise ProgramParseError(
                f"{func} takes {FUNC_ARITY[func]} argument(s), got {len(args)}"
            )
        return Call(func=func, args=tuple(args))

    def done(self):
        token = self.peek()
        if token is not None:
            raise ProgramParseError(
                f"trailing {token[1]!r} in {self.line.strip()!r}"
            )


def _check_names(expr, known: set[str]):
    if isinstance(expr, Var):
        if expr.name not in known:
            raise UnknownVariable(expr.name)
    elif isinstance(expr, Neg):
        _check_names(expr.child, known)
    elif isinstance(expr, BinOp):
        _check_names(expr.left, known)
        _check_names(expr.right, known)
    elif isinstance(expr, Call):
        for arg in expr.args:
            _check_names(arg, known)


def parse_program(source: str, finding_names: set[str] | frozenset[str]) -> TransformProgram:
    """Parse and statically validate one transform program.

    Every variable must be a finding name or defined by an earlier
    assignment; the last statement (and only the last) must be a terminal.
    """
    statements: list[str] = []
    for line in source.splitlines():
        for piece in line.split(";"):
            if piece.strip():
                statements.append(piece)
    if not statements:
        raise NoTerminal("empty program")

    known = set(finding_names)
    assignments: list[Assignment] = []
    terminal: Terminal | None = None
    for statement in statements:
        if terminal is not None:
            raise ProgramParseError(
                f"statement after terminal: {statement.strip()!r}"
            )
        tokens = _tokenize(statement)
        if not tokens:
            continue
        head_kind, head_value = tokens[0]
        if head_kind == "name" and head_value in TERMINALS:
            parser = _ExprParser(tokens, statement)
            parser.take()  # the terminal name
            parser.expect("(")
            args = [parser.parse_expr()]
            while (token := parser.peek()) and token[1] == ",":
                parser.take()
                args.append(parser.parse_expr())
            parser.expect(")")
            parser.done()
            if len(args) != TERMINALS[head_value]:
                raise ProgramParseError(
                    f"{head_value} takes {TERMINALS[head_value]} arguments, got {len(args)}"
                )
            for arg in args:
                _check_names(arg, known)
            terminal = Terminal(kind=head_value, args=tuple(args))
            continue
        if head_kind != "name" or len(tokens) < 2 or tokens[1][0] != "assign":
            raise ProgramParseError(f"not an assignment: {statement.strip()!r}")
        if head_value in TERMINALS or head_value in FUNC_ARITY:
            raise ProgramParseError(f"{head_value!r} is reserved")
        parser = _ExprParser(tokens[2:], statement)
        expr = parser.parse_expr()
        parser.done()
        _check_names(expr, known)
        assignments.append(Assignment(name=head_value, expr=expr))
        known.add(head_value)
    if terminal is None:
        raise NoTerminal("program has no terminal row(...) or row_effect(...)")
    return TransformProgram(
        assignments=tuple(assignments), terminal=terminal, source=source
    )


def round_half_away(x: float) -> float:
    """round(0.5) = 1 and round(-0.5) = -1, regardless of parity."""
    return float(math.floor(x + 0.5)) if x >= 0 else float(math.ceil(x - 0.5))


def _eval_expr(expr, env: dict[str, float]) -> float:
    if isinstance(expr, Num):
        return expr.value
    if isinstance(expr, Var):
        return env[expr.name]
    if isinstance(expr, Neg):
        return -_eval_expr(expr.child, env)
    if isinstance(expr, BinOp):
        left = _eval_expr(expr.left, env)
        right = _eval_expr(expr.right, env)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if right == 0:
            raise DivisionByZero(f"division by zero evaluating {expr.op!r}")
        return left / right
    if isinstance(expr, Call):
        args = [_eval_expr(a, env) for a in expr.args]
        if expr.func == "round":
            return round_half_away(args[0])
        if expr.func == "floor":
            return float(math.floor(args[0]))
        if expr.func == "ceil":
            return float(math.ceil(args[0]))
        # pct(p, n): p percent of n, evaluated exactly in this order
        return args[0] / 100.0 * args[1]
    raise TypeError(f"unknown expression node {expr!r}")


@dataclass(frozen=True)
class TerminalValues:
    kind: str  # row | row_effect
    values: tuple[float, ...]
    steps: int  # statements executed; always len(assignments) + 1


def run_program(program: TransformProgram, findings: dict[str, float]) -> TerminalValues:
    """Evaluate a parsed program over finding values. Pure; the only
    failure mode is DivisionByZero."""
    env = dict(findings)
    steps = 0
    for assignment in program.assignments:
        env[assignment.name] = _eval_expr(assignment.expr, env)
        steps += 1
    values = tuple(_eval_expr(arg, env) for arg in program.terminal.args)
    steps += 1
    return TerminalValues(kind=program.terminal.kind, values=values, steps=steps)
