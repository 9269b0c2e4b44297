"""Goal constraint expressions.

A constraint is a temporal operator over a boolean expression::

    always(room_temp >= 18 and room_temp <= 25)
    at_end(swing_angle == 0 and angular_velocity == 0)
    always(presence == 0 implies room_temp <= 21)

Arithmetic supports ``+``, ``-``, ``min(a, b)`` and ``max(a, b)`` over PoI
names and numeric literals. Evaluation is vectorised over numpy arrays so a
whole trace is checked in one pass.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Callable, Mapping, Union

import numpy as np

TEMPORAL_OPS = ("always", "at_end")
RELOPS = ("<=", ">=", "==", "<", ">")

# ``==`` on sampled real-valued channels is checked to this absolute tolerance.
EQ_TOL = 1e-9


class ConstraintError(Exception):
    """Raised for syntax or typing errors; ``offset`` indexes the source text."""

    def __init__(self, message: str, offset: int = 0, length: int = 1):
        super().__init__(message)
        self.message = message
        self.offset = offset
        self.length = max(1, length)


@dataclass(frozen=True)
class Num:
    value: float

    def to_text(self) -> str:
        return _fmt_number(self.value)


@dataclass(frozen=True)
class Name:
    name: str

    def to_text(self) -> str:
        return self.name


@dataclass(frozen=True)
class BinOp:
    op: str  # "+" or "-"
    left: "Arith"
    right: "Arith"

    def to_text(self) -> str:
        right = self.right.to_text()
        if isinstance(self.right, BinOp):
            right = f"({right})"
        return f"{self.left.to_text()} {self.op} {right}"


@dataclass(frozen=True)
class Call:
    fn: str  # "min" or "max"
    left: "Arith"
    right: "Arith"

    def to_text(self) -> str:
        return f"{self.fn}({self.left.to_text()}, {self.right.to_text()})"


Arith = Union[Num, Name, BinOp, Call]


@dataclass(frozen=True)
class Compare:
    op: str
    left: Arith
    right: Arith

    def to_text(self) -> str:
        return f"{self.left.to_text()} {self.op} {self.right.to_text()}"


@dataclass(frozen=True)
class And:
    left: "BoolExpr"
    right: "BoolExpr"

    def to_text(self) -> str:
        left = self.left.to_text()
        right = self.right.to_text()
        if isinstance(self.left, Implies):
            left = f"({left})"
        if isinstance(self.right, (Implies, And)):
            right = f"({right})"
        return f"{left} and {right}"


@dataclass(frozen=True)
class Implies:
    guard: "BoolExpr"
    body: "BoolExpr"

    def to_text(self) -> str:
        guard = self.guard.to_text()
        if isinstance(self.guard, Implies):
            guard = f"({guard})"
        return f"{guard} implies {self.body.to_text()}"


BoolExpr = Union[Compare, And, Implies]


@dataclass(frozen=True)
class Constraint:
    temporal: str  # "always" or "at_end"
    body: BoolExpr

    def to_text(self) -> str:
        return f"{self.temporal}({self.body.to_text()})"

    def names(self) -> set[str]:
        return _names(self.body)


def _fmt_number(value: float) -> str:
    if float(value).is_integer() and abs(value) < 1e15:
        return str(int(value))
    return repr(float(value))


def _names(node) -> set[str]:
    if isinstance(node, Name):
        return {node.name}
    if isinstance(node, Num):
        return set()
    if isinstance(node, (BinOp, Call, Compare, And)):
        return _names(node.left) | _names(node.right)
    if isinstance(node, Implies):
        return _names(node.guard) | _names(node.body)
    raise TypeError(node)


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:\.\d*)?(?:[eE][+-]?\d+)?|\.\d+(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|==|<|>|\+|-|\(|\)|,))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # num, id, op, eof
    text: str
    offset: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            bad = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ConstraintError(f"unexpected character {text[bad]!r}", bad)
        kind = m.lastgroup
        toks.append(_Tok(kind, m.group(kind), m.start(kind)))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.tok
        if tok.text != text or tok.kind == "eof":
            found = tok.text or "end of constraint"
            raise ConstraintError(f"expected {text!r}, found {found!r}", tok.offset, len(tok.text))
        return self.take()

    def constraint(self) -> Constraint:
        tok = self.tok
        if tok.kind != "id" or tok.text not in TEMPORAL_OPS:
            raise ConstraintError(
                "constraint must start with 'always' or 'at_end'", tok.offset, len(tok.text)
            )
        self.take()
        self.expect("(")
        body = self.implies()
        self.expect(")")
        if self.tok.kind != "eof":
            raise ConstraintError(
                f"unexpected {self.tok.text!r} after constraint", self.tok.offset, len(self.tok.text)
            )
        return Constraint(tok.text, body)

    def implies(self) -> BoolExpr:
        if self.tok.kind == "id" and self.tok.text == "when":
            self.take()
        guard = self.conj()
        if self.tok.kind == "id" and self.tok.text == "implies":
            self.take()
            return Implies(guard, self.implies())
        return guard

    def conj(self) -> BoolExpr:
        left = self.atom_bool()
        while self.tok.kind == "id" and self.tok.text == "and":
            self.take()
            left = And(left, self.atom_bool())
        return left

    def atom_bool(self) -> BoolExpr:
        # A parenthesis may open either a grouped boolean or an arithmetic term.
        if self.tok.text == "(":
            save = self.i
            self.take()
            try:
                inner = self.implies()
                self.expect(")")
                if self.tok.kind == "op" and self.tok.text in RELOPS:
                    raise ConstraintError("", 0)
                return inner
            except ConstraintError:
                self.i = save
        left = self.arith()
        tok = self.tok
        if tok.kind != "op" or tok.text not in RELOPS:
            found = tok.text or "end of constraint"
            raise ConstraintError(f"expected comparison operator, found {found!r}", tok.offset, len(tok.text))
        self.take()
        return Compare(tok.text, left, self.arith())

    def arith(self) -> Arith:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in ("+", "-"):
            op = self.take().text
            left = BinOp(op, left, self.term())
        return left

    def term(self) -> Arith:
        tok = self.tok
        if tok.kind == "num":
            self.take()
            return Num(float(tok.text))
        if tok.kind == "op" and tok.text == "-" and self.toks[self.i + 1].kind == "num":
            self.take()
            return Num(-float(self.take().text))
        if tok.kind == "op" and tok.text == "(":
            self.take()
            inner = self.arith()
            self.expect(")")
            return inner
        if tok.kind == "id" and tok.text in ("min", "max") and self.toks[self.i + 1].text == "(":
            self.take()
            self.expect("(")
            a = self.arith()
            self.expect(",")
            b = self.arith()
            self.expect(")")
            return Call(tok.text, a, b)
        if tok.kind == "id" and tok.text not in ("and", "implies", "when", *TEMPORAL_OPS):
            self.take()
            return Name(tok.text)
        found = tok.text or "end of constraint"
        raise ConstraintError(f"expected a PoI name or number, found {found!r}", tok.offset, len(tok.text))


def parse_constraint(text: str) -> Constraint:
    return _Parser(text).constraint()


# -- typing ------------------------------------------------------------------


def check_units(constraint: Constraint, units: Mapping[str, str], text: str | None = None) -> None:
    """Raise ConstraintError unless every name is declared and units agree.

    ``units`` maps PoI name to unit. Literals are unit-less and fit anywhere.
    When ``text`` is given, error offsets point at the offending name in it.
    """

    def locate(name: str) -> int:
        if text is None:
            return 0
        m = re.search(rf"\b{re.escape(name)}\b", text)
        return m.start() if m else 0

    def unit_of(node) -> str | None:
        if isinstance(node, Num):
            return None
        if isinstance(node, Name):
            if node.name not in units:
                raise ConstraintError(f"unknown PoI {node.name!r}", locate(node.name), len(node.name))
            return units[node.name]
        left, right = unit_of(node.left), unit_of(node.right)
        if left is not None and right is not None and left != right:
            name = sorted(_names(node.right))[0]
            raise ConstraintError(
                f"unit mismatch: {left} vs {right} in {node.to_text()!r}", locate(name), len(name)
            )
        return left if left is not None else right

    def walk(node) -> None:
        if isinstance(node, Compare):
            unit_of(node)
        elif isinstance(node, And):
            walk(node.left)
            walk(node.right)
        elif isinstance(node, Implies):
            walk(node.guard)
            walk(node.body)

    walk(constraint.body)


# -- evaluation --------------------------------------------------------------

_CMP: dict[str, Callable[[np.ndarray, np.ndarray], np.ndarray]] = {
    "<": np.less,
    "<=": np.less_equal,
    ">": np.greater,
    ">=": np.greater_equal,
    "==": lambda a, b: np.abs(a - b) <= EQ_TOL,
}


def _arith(node: Arith, env: Mapping[str, np.ndarray]) -> np.ndarray:
    if isinstance(node, Num):
        return np.asarray(node.value, dtype=float)
    if isinstance(node, Name):
        return np.asarray(env[node.name], dtype=float)
    a, b = _arith(node.left, env), _arith(node.right, env)
    if isinstance(node, BinOp):
        return a + b if node.op == "+" else a - b
    return np.minimum(a, b) if node.fn == "min" else np.maximum(a, b)


def holds(expr: BoolExpr, env: Mapping[str, np.ndarray]) -> np.ndarray:
    """Pointwise truth of a boolean expression over sampled channels."""
    if isinstance(expr, Compare):
        return np.asarray(_CMP[expr.op](_arith(expr.left, env), _arith(expr.right, env)))
    if isinstance(expr, And):
        return np.logical_and(holds(expr.left, env), holds(expr.right, env))
    return np.logical_or(~holds(expr.guard, env), holds(expr.body, env))
