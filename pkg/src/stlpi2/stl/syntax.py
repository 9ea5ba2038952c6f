"""Formula abstract syntax, text parser and canonical printer.

Grammar (lowest to highest precedence)::

    or_expr    := and_expr ("|" and_expr)*
    and_expr   := until_expr ("&" until_expr)*
    until_expr := unary ("U" interval unary)*
    unary      := "!" unary | "F" interval unary | "G" interval unary | atom
    atom       := "true" | identifier | "(" or_expr ")"
    interval   := "[" number "," (number | "inf") "]"

All binary operators associate to the left.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterator, Union


class FormulaSyntaxError(ValueError):
    """Raised for malformed formula text; carries the character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class Pred:
    name: str


@dataclass(frozen=True)
class Not:
    child: "Formula"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


def _check_interval(a: float, b: float, allow_inf: bool) -> None:
    if not (a >= 0 and math.isfinite(a)):
        raise ValueError(f"interval lower bound must be finite and >= 0, got {a}")
    if math.isnan(b) or b < a:
        raise ValueError(f"interval bounds must satisfy a <= b, got [{a}, {b}]")
    if math.isinf(b) and not allow_inf:
        raise ValueError("until requires a finite upper bound")


@dataclass(frozen=True)
class Until:
    a: float
    b: float
    left: "Formula"
    right: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b, allow_inf=False)


@dataclass(frozen=True)
class Eventually:
    a: float
    b: float
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b, allow_inf=True)


@dataclass(frozen=True)
class Always:
    a: float
    b: float
    child: "Formula"

    def __post_init__(self):
        _check_interval(self.a, self.b, allow_inf=True)


Formula = Union[TrueF, Pred, Not, And, Or, Until, Eventually, Always]


def predicate_names(f: Formula) -> set[str]:
    """All predicate identifiers referenced by ``f``."""
    if isinstance(f, Pred):
        return {f.name}
    if isinstance(f, TrueF):
        return set()
    if isinstance(f, (Not, Eventually, Always)):
        return predicate_names(f.child)
    return predicate_names(f.left) | predicate_names(f.right)


def depth(f: Formula) -> int:
    if isinstance(f, (TrueF, Pred)):
        return 0
    if isinstance(f, (Not, Eventually, Always)):
        return 1 + depth(f.child)
    return 1 + max(depth(f.left), depth(f.right))


def horizon(f: Formula, T: float = math.inf) -> float:
    """Time needed to decide ``f``; unbounded intervals extend to ``T``."""
    if isinstance(f, (TrueF, Pred)):
        return 0.0
    if isinstance(f, Not):
        return horizon(f.child, T)
    if isinstance(f, (And, Or)):
        return max(horizon(f.left, T), horizon(f.right, T))
    if isinstance(f, Until):
        return f.b + max(horizon(f.left, T), horizon(f.right, T))
    b = min(f.b, T)
    return b + horizon(f.child, T)


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>-?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[!&|()\[\],])
    """,
    re.VERBOSE,
)


@dataclass
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> Iterator[_Token]:
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            yield _Token(kind, m.group(), pos)
        pos = m.end()
    yield _Token("eof", "", len(text))


_KEYWORDS = {"true", "F", "G", "U", "inf"}


class _Parser:
    def __init__(self, text: str):
        self.tokens = list(_tokenize(text))
        self.i = 0

    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Token:
        if self.tok.text != text:
            found = self.tok.text or "end of input"
            raise FormulaSyntaxError(f"expected {text!r}, found {found!r}", self.tok.pos)
        return self.advance()

    def parse(self) -> Formula:
        f = self.or_expr()
        if self.tok.kind != "eof":
            raise FormulaSyntaxError(f"unexpected token {self.tok.text!r}", self.tok.pos)
        return f

    def or_expr(self) -> Formula:
        f = self.and_expr()
        while self.tok.text == "|":
            self.advance()
            f = Or(f, self.and_expr())
        return f

    def and_expr(self) -> Formula:
        f = self.until_expr()
        while self.tok.text == "&":
            self.advance()
            f = And(f, self.until_expr())
        return f

    def until_expr(self) -> Formula:
        f = self.unary()
        while self.tok.kind == "ident" and self.tok.text == "U":
            pos = self.advance().pos
            a, b = self.interval(pos, allow_inf=False)
            f = Until(a, b, f, self.unary())
        return f

    def unary(self) -> Formula:
        t = self.tok
        if t.text == "!":
            self.advance()
            return Not(self.unary())
        if t.kind == "ident" and t.text in ("F", "G"):
            self.advance()
            a, b = self.interval(t.pos, allow_inf=True)
            cls = Eventually if t.text == "F" else Always
            return cls(a, b, self.unary())
        return self.atom()

    def atom(self) -> Formula:
        t = self.tok
        if t.text == "(":
            self.advance()
            f = self.or_expr()
            self.expect(")")
            return f
        if t.kind == "ident":
            if t.text == "true":
                self.advance()
                return TrueF()
            if t.text in _KEYWORDS:
                raise FormulaSyntaxError(f"keyword {t.text!r} cannot be a predicate", t.pos)
            self.advance()
            return Pred(t.text)
        found = t.text or "end of input"
        raise FormulaSyntaxError(f"expected a formula, found {found!r}", t.pos)

    def number(self, allow_inf: bool) -> float:
        t = self.tok
        if t.kind == "num":
            self.advance()
            value = float(t.text)
            if value < 0:
                raise FormulaSyntaxError(f"negative interval bound {t.text}", t.pos)
            return value
        if allow_inf and t.text == "inf":
            self.advance()
            return math.inf
        raise FormulaSyntaxError(f"expected a number, found {t.text or 'end of input'!r}", t.pos)

    def interval(self, op_pos: int, allow_inf: bool) -> tuple[float, float]:
        self.expect("[")
        a = self.number(allow_inf=False)
        self.expect(",")
        b = self.number(allow_inf=allow_inf)
        self.expect("]")
        if b < a:
            raise FormulaSyntaxError(f"inverted interval [{a:g},{b:g}]", op_pos)
        return a, b


def parse_formula(text: str) -> Formula:
    """Parse formula text into its syntax tree.

    >>> parse_formula("!(mu1 & !mu2)")
    Not(child=And(left=Pred(name='mu1'), right=Not(child=Pred(name='mu2'))))
    """
    return _Parser(text).parse()


# -- printing ----------------------------------------------------------------

_PREC = {Or: 1, And: 2, Until: 3}
_UNARY_PREC = 4


def _num(x: float) -> str:
    if math.isinf(x):
        return "inf"
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def _prec(f: Formula) -> int:
    return _PREC.get(type(f), _UNARY_PREC)


def to_text(f: Formula) -> str:
    """Canonical text with the minimal parentheses needed to round-trip."""
    if isinstance(f, TrueF):
        return "true"
    if isinstance(f, Pred):
        return f.name
    if isinstance(f, (Not, Eventually, Always)):
        inner = to_text(f.child)
        if _prec(f.child) < _UNARY_PREC:
            inner = f"({inner})"
        if isinstance(f, Not):
            return "!" + inner
        op = "F" if isinstance(f, Eventually) else "G"
        return f"{op}[{_num(f.a)},{_num(f.b)}] {inner}"
    p = _prec(f)
    left = to_text(f.left)
    right = to_text(f.right)
    if _prec(f.left) < p:
        left = f"({left})"
    # left associativity: a right operand of equal precedence needs parens
    if _prec(f.right) <= p:
        right = f"({right})"
    if isinstance(f, Until):
        return f"{left} U[{_num(f.a)},{_num(f.b)}] {right}"
    sym = "&" if isinstance(f, And) else "|"
    return f"{left} {sym} {right}"
