"""A small expression language for Lagrangians, metrics, curves and variations.

Grammar (``^`` is right-associative and binds tighter than unary minus)::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := '-' unary | power
    power  := atom ('^' unary)?
    atom   := number | variable | name '(' expr ')' | '(' expr ')'

Variables are ``x0, x1, ...`` with primes for time derivatives (``x0'``,
``x0''``, or ``x0'3`` for order three) and ``t``.  Which of them are allowed
depends on the parse context.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import ParseError, SingularityError
from .weil_algebra import JetScalar, integer_power, lift_univariate, promote

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "atan")
CONSTANTS = {"pi": math.pi}
CONTEXT_KINDS = ("lagrangian", "metric", "curve", "variation")

__all__ = [
    "ParseContext",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Call",
    "Expression",
    "parse",
    "evaluate",
    "to_source",
    "variable_name",
    "FUNCTIONS",
]


@dataclass(frozen=True)
class ParseContext:
    """What a source string may refer to."""

    kind: str = "lagrangian"
    dim: int = 1
    k: int = 0

    def __post_init__(self):
        if self.kind not in CONTEXT_KINDS:
            raise ValueError(f"unknown context kind {self.kind!r}")


@dataclass(frozen=True)
class Num:
    value: float
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Var:
    name: str  # canonical: "t" or "x{a}_{order}"
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Neg:
    operand: "Expression"
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expression"
    right: "Expression"
    line: int = 0
    column: int = 0


@dataclass(frozen=True)
class Call:
    func: str
    arg: "Expression"
    line: int = 0
    column: int = 0


Expression = Union[Num, Var, Neg, BinOp, Call]


def variable_name(a: int, order: int) -> str:
    """Canonical binding name of ``x^{a,(order)}``."""
    return f"x{a}_{order}"


# -- lexer ---------------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<coord>x(?P<index>\d+)(?P<primes>'+\d*)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int
    index: int = 0
    order: int = 0


def _tokenize(source: str) -> list[_Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        column = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, column)
        kind = m.lastgroup if m.lastgroup not in ("index", "primes") else "coord"
        if m.group("coord") is not None:
            kind = "coord"
        text = m.group(0)
        if kind == "ws":
            newlines = text.count("\n")
            if newlines:
                line += newlines
                line_start = pos + text.rfind("\n") + 1
        elif kind == "coord":
            primes = m.group("primes") or ""
            ticks = primes.count("'")
            digits = primes[ticks:]
            if digits:
                if ticks != 1:
                    raise ParseError("write x0'3 (one prime) for explicit orders", line, column)
                order = int(digits)
            else:
                order = ticks
            tokens.append(_Token("var", text, line, column, int(m.group("index")), order))
        else:
            tokens.append(_Token(kind, text, line, column))
        pos = m.end()
    tokens.append(_Token("end", "", line, pos - line_start + 1))
    return tokens


# -- parser --------------------------------------------------------------------

class _Parser:
    def __init__(self, source: str, context: ParseContext):
        self.tokens = _tokenize(source)
        self.pos = 0
        self.context = context

    def peek(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text or tok.kind != "op":
            found = tok.text or "end of input"
            raise ParseError(f"expected {text!r}, found {found!r}", tok.line, tok.column)
        return self.advance()

    def parse(self) -> Expression:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise ParseError(f"unexpected {tok.text!r}", tok.line, tok.column)
        return node

    def expr(self) -> Expression:
        node = self.term()
        while self.peek().kind == "op" and self.peek().text in "+-":
            tok = self.advance()
            node = BinOp(tok.text, node, self.term(), tok.line, tok.column)
        return node

    def term(self) -> Expression:
        node = self.unary()
        while self.peek().kind == "op" and self.peek().text in ("*", "/"):
            tok = self.advance()
            node = BinOp(tok.text, node, self.unary(), tok.line, tok.column)
        return node

    def unary(self) -> Expression:
        tok = self.peek()
        if tok.kind == "op" and tok.text == "-":
            self.advance()
            return Neg(self.unary(), tok.line, tok.column)
        return self.power()

    def power(self) -> Expression:
        base = self.atom()
        tok = self.peek()
        if tok.kind == "op" and tok.text == "^":
            self.advance()
            return BinOp("^", base, self.unary(), tok.line, tok.column)
        return base

    def atom(self) -> Expression:
        tok = self.advance()
        if tok.kind == "number":
            return Num(float(tok.text), tok.line, tok.column)
        if tok.kind == "var":
            return self.coordinate(tok)
        if tok.kind == "name":
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg, tok.line, tok.column)
            if tok.text == "t":
                if self.context.kind not in ("curve", "variation"):
                    raise ParseError(
                        f"'t' is not allowed in a {self.context.kind} expression",
                        tok.line, tok.column,
                    )
                return Var("t", tok.line, tok.column)
            if tok.text in CONSTANTS:
                return Num(CONSTANTS[tok.text], tok.line, tok.column)
            raise ParseError(f"unknown identifier {tok.text!r}", tok.line, tok.column)
        if tok.kind == "op" and tok.text == "(":
            node = self.expr()
            self.expect(")")
            return node
        found = tok.text or "end of input"
        raise ParseError(f"unexpected {found!r}", tok.line, tok.column)

    def coordinate(self, tok: _Token) -> Var:
        ctx = self.context
        if ctx.kind in ("curve", "variation"):
            raise ParseError(
                f"coordinates are not allowed in a {ctx.kind} expression", tok.line, tok.column
            )
        if tok.index >= ctx.dim:
            raise ParseError(
                f"unknown identifier {tok.text!r} (dimension is {ctx.dim})", tok.line, tok.column
            )
        limit = ctx.k if ctx.kind == "lagrangian" else 0
        if tok.order > limit:
            raise ParseError(
                f"derivative order {tok.order} exceeds {limit} in {tok.text!r}",
                tok.line, tok.column,
            )
        return Var(variable_name(tok.index, tok.order), tok.line, tok.column)


def parse(source: str, context: ParseContext | None = None) -> Expression:
    """Parse ``source`` into an AST, resolving variables against ``context``."""
    return _Parser(source, context or ParseContext()).parse()


# -- printer -------------------------------------------------------------------

def _var_source(name: str) -> str:
    if name == "t":
        return "t"
    a, order = name[1:].split("_")
    order = int(order)
    primes = "'" * order if order <= 2 else f"'{order}"
    return f"x{a}{primes}"


def to_source(e: Expression) -> str:
    """Fully parenthesized source that parses back to the same tree."""
    if isinstance(e, Num):
        return repr(float(e.value))
    if isinstance(e, Var):
        return _var_source(e.name)
    if isinstance(e, Neg):
        return f"(-{to_source(e.operand)})"
    if isinstance(e, BinOp):
        return f"({to_source(e.left)} {e.op} {to_source(e.right)})"
    if isinstance(e, Call):
        return f"{e.func}({to_source(e.arg)})"
    raise TypeError(f"not an expression node: {e!r}")


# -- evaluation ------------------------------------------------------------------

def _integer_literal(e: Expression) -> int | None:
    if isinstance(e, Num) and float(e.value).is_integer():
        return int(e.value)
    if isinstance(e, Neg) and isinstance(e.operand, Num) and float(e.operand.value).is_integer():
        return -int(e.operand.value)
    return None


def _scalar_power(base, n: int):
    if n < 0:
        return 1.0 / _scalar_power(base, -n)
    result = 1.0
    for _ in range(n):
        result = result * base
    return result


def _apply(func: str, x):
    if isinstance(x, JetScalar):
        return lift_univariate(func, x)
    return float(promote(lift_univariate(func, promote(x, ())), ()).value)


def _eval(e: Expression, bindings: Mapping[str, object]):
    try:
        if isinstance(e, Num):
            return float(e.value)
        if isinstance(e, Var):
            if e.name not in bindings:
                raise ParseError(f"unbound variable {_var_source(e.name)!r}", e.line, e.column)
            return bindings[e.name]
        if isinstance(e, Neg):
            return -_eval(e.operand, bindings)
        if isinstance(e, Call):
            return _apply(e.func, _eval(e.arg, bindings))
        if isinstance(e, BinOp):
            left = _eval(e.left, bindings)
            if e.op == "^":
                n = _integer_literal(e.right)
                if n is not None:
                    if isinstance(left, JetScalar):
                        return integer_power(left, n)
                    return _scalar_power(left, n)
                right = _eval(e.right, bindings)
                return _apply("exp", right * _apply("log", left))
            right = _eval(e.right, bindings)
            if e.op == "+":
                return left + right
            if e.op == "-":
                return left - right
            if e.op == "*":
                return left * right
            if e.op == "/":
                if not isinstance(right, JetScalar) and right == 0:
                    raise SingularityError("division by zero")
                return left / right
        raise TypeError(f"not an expression node: {e!r}")
    except SingularityError as exc:
        if getattr(exc, "located", False):
            raise
        located = SingularityError(f"{exc} (line {e.line}, column {e.column})")
        located.located = True
        raise located from exc
    except ZeroDivisionError as exc:
        located = SingularityError(f"division by zero (line {e.line}, column {e.column})")
        located.located = True
        raise located from exc


def evaluate(e: Expression, bindings: Mapping[str, object]):
    """Evaluate over floats or jets; a jet result takes the bindings' shape.

    Bindings are keyed by canonical names (``"t"``, ``"x0_2"``).  If any
    binding is a jet the result is a jet of that shape; otherwise a float.
    """
    value = _eval(e, bindings)
    shape = next((b.shape for b in bindings.values() if isinstance(b, JetScalar)), None)
    if shape is None:
        return value
    return promote(value, shape)
