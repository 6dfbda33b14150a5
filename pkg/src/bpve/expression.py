"""Arithmetic expressions in the generation index ``k``.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := unary (('*' | '/') unary)*
    unary  := ('+' | '-') unary | power
    power  := atom ('^' unary)?
    atom   := NUMBER | 'k' | NAME '(' expr (',' expr)* ')' | '(' expr ')'

``^`` is right associative and binds tighter than unary minus, so
``-k^2`` is ``-(k^2)``.  Functions: log, exp, sqrt (one argument) and
min, max (two or more).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable


class ExpressionError(ValueError):
    """Syntax or name error; ``column`` is 1-based within the expression."""

    def __init__(self, message: str, column: int):
        super().__init__(f"{message} (column {column})")
        self.message = message
        self.column = column


_FUNCTIONS: dict[str, tuple[Callable, int, int | None]] = {
    "log": (math.log, 1, 1),
    "exp": (math.exp, 1, 1),
    "sqrt": (math.sqrt, 1, 1),
    "min": (min, 2, None),
    "max": (max, 2, None),
}

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


@dataclass(frozen=True)
class _Tok:
    kind: str  # 'num', 'name', 'op', 'end'
    text: str
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if not m:
            col = pos + 1 + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ExpressionError(f"unexpected character {text[col - 1]!r}", col)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append(_Tok(kind, m.group(kind), start + 1))
        pos = m.end()
    toks.append(_Tok("end", "", len(text) + 1))
    return toks


# AST nodes -------------------------------------------------------------

@dataclass(frozen=True)
class Num:
    value: float

    def __call__(self, k):
        return self.value


@dataclass(frozen=True)
class Var:
    def __call__(self, k):
        return float(k)


@dataclass(frozen=True)
class Neg:
    arg: object

    def __call__(self, k):
        return -self.arg(k)


_BINOPS = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": lambda a, b: a / b,
    "^": lambda a, b: a**b,
}


@dataclass(frozen=True)
class BinOp:
    op: str
    left: object
    right: object

    def __call__(self, k):
        return _BINOPS[self.op](self.left(k), self.right(k))


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple

    def __call__(self, k):
        fn = _FUNCTIONS[self.name][0]
        return fn(*(a(k) for a in self.args))


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def take(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str):
        t = self.tok
        if t.kind != "op" or t.text != text:
            found = "end of expression" if t.kind == "end" else repr(t.text)
            raise ExpressionError(f"expected {text!r}, found {found}", t.col)
        return self.take()

    def parse(self):
        node = self.expr()
        if self.tok.kind != "end":
            raise ExpressionError(f"unexpected {self.tok.text!r}", self.tok.col)
        return node

    def expr(self):
        node = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            node = BinOp(op, node, self.term())
        return node

    def term(self):
        node = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.take().text
            node = BinOp(op, node, self.unary())
        return node

    def unary(self):
        if self.tok.kind == "op" and self.tok.text in "+-":
            op = self.take().text
            arg = self.unary()
            return Neg(arg) if op == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            self.take()
            return BinOp("^", base, self.unary())
        return base

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.take()
            return Num(float(t.text))
        if t.kind == "name":
            self.take()
            if self.tok.kind == "op" and self.tok.text == "(":
                if t.text not in _FUNCTIONS:
                    raise ExpressionError(f"unknown function {t.text!r}", t.col)
                self.take()
                args = [self.expr()]
                while self.tok.kind == "op" and self.tok.text == ",":
                    self.take()
                    args.append(self.expr())
                self.expect(")")
                _, lo, hi = _FUNCTIONS[t.text]
                if len(args) < lo or (hi is not None and len(args) > hi):
                    want = str(lo) if hi == lo else f"at least {lo}"
                    raise ExpressionError(
                        f"{t.text}() takes {want} argument(s), got {len(args)}", t.col
                    )
                return Call(t.text, tuple(args))
            if t.text != "k":
                raise ExpressionError(f"unknown identifier {t.text!r} (only 'k' is allowed)", t.col)
            return Var()
        if t.kind == "op" and t.text == "(":
            self.take()
            node = self.expr()
            self.expect(")")
            return node
        found = "end of expression" if t.kind == "end" else repr(t.text)
        raise ExpressionError(f"unexpected {found}", t.col)


@dataclass(frozen=True)
class Expression:
    """A parsed expression; call it with the generation index."""

    source: str
    tree: object

    def __call__(self, k: int) -> float:
        try:
            return float(self.tree(k))
        except (ZeroDivisionError, ValueError, OverflowError) as exc:
            raise ArithmeticError(f"evaluating {self.source!r} at k={k}: {exc}") from None

    @property
    def is_constant(self) -> bool:
        return _constant(self.tree)


def _constant(node) -> bool:
    if isinstance(node, Var):
        return False
    if isinstance(node, Num):
        return True
    if isinstance(node, Neg):
        return _constant(node.arg)
    if isinstance(node, BinOp):
        return _constant(node.left) and _constant(node.right)
    return all(_constant(a) for a in node.args)


def parse_expression(text) -> Expression:
    """Parse ``text``; plain numbers are accepted as constants."""
    if isinstance(text, bool):
        raise ExpressionError("booleans are not expressions", 1)
    if isinstance(text, (int, float)):
        return Expression(repr(text), Num(float(text)))
    if not isinstance(text, str):
        raise ExpressionError(f"expected a string or number, got {type(text).__name__}", 1)
    return Expression(text, _Parser(text).parse())
