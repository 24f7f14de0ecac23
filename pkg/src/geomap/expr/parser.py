"""Recursive-descent parser for the metric component language.

Grammar::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := '-' factor | base ('^' ['-'] intliteral)?
    base   := number | var | func '(' expr ')' | '(' expr ')'
    var    := 'x' digit+
    func   := sin | cos | exp | ln | sqrt | abs

Unary minus binds looser than ``^`` so that ``-x1^2`` means ``-(x1^2)``.
"""

from __future__ import annotations

import re

from ..errors import ExprSyntaxError, VariableRangeError
from .ast import UNARY_FUNCS, Binary, Const, Expr, Pow, Unary, Var

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?)
  | (?P<var>x\d+)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def tokenize(src):
    tokens = []
    pos = 0
    while pos < len(src):
        m = _TOKEN_RE.match(src, pos)
        if m is None:
            raise ExprSyntaxError(f"unexpected character {src[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("end", "", len(src)))
    return tokens


class _Parser:
    def __init__(self, src, dimension):
        self.tokens = tokenize(src)
        self.i = 0
        self.dimension = dimension

    @property
    def tok(self):
        return self.tokens[self.i]

    def advance(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text):
        kind, value, pos = self.tok
        if value != text or kind == "end":
            got = "end of input" if kind == "end" else repr(value)
            raise ExprSyntaxError(f"expected {text!r}, got {got}", pos)
        self.advance()

    def parse(self):
        node = self.expr()
        kind, value, pos = self.tok
        if kind != "end":
            raise ExprSyntaxError(f"unexpected {value!r}", pos)
        return node

    def expr(self):
        node = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.advance()[1]
            node = Binary(op, node, self.term())
        return node

    def term(self):
        node = self.factor()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.advance()[1]
            node = Binary(op, node, self.factor())
        return node

    def factor(self):
        if self.tok[:2] == ("op", "-"):
            self.advance()
            return Unary("neg", self.factor())
        node = self.base()
        if self.tok[:2] == ("op", "^"):
            self.advance()
            sign = 1
            if self.tok[:2] == ("op", "-"):
                self.advance()
                sign = -1
            kind, value, pos = self.tok
            if kind != "number" or not value.isdigit():
                raise ExprSyntaxError("exponent must be an integer literal", pos)
            self.advance()
            node = Pow(node, sign * int(value))
        return node

    def base(self):
        kind, value, pos = self.tok
        if kind == "number":
            self.advance()
            return Const(float(value))
        if kind == "var":
            self.advance()
            index = int(value[1:])
            if not 1 <= index <= self.dimension:
                raise VariableRangeError(
                    f"variable {value} out of range for dimension {self.dimension} "
                    f"(position {pos})"
                )
            return Var(index)
        if kind == "name":
            if value not in UNARY_FUNCS:
                raise ExprSyntaxError(f"unknown function {value!r}", pos)
            self.advance()
            self.expect("(")
            arg = self.expr()
            self.expect(")")
            return Unary(value, arg)
        if (kind, value) == ("op", "("):
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        got = "end of input" if kind == "end" else repr(value)
        raise ExprSyntaxError(f"unexpected {got}", pos)


def parse_expr(src: str, dimension: int) -> Expr:
    """Parse ``src`` into an :class:`Expr` over ``x1..x{dimension}``."""
    if int(dimension) < 1:
        raise ValueError("dimension must be >= 1")
    return Expr(_Parser(src, int(dimension)).parse(), int(dimension))
