"""Expression tree nodes and the printer."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

UNARY_FUNCS = ("sin", "cos", "exp", "ln", "sqrt", "abs")
BINARY_OPS = ("+", "-", "*", "/")


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 1-based


@dataclass(frozen=True)
class Unary:
    op: str  # "neg" or one of UNARY_FUNCS
    arg: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int


Node = Union[Const, Var, Unary, Binary, Pow]


@dataclass(frozen=True)
class Expr:
    """A parsed scalar expression over the chart coordinates ``x1..xn``."""

    root: Node
    dimension: int

    def __str__(self):
        return to_source(self.root)

    def variables(self):
        return sorted(_collect_vars(self.root))


def _collect_vars(node, acc=None):
    acc = set() if acc is None else acc
    if isinstance(node, Var):
        acc.add(node.index)
    elif isinstance(node, Unary):
        _collect_vars(node.arg, acc)
    elif isinstance(node, Binary):
        _collect_vars(node.left, acc)
        _collect_vars(node.right, acc)
    elif isinstance(node, Pow):
        _collect_vars(node.base, acc)
    return acc


def to_source(node: Node) -> str:
    """Print ``node`` fully parenthesized; re-parsing yields the same tree."""
    if isinstance(node, Const):
        return repr(float(node.value))
    if isinstance(node, Var):
        return f"x{node.index}"
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{to_source(node.arg)})"
        return f"{node.op}({to_source(node.arg)})"
    if isinstance(node, Binary):
        return f"({to_source(node.left)} {node.op} {to_source(node.right)})"
    if isinstance(node, Pow):
        return f"({to_source(node.base)})^{node.exponent}"
    raise TypeError(f"not an expression node: {node!r}")
