"""Flattening of expression trees into register programs.

A program is a straight-line list of instructions; instruction ``r`` writes
register ``r``.  Several expressions compile into one program that shares
identical subtrees, and ``outputs`` names the register of each expression.
Both kernel backends execute exactly this representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ast import Binary, Const, Expr, Pow, Unary, Var, to_source

OP_CONST = 0
OP_VAR = 1
OP_NEG = 2
OP_ADD = 3
OP_SUB = 4
OP_MUL = 5
OP_DIV = 6
OP_POW = 7
OP_SIN = 8
OP_COS = 9
OP_EXP = 10
OP_LN = 11
OP_SQRT = 12
OP_ABS = 13

_BINARY = {"+": OP_ADD, "-": OP_SUB, "*": OP_MUL, "/": OP_DIV}
_UNARY = {
    "neg": OP_NEG,
    "sin": OP_SIN,
    "cos": OP_COS,
    "exp": OP_EXP,
    "ln": OP_LN,
    "sqrt": OP_SQRT,
    "abs": OP_ABS,
}

# kernel status codes
ERR_OK = 0
ERR_DIV_ZERO = 1
ERR_LN_DOMAIN = 2
ERR_SQRT_DOMAIN = 3
ERR_POW_ZERO = 4

ERROR_MESSAGES = {
    ERR_DIV_ZERO: "division by zero",
    ERR_LN_DOMAIN: "ln of non-positive argument",
    ERR_SQRT_DOMAIN: "sqrt of non-positive argument",
    ERR_POW_ZERO: "negative power of zero",
}


@dataclass(frozen=True, eq=False)
class Program:
    ops: np.ndarray
    arg_a: np.ndarray
    arg_b: np.ndarray
    consts: np.ndarray
    outputs: np.ndarray
    dimension: int
    labels: tuple = field(repr=False)

    @property
    def size(self):
        return len(self.ops)


def compile_exprs(exprs) -> Program:
    exprs = list(exprs)
    if not exprs:
        raise ValueError("nothing to compile")
    dim = exprs[0].dimension
    for e in exprs:
        if not isinstance(e, Expr):
            raise TypeError(f"expected Expr, got {type(e).__name__}")
        if e.dimension != dim:
            raise ValueError("all expressions in a program must share a dimension")

    ops, arg_a, arg_b, consts, labels = [], [], [], [], []
    memo = {}

    def emit(node):
        reg = memo.get(node)
        if reg is not None:
            return reg
        a = b = 0
        c = 0.0
        if isinstance(node, Const):
            op, c = OP_CONST, float(node.value)
        elif isinstance(node, Var):
            op, a = OP_VAR, node.index - 1
        elif isinstance(node, Unary):
            op, a = _UNARY[node.op], emit(node.arg)
        elif isinstance(node, Binary):
            op = _BINARY[node.op]
            a = emit(node.left)
            b = emit(node.right)
        elif isinstance(node, Pow):
            op, a, b = OP_POW, emit(node.base), node.exponent
        else:
            raise TypeError(f"not an expression node: {node!r}")
        ops.append(op)
        arg_a.append(a)
        arg_b.append(b)
        consts.append(c)
        labels.append(node)
        reg = len(ops) - 1
        memo[node] = reg
        return reg

    outputs = [emit(e.root) for e in exprs]
    return Program(
        ops=np.asarray(ops, dtype=np.int32),
        arg_a=np.asarray(arg_a, dtype=np.int32),
        arg_b=np.asarray(arg_b, dtype=np.int32),
        consts=np.asarray(consts, dtype=np.float64),
        outputs=np.asarray(outputs, dtype=np.int32),
        dimension=dim,
        labels=tuple(labels),
    )


def describe_instruction(program: Program, index: int) -> str:
    return to_source(program.labels[index])
