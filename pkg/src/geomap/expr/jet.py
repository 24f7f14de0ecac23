"""Second-order forward-mode evaluation of expressions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DimensionMismatchError, ExprDomainError
from . import backend
from .ast import Expr
from .program import ERROR_MESSAGES, Program, compile_exprs, describe_instruction


@dataclass(frozen=True)
class JetValue:
    """Value, gradient and Hessian of a scalar expression at one point.

    The Hessian is held as its packed upper triangle (row-major, ``k <= l``)
    so symmetry is exact; :attr:`hess` expands it.
    """

    value: float
    grad: np.ndarray
    hess_packed: np.ndarray
    nondifferentiable: bool = False

    @property
    def hess(self):
        return unpack_symmetric(self.hess_packed, len(self.grad))


def unpack_symmetric(packed, n):
    """Expand packed upper triangles (last axis) into full symmetric ``n x n`` blocks."""
    packed = np.asarray(packed)
    out = np.empty(packed.shape[:-1] + (n, n))
    iu, ju = np.triu_indices(n)
    out[..., iu, ju] = packed
    out[..., ju, iu] = packed
    return out


def run_program(program: Program, points, order=2):
    """Evaluate all outputs of ``program`` at ``points`` (shape ``(P, n)``).

    Returns ``(val, grad, hess, flags)`` with ``val`` of shape ``(P, K)``,
    ``grad`` ``(P, K, n)``, ``hess`` ``(P, K, n, n)`` (``None`` below order 2)
    and per-point non-differentiability ``flags``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[1] != program.dimension:
        raise DimensionMismatchError(
            f"point has {pts.shape[1]} coordinates, expected {program.dimension}"
        )
    val, grad, hess, flags, status, err_instr, err_point = backend.kernel().eval_program(
        program.ops,
        program.arg_a,
        program.arg_b,
        program.consts,
        program.outputs,
        pts,
        order,
    )
    if status:
        raise ExprDomainError(
            ERROR_MESSAGES[status],
            subexpr=describe_instruction(program, err_instr),
            point=pts[err_point],
        )
    hess_full = unpack_symmetric(hess, program.dimension) if order >= 2 else None
    return val, grad, hess_full, flags.astype(bool)


def eval_jet(ast: Expr, point) -> JetValue:
    """Exact value, gradient and Hessian of ``ast`` at ``point``."""
    point = np.asarray(point, dtype=np.float64).reshape(-1)
    if point.shape[0] != ast.dimension:
        raise DimensionMismatchError(
            f"point has {point.shape[0]} coordinates, expected {ast.dimension}"
        )
    program = compile_exprs([ast])
    val, grad, hess, flags, status, err_instr, err_point = backend.kernel().eval_program(
        program.ops,
        program.arg_a,
        program.arg_b,
        program.consts,
        program.outputs,
        point[None, :],
        2,
    )
    if status:
        raise ExprDomainError(
            ERROR_MESSAGES[status],
            subexpr=describe_instruction(program, err_instr),
            point=point,
        )
    return JetValue(
        value=float(val[0, 0]),
        grad=grad[0, 0].copy(),
        hess_packed=hess[0, 0].copy(),
        nondifferentiable=bool(flags[0]),
    )
