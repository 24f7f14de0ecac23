"""Geodesic integration and the pre-geodesic (reparametrized geodesic) test."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NullTangentError, TooFewPointsError
from .expr import backend
from .expr.program import ERROR_MESSAGES, describe_instruction
from .geometry import christoffel_from_jet, metric_jet
from .reports import ResidualReport, csv_text

DEFAULT_STEP = 1e-3
NULL_FLOOR = 1e-10

COMPLETE = "span complete"
LEFT_DOMAIN = "left domain"
ERROR = "error"

_STATUS = {0: COMPLETE, 1: LEFT_DOMAIN, 2: ERROR, 3: ERROR}


@dataclass(frozen=True)
class GeodesicState:
    position: tuple
    velocity: tuple
    parameter: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "velocity", tuple(float(v) for v in self.velocity))
        object.__setattr__(self, "parameter", float(self.parameter))
        if len(self.position) != len(self.velocity):
            raise ValueError("position and velocity must have the same length")


@dataclass(frozen=True, eq=False)
class Trajectory:
    params: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    step: float
    termination: str = COMPLETE
    message: str = ""

    def __len__(self):
        return len(self.params)

    @property
    def dimension(self):
        return self.positions.shape[1]

    @property
    def states(self):
        return [GeodesicState(x, v, t)
                for t, x, v in zip(self.params, self.positions, self.velocities)]

    @classmethod
    def from_curve(cls, params, positions, velocities=None):
        """Wrap a sampled curve; velocities default to 4th-order differences."""
        params = np.asarray(params, dtype=float)
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        if velocities is None:
            h = _uniform_step(params)
            velocities = fd_first(positions, h)
        return cls(params, positions, np.asarray(velocities, dtype=float),
                   float(params[1] - params[0]) if len(params) > 1 else 0.0)

    def reversed_params(self):
        return Trajectory(-self.params[::-1], self.positions[::-1], -self.velocities[::-1],
                          self.step, self.termination, self.message)

    def to_csv(self):
        n = self.dimension
        header = ["t"] + [f"x{k + 1}" for k in range(n)] + [f"v{k + 1}" for k in range(n)]
        rows = (np.concatenate([[t], x, v])
                for t, x, v in zip(self.params, self.positions, self.velocities))
        return csv_text(header, rows)


def integrate_geodesic(g, s0: GeodesicState, t_end, step=DEFAULT_STEP) -> Trajectory:
    """Integrate ``x'' + G(x'', x') = 0`` with classical fixed-step RK4.

    The span ``t_end - s0.parameter`` is split into equal steps no longer
    than ``step``.  Leaving the chart or failing an evaluation ends the
    trajectory early and is recorded in ``termination``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x0 = np.asarray(s0.position, dtype=float)
    v0 = np.asarray(s0.velocity, dtype=float)
    if x0.shape[0] != g.dimension:
        raise ValueError("initial state dimension does not match the metric")
    if not g.domain.contains(x0)[0]:
        raise ValueError(f"initial position {x0.tolist()} is outside the chart domain")
    span = float(t_end) - s0.parameter
    if span <= 0:
        raise ValueError("t_end must exceed the initial parameter")
    nsteps = max(1, math.ceil(span / step - 1e-9))
    h = span / nsteps
    prog = g.program
    ts, xs, vs, count, status, err_instr, err_code = backend.kernel().rk4_geodesic(
        prog.ops, prog.arg_a, prog.arg_b, prog.consts, prog.outputs, g.sym,
        x0, v0, s0.parameter, h, nsteps, g.domain.lower, g.domain.upper,
    )
    message = ""
    if status == 2:
        message = (f"{ERROR_MESSAGES.get(int(err_code), 'evaluation error')}"
                   f" in '{describe_instruction(prog, err_instr)}'")
    elif status == 3:
        message = "degenerate metric"
    return Trajectory(ts[:count].copy(), xs[:count].copy(), vs[:count].copy(), h,
                      _STATUS[int(status)], message)


def _uniform_step(params):
    params = np.asarray(params, dtype=float)
    if len(params) < 2:
        raise TooFewPointsError("need at least two samples")
    d = np.diff(params)
    h = d[0]
    if h <= 0 or np.max(np.abs(d - h)) > 1e-9 * abs(h):
        raise ValueError("curve samples must be uniformly spaced in the parameter")
    return float(h)


def fd_first(f, h, axis=0):
    """4th-order first derivative along ``axis`` (one-sided 5-point stencils at the ends)."""
    f = np.moveaxis(np.asarray(f, dtype=float), axis, 0)
    N = f.shape[0]
    if N < 5:
        raise TooFewPointsError(f"need at least 5 samples, got {N}")
    d = np.empty_like(f)
    d[2:-2] = (f[:-4] - 8.0 * f[1:-3] + 8.0 * f[3:-1] - f[4:]) / (12.0 * h)
    d[0] = (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * h)
    d[1] = (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / (12.0 * h)
    d[-1] = (25.0 * f[-1] - 48.0 * f[-2] + 36.0 * f[-3] - 16.0 * f[-4] + 3.0 * f[-5]) / (12.0 * h)
    d[-2] = (3.0 * f[-1] + 10.0 * f[-2] - 18.0 * f[-3] + 6.0 * f[-4] - f[-5]) / (12.0 * h)
    return np.moveaxis(d, 0, axis)


def pregeodesic_residual(curve: Trajectory, h) -> ResidualReport:
    """How far ``curve`` is from being a reparametrized geodesic of ``h``.

    With ``A = x'' + G(h)(x', x')`` the residual at each sample is the part of
    ``A`` orthogonal (w.r.t. ``h``) to the tangent, relative to
    ``|A| + |x'|^2``.  ``x'`` is the stored velocity and ``x''`` its
    4th-order difference quotient.
    """
    if len(curve) < 5:
        raise TooFewPointsError(f"pre-geodesic test needs >= 5 states, got {len(curve)}")
    dt = _uniform_step(curve.params)
    xd = curve.velocities
    xdd = fd_first(xd, dt)
    J = metric_jet(h, curve.positions, order=1)
    gamma = christoffel_from_jet(J)
    A = xdd + np.einsum("phij,pi,pj->ph", gamma, xd, xd)
    hv = np.einsum("pij,pi,pj->p", J.val, xd, xd)
    speed2 = np.sum(xd * xd, axis=1)
    hnorm = np.max(np.abs(J.val), axis=(1, 2))
    null = np.abs(hv) < NULL_FLOOR * speed2 * hnorm
    if np.any(null):
        k = int(np.flatnonzero(null)[0])
        raise NullTangentError(
            f"tangent is null for the test metric at parameter {curve.params[k]:.6g}"
        )
    hA = np.einsum("pij,pi,pj->p", J.val, A, xd)
    perp = A - (hA / hv)[:, None] * xd
    denom = np.linalg.norm(A, axis=1) + speed2
    with np.errstate(invalid="ignore", divide="ignore"):
        res = np.where(denom > 0, np.linalg.norm(perp, axis=1) / denom, 0.0)
    return ResidualReport(
        "PREGEO",
        curve.positions,
        res,
        "|A - h(A,v)/h(v,v) v| / (|A| + |v|^2)",
        grid={"kind": "curve", "samples": len(curve), "step": dt},
    )


def energy(g, traj: Trajectory):
    """``g(x', x')`` along a trajectory."""
    gval = metric_jet(g, traj.positions, order=0).val
    return np.einsum("pij,pi,pj->p", gval, traj.velocities, traj.velocities)


__all__ = [
    "GeodesicState",
    "Trajectory",
    "energy",
    "fd_first",
    "integrate_geodesic",
    "pregeodesic_residual",
]
