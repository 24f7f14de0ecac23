"""Semigeodesic charts built by shooting unit-normal geodesics off a hypersurface.

``Phi(t, u)`` is the point reached at parameter ``t`` along the geodesic that
starts at ``sigma(u)`` with the unit normal ``N(u)``.  In the coordinates
``(t, u)`` the metric takes the form ``e dt^2 + g_ab du^a du^b`` with
``e = sign g(N, N)``; the chart is verified by pulling ``g`` back through
lattice derivatives of ``Phi``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import (
    CausticError,
    GeodesicLeftDomainError,
    IsotropicNormalError,
    PreconditionError,
)
from .expr import compile_exprs, run_program
from .geodesics import COMPLETE, GeodesicState, Trajectory, fd_first, integrate_geodesic
from .geometry import _as_expr, metric_jet
from .reports import csv_text

ISOTROPY_FLOOR = 1e-10
RANK_FLOOR = 1e-12
CAUSTIC_FLOOR = 1e-8
BASE_TOL = 1e-10
GAMMA_TOL = 1e-6
METRIC_TOL = 1e-7
SHOOT_REFINE = 10


def max_workers():
    """Thread cap from ``GEOMAP_THREADS`` (default: CPU count, at most 8)."""
    env = os.environ.get("GEOMAP_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return min(8, os.cpu_count() or 1)


class HypersurfaceParam:
    """``sigma(u)``: ``n`` expressions in the ``n-1`` parameters.

    Parameters are written ``x1 .. x{n-1}`` in the expressions and stand for
    ``u1 .. u{n-1}``.  ``reference`` fixes the orientation of the normal
    (default: the first coordinate axis).
    """

    def __init__(self, components, base, reference=None):
        comps = list(components)
        n = len(comps)
        if n < 2:
            raise ValueError("a hypersurface needs n >= 2")
        self.dimension = n
        self.exprs = tuple(_as_expr(c, n - 1) for c in comps)
        self.base = tuple(float(v) for v in base)
        if len(self.base) != n - 1:
            raise ValueError(f"base parameter point must have {n - 1} entries")
        ref = np.eye(n)[0] if reference is None else np.asarray(reference, dtype=float)
        if ref.shape != (n,):
            raise ValueError("reference direction must have n entries")
        self.reference = ref
        self._program = compile_exprs(self.exprs)

    def evaluate(self, u):
        """Points ``(P, n)`` and tangent columns ``(P, n, n-1)``."""
        U = np.atleast_2d(np.asarray(u, dtype=float))
        val, grad, _, _ = run_program(self._program, U, 1)
        return val, grad


def _cofactor_normal(T):
    """Covector annihilating the ``n-1`` columns of ``T`` (generalized cross product)."""
    P, n, _ = T.shape
    nu = np.empty((P, n))
    for i in range(n):
        nu[:, i] = (-1) ** i * np.linalg.det(np.delete(T, i, axis=1))
    return nu


def unit_normal_batch(g, sigma, u):
    """``(N, e, X, T)`` at many parameter points."""
    if sigma.dimension != g.dimension:
        raise ValueError("hypersurface and metric dimensions differ")
    X, T = sigma.evaluate(u)
    nu = _cofactor_normal(T)
    scale = np.prod(np.linalg.norm(T, axis=1), axis=1)
    bad = np.flatnonzero(~(np.linalg.norm(nu, axis=1) > RANK_FLOOR * scale))
    if bad.size:
        raise PreconditionError(f"hypersurface parametrization drops rank at u = "
                                f"{np.atleast_2d(u)[bad[0]].tolist()}")
    ginv = np.linalg.inv(metric_jet(g, X, 0).val)
    N = np.einsum("pij,pj->pi", ginv, nu)
    q = np.einsum("pi,pi->p", nu, N)
    floor = ISOTROPY_FLOOR * np.sum(nu * nu, axis=1) * np.max(np.abs(ginv), axis=(1, 2))
    bad = np.flatnonzero(~(np.abs(q) > floor))
    if bad.size:
        k = bad[0]
        raise IsotropicNormalError(
            f"normal is isotropic at u = {np.atleast_2d(u)[k].tolist()}: |g(N,N)| = {abs(q[k]):.3e}"
        )
    N = N / np.sqrt(np.abs(q))[:, None]
    s = N @ sigma.reference
    weak = np.abs(s) <= 1e-12 * np.linalg.norm(N, axis=1)
    if np.any(weak):
        lead = N[np.arange(len(N)), np.argmax(np.abs(N), axis=1)]
        s = np.where(weak, lead, s)
    N = np.where((s < 0)[:, None], -N, N)
    return N, np.sign(q).astype(int), X, T


def unit_normal(g, sigma, u):
    """Unit ``g``-normal of the hypersurface at parameter ``u``."""
    N, _, _, _ = unit_normal_batch(g, sigma, u)
    return N[0]


@dataclass(frozen=True)
class Lattice:
    """``(t, u)`` lattice: spacings and ``2 ku + 1`` nodes per ``u`` axis."""

    dt: float
    du: float
    ku: int = 4

    def refined(self):
        return Lattice(self.dt / 2, self.du / 2, 2 * self.ku)


@dataclass(frozen=True, eq=False)
class SemigeodesicChart:
    g: object
    sigma: HypersurfaceParam
    t: np.ndarray
    u_axes: tuple
    positions: np.ndarray
    velocities: np.ndarray
    jacobian: np.ndarray
    metric: np.ndarray
    e: int
    base_index: tuple
    base_metric: np.ndarray
    lattice: Lattice

    @property
    def dimension(self):
        return self.positions.shape[-1]

    def coordinate_curve(self, u_index):
        """The ``t``-line through lattice node ``u_index`` as a trajectory."""
        sl = (slice(None),) + tuple(u_index)
        return Trajectory(self.t.copy(), self.positions[sl].copy(), self.velocities[sl].copy(),
                          self.lattice.dt)

    def to_csv(self):
        n = self.dimension
        m = n - 1
        iu = np.triu_indices(n)
        header = (["t"] + [f"u{a + 1}" for a in range(m)] + [f"X{i + 1}" for i in range(n)]
                  + [f"g{i + 1}{j + 1}" for i, j in zip(*iu)])
        rows = []
        for idx in np.ndindex(self.positions.shape[:-1]):
            u = [self.u_axes[a][idx[1 + a]] for a in range(m)]
            rows.append(np.concatenate([[self.t[idx[0]]], u, self.positions[idx],
                                        self.metric[idx][iu]]))
        return csv_text(header, rows)


def _shoot(g, x, v, span, step):
    traj = integrate_geodesic(g, GeodesicState(x, v, 0.0), span, step)
    if traj.termination != COMPLETE:
        raise GeodesicLeftDomainError(
            f"normal geodesic from {list(map(float, x))} stopped at t = {traj.params[-1]:.6g}: "
            f"{traj.termination}{': ' + traj.message if traj.message else ''}"
        )
    return traj.positions[::SHOOT_REFINE], traj.velocities[::SHOOT_REFINE]


def _shoot_both(g, x, v, k_lo, k_hi, dt):
    n = len(x)
    step = dt / SHOOT_REFINE
    pos = [np.asarray(x, dtype=float)[None, :]]
    vel = [np.asarray(v, dtype=float)[None, :]]
    if k_lo > 0:
        p, w = _shoot(g, x, -v, k_lo * dt, step)
        pos.insert(0, p[1:][::-1])
        vel.insert(0, -w[1:][::-1])
    if k_hi > 0:
        p, w = _shoot(g, x, v, k_hi * dt, step)
        pos.append(p[1:])
        vel.append(w[1:])
    P, V = np.concatenate(pos), np.concatenate(vel)
    if len(P) != k_lo + k_hi + 1:
        raise RuntimeError("lattice sampling mismatch")
    return P.reshape(-1, n), V.reshape(-1, n)


def build_semigeodesic_chart(g, sigma, t_range, lattice: Lattice) -> SemigeodesicChart:
    """Shoot normal geodesics over the lattice and pull ``g`` back to ``(t, u)``.

    ``t_range = (t_lo, t_hi)`` must contain 0; the ``t`` nodes are the
    multiples of ``lattice.dt`` inside it and the ``u`` nodes are centred on
    ``sigma.base``.  Derivatives of ``Phi`` are 4th-order lattice differences.
    """
    t_lo, t_hi = map(float, t_range)
    if not t_lo <= 0.0 <= t_hi:
        raise ValueError("t_range must contain 0")
    dt, du, ku = float(lattice.dt), float(lattice.du), int(lattice.ku)
    if dt <= 0 or du <= 0:
        raise ValueError("lattice spacings must be positive")
    k_lo = int(math.floor(-t_lo / dt + 1e-9))
    k_hi = int(math.floor(t_hi / dt + 1e-9))
    if k_lo + k_hi + 1 < 5 or ku < 2:
        raise ValueError("lattice needs at least 5 nodes along every axis")
    n = g.dimension
    m = n - 1
    t = dt * np.arange(-k_lo, k_hi + 1)
    offsets = du * np.arange(-ku, ku + 1)
    u_axes = tuple(sigma.base[a] + offsets for a in range(m))
    shape_u = (2 * ku + 1,) * m
    U = np.stack(np.meshgrid(*u_axes, indexing="ij"), axis=-1).reshape(-1, m)

    N, e, X, _ = unit_normal_batch(g, sigma, U)
    if np.any(e != e[0]):
        raise IsotropicNormalError("normal changes causal type across the lattice")
    inside = g.domain.contains(X)
    if not np.all(inside):
        raise GeodesicLeftDomainError(f"hypersurface leaves the chart at {X[~inside][0].tolist()}")

    with ThreadPoolExecutor(max_workers=max_workers()) as pool:
        shots = list(pool.map(lambda q: _shoot_both(g, X[q], N[q], k_lo, k_hi, dt), range(len(U))))
    pos = np.stack([s[0] for s in shots], axis=1).reshape((len(t),) + shape_u + (n,))
    vel = np.stack([s[1] for s in shots], axis=1).reshape((len(t),) + shape_u + (n,))

    cols = [fd_first(pos, dt, axis=0)] + [fd_first(pos, du, axis=1 + a) for a in range(m)]
    J = np.stack(cols, axis=-1)  # [..., i, c] = d Phi^i / d y^c
    base_index = (k_lo,) + (ku,) * m
    # cell volume scale taken at the base node, where the frame is the hypersurface's own
    vol = float(np.prod(np.linalg.norm(J[base_index], axis=0)))
    det = np.linalg.det(J)
    bad = np.argwhere(~(np.abs(det) >= CAUSTIC_FLOOR * vol))
    if bad.size:
        idx = tuple(bad[0])
        raise CausticError(
            f"Jacobian of the normal exponential map degenerates at t = {t[idx[0]]:.6g}, "
            f"u = {[float(u_axes[a][idx[1 + a]]) for a in range(m)]}"
        )
    gval = metric_jet(g, pos.reshape(-1, n), 0).val.reshape(pos.shape[:-1] + (n, n))
    G = np.einsum("...ic,...ij,...jd->...cd", J, gval, J)

    q0 = int(np.ravel_multi_index((ku,) * m, shape_u))
    # at t = 0 the frame is known exactly: dPhi/dt = N and dPhi/du = d sigma/du
    Xb, Tb = sigma.evaluate(np.asarray(sigma.base)[None, :])
    frame = np.concatenate([N[q0][:, None], Tb[0]], axis=1)
    gb = metric_jet(g, Xb, 0).val[0]
    base_metric = frame.T @ gb @ frame
    return SemigeodesicChart(g, sigma, t, u_axes, pos, vel, J, G, int(e[0]), base_index,
                             base_metric, Lattice(dt, du, ku))


def base_normalization(base_metric, e):
    """Linear change of the ``u`` coordinates bringing ``g_ij(0)`` to ``e_i d_ij``.

    Returns ``(L, signs)`` with ``L = diag(1, Q |lambda|^{-1/2})`` built from
    the eigendecomposition of the ``g_ab(0)`` block.  Eigenvectors are
    sign-fixed (largest component positive) and ordered by eigenvalue, ties
    broken lexicographically.
    """
    n = base_metric.shape[0]
    lam, Q = np.linalg.eigh(base_metric[1:, 1:])
    lead = Q[np.argmax(np.abs(Q), axis=0), np.arange(n - 1)]
    Q = Q * np.where(lead < 0, -1.0, 1.0)
    order = sorted(range(n - 1), key=lambda k: (round(float(lam[k]), 12), tuple(-Q[:, k])))
    lam, Q = lam[order], Q[:, order]
    L = np.zeros((n, n))
    L[0, 0] = 1.0
    L[1:, 1:] = Q / np.sqrt(np.abs(lam))
    return L, np.concatenate([[e], np.sign(lam)]).astype(int)


@dataclass(frozen=True, eq=False)
class SemigeodesicReport:
    g11_defect: float
    g1a_defect: float
    gamma_1_11: float
    gamma_1_1a: float
    gamma_a_11: float
    base_defect: float
    e: int
    signs: tuple
    normalization: np.ndarray
    tolerances: dict

    @property
    def passed(self):
        tol = self.tolerances
        return (
            self.g11_defect < tol["metric"]
            and self.g1a_defect < tol["metric"]
            and max(self.gamma_1_11, self.gamma_1_1a, self.gamma_a_11) < tol["gamma"]
            and self.base_defect < tol["base"]
        )

    def to_json(self):
        return {
            "g11_defect": self.g11_defect,
            "g1a_defect": self.g1a_defect,
            "gamma_1_11": self.gamma_1_11,
            "gamma_1_1a": self.gamma_1_1a,
            "gamma_a_11": self.gamma_a_11,
            "base_defect": self.base_defect,
            "e": self.e,
            "signs": list(self.signs),
            "normalization": self.normalization.tolist(),
            "passed": self.passed,
            "tolerances": dict(self.tolerances),
        }


def lattice_christoffel(chart):
    """Christoffel symbols of the pulled-back metric from lattice differences."""
    G = chart.metric
    m = chart.dimension - 1
    steps = [chart.lattice.dt] + [chart.lattice.du] * m
    D = np.stack([fd_first(G, steps[c], axis=c) for c in range(m + 1)], axis=-3)
    # D[..., k, i, j] = d_k G_ij ; L[..., k, i, j] = 1/2 (d_i G_jk + d_j G_ik - d_k G_ij)
    L = 0.5 * (np.einsum("...ijk->...kij", D) + np.einsum("...jik->...kij", D) - D)
    return np.einsum("...hk,...kij->...hij", np.linalg.inv(G), L)


def verify_semigeodesic(chart: SemigeodesicChart, tolerance=METRIC_TOL, gamma_tolerance=GAMMA_TOL,
                        base_tolerance=BASE_TOL) -> SemigeodesicReport:
    G = chart.metric
    gamma = lattice_christoffel(chart)
    L, signs = base_normalization(chart.base_metric, chart.e)
    Gn = L.T @ chart.base_metric @ L
    return SemigeodesicReport(
        g11_defect=float(np.max(np.abs(G[..., 0, 0] - chart.e))),
        g1a_defect=float(np.max(np.abs(G[..., 0, 1:]))),
        gamma_1_11=float(np.max(np.abs(gamma[..., 0, 0, 0]))),
        gamma_1_1a=float(np.max(np.abs(gamma[..., 0, 0, 1:]))),
        gamma_a_11=float(np.max(np.abs(gamma[..., 1:, 0, 0]))),
        base_defect=float(np.max(np.abs(Gn - np.diag(signs)))),
        e=chart.e,
        signs=tuple(int(s) for s in signs),
        normalization=L,
        tolerances={"metric": tolerance, "gamma": gamma_tolerance, "base": base_tolerance},
    )
