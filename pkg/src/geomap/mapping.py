"""Geodesic-mapping criteria for a metric pair ``(g, gbar)`` on one chart.

The pair is geodesically related iff ``nabla_k gbar_ij = 2 psi_k gbar_ij +
psi_i gbar_jk + psi_j gbar_ik`` with ``psi = dPsi`` and
``Psi = ln|det gbar / det g| / (2(n+1))``.  Equivalently the tensor
``a^{ij} = exp(2 Psi) gbar^{ij}`` (and its ``g``-lowering ``a_ij``) solves the
linear system ``nabla_k a_ij = lambda_i g_jk + lambda_j g_ik`` with
``lambda^i = -psi_a a^{ai}``; ``gbar`` is recovered from ``(g, a)`` by
inverting the raised ``a`` and rescaling.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatchError, GridSampledFieldError, ReconstructionSingularError
from .geometry import (
    DEGENERACY_FLOOR,
    Grid,
    check_nondegenerate,
    christoffel_from_jet,
    metric_jet,
    nabla_lower,
    nabla_upper,
)
from .reports import ResidualReport
from .tensorjet import Jet, jeinsum

EPS_LC = 1e-6
EPS_PSI = 1e-7
EPS_H = 1e-8

NOT_GEODESIC = "not_geodesic"
NONTRIVIAL = "nontrivial_geodesic"
AFFINE = "affine"
HOMOTHETIC = "homothetic"
GEODESIC_CLASSES = (NONTRIVIAL, AFFINE, HOMOTHETIC)


def _check_pair(g, gbar):
    if g.dimension != gbar.dimension:
        raise DimensionMismatchError(
            f"metric dimensions differ: {g.dimension} vs {gbar.dimension}"
        )


def _pts(point):
    return np.atleast_2d(np.asarray(point, dtype=float))


def _grid_points(grid):
    return grid.points if isinstance(grid, Grid) else _pts(grid)


def _grid_spec(grid):
    return grid.spec if isinstance(grid, Grid) else {"kind": "points", "count": len(_pts(grid))}


def _tnorm(a):
    """Max-abs component norm over the component axes of a batched array."""
    axes = tuple(range(1, a.ndim))
    return np.max(np.abs(a), axis=axes)


def _vnorm(v):
    return np.linalg.norm(v, axis=1)


def psi_jet(g, gbar, points, order=1):
    """Jet of ``Psi``; its ``d1`` is the covector ``psi``."""
    _check_pair(g, gbar)
    n = g.dimension
    gJ = metric_jet(g, points, order)
    bJ = metric_jet(gbar, points, order)
    return (bJ.logabsdet() - gJ.logabsdet()).scale(1.0 / (2.0 * (n + 1)))


def compute_psi(g, gbar, point):
    """``(Psi, psi_i)`` at one point."""
    J = psi_jet(g, gbar, _pts(point), order=1)
    return float(J.val[0]), J.d1[0].copy()


class SinyukovField:
    """``a`` (``kind="a"``) or ``lambda`` (``kind="lambda"``) built from a pair.

    Jets are exact: derivatives flow through the metrics' expression jets.
    ``lambda`` supports order 1 at most (it already holds one derivative).
    """

    def __init__(self, g, gbar, kind="a", variance="upper"):
        _check_pair(g, gbar)
        if kind not in ("a", "lambda"):
            raise ValueError("kind must be 'a' or 'lambda'")
        if variance not in ("lower", "upper"):
            raise ValueError("variance must be 'lower' or 'upper'")
        self.g, self.gbar = g, gbar
        self.kind = kind
        self.variance = variance
        self.dimension = g.dimension

    def jet(self, points, order=1):
        pts = _pts(points)
        if self.kind == "a":
            return _a_jet(self.g, self.gbar, pts, order, self.variance)
        if order > 1:
            raise ValueError("lambda field jets are available to order 1")
        return _lambda_jet(self.g, self.gbar, pts, self.variance)


def _a_jet(g, gbar, pts, order, variance):
    n = g.dimension
    gJ = metric_jet(g, pts, order)
    bJ = metric_jet(gbar, pts, order)
    Psi = (bJ.logabsdet() - gJ.logabsdet()).scale(1.0 / (2.0 * (n + 1)))
    a_up = jeinsum(",ij->ij", Psi.scale(2.0).exp(), bJ.inv())
    if variance == "upper":
        return a_up
    return jeinsum("ia,aj->ij", jeinsum("ia,ab->ib", gJ, a_up), gJ)


def _lambda_jet(g, gbar, pts, variance):
    # psi needs one derivative more than lambda
    n = g.dimension
    gJ = metric_jet(g, pts, 2)
    bJ = metric_jet(gbar, pts, 2)
    Psi = (bJ.logabsdet() - gJ.logabsdet()).scale(1.0 / (2.0 * (n + 1)))
    psi = Jet(Psi.d1, Psi.d2, None, Psi.flags)
    a_up = jeinsum(",ij->ij", Psi.scale(2.0).exp(), bJ.inv()).truncate(1)
    lam_up = -jeinsum("a,ai->i", psi, a_up)
    if variance == "upper":
        return lam_up
    return jeinsum("ij,j->i", gJ.truncate(1), lam_up)


@dataclass(frozen=True, eq=False)
class MappingData:
    psi_scalar: float
    psi_covector: np.ndarray
    a_lower: np.ndarray
    a_upper: np.ndarray
    lambda_lower: np.ndarray
    lambda_upper: np.ndarray
    g_hat: np.ndarray | None = None

    def to_json(self):
        return {
            "Psi": float(self.psi_scalar),
            "psi": self.psi_covector.tolist(),
            "a_lower": self.a_lower.tolist(),
            "a_upper": self.a_upper.tolist(),
            "lambda_lower": self.lambda_lower.tolist(),
            "lambda_upper": self.lambda_upper.tolist(),
        }


def sinyukov_forward_batch(g, gbar, points):
    """Forward transform at many points: dict of batched arrays."""
    _check_pair(g, gbar)
    pts = _pts(points)
    gval = metric_jet(g, pts, 0).val
    bval = metric_jet(gbar, pts, 0).val
    Pj = psi_jet(g, gbar, pts, order=1)
    Psi, psi = Pj.val, Pj.d1
    e2 = np.exp(2.0 * Psi)
    binv = np.linalg.inv(bval)
    # a_ij = e^{2 Psi} gbar^{ab} g_ai g_bj ;  lambda_i = -e^{2 Psi} gbar^{ab} g_bi psi_a
    a_lower = e2[:, None, None] * np.einsum("pab,pai,pbj->pij", binv, gval, gval)
    lam_lower = -e2[:, None] * np.einsum("pab,pbi,pa->pi", binv, gval, psi)
    a_upper = e2[:, None, None] * binv
    lam_upper = -np.einsum("pa,pai->pi", psi, a_upper)
    return {
        "Psi": Psi,
        "psi": psi,
        "a_lower": a_lower,
        "a_upper": a_upper,
        "lambda_lower": lam_lower,
        "lambda_upper": lam_upper,
        "g_hat": np.exp(-2.0 * Psi)[:, None, None] * bval,
    }


def sinyukov_forward(g, gbar, point) -> MappingData:
    d = sinyukov_forward_batch(g, gbar, _pts(point))
    return MappingData(
        float(d["Psi"][0]),
        d["psi"][0],
        d["a_lower"][0],
        d["a_upper"][0],
        d["lambda_lower"][0],
        d["lambda_upper"][0],
        d["g_hat"][0],
    )


def _require_field(f, what):
    if isinstance(f, np.ndarray) or not hasattr(f, "jet"):
        raise GridSampledFieldError(
            f"{what} must be an expression- or jet-backed field, not sampled values"
        )


def trace_jet(g, a_field, points):
    """Jet of ``a^{ab} g_ab`` (or ``a_ab g^{ab}`` for a lower field)."""
    _require_field(a_field, "a_field")
    gJ = metric_jet(g, points, 1)
    aJ = a_field.jet(points, order=1)
    if a_field.variance == "upper":
        return jeinsum("ij,ij->", aJ, gJ), gJ
    return jeinsum("ij,ij->", aJ, gJ.inv()), gJ


def lambda_from_trace_batch(g, a_field, points, covariant=False):
    pts = _pts(points)
    T, gJ = trace_jet(g, a_field, pts)
    lam_lower = 0.5 * T.d1
    if covariant:
        return lam_lower
    return np.einsum("pik,pk->pi", np.linalg.inv(gJ.val), lam_lower)


def lambda_from_trace(g, a_field, point, covariant=False):
    """``lambda^i = 1/2 g^{ik} d_k(a^{ab} g_ab)``; ``covariant=True`` gives ``lambda_i``."""
    return lambda_from_trace_batch(g, a_field, _pts(point), covariant)[0]


def lambda_scale(g, gbar, points, forward=None):
    """Natural size of ``lambda`` per point: ``|a^| * max(|psi|, |Gamma|)``.

    ``lambda`` is ``a`` contracted with a covector of connection size, so
    this is the yardstick for relative comparisons, including pairs where
    ``lambda`` vanishes identically.
    """
    pts = _pts(points)
    d = forward if forward is not None else sinyukov_forward_batch(g, gbar, pts)
    gamma = christoffel_from_jet(metric_jet(g, pts, 1))
    conn = np.maximum(_vnorm(d["psi"]), np.max(np.abs(gamma), axis=(1, 2, 3)))
    return _tnorm(d["a_upper"]) * conn


def levi_civita_residual(g, gbar, grid) -> ResidualReport:
    """Normalized residual of the Levi-Civita equations over ``grid``.

    Per point: ``max_{k,i,j} |nabla_k gbar_ij - 2 psi_k gbar_ij - psi_i gbar_jk
    - psi_j gbar_ik| / (|gbar| (1 + |psi|))``, with ``nabla`` the connection of
    ``g`` and ``psi`` from the determinant formula.
    """
    _check_pair(g, gbar)
    pts = _grid_points(grid)
    n = g.dimension
    if len(pts) == 0:
        return ResidualReport("LC2", np.zeros((0, n)), [], _LC_NORM, _grid_spec(grid),
                              extra=_signature_extra(g, gbar))
    gJ = metric_jet(g, pts, 1)
    bJ = metric_jet(gbar, pts, 1)
    psi = (bJ.logabsdet() - gJ.logabsdet()).scale(1.0 / (2.0 * (n + 1))).d1
    gamma = christoffel_from_jet(gJ)
    nab = nabla_lower(bJ.val, bJ.d1, gamma)
    B = bJ.val
    rhs = (
        2.0 * np.einsum("pk,pij->pkij", psi, B)
        + np.einsum("pi,pjk->pkij", psi, B)
        + np.einsum("pj,pik->pkij", psi, B)
    )
    res = _tnorm(nab - rhs) / (_tnorm(B) * (1.0 + _vnorm(psi)))
    extra = _signature_extra(g, gbar)
    extra["flagged_points"] = int(np.sum(gJ.flags | bJ.flags))
    return ResidualReport("LC2", pts, res, _LC_NORM, _grid_spec(grid), extra=extra)


_LC_NORM = "max|residual| / (max|gbar| * (1 + |psi|))"
_SIN3_NORM = "max|residual| / (max|a_ij| + |lambda_i| * max|g_ij|)"
_SIN6_NORM = "max|residual| / (max|a^ij| + |lambda^i|)"


def _signature_extra(g, gbar):
    sg = getattr(g, "negative_count", None)
    sb = getattr(gbar, "negative_count", None)
    return {"signature_mismatch": bool(sg is not None and sb is not None and sg != sb)}


def sinyukov_residual(g, a_field, lambda_field, grid, form="both") -> ResidualReport:
    """Residual of the Sinyukov system in covariant (SIN3) and/or contravariant (SIN6) form.

    ``a_field`` and ``lambda_field`` must provide exact jets (expression
    fields or :class:`SinyukovField`); their index position is read from
    ``variance`` and converted with ``g`` as needed.  With ``form="both"`` the
    returned report is the larger of the two and carries both in ``parts``.
    """
    _require_field(a_field, "a_field")
    _require_field(lambda_field, "lambda_field")
    if form not in ("both", "SIN3", "SIN6"):
        raise ValueError("form must be 'both', 'SIN3' or 'SIN6'")
    pts = _grid_points(grid)
    spec = _grid_spec(grid)
    n = g.dimension
    if len(pts) == 0:
        empty = {t: ResidualReport(t, np.zeros((0, n)), [], "", spec) for t in ("SIN3", "SIN6")}
        return empty["SIN3"] if form != "SIN6" else empty["SIN6"]
    gJ = metric_jet(g, pts, 1)
    gamma = christoffel_from_jet(gJ)
    ginvJ = gJ.inv()
    aJ = a_field.jet(pts, order=1)
    if a_field.variance == "lower":
        a_lo = aJ
        a_up = jeinsum("ia,aj->ij", jeinsum("ia,ab->ib", ginvJ, a_lo), ginvJ)
    else:
        a_up = aJ
        a_lo = jeinsum("ia,aj->ij", jeinsum("ia,ab->ib", gJ, a_up), gJ)
    lam = lambda_field.jet(pts, order=1).val
    if lambda_field.variance == "lower":
        lam_lo = lam
        lam_up = np.einsum("pij,pj->pi", ginvJ.val, lam)
    else:
        lam_up = lam
        lam_lo = np.einsum("pij,pj->pi", gJ.val, lam)
    G = gJ.val
    reports = {}
    if form in ("both", "SIN3"):
        r3 = (
            nabla_lower(a_lo.val, a_lo.d1, gamma)
            - np.einsum("pi,pjk->pkij", lam_lo, G)
            - np.einsum("pj,pik->pkij", lam_lo, G)
        )
        norm3 = _tnorm(a_lo.val) + _vnorm(lam_lo) * _tnorm(G)
        reports["SIN3"] = ResidualReport("SIN3", pts, _tnorm(r3) / norm3, _SIN3_NORM, spec)
    if form in ("both", "SIN6"):
        eye = np.eye(n)
        r6 = (
            nabla_upper(a_up.val, a_up.d1, gamma)
            - np.einsum("pi,jk->pkij", lam_up, eye)
            - np.einsum("pj,ik->pkij", lam_up, eye)
        )
        norm6 = _tnorm(a_up.val) + _vnorm(lam_up)
        reports["SIN6"] = ResidualReport("SIN6", pts, _tnorm(r6) / norm6, _SIN6_NORM, spec)
    if form != "both":
        return reports[form]
    worst = max(reports, key=lambda k: (reports[k].max, k))
    top = reports[worst]
    return ResidualReport(worst, top.points, top.per_point, top.normalization, spec,
                          parts=reports)


def reconstruct_batch(g, a_field, points):
    """``(gbar, Psi)`` from ``(g, a)`` at many points."""
    pts = _pts(points)
    gval = metric_jet(g, pts, 0).val
    if isinstance(a_field, np.ndarray):
        aval = np.broadcast_to(a_field, gval.shape)
        variance = "lower"
    else:
        aval = a_field.jet(pts, order=0).val
        variance = a_field.variance
    if variance == "lower":
        ginv = np.linalg.inv(gval)
        raised = np.einsum("pia,pjb,pab->pij", ginv, ginv, aval)
    else:
        raised = aval
    check_nondegenerate(raised, pts, DEGENERACY_FLOOR, ReconstructionSingularError,
                        "raised a-matrix (reconstruction singular)")
    g_hat = np.linalg.inv(raised)
    _, ld_hat = np.linalg.slogdet(g_hat)
    _, ld_g = np.linalg.slogdet(gval)
    Psi = 0.5 * (ld_hat - ld_g)
    gbar = np.exp(2.0 * Psi)[:, None, None] * g_hat
    return gbar, Psi


def reconstruct_metric(g, a_field, point):
    """``(gbar_ij, Psi)`` at one point from ``g`` and ``a`` (either index position)."""
    gbar, Psi = reconstruct_batch(g, a_field, _pts(point))
    return gbar[0], float(Psi[0])


@dataclass(frozen=True, eq=False)
class MappingClass:
    label: str
    witness: dict = field(default_factory=dict)

    @property
    def constant(self):
        return self.witness.get("c")

    def to_json(self):
        return {"label": self.label, "witness": self.witness}


def homothety_fit(g, gbar, points):
    """Least-squares ``c`` in ``gbar = c g`` and the relative spread of the fit."""
    G = metric_jet(g, points, 0).val
    B = metric_jet(gbar, points, 0).val
    c = float(np.sum(G * B) / np.sum(G * G))
    spread = float(np.max(np.abs(B - c * G)) / (abs(c) * np.max(np.abs(G)))) if c else np.inf
    return c, spread


def psi_magnitude(g, gbar, points):
    """``|psi|`` per unit metric length, ``|psi| / sqrt(max|g|)``."""
    psi = psi_jet(g, gbar, points, 1).d1
    G = metric_jet(g, points, 0).val
    return _vnorm(psi) / np.sqrt(_tnorm(G))


def classify_mapping(g, gbar, grid, eps_lc=EPS_LC, eps_psi=EPS_PSI, eps_h=EPS_H) -> MappingClass:
    """Label the pair: geodesy first, then homothety, then affinity."""
    _check_pair(g, gbar)
    pts = _grid_points(grid)
    lc = levi_civita_residual(g, gbar, grid)
    c, spread = homothety_fit(g, gbar, pts)
    psi_max = float(np.max(psi_magnitude(g, gbar, pts)))
    witness = {
        "lc2_max": lc.max,
        "c": c,
        "ratio_spread": spread,
        "psi_max": psi_max,
        "signature_mismatch": lc.extra["signature_mismatch"],
        "tolerances": {"eps_lc": eps_lc, "eps_psi": eps_psi, "eps_h": eps_h},
    }
    if not lc.max <= eps_lc:
        label = NOT_GEODESIC
    elif spread < eps_h:
        label = HOMOTHETIC
    elif psi_max < eps_psi:
        label = AFFINE
    else:
        label = NONTRIVIAL
    witness["affine_evidence"] = bool(psi_max < eps_psi)
    return MappingClass(label, witness)
