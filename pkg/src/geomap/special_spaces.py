"""Einstein and constant-curvature diagnostics, and instance harnesses for the
classical closure results on geodesic mappings.

The harnesses check supplied instances only: a pair is classified, the
hypothesis on ``g`` is gated, and the conclusion is tested on ``gbar``.  A
failed gate raises :class:`PreconditionError`; a failed conclusion is a
report with ``passed=False``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError
from .geometry import Grid, curvature_from_jet, metric_jet
from .mapping import AFFINE, GEODESIC_CLASSES, HOMOTHETIC, classify_mapping

EINSTEIN_TOL = 1e-8
CC_TOL = 1e-8
NONCONSTANT_FACTOR = 100.0
SCALAR_NONZERO = 1e-6


def _grid_points(grid):
    return grid.points if isinstance(grid, Grid) else np.atleast_2d(np.asarray(grid, float))


@dataclass(frozen=True, eq=False)
class SpaceDiagnosis:
    einstein_residual: float
    scalar_spread: float
    scalar_curvature_range: tuple
    constant_curvature: float | None
    cc_residual: float
    K_fit: float
    K_pointwise: np.ndarray
    curvature_scale: np.ndarray
    scalar: np.ndarray
    tolerances: dict = field(default_factory=dict)

    @property
    def is_einstein(self):
        tol = self.tolerances["einstein"]
        return self.einstein_residual < tol and self.scalar_spread < tol

    @property
    def is_constant_curvature(self):
        return self.constant_curvature is not None

    @property
    def nonconstant_curvature(self):
        return self.cc_residual > NONCONSTANT_FACTOR * self.tolerances["constant_curvature"]

    @property
    def scalar_nonvanishing(self):
        return bool(np.all(np.abs(self.scalar) > SCALAR_NONZERO * self.curvature_scale))

    def to_json(self):
        return {
            "einstein_residual": self.einstein_residual,
            "R_spread": self.scalar_spread,
            "R_range": list(self.scalar_curvature_range),
            "K": self.constant_curvature,
            "K_fit": self.K_fit,
            "constant_curvature_residual": self.cc_residual,
            "einstein": self.is_einstein,
            "constant_curvature": self.is_constant_curvature,
            "nonconstant_curvature": self.nonconstant_curvature,
            "scalar_nonvanishing": self.scalar_nonvanishing,
            "tolerances": dict(self.tolerances),
        }


def diagnose_space(g, grid, einstein_tol=EINSTEIN_TOL, cc_tol=CC_TOL) -> SpaceDiagnosis:
    """Einstein and constant-curvature diagnosis of ``g`` over ``grid``.

    Einstein: ``max |R_i^j - (R/n) d_i^j|`` relative to ``max(1, |R|/n)``
    together with the spread of ``R`` over the grid.  Constant curvature: a
    single ``K`` is fitted by least squares to ``R_hijk = K (g_hj g_ik -
    g_hk g_ij)`` over the whole grid, and the residual is measured on the
    mixed tensor ``R^{hi}_{jk}`` relative to ``max(1, |K|)``.
    """
    n = g.dimension
    if n < 2:
        raise ValueError("curvature diagnostics need n >= 2")
    pts = _grid_points(grid)
    J = metric_jet(g, pts, 2)
    riemann, ricci, scalar, _, ginv = curvature_from_jet(J)
    G = J.val
    eye = np.eye(n)

    ric_mixed = np.einsum("pia,paj->pij", ricci, ginv)
    ein = np.max(np.abs(ric_mixed - (scalar / n)[:, None, None] * eye), axis=(1, 2))
    ein = ein / np.maximum(1.0, np.abs(scalar) / n)
    R_scale = max(1.0, float(np.max(np.abs(scalar))))
    spread = float(np.ptp(scalar)) / R_scale

    # R_hijk lowered on the first index; model tensor g_hj g_ik - g_hk g_ij
    R_low = np.einsum("pha,paijk->phijk", G, riemann)
    model = np.einsum("phj,pik->phijk", G, G) - np.einsum("phk,pij->phijk", G, G)
    K = float(np.sum(R_low * model) / np.sum(model * model))
    mixed = np.einsum("phijk,pia->phajk", riemann, ginv)
    E = np.einsum("hj,ik->hijk", eye, eye) - np.einsum("hk,ij->hijk", eye, eye)
    cc = float(np.max(np.abs(mixed - K * E))) / max(1.0, abs(K))
    scale = np.max(np.abs(mixed), axis=(1, 2, 3, 4))
    K_point = scalar / (n * (n - 1))
    return SpaceDiagnosis(
        einstein_residual=float(np.max(ein)),
        scalar_spread=spread,
        scalar_curvature_range=(float(np.min(scalar)), float(np.max(scalar))),
        constant_curvature=K if cc < cc_tol else None,
        cc_residual=cc,
        K_fit=K,
        K_pointwise=K_point,
        curvature_scale=scale,
        scalar=scalar,
        tolerances={"einstein": einstein_tol, "constant_curvature": cc_tol},
    )


@dataclass(frozen=True, eq=False)
class HarnessReport:
    name: str
    passed: bool
    details: dict

    def to_json(self):
        return {"harness": self.name, "passed": bool(self.passed), **self.details}


def _require_geodesic(g, gbar, grid):
    cls = classify_mapping(g, gbar, grid)
    if cls.label not in GEODESIC_CLASSES:
        raise PreconditionError(
            f"pair is not geodesically related (LC2 residual {cls.witness['lc2_max']:.3e})"
        )
    return cls


def beltrami_harness(g, gbar, grid) -> HarnessReport:
    """Constant curvature of ``g`` carries over to any geodesic partner."""
    dg = diagnose_space(g, grid)
    if not dg.is_constant_curvature:
        raise PreconditionError(
            f"g does not have constant curvature (residual {dg.cc_residual:.3e})"
        )
    cls = _require_geodesic(g, gbar, grid)
    db = diagnose_space(gbar, grid)
    return HarnessReport(
        "beltrami",
        db.is_constant_curvature,
        {
            "class": cls.label,
            "c": cls.witness["c"] if cls.label == HOMOTHETIC else None,
            "K_g": dg.constant_curvature,
            "K_gbar": db.constant_curvature,
            "K_gbar_fit": db.K_fit,
            "constant_curvature_residual_gbar": db.cc_residual,
        },
    )


def theorem4_harness(g, gbar, grid) -> HarnessReport:
    """A geodesic partner of an Einstein space is Einstein."""
    dg = diagnose_space(g, grid)
    if not dg.is_einstein:
        raise PreconditionError(
            f"g is not Einstein (residual {dg.einstein_residual:.3e}, "
            f"R spread {dg.scalar_spread:.3e})"
        )
    cls = _require_geodesic(g, gbar, grid)
    db = diagnose_space(gbar, grid)
    return HarnessReport(
        "einstein_partner",
        db.is_einstein,
        {
            "class": cls.label,
            "einstein_residual_g": dg.einstein_residual,
            "einstein_residual_gbar": db.einstein_residual,
            "R_range_g": list(dg.scalar_curvature_range),
            "R_range_gbar": list(db.scalar_curvature_range),
        },
    )


def theorem5_harness(g, gbar, grid) -> HarnessReport:
    """For a 4D Einstein ``g`` of non-constant curvature, a geodesic partner is
    affine, and homothetic when the scalar curvature does not vanish."""
    if g.dimension != 4:
        raise PreconditionError(f"needs a 4-dimensional metric, got n = {g.dimension}")
    dg = diagnose_space(g, grid)
    if not dg.is_einstein:
        raise PreconditionError(f"g is not Einstein (residual {dg.einstein_residual:.3e})")
    if not dg.nonconstant_curvature:
        raise PreconditionError(
            f"g has constant curvature on the grid (residual {dg.cc_residual:.3e})"
        )
    cls = _require_geodesic(g, gbar, grid)
    ok = cls.label in (AFFINE, HOMOTHETIC)
    if dg.scalar_nonvanishing:
        ok = ok and cls.label == HOMOTHETIC
    return HarnessReport(
        "einstein4_rigidity",
        ok,
        {
            "class": cls.label,
            "c": cls.witness["c"] if cls.label == HOMOTHETIC else None,
            "ricci_flat": bool(dg.is_einstein and not dg.scalar_nonvanishing),
            "einstein_residual_g": dg.einstein_residual,
            "constant_curvature_residual_g": dg.cc_residual,
            "scalar_nonvanishing": dg.scalar_nonvanishing,
            "R_range_g": list(dg.scalar_curvature_range),
        },
    )
