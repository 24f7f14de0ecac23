"""Charts, metric fields and pointwise tensor calculus.

Index conventions (all arrays carry a leading point axis in the batched
helpers):

* ``gamma[h, i, j]`` is the Christoffel symbol with upper index ``h``;
* ``riemann[h, i, j, k]`` is ``R^h_{ijk} = d_j G^h_{ik} - d_k G^h_{ij}
  + G^h_{ja} G^a_{ik} - G^h_{ka} G^a_{ij}``, so the round sphere has
  positive scalar curvature;
* ``ricci[i, j] = R^a_{iaj}``;
* covariant derivatives put the differentiation index first: ``[k, i, j]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateMetricError, DimensionMismatchError, SignatureError
from .expr import Binary, Const, Expr, compile_exprs, parse_expr, run_program, to_source
from .tensorjet import Jet

DEGENERACY_FLOOR = 1e-12
DEFAULT_RESOLUTION = 9
DEFAULT_SHRINK = 0.05


@dataclass(frozen=True)
class ChartDomain:
    bounds: tuple

    def __post_init__(self):
        bounds = tuple((float(lo), float(hi)) for lo, hi in self.bounds)
        if len(bounds) < 1:
            raise ValueError("domain needs at least one coordinate")
        for k, (lo, hi) in enumerate(bounds):
            if not lo < hi:
                raise ValueError(f"empty interval for x{k + 1}: ({lo}, {hi})")
        object.__setattr__(self, "bounds", bounds)

    @classmethod
    def unbounded(cls, dimension):
        return cls(((-np.inf, np.inf),) * dimension)

    @property
    def dimension(self):
        return len(self.bounds)

    @property
    def lower(self):
        return np.array([b[0] for b in self.bounds])

    @property
    def upper(self):
        return np.array([b[1] for b in self.bounds])

    def contains(self, points):
        pts = np.atleast_2d(points)
        return np.all((pts > self.lower) & (pts < self.upper), axis=1)

    def to_json(self):
        return [[_json_bound(lo), _json_bound(hi)] for lo, hi in self.bounds]


def _json_bound(v):
    if np.isinf(v):
        return "inf" if v > 0 else "-inf"
    return float(v)


@dataclass(frozen=True, eq=False)
class Grid:
    """Sample points (lexicographic order) plus a JSON description."""

    points: np.ndarray
    spec: dict = field(default_factory=dict)

    @classmethod
    def box(cls, bounds, resolution=DEFAULT_RESOLUTION, shrink=DEFAULT_SHRINK):
        axes = []
        for lo, hi in bounds:
            lo, hi = float(lo), float(hi)
            if not (np.isfinite(lo) and np.isfinite(hi)):
                raise ValueError("grid bounds must be finite")
            pad = shrink * (hi - lo)
            axes.append(np.linspace(lo + pad, hi - pad, int(resolution)))
        pts = np.array(list(itertools.product(*axes)), dtype=float).reshape(-1, len(axes))
        spec = {
            "kind": "box",
            "bounds": [[float(lo), float(hi)] for lo, hi in bounds],
            "resolution": int(resolution),
            "shrink": float(shrink),
        }
        return cls(pts, spec)

    @classmethod
    def disk(cls, radius, dimension, resolution=DEFAULT_RESOLUTION, center=None,
             shrink=DEFAULT_SHRINK):
        center = np.zeros(dimension) if center is None else np.asarray(center, dtype=float)
        bounds = [(c - radius, c + radius) for c in center]
        base = cls.box(bounds, resolution, shrink)
        keep = np.linalg.norm(base.points - center, axis=1) < radius
        spec = {
            "kind": "disk",
            "radius": float(radius),
            "center": [float(c) for c in center],
            "resolution": int(resolution),
            "shrink": float(shrink),
        }
        return cls(base.points[keep], spec)

    @classmethod
    def from_points(cls, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return cls(pts, {"kind": "points", "count": len(pts)})

    def __len__(self):
        return len(self.points)

    @property
    def dimension(self):
        return self.points.shape[1]

    def with_resolution(self, resolution):
        if self.spec.get("kind") == "box":
            return Grid.box(self.spec["bounds"], resolution, self.spec["shrink"])
        if self.spec.get("kind") == "disk":
            return Grid.disk(self.spec["radius"], self.dimension, resolution,
                             self.spec["center"], self.spec["shrink"])
        return self


def _as_expr(item, dimension):
    if isinstance(item, Expr):
        if item.dimension != dimension:
            raise DimensionMismatchError("component dimension differs from field dimension")
        return item
    if isinstance(item, (int, float)):
        return parse_expr(repr(float(item)), dimension)
    return parse_expr(str(item), dimension)


def _symmetric_components(components, dimension):
    """Upper-triangle expressions from a matrix (lower triangle optional but must match)."""
    n = dimension
    if isinstance(components, dict):
        upper = {}
        for (i, j), src in components.items():
            i, j = (i, j) if i <= j else (j, i)
            upper[(i, j)] = _as_expr(src, n)
        comps = []
        for i in range(n):
            for j in range(i, n):
                comps.append(upper.get((i, j), parse_expr("0", n)))
        return tuple(comps)
    rows = list(components)
    if len(rows) != n:
        raise DimensionMismatchError(f"expected {n} rows of components, got {len(rows)}")
    comps = []
    lowers = []
    for i, row in enumerate(rows):
        row = list(row)
        if len(row) == n:
            upper, lower = row[i:], row[:i]
        elif len(row) == n - i:
            upper, lower = row, []
        else:
            raise ValueError(f"row {i + 1} must have {n} or {n - i} entries")
        for j, item in enumerate(upper, start=i):
            if item is None:
                raise ValueError(f"component ({i + 1},{j + 1}) is required")
            comps.append(_as_expr(item, n))
        lowers.extend((i, j, item) for j, item in enumerate(lower) if item is not None)
    for i, j, item in lowers:
        if _as_expr(item, n) != comps[_packed_index(j, i, n)]:
            raise ValueError(f"component ({i + 1},{j + 1}) does not match ({j + 1},{i + 1})")
    return tuple(comps)


def _packed_index(i, j, n):
    if i > j:
        i, j = j, i
    return i * n - i * (i - 1) // 2 + (j - i)


def sym_map(n):
    return np.array([[_packed_index(i, j, n) for j in range(n)] for i in range(n)],
                    dtype=np.int32)


class SymmetricTensorField:
    """Symmetric rank-2 field whose components are expressions.

    ``variance`` is ``"lower"`` for a (0,2) field and ``"upper"`` for (2,0).
    """

    def __init__(self, components, dimension, variance="lower"):
        if variance not in ("lower", "upper"):
            raise ValueError("variance must be 'lower' or 'upper'")
        self.dimension = int(dimension)
        self.variance = variance
        self.components = _symmetric_components(components, self.dimension)
        self._program = compile_exprs(self.components)
        self._sym = sym_map(self.dimension)

    @property
    def program(self):
        return self._program

    @property
    def sym(self):
        return self._sym

    def jet(self, points, order=1):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        val, grad, hess, flags = run_program(self._program, pts, order)
        s = self._sym
        v = val[:, s]
        d1 = np.moveaxis(grad[:, s, :], 3, 1)
        d2 = None
        if order >= 2:
            d2 = np.moveaxis(np.moveaxis(hess[:, s, :, :], 3, 1), 4, 2)
        return Jet(v, d1, d2, flags)

    def values(self, points):
        return self.jet(points, order=0).val

    def matrix_sources(self):
        n = self.dimension
        return [[to_source(self.components[_packed_index(i, j, n)].root) for j in range(n)]
                for i in range(n)]

    def scaled(self, c):
        comps = {}
        n = self.dimension
        for i in range(n):
            for j in range(i, n):
                e = self.components[_packed_index(i, j, n)]
                comps[(i, j)] = Expr(Binary("*", Const(float(c)), e.root), n)
        return type(self)._rebuild(self, comps)

    @staticmethod
    def _rebuild(template, comps):
        return SymmetricTensorField(comps, template.dimension, template.variance)


class VectorField:
    """Vector (``variance="upper"``) or covector (``"lower"``) field of expressions."""

    def __init__(self, components, dimension, variance="lower"):
        if variance not in ("lower", "upper"):
            raise ValueError("variance must be 'lower' or 'upper'")
        self.dimension = int(dimension)
        self.variance = variance
        comps = list(components)
        if len(comps) != self.dimension:
            raise DimensionMismatchError("vector field needs one component per coordinate")
        self.components = tuple(_as_expr(c, self.dimension) for c in comps)
        self._program = compile_exprs(self.components)

    def jet(self, points, order=1):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        val, grad, hess, flags = run_program(self._program, pts, order)
        d1 = np.moveaxis(grad, 2, 1)
        d2 = None
        if order >= 2:
            d2 = np.moveaxis(np.moveaxis(hess, 2, 1), 3, 2)
        return Jet(val, d1, d2, flags)


class MetricField(SymmetricTensorField):
    """A pseudo-Riemannian metric ``g_ij`` on a chart.

    ``signature`` is a tuple of ``+1``/``-1`` entries; only the multiset
    (the count of negative eigenvalues) is checked.  ``smoothness_label``
    is informational.
    """

    def __init__(self, components, domain=None, signature=None, smoothness_label="C^omega",
                 dimension=None, name=None):
        if domain is None:
            if dimension is None:
                dimension = len(list(components))
            domain = ChartDomain.unbounded(dimension)
        elif not isinstance(domain, ChartDomain):
            domain = ChartDomain(domain)
        super().__init__(components, domain.dimension, "lower")
        self.domain = domain
        n = domain.dimension
        signature = (1,) * n if signature is None else tuple(int(s) for s in signature)
        if len(signature) != n or any(s not in (1, -1) for s in signature):
            raise ValueError("signature must list n entries of +1/-1")
        self.signature = signature
        self.smoothness_label = smoothness_label
        self.name = name

    @property
    def negative_count(self):
        return sum(1 for s in self.signature if s < 0)

    @staticmethod
    def _rebuild(template, comps):
        return MetricField(comps, template.domain, template.signature,
                           template.smoothness_label,
                           name=None if template.name is None else f"{template.name}*c")

    def scaled(self, c):
        """``c * g``; the signature flips when ``c < 0``."""
        out = super().scaled(c)
        if c < 0:
            out.signature = tuple(-s for s in self.signature)
        return out

    def check_signature(self, points):
        vals = np.linalg.eigvalsh(self.values(points))
        neg = np.sum(vals < 0, axis=1)
        bad = np.flatnonzero(neg != self.negative_count)
        if bad.size:
            p = np.atleast_2d(points)[bad[0]]
            raise SignatureError(
                f"eigenvalue signs at {p.tolist()} give {int(neg[bad[0]])} negative "
                f"directions, expected {self.negative_count}"
            )

    def describe(self):
        return {
            "name": self.name,
            "dimension": self.dimension,
            "signature": list(self.signature),
            "domain": self.domain.to_json(),
            "components": self.matrix_sources(),
            "smoothness_label": self.smoothness_label,
        }


def _points(point):
    return np.atleast_2d(np.asarray(point, dtype=float))


def check_nondegenerate(gval, points=None, floor=DEGENERACY_FLOOR, error=DegenerateMetricError,
                        what="metric"):
    """Raise if ``|det| < floor * (max row norm)^n`` at any point."""
    n = gval.shape[-1]
    det = np.linalg.det(gval)
    scale = np.max(np.linalg.norm(gval, axis=-1), axis=-1) ** n
    bad = np.flatnonzero(~(np.abs(det) >= floor * scale))
    if bad.size:
        where = "" if points is None else f" at {np.atleast_2d(points)[bad[0]].tolist()}"
        raise error(f"degenerate {what}{where}: |det| = {abs(det[bad[0]]):.3e}")
    return det


def metric_jet(g, points, order=1):
    """Jet of the metric with the nondegeneracy check applied."""
    J = g.jet(points, order)
    check_nondegenerate(J.val, points)
    return J


def inverse_metric(g, point):
    """``g^{ij}`` at a single point."""
    J = metric_jet(g, _points(point), order=0)
    return np.linalg.inv(J.val)[0]


def christoffel_from_jet(gJ, ginv=None):
    """Christoffel symbols ``[P, h, i, j]`` from a metric jet."""
    if ginv is None:
        ginv = np.linalg.inv(gJ.val)
    dg = gJ.d1  # [p, k, i, j] = d_k g_ij
    # lowered: L[k, i, j] = 1/2 (d_i g_jk + d_j g_ik - d_k g_ij)
    L = 0.5 * (np.einsum("pijk->pkij", dg) + np.einsum("pjik->pkij", dg) - dg)
    return np.einsum("phk,pkij->phij", ginv, L)


@dataclass(frozen=True, eq=False)
class ConnectionCoefficients:
    point: np.ndarray
    gamma: np.ndarray


@dataclass(frozen=True, eq=False)
class CurvatureAtPoint:
    riemann: np.ndarray
    ricci: np.ndarray
    scalar: float


def christoffel_batch(g, points):
    J = metric_jet(g, points, order=1)
    return christoffel_from_jet(J)


def christoffel(g, point) -> ConnectionCoefficients:
    pts = _points(point)
    return ConnectionCoefficients(pts[0].copy(), christoffel_batch(g, pts)[0])


def curvature_from_jet(gJ):
    """``(riemann, ricci, scalar, gamma, ginv)`` from an order-2 metric jet."""
    ginv = np.linalg.inv(gJ.val)
    dg, d2g = gJ.d1, gJ.d2
    L = 0.5 * (np.einsum("pijk->pkij", dg) + np.einsum("pjik->pkij", dg) - dg)
    dL = 0.5 * (
        np.einsum("plijk->plkij", d2g) + np.einsum("pljik->plkij", d2g) - d2g
    )
    gamma = np.einsum("phk,pkij->phij", ginv, L)
    dginv = -np.einsum("pha,plab,pbk->plhk", ginv, dg, ginv)
    dgamma = np.einsum("plhk,pkij->plhij", dginv, L) + np.einsum("phk,plkij->plhij", ginv, dL)
    quad = np.einsum("phja,paik->phijk", gamma, gamma)
    riemann = (
        np.einsum("pjhik->phijk", dgamma)
        - np.einsum("pkhij->phijk", dgamma)
        + quad
        - np.swapaxes(quad, 3, 4)
    )
    ricci = np.einsum("paiaj->pij", riemann)
    scalar = np.einsum("pij,pij->p", ginv, ricci)
    return riemann, ricci, scalar, gamma, ginv


def curvature_batch(g, points):
    riemann, ricci, scalar, _, _ = curvature_from_jet(metric_jet(g, points, order=2))
    return riemann, ricci, scalar


def curvature(g, point) -> CurvatureAtPoint:
    riemann, ricci, scalar = curvature_batch(g, _points(point))
    return CurvatureAtPoint(riemann[0], ricci[0], float(scalar[0]))


def nabla_lower(tval, td1, gamma):
    """``nabla_k t_ij = d_k t_ij - G^a_{ki} t_aj - G^a_{kj} t_ia`` (batched)."""
    return (
        td1
        - np.einsum("paki,paj->pkij", gamma, tval)
        - np.einsum("pakj,pia->pkij", gamma, tval)
    )


def nabla_upper(tval, td1, gamma):
    """``nabla_k t^ij = d_k t^ij + G^i_{ka} t^aj + G^j_{ka} t^ia`` (batched)."""
    return (
        td1
        + np.einsum("pika,paj->pkij", gamma, tval)
        + np.einsum("pjka,pia->pkij", gamma, tval)
    )


def _field_jet(field, points):
    if isinstance(field, np.ndarray):
        from .errors import GridSampledFieldError

        raise GridSampledFieldError("fields must be expression- or jet-backed, not sampled arrays")
    return field.jet(points, order=1)


def covariant_derivative_02_batch(field, g, points):
    gamma = christoffel_batch(g, points)
    J = _field_jet(field, points)
    return nabla_lower(J.val, J.d1, gamma)


def covariant_derivative_20_batch(field, g, points):
    gamma = christoffel_batch(g, points)
    J = _field_jet(field, points)
    return nabla_upper(J.val, J.d1, gamma)


def covariant_derivative_02(field, g, point):
    """``[k, i, j] = nabla_k t_ij`` of a (0,2) field at one point."""
    return covariant_derivative_02_batch(field, g, _points(point))[0]


def covariant_derivative_20(field, g, point):
    """``[k, i, j] = nabla_k t^ij`` of a (2,0) field at one point."""
    return covariant_derivative_20_batch(field, g, _points(point))[0]


class InverseMetricField:
    """``g^{ij}`` as a (2,0) field with exact jets (derived from ``g``'s jets)."""

    variance = "upper"

    def __init__(self, g):
        self.g = g
        self.dimension = g.dimension

    def jet(self, points, order=1):
        return metric_jet(self.g, points, order).inv()


def max_abs(a, axes):
    return np.max(np.abs(a), axis=axes)
