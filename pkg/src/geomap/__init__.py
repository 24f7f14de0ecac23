"""Numerical toolkit for geodesic mappings between pseudo-Riemannian metrics."""

__version__ = "0.1.0"

from .corpus import corpus_list, instantiate
from .expr import eval_jet, parse_expr
from .geodesics import GeodesicState, Trajectory, integrate_geodesic, pregeodesic_residual
from .geometry import (
    ChartDomain,
    Grid,
    MetricField,
    SymmetricTensorField,
    VectorField,
    christoffel,
    covariant_derivative_02,
    covariant_derivative_20,
    curvature,
    inverse_metric,
)
from .mapping import (
    classify_mapping,
    compute_psi,
    lambda_from_trace,
    levi_civita_residual,
    reconstruct_metric,
    sinyukov_forward,
    sinyukov_residual,
)
from .semigeodesic import HypersurfaceParam, Lattice, build_semigeodesic_chart, unit_normal, verify_semigeodesic
from .special_spaces import beltrami_harness, diagnose_space, theorem4_harness, theorem5_harness


def emit_plot_data(report, path):
    """Write a residual report, trajectory or chart as CSV (see :mod:`geomap.cli`)."""
    from .cli import emit_plot_data as _emit

    return _emit(report, path)


__all__ = [
    "__version__",
    "ChartDomain",
    "GeodesicState",
    "Grid",
    "HypersurfaceParam",
    "Lattice",
    "MetricField",
    "SymmetricTensorField",
    "Trajectory",
    "VectorField",
    "beltrami_harness",
    "build_semigeodesic_chart",
    "christoffel",
    "classify_mapping",
    "compute_psi",
    "corpus_list",
    "covariant_derivative_02",
    "covariant_derivative_20",
    "curvature",
    "diagnose_space",
    "emit_plot_data",
    "eval_jet",
    "instantiate",
    "integrate_geodesic",
    "inverse_metric",
    "lambda_from_trace",
    "levi_civita_residual",
    "parse_expr",
    "pregeodesic_residual",
    "reconstruct_metric",
    "sinyukov_forward",
    "sinyukov_residual",
    "theorem4_harness",
    "theorem5_harness",
    "unit_normal",
    "verify_semigeodesic",
]
