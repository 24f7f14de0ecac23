import math

import numpy as np
import pytest

from geomap import corpus
from geomap.errors import DegenerateMetricError, DimensionMismatchError, GridSampledFieldError, SignatureError
from geomap.geometry import (
    ChartDomain,
    Grid,
    InverseMetricField,
    MetricField,
    SymmetricTensorField,
    christoffel,
    christoffel_batch,
    covariant_derivative_02,
    covariant_derivative_02_batch,
    covariant_derivative_20,
    curvature,
    curvature_batch,
    inverse_metric,
    metric_jet,
)

from helpers import corpus_points, metric_names


def diag(*entries, domain=None, signature=None):
    n = len(entries)
    return MetricField({(i, j): (entries[i] if i == j else "0") for i in range(n) for j in range(i, n)},
                       domain or [(-2, 2)] * n, signature)


def test_chart_domain_validation():
    with pytest.raises(ValueError):
        ChartDomain([(1.0, 1.0)])
    d = ChartDomain([(0, 1), (-math.inf, math.inf)])
    assert d.contains([[0.5, 1e9], [1.0, 0.0]]).tolist() == [True, False]


def test_grid_box_is_shrunk_and_lexicographic():
    g = Grid.box([(0, 1), (10, 20)], 3)
    assert len(g) == 9
    np.testing.assert_allclose(g.points[:3, 0], 0.05)
    np.testing.assert_allclose(g.points[:3, 1], [10.5, 15, 19.5])
    assert g.spec["kind"] == "box"


def test_grid_disk_stays_inside():
    g = Grid.disk(0.8, 2, 9)
    assert np.all(np.linalg.norm(g.points, axis=1) < 0.8)
    assert len(g) > 40


def test_component_matrix_forms():
    full = MetricField([["1", "x1"], ["x1", "2"]], [(-1, 1)] * 2)
    upper = MetricField([["1", "x1"], [None, "2"]], [(-1, 1)] * 2)
    short = MetricField([["1", "x1"], ["2"]], [(-1, 1)] * 2)
    for g in (upper, short):
        np.testing.assert_array_equal(g.values([0.3, 0]), full.values([0.3, 0]))
    with pytest.raises(ValueError):
        MetricField([["1", "x1"], ["x2", "2"]], [(-1, 1)] * 2)


def test_metric_dimension_and_signature_checks():
    with pytest.raises(ValueError):
        MetricField([["1", "0"], [None, "1"]], [(-1, 1)] * 2, signature=(1,))
    g = diag("1", "-1", signature=(1, 1))
    with pytest.raises(SignatureError):
        g.check_signature([[0.0, 0.0]])
    diag("1", "-1", signature=(-1, 1)).check_signature([[0.0, 0.0]])


def test_inverse_metric_examples():
    np.testing.assert_array_equal(inverse_metric(corpus.flat(3), [0.1, 0.2, 0.3]), np.eye(3))
    np.testing.assert_allclose(inverse_metric(diag("2", "-3", signature=(1, -1)), [0, 0]),
                               np.diag([0.5, -1 / 3]), rtol=1e-15)
    g = corpus.sphere_gnomonic(2, 1.0)
    G = g.values([1.0, 0.0])[0]
    np.testing.assert_allclose(inverse_metric(g, [1.0, 0.0]) @ G, np.eye(2), atol=1e-12)


def test_degenerate_metric_rejected():
    g = diag("x1", "1")
    with pytest.raises(DegenerateMetricError):
        inverse_metric(g, [0.0, 0.5])
    with pytest.raises(DegenerateMetricError):
        christoffel(g, [1e-14, 0.5])


def test_flat_christoffel_vanishes():
    assert not christoffel(corpus.flat(3), [0.3, 0.1, -0.2]).gamma.any()


def test_sphere_angles_christoffel():
    gam = christoffel(corpus.sphere_angles(), [math.pi / 4, 0.3]).gamma
    assert gam[0, 1, 1] == pytest.approx(-0.5, abs=1e-15)
    assert gam[1, 0, 1] == pytest.approx(1.0, abs=1e-15)
    np.testing.assert_array_equal(gam, np.swapaxes(gam, 1, 2))


def _fd_christoffel(g, x, h=1e-5):
    n = len(x)
    dg = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        dg[k] = (g.values(x + e)[0] - g.values(x - e)[0]) / (2 * h)
    ginv = np.linalg.inv(g.values(x)[0])
    L = 0.5 * (np.einsum("ijk->kij", dg) + np.einsum("jik->kij", dg) - dg)
    return np.einsum("hk,kij->hij", ginv, L)


@pytest.mark.parametrize("name", ["sphere_gnomonic", "klein_hyperbolic", "schwarzschild_exterior",
                                  "liouville_dini"])
def test_christoffel_matches_fd_oracle(name, rng):
    g, _ = corpus.instantiate(name)
    for x in corpus_points(name, 5, rng):
        np.testing.assert_allclose(christoffel(g, x).gamma, _fd_christoffel(g, x), atol=1e-8)


def test_christoffel_scale_invariant(rng):
    g = corpus.sphere_gnomonic(3, 1.0)
    pts = corpus_points("sphere_gnomonic", 10, rng, {"n": 3})
    for c in (0.5, 7.0):
        np.testing.assert_allclose(christoffel_batch(g.scaled(c), pts), christoffel_batch(g, pts),
                                   atol=1e-13)


def test_curvature_examples():
    flat = curvature(corpus.flat(2), [0.1, 0.2])
    assert not flat.riemann.any() and flat.scalar == 0.0
    assert curvature(corpus.sphere_angles(), [math.pi / 3, 0.0]).scalar == pytest.approx(2.0, abs=1e-8)
    assert curvature(corpus.klein_hyperbolic(2, -1.0), [0.2, -0.1]).scalar == pytest.approx(-2.0, abs=1e-8)


@pytest.mark.parametrize("name", metric_names())
def test_metricity_bianchi_and_ricci_symmetry(name, rng):
    g, _ = corpus.instantiate(name)
    pts = corpus_points(name, 100, rng)
    nab = covariant_derivative_02_batch(g, g, pts)
    gnorm = np.max(np.abs(g.values(pts)), axis=(1, 2))
    assert np.all(np.max(np.abs(nab), axis=(1, 2, 3)) < 1e-10 * gnorm)
    R, ric, _ = curvature_batch(g, pts)
    scale = np.maximum(np.max(np.abs(R), axis=(1, 2, 3, 4)), 1e-300)
    cyc = R + np.einsum("phjki->phijk", R) + np.einsum("phkij->phijk", R)
    assert np.all(np.max(np.abs(cyc), axis=(1, 2, 3, 4)) <= 1e-9 * scale)
    np.testing.assert_allclose(R, -np.swapaxes(R, 3, 4), atol=1e-14 * scale.max())
    rscale = np.maximum(np.max(np.abs(ric), axis=(1, 2)), scale)
    assert np.all(np.max(np.abs(ric - np.swapaxes(ric, 1, 2)), axis=(1, 2)) <= 1e-10 * rscale)


@pytest.mark.parametrize("name", [e.name for e in corpus.corpus_list() if e.dimension == 2])
def test_two_dimensional_einstein_tensor_vanishes(name, rng):
    g, _ = corpus.instantiate(name)
    pts = corpus_points(name, 50, rng)
    _, ric, R = curvature_batch(g, pts)
    G = g.values(pts)
    ein = ric - 0.5 * R[:, None, None] * G
    scale = np.maximum(np.max(np.abs(ric), axis=(1, 2)), 1e-300)
    assert np.all(np.max(np.abs(ein), axis=(1, 2)) <= 1e-9 * scale)


@pytest.mark.parametrize("name", metric_names())
def test_signature_stable_on_default_grid(name):
    g, partner = corpus.instantiate(name)
    grid = corpus.default_grid(name)
    g.check_signature(grid.points)
    if partner is not None:
        partner.check_signature(grid.points)


def test_covariant_derivative_examples():
    sphere = corpus.sphere_angles()
    x = [1.1, 0.4]
    assert np.max(np.abs(covariant_derivative_02(sphere, sphere, x))) < 1e-10
    assert np.max(np.abs(covariant_derivative_02(sphere.scaled(2.0), sphere, x))) < 1e-10
    const = SymmetricTensorField([["1", "2"], [None, "3"]], 2)
    assert not covariant_derivative_02(const, corpus.flat(2), x).any()
    const_up = SymmetricTensorField([["1", "2"], [None, "3"]], 2, "upper")
    assert not covariant_derivative_20(const_up, corpus.flat(2), x).any()
    assert np.max(np.abs(covariant_derivative_20(InverseMetricField(sphere), sphere, x))) < 1e-10


def test_lowering_commutes_with_nabla(rng):
    g = corpus.sphere_angles()
    t_up = SymmetricTensorField([["x1*x2", "sin(x2)"], [None, "1+x1^2"]], 2, "upper")
    for x in corpus_points("sphere_angles", 10, rng):
        G = g.values(x)[0]
        J = t_up.jet(x[None, :], 1)
        # lowered field with exact jet: t_ij = g_ia t^ab g_bj
        gJ = metric_jet(g, x[None, :], 1)
        from geomap.tensorjet import jeinsum

        low = jeinsum("ia,aj->ij", jeinsum("ia,ab->ib", gJ, J), gJ)

        class Lowered:
            variance = "lower"

            def jet(self, points, order=1):
                return low

        nab_up = covariant_derivative_20(t_up, g, x)
        nab_low = covariant_derivative_02(Lowered(), g, x)
        lowered = np.einsum("ia,kab,bj->kij", G, nab_up, G)
        np.testing.assert_allclose(lowered, nab_low, rtol=1e-9, atol=1e-12)


def test_sampled_fields_are_rejected():
    g = corpus.flat(2)
    with pytest.raises(GridSampledFieldError):
        covariant_derivative_02(np.eye(2), g, [0.0, 0.0])


def test_point_dimension_checked():
    with pytest.raises(DimensionMismatchError):
        corpus.flat(2).values([0.0, 0.0, 0.0])
