import json
from dataclasses import replace

import numpy as np
import pytest

from geomap import corpus
from geomap.geometry import MetricField
from geomap.mapping import HOMOTHETIC, NONTRIVIAL, NOT_GEODESIC, classify_mapping, levi_civita_residual
from geomap.special_spaces import diagnose_space


def test_manifest_contents():
    names = [e.name for e in corpus.corpus_list()]
    for required in ["flat", "sphere_gnomonic", "sphere_angles", "klein_hyperbolic", "liouville_dini",
                     "schwarzschild_exterior", "desitter4"]:
        assert required in names
    assert names == [e.name for e in corpus.corpus_list()]
    m = corpus.manifest()
    json.dumps(m)
    entry = next(e for e in m["entries"] if e["name"] == "liouville_dini")
    assert {"name", "dimension", "params", "expected_class", "status"} <= set(entry)


def test_flat_entry_is_trivially_homothetic():
    e = corpus.get_entry("flat")
    assert e.expected_class == HOMOTHETIC and e.expected_c == 1.0
    g, partner = corpus.instantiate("flat")
    cls = classify_mapping(g, partner, corpus.default_grid("flat"))
    assert cls.label == HOMOTHETIC and cls.constant == pytest.approx(1.0)


def test_gnomonic_entry():
    assert corpus.get_entry("sphere_gnomonic").expected_class == NONTRIVIAL
    g, partner = corpus.instantiate("sphere_gnomonic")
    np.testing.assert_array_equal(partner.values([0.1, 0.2])[0], np.eye(2))
    np.testing.assert_array_equal(g.values([0.0, 0.0])[0], np.eye(2))
    G = g.values([1.0, 0.0])[0]
    np.testing.assert_allclose(G, np.diag([0.25, 0.5]), atol=1e-16)
    assert np.linalg.det(G) == pytest.approx(1 / 8, rel=1e-14)


def test_schwarzschild_entry_is_ricci_flat():
    g, _ = corpus.instantiate("schwarzschild_exterior", {"m": 1.0})
    d = diagnose_space(g, corpus.default_grid("schwarzschild_exterior", {"m": 1.0}))
    assert d.einstein_residual < 1e-7
    assert max(abs(v) for v in d.scalar_curvature_range) < 1e-10
    assert d.constant_curvature is None
    assert d.nonconstant_curvature


def test_schwarzschild_grid_respects_margin():
    for m in (0.5, 1.0, 2.0):
        pts = corpus.default_grid("schwarzschild_exterior", {"m": m}).points
        assert pts[:, 0].min() > 2 * m * 1.25


@pytest.mark.parametrize("entry", corpus.corpus_list(), ids=lambda e: e.name)
def test_entries_reproduce_expectations(entry):
    g, partner = corpus.instantiate(entry.name)
    grid = corpus.default_grid(entry.name)
    g.check_signature(grid.points)
    assert np.all(g.domain.contains(grid.points))
    if partner is not None:
        cls = classify_mapping(g, partner, grid)
        assert cls.label == entry.expected_class
        lc = levi_civita_residual(g, partner, grid).max
        if entry.expected_class == NOT_GEODESIC:
            assert lc > 1e-3
        else:
            assert lc < 1e-8
        if entry.expected_c is not None:
            assert cls.constant == pytest.approx(entry.expected_c, rel=1e-12)
    expected = entry.expected_space_for(entry.resolve())
    if expected:
        d = diagnose_space(g, grid)
        assert d.is_einstein == expected["einstein"]
        if expected["K"] is None:
            assert not d.is_constant_curvature
        else:
            assert d.constant_curvature == pytest.approx(expected["K"], abs=1e-8)


def test_dini_is_promoted():
    e = corpus.get_entry("liouville_dini")
    assert e.status == corpus.VALIDATED
    assert e.promotion["promoted"]
    assert len(e.promotion["trials"]) == 3
    assert all(t["lc2_max"] < 1e-8 for t in e.promotion["trials"])
    assert "liouville_dini" in corpus.validated_pairs()


def test_failed_promotion_stays_candidate(caplog):
    e = corpus.get_entry("liouville_dini")
    bogus = replace(e, status=corpus.CANDIDATE,
                    partner=lambda a, b: MetricField([["1", "0"], [None, "1"]], [(-3, 3)] * 2))
    out = corpus._promote(bogus)
    assert out.status == corpus.CANDIDATE
    assert not out.promotion["promoted"]
    assert "LC2 residual" in out.promotion["reason"]
    assert "stays candidate" in caplog.text


def test_instantiate_is_deterministic():
    for e in corpus.corpus_list():
        g1, p1 = corpus.instantiate(e.name)
        g2, p2 = corpus.instantiate(e.name)
        assert [str(c) for c in g1.components] == [str(c) for c in g2.components]
        if p1 is not None:
            assert [str(c) for c in p1.components] == [str(c) for c in p2.components]


def test_parameter_validation():
    with pytest.raises(ValueError):
        corpus.instantiate("klein_hyperbolic", {"n": 7})
    with pytest.raises(ValueError):
        corpus.instantiate("sphere_gnomonic", {"K": -1.0})
    with pytest.raises(ValueError):
        corpus.instantiate("flat", {"signature": "+x"})
    with pytest.raises(ValueError):
        corpus.instantiate("flat", {"bogus": 1})
    with pytest.raises(KeyError):
        corpus.instantiate("no_such_metric")


def test_parameters_change_the_metric():
    g, _ = corpus.instantiate("sphere_gnomonic", {"n": 3, "K": 4.0})
    assert g.dimension == 3
    d = diagnose_space(g, corpus.default_grid("sphere_gnomonic", {"n": 3, "K": 4.0}))
    assert d.constant_curvature == pytest.approx(4.0, rel=1e-8)
    g, _ = corpus.instantiate("flat", {"n": 3, "signature": "++-"})
    assert g.negative_count == 1
