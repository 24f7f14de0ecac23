"""Built-in metric families and known geodesically related pairs.

Pairs marked ``validated`` are checked against the Levi-Civita residual
before they are relied on; the Liouville-Dini pair ships as a ``candidate``
and is promoted only if the residual oracle accepts it for several parameter
choices.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import Callable

from .geometry import ChartDomain, Grid, MetricField
from .mapping import HOMOTHETIC, NONTRIVIAL, NOT_GEODESIC, levi_civita_residual

log = logging.getLogger(__name__)

VALIDATED = "validated"
CANDIDATE = "candidate"
PAIR_TOL = 1e-8
CONTROL_TOL = 1e-3


@dataclass(frozen=True)
class ParamSpec:
    name: str
    default: object
    kind: str = "real"
    low: float | None = None
    high: float | None = None
    doc: str = ""

    def check(self, value):
        if self.kind == "int":
            if isinstance(value, bool) or int(value) != value:
                raise ValueError(f"{self.name} must be an integer")
            value = int(value)
        elif self.kind == "real":
            value = float(value)
            if not math.isfinite(value):
                raise ValueError(f"{self.name} must be finite")
        elif self.kind == "signature":
            if value is None:
                return None
            value = str(value)
            if not value or set(value) - {"+", "-"}:
                raise ValueError(f"{self.name} must be a string of '+'/'-'")
            return value
        if self.low is not None and value < self.low:
            raise ValueError(f"{self.name} = {value} is below {self.low}")
        if self.high is not None and value > self.high:
            raise ValueError(f"{self.name} = {value} is above {self.high}")
        return value

    def to_json(self):
        return {"name": self.name, "default": self.default, "kind": self.kind,
                "low": self.low, "high": self.high, "doc": self.doc}


@dataclass(frozen=True, eq=False)
class CorpusEntry:
    name: str
    dimension: int
    params: tuple
    factory: Callable
    grid: Callable
    partner: Callable | None = None
    expected_class: str | None = None
    expected_c: float | None = None
    expected_space: dict = field(default_factory=dict)
    status: str = VALIDATED
    description: str = ""
    promotion: dict | None = None

    @property
    def has_partner(self):
        return self.partner is not None

    def resolve(self, params=None):
        params = dict(params or {})
        known = {p.name for p in self.params}
        unknown = sorted(set(params) - known)
        if unknown:
            raise ValueError(f"unknown parameter(s) for {self.name}: {', '.join(unknown)}")
        return {p.name: p.check(params.get(p.name, p.default)) for p in self.params}

    def expected_space_for(self, params):
        """``expected_space`` with ``"=name"`` references replaced by parameter values."""
        p = self.resolve(params)
        return {k: (p[v[1:]] if isinstance(v, str) and v.startswith("=") else v)
                for k, v in self.expected_space.items()}

    def to_json(self):
        return {
            "name": self.name,
            "dimension": self.dimension,
            "params": [p.to_json() for p in self.params],
            "has_partner": self.has_partner,
            "expected_class": self.expected_class,
            "expected_c": self.expected_c,
            "expected_space": self.expected_space,
            "status": self.status,
            "description": self.description,
            "promotion": self.promotion,
        }


def _num(v):
    v = float(v)
    return repr(v) if v >= 0 else f"({v!r})"


def _sig_tuple(sig):
    return tuple(1 if s == "+" else -1 for s in sig)


def _diag(entries, domain, signature=None, name=None):
    n = len(entries)
    comps = {(i, j): (entries[i] if i == j else "0") for i in range(n) for j in range(i, n)}
    return MetricField(comps, domain, signature, name=name)


def _box(n, half):
    return ChartDomain([(-half, half)] * n)


# -- families ---------------------------------------------------------------

def flat(n=2, signature=None, half=3.0):
    signature = signature or "+" * n
    if len(signature) != n:
        raise ValueError("signature length must equal n")
    s = _sig_tuple(signature)
    return _diag([str(float(v)) for v in s], _box(n, half), s, name=f"flat({n},{signature})")


def projective_metric(n, K, eta, domain, name):
    """``eta/(1+K q) - K (eta x)(eta x)/(1+K q)^2`` with ``q = x^T eta x``."""
    q = "(" + "+".join(f"{_num(eta[i])}*x{i + 1}^2" for i in range(n)) + ")"
    den = f"(1+{_num(K)}*{q})"
    comps = {}
    for i in range(n):
        for j in range(i, n):
            cross = f"{_num(K * eta[i] * eta[j])}*x{i + 1}*x{j + 1}/{den}^2"
            lead = f"{_num(eta[i])}/{den}" if i == j else "0"
            comps[(i, j)] = f"{lead} - {cross}"
    return MetricField(comps, domain, tuple(int(e) for e in eta), name=name)


def sphere_gnomonic(n=2, K=1.0):
    half = 3.0 / math.sqrt(K)
    return projective_metric(n, K, [1] * n, _box(n, half), f"sphere_gnomonic({n},{K!r})")


def klein_half_width(n, K):
    return 0.99 / math.sqrt(n * -K)


def klein_hyperbolic(n=2, K=-1.0):
    return projective_metric(n, K, [1] * n, _box(n, klein_half_width(n, K)),
                             f"klein_hyperbolic({n},{K!r})")


def sphere_angles():
    return _diag(["1", "sin(x1)^2"], ChartDomain([(0.0, math.pi), (-math.pi, math.pi)]),
                 name="sphere_angles(2)")


def _dini_XY(a, b):
    return f"({_num(a)}+x1^2)", f"(1+{_num(b)}*x2^2)"


def liouville_dini(a=3.0, b=0.5):
    X, Y = _dini_XY(a, b)
    return _diag([f"{X}-{Y}", f"{X}-{Y}"], _box(2, 1.0), name=f"liouville_dini({a!r},{b!r})")


def liouville_dini_partner(a=3.0, b=0.5):
    X, Y = _dini_XY(a, b)
    return _diag([f"(1/{Y}-1/{X})/{X}", f"(1/{Y}-1/{X})/{Y}"], _box(2, 1.0),
                 name=f"liouville_dini_partner({a!r},{b!r})")


def schwarzschild_exterior(m=1.0, margin=0.25):
    lo = 2.0 * m * (1.0 + margin)
    f = f"(1-{_num(2 * m)}/x1)"
    domain = ChartDomain([(lo, 10.0 * m), (0.1, math.pi - 0.1), (-math.pi, math.pi), (-10.0, 10.0)])
    return _diag([f"1/{f}", "x1^2", "x1^2*sin(x2)^2", f"-{f}"], domain, (1, 1, 1, -1),
                 name=f"schwarzschild_exterior({m!r})")


def desitter4(K=1.0):
    eta = [1, 1, 1, -1]
    return projective_metric(4, K, eta, _box(4, 0.6 / math.sqrt(K)), f"desitter4({K!r})")


def conformal_bump(n=3, amplitude=0.1):
    f = f"(1+{_num(amplitude)}*x1^2)"
    return _diag([f] * n, _box(n, 1.0), name=f"conformal_bump({n},{amplitude!r})")


# -- default grids ----------------------------------------------------------

def _default_res(n):
    return 9 if n <= 3 else 5


def _box_grid(n, half):
    return Grid.box([(-half, half)] * n, _default_res(n))


def _gnomonic_grid(n=2, K=1.0):
    return Grid.disk(0.8 / math.sqrt(K), n, _default_res(n))


def _klein_grid(n=2, K=-1.0):
    return Grid.disk(klein_half_width(n, K), n, _default_res(n))


def _angles_grid():
    return Grid.box([(0.6, 2.5), (-1.0, 1.0)], 9)


def _schwarzschild_grid(m=1.0, margin=0.25):
    return Grid.box([(2.0 * m * (1.0 + margin), 10.0 * m), (0.5, math.pi - 0.5), (-1.0, 1.0),
                     (-1.0, 1.0)], 5)


def _desitter_grid(K=1.0):
    return Grid.box([(-0.5 / math.sqrt(K), 0.5 / math.sqrt(K))] * 4, 5)


# -- registry ---------------------------------------------------------------

_N = ParamSpec("n", 2, "int", 2, 6, "dimension")


def _entries():
    return [
        CorpusEntry(
            "flat", 2, (_N, ParamSpec("signature", None, "signature", doc="'+'/'-' per axis")),
            factory=lambda n, signature: flat(n, signature),
            grid=lambda n, signature: _box_grid(n, 1.0),
            partner=lambda n, signature: flat(n, signature),
            expected_class=HOMOTHETIC, expected_c=1.0,
            expected_space={"einstein": True, "K": 0.0},
            description="constant diagonal metric with the given signature",
        ),
        CorpusEntry(
            "sphere_gnomonic", 2, (_N, ParamSpec("K", 1.0, "real", 1e-3, 1e3, "curvature > 0")),
            factory=sphere_gnomonic,
            grid=_gnomonic_grid,
            partner=lambda n, K: flat(n),
            expected_class=NONTRIVIAL,
            expected_space={"einstein": True, "K": "=K"},
            description="central projection chart of the round sphere; partner flat",
        ),
        CorpusEntry(
            "klein_hyperbolic", 2,
            (ParamSpec("n", 2, "int", 2, 3, "dimension"),
             ParamSpec("K", -1.0, "real", -1e3, -1e-3, "curvature < 0")),
            factory=klein_hyperbolic,
            grid=_klein_grid,
            partner=lambda n, K: flat(n, half=klein_half_width(n, K)),
            expected_class=NONTRIVIAL,
            expected_space={"einstein": True, "K": "=K"},
            description="projective (Klein) model of hyperbolic space; partner flat",
        ),
        CorpusEntry(
            "sphere_angles", 2, (),
            factory=sphere_angles,
            grid=_angles_grid,
            expected_space={"einstein": True, "K": 1.0},
            description="unit 2-sphere in polar angle coordinates, diag(1, sin^2 x1)",
        ),
        CorpusEntry(
            "nonpair_flat_angles", 2, (),
            factory=lambda: flat(2),
            grid=_angles_grid,
            partner=sphere_angles,
            expected_class=NOT_GEODESIC,
            expected_space={"einstein": True, "K": 0.0},
            description="control: flat metric against the sphere angles metric on one chart",
        ),
        CorpusEntry(
            "liouville_dini", 2,
            (ParamSpec("a", 3.0, "real", 2.01, 100.0, "X = a + x1^2"),
             ParamSpec("b", 0.5, "real", 0.0, 1.0, "Y = 1 + b x2^2")),
            factory=liouville_dini,
            grid=lambda a, b: _box_grid(2, 1.0),
            partner=liouville_dini_partner,
            expected_class=NONTRIVIAL,
            expected_space={},
            status=CANDIDATE,
            description="(X - Y)(dx1^2 + dx2^2) with partner (1/Y - 1/X)(dx1^2/X + dx2^2/Y)",
        ),
        CorpusEntry(
            "schwarzschild_exterior", 4,
            (ParamSpec("m", 1.0, "real", 1e-3, 1e3, "mass"),
             ParamSpec("margin", 0.25, "real", 0.05, 2.0, "inner edge at 2m(1+margin)")),
            factory=schwarzschild_exterior,
            grid=_schwarzschild_grid,
            partner=lambda m, margin: schwarzschild_exterior(m, margin).scaled(2.0),
            expected_class=HOMOTHETIC, expected_c=2.0,
            expected_space={"einstein": True, "K": None, "R": 0.0},
            description="static spherically symmetric vacuum metric, coordinates (r, theta, phi, t)",
        ),
        CorpusEntry(
            "desitter4", 4, (ParamSpec("K", 1.0, "real", 1e-3, 1e3, "curvature > 0"),),
            factory=desitter4,
            grid=_desitter_grid,
            partner=lambda K: flat(4, "+++-", half=0.6 / math.sqrt(K)),
            expected_class=NONTRIVIAL,
            expected_space={"einstein": True, "K": "=K"},
            description="Lorentzian constant-curvature metric in a projective chart; partner Minkowski",
        ),
        CorpusEntry(
            "conformal_bump", 3,
            (ParamSpec("n", 3, "int", 2, 6, "dimension"),
             ParamSpec("amplitude", 0.1, "real", 1e-3, 0.5, "factor 1 + amplitude x1^2")),
            factory=conformal_bump,
            grid=lambda n, amplitude: _box_grid(n, 1.0),
            expected_space={"einstein": False, "K": None},
            description="control: flat metric times a non-constant conformal factor",
        ),
    ]


DINI_TRIALS = ({"a": 3.0, "b": 0.5}, {"a": 4.0, "b": 1.0}, {"a": 2.5, "b": 0.2})


def _promote(entry):
    """Run the residual oracle over several parameter choices."""
    trials = []
    for params in DINI_TRIALS:
        p = entry.resolve(params)
        rep = levi_civita_residual(entry.factory(**p), entry.partner(**p), entry.grid(**p))
        trials.append({"params": p, "lc2_max": rep.max})
    ok = all(t["lc2_max"] < PAIR_TOL for t in trials)
    record = {"tolerance": PAIR_TOL, "trials": trials, "promoted": ok}
    if ok:
        return replace(entry, status=VALIDATED, promotion=record)
    worst = max(trials, key=lambda t: t["lc2_max"])
    record["reason"] = f"LC2 residual {worst['lc2_max']:.3e} at {worst['params']}"
    log.warning("corpus entry %s stays candidate: %s", entry.name, record["reason"])
    return replace(entry, promotion=record)


@lru_cache(maxsize=1)
def _registry():
    out = []
    for e in _entries():
        out.append(_promote(e) if e.status == CANDIDATE else e)
    return tuple(out)


def corpus_list():
    """All entries in a fixed order (candidates already run through promotion)."""
    return list(_registry())


def get_entry(name) -> CorpusEntry:
    for e in _registry():
        if e.name == name:
            return e
    raise KeyError(f"unknown corpus entry {name!r}")


def instantiate(name, params=None):
    """``(metric, partner)`` for a corpus entry; ``partner`` is None when absent."""
    e = get_entry(name)
    p = e.resolve(params)
    g = e.factory(**p)
    return g, (e.partner(**p) if e.partner else None)


def default_grid(name, params=None) -> Grid:
    e = get_entry(name)
    return e.grid(**e.resolve(params))


def validated_pairs():
    """Names of entries whose pair is a validated geodesic pair."""
    return [e.name for e in _registry()
            if e.has_partner and e.status == VALIDATED and e.expected_class != NOT_GEODESIC]


def manifest():
    return {"schema": 1, "entries": [e.to_json() for e in _registry()]}
