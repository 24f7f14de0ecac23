"""Compare the compiled and pure-Python jet kernels.

Run with ``python3 benchmarks/bench_kernels.py [--repeat N]``.  Timings are
best-of-N wall clock; a speedup column is printed when both kernels exist.
"""

import argparse
import time

import numpy as np

from geomap import corpus
from geomap.expr import backend
from geomap.geodesics import GeodesicState, integrate_geodesic
from geomap.geometry import curvature_batch
from geomap.mapping import levi_civita_residual


def _best(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases():
    g_s, _ = corpus.instantiate("schwarzschild_exterior")
    g_d, partner_d = corpus.instantiate("desitter4")
    grid_d = corpus.default_grid("desitter4")
    pts = np.random.default_rng(0).uniform(0.6, 2.5, size=(2000, 2))
    pts[:, 1] -= 1.5
    sphere = corpus.sphere_angles()
    return {
        "curvature, sphere, 2000 points": lambda: curvature_batch(sphere, pts),
        "LC2 residual, de Sitter pair, 625 points": lambda: levi_civita_residual(g_d, partner_d, grid_d),
        "geodesic, Schwarzschild, 5000 RK4 steps": lambda: integrate_geodesic(
            g_s, GeodesicState((6.0, 1.2, 0.0, 0.0), (0.0, 0.01, 0.05, 1.0)), 5.0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    names = backend.available()
    rows = {}
    for name in names:
        prev = backend.use(name)
        try:
            for label, fn in cases().items():
                fn()  # warm-up
                rows.setdefault(label, {})[name] = _best(fn, args.repeat)
        finally:
            backend.use(prev)
    width = max(map(len, rows))
    head = f"{'case':<{width}}  " + "  ".join(f"{n:>10}" for n in names)
    if len(names) > 1:
        head += f"  {'speedup':>8}"
    print(head)
    for label, t in rows.items():
        line = f"{label:<{width}}  " + "  ".join(f"{t[n] * 1e3:>8.2f}ms" for n in names)
        if len(names) > 1:
            line += f"  {t['python'] / t['cython']:>7.1f}x"
        print(line)


if __name__ == "__main__":
    main()
