import numpy as np

from geomap import corpus


def corpus_points(name, k, rng, params=None):
    """``k`` random points inside the default grid region of a corpus entry."""
    grid = corpus.default_grid(name, params)
    pts = grid.points
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    out = []
    while len(out) < k:
        p = lo + (hi - lo) * rng.random(len(lo))
        if grid.spec.get("kind") == "disk":
            c = np.asarray(grid.spec["center"])
            if np.linalg.norm(p - c) >= grid.spec["radius"]:
                continue
        out.append(p)
    return np.array(out)


def metric_names():
    return [e.name for e in corpus.corpus_list()]
