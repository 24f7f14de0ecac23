"""Batch front end: ``geomap <command> --job job.json [--out DIR]``.

A job file is a JSON object naming metrics (corpus references or inline
component matrices), a sampling grid and command-specific inputs.  Every
command writes a deterministic JSON report (``"schema": 1``) and, where it
makes sense, CSV plot data.  Exit status: 0 success, 1 an ``expect`` check
failed, 2 invalid input or a geometric error (reported with its code).
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import __version__
from . import corpus as corpus_mod
from . import mapping as M
from . import special_spaces as S
from .errors import GeomapError, JobError
from .expr import eval_jet
from .geodesics import (
    DEFAULT_STEP,
    GeodesicState,
    Trajectory,
    energy,
    integrate_geodesic,
    pregeodesic_residual,
)
from .geometry import (
    ChartDomain,
    Grid,
    InverseMetricField,
    MetricField,
    SymmetricTensorField,
    christoffel,
    covariant_derivative_02,
    covariant_derivative_20,
    curvature,
    inverse_metric,
)
from .reports import SCHEMA_VERSION, ResidualReport, dumps, residual_csv, write_atomic
from .semigeodesic import (
    BASE_TOL,
    GAMMA_TOL,
    METRIC_TOL,
    HypersurfaceParam,
    Lattice,
    SemigeodesicChart,
    build_semigeodesic_chart,
    unit_normal,
    verify_semigeodesic,
)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_INPUT = 2

DEFAULT_TOLERANCES = {
    "eps_lc": M.EPS_LC,
    "eps_psi": M.EPS_PSI,
    "eps_h": M.EPS_H,
    "einstein": S.EINSTEIN_TOL,
    "constant_curvature": S.CC_TOL,
    "semigeodesic_metric": METRIC_TOL,
    "semigeodesic_gamma": GAMMA_TOL,
    "semigeodesic_base": BASE_TOL,
}


# -- job parsing --------------------------------------------------------------

def _bounds(raw):
    out = []
    for pair in raw:
        if len(pair) != 2:
            raise JobError("bounds must be [lo, hi] pairs")
        lo = -math.inf if pair[0] is None else float(pair[0])
        hi = math.inf if pair[1] is None else float(pair[1])
        out.append((lo, hi))
    return out


class Job:
    """A parsed job file; metrics are built lazily and cached."""

    def __init__(self, data, grid_res=None, seed=None):
        if not isinstance(data, dict):
            raise JobError("job file must hold a JSON object")
        self.data = data
        self.grid_res = grid_res
        self.seed = 0 if seed is None else int(seed)
        tol = data.get("tolerances", {})
        unknown = sorted(set(tol) - set(DEFAULT_TOLERANCES))
        if unknown:
            raise JobError(f"unknown tolerance key(s): {', '.join(unknown)}")
        self.tolerances = {**DEFAULT_TOLERANCES, **{k: float(v) for k, v in tol.items()}}
        self._cache = {}

    def require(self, key):
        if key not in self.data:
            raise JobError(f"job is missing '{key}'")
        return self.data[key]

    def _metric_from(self, spec, key):
        if isinstance(spec, dict) and "corpus" in spec:
            try:
                g, partner = corpus_mod.instantiate(spec["corpus"], spec.get("params"))
            except KeyError as exc:
                raise JobError(str(exc.args[0])) from None
            except ValueError as exc:
                raise JobError(str(exc)) from None
            self._cache[key + ":corpus"] = (spec["corpus"], spec.get("params"), partner)
            return g
        if isinstance(spec, dict) and "components" in spec:
            comps = spec["components"]
            n = len(comps)
            domain = spec.get("domain")
            domain = ChartDomain(_bounds(domain)) if domain is not None else ChartDomain.unbounded(n)
            try:
                return MetricField(comps, domain, spec.get("signature"), name=spec.get("name"))
            except GeomapError:
                raise
            except (ValueError, TypeError) as exc:
                raise JobError(f"invalid {key}: {exc}") from None
        raise JobError(f"'{key}' must name a corpus entry or give 'components'")

    @property
    def metric(self):
        if "metric" not in self._cache:
            self._cache["metric"] = self._metric_from(self.require("metric"), "metric")
        return self._cache["metric"]

    @property
    def partner(self):
        if "partner" not in self._cache:
            spec = self.require("partner")
            g = self.metric
            if spec == "corpus":
                info = self._cache.get("metric:corpus")
                if info is None or info[2] is None:
                    raise JobError("'partner': 'corpus' needs a corpus metric with a partner")
                p = info[2]
            elif isinstance(spec, dict) and "scale" in spec:
                p = g.scaled(float(spec["scale"]))
            else:
                p = self._metric_from(spec, "partner")
            if p.dimension != g.dimension:
                raise JobError("metric and partner dimensions differ")
            self._cache["partner"] = p
        return self._cache["partner"]

    @property
    def grid(self) -> Grid:
        if "grid" in self._cache:
            return self._cache["grid"]
        spec = self.data.get("grid", "default")
        g = self.metric
        n = g.dimension
        if spec == "default":
            info = self._cache.get("metric:corpus")
            if info is not None:
                grid = corpus_mod.default_grid(info[0], info[1])
            else:
                grid = Grid.box(_finite_bounds(g.domain.bounds), 9)
        elif isinstance(spec, dict) and "points" in spec:
            pts = np.asarray(spec["points"], dtype=float).reshape(-1, n)
            grid = Grid(pts, {"kind": "points", "count": len(pts)})
        elif isinstance(spec, dict) and "bounds" in spec:
            grid = Grid.box(_finite_bounds(_bounds(spec["bounds"])), int(spec.get("resolution", 9)),
                            float(spec.get("shrink", 0.05)))
        elif isinstance(spec, dict) and "disk" in spec:
            d = spec["disk"]
            grid = Grid.disk(float(d["radius"]), n, int(spec.get("resolution", 9)), d.get("center"),
                             float(spec.get("shrink", 0.05)))
        else:
            raise JobError("grid must be 'default' or give 'bounds', 'disk' or 'points'")
        if grid.points.shape[1] != n:
            raise JobError(f"grid dimension {grid.points.shape[1]} does not match the metric ({n})")
        if self.grid_res is not None:
            grid = grid.with_resolution(self.grid_res)
        inside = g.domain.contains(grid.points) if len(grid) else np.ones(0, bool)
        if not np.all(inside):
            raise JobError(f"grid point {grid.points[~inside][0].tolist()} is outside the chart domain")
        self._cache["grid"] = grid
        return grid

    def points(self):
        """Explicit ``points`` list, or ``{"random": k}`` drawn inside the grid's box."""
        spec = self.data.get("points")
        if spec is None:
            return self.grid.points
        if isinstance(spec, dict) and "random" in spec:
            pts = self.grid.points
            rng = np.random.default_rng(self.seed)
            lo, hi = pts.min(axis=0), pts.max(axis=0)
            return lo + (hi - lo) * rng.random((int(spec["random"]), pts.shape[1]))
        return np.asarray(spec, dtype=float).reshape(-1, self.metric.dimension)


def _finite_bounds(bounds):
    if any(not (math.isfinite(lo) and math.isfinite(hi)) for lo, hi in bounds):
        raise JobError("an unbounded chart needs explicit grid bounds")
    return bounds


# -- outputs ------------------------------------------------------------------

def emit_plot_data(report, path):
    """Write per-point residuals, a trajectory or a chart lattice as CSV."""
    if isinstance(report, ResidualReport):
        text = residual_csv(report)
    elif isinstance(report, (Trajectory, SemigeodesicChart)):
        text = report.to_csv()
    else:
        raise TypeError(f"no CSV export for {type(report).__name__}")
    write_atomic(path, text)
    return path


@dataclass
class Outcome:
    result: dict
    ok: bool = True
    csv: object = None


def _expect_failures(expect, measured):
    """Compare ``expect`` entries to measured values; returns failure messages."""
    fails = []
    for key, want in sorted(expect.items()):
        if key not in measured:
            raise JobError(f"unknown expect key '{key}'")
        got = measured[key]
        if key.startswith("max_"):
            if not got <= float(want):
                fails.append(f"{key}: {got!r} exceeds {want!r}")
        elif isinstance(want, float) and isinstance(got, (int, float)) and not isinstance(got, bool):
            if not abs(got - want) <= 1e-8 * max(1.0, abs(want)):
                fails.append(f"{key}: got {got!r}, expected {want!r}")
        elif got != want:
            fails.append(f"{key}: got {got!r}, expected {want!r}")
    return fails


def _finish(job, result, measured, csv=None):
    fails = _expect_failures(job.data.get("expect", {}), measured)
    if fails:
        result["expect_failures"] = fails
    return Outcome(result, not fails, csv)


# -- commands -----------------------------------------------------------------

def _lambda_consistency(g, gbar, pts):
    """Pairwise agreement of four independent routes to ``lambda_i``."""
    if len(pts) == 0:
        return {"max_relative": 0.0}
    d = M.sinyukov_forward_batch(g, gbar, pts)
    a_up = M.SinyukovField(g, gbar, "a", "upper")
    a_lo = M.SinyukovField(g, gbar, "a", "lower")
    gval = g.values(pts)
    routes = {
        "forward_lower": d["lambda_lower"],
        "psi_contraction": np.einsum("pij,pj->pi", gval, d["lambda_upper"]),
        "trace_upper": np.einsum("pij,pj->pi", gval, M.lambda_from_trace_batch(g, a_up, pts)),
        "trace_covariant": M.lambda_from_trace_batch(g, a_lo, pts, covariant=True),
    }
    scale = M.lambda_scale(g, gbar, pts, d)
    names = sorted(routes)
    worst = 0.0
    for i, a in enumerate(names):
        for b in names[i + 1:]:
            u, v = routes[a], routes[b]
            den = np.maximum.reduce([np.linalg.norm(u, axis=1), np.linalg.norm(v, axis=1), scale])
            diff = np.linalg.norm(u - v, axis=1)
            rel = np.divide(diff, den, out=np.zeros_like(diff), where=den > 0)
            worst = max(worst, float(np.max(rel)))
    return {"routes": names, "max_relative": worst}


def cmd_verify(job):
    g, gb, grid = job.metric, job.partner, job.grid
    lc = M.levi_civita_residual(g, gb, grid)
    a = M.SinyukovField(g, gb, "a", "lower")
    lam = M.SinyukovField(g, gb, "lambda", "lower")
    sin = M.sinyukov_residual(g, a, lam, grid)
    lam_check = _lambda_consistency(g, gb, grid.points)
    result = {
        "LC2": lc.to_json(),
        "SIN3": sin.parts["SIN3"].to_json() if sin.parts else sin.to_json(),
        "SIN6": sin.parts["SIN6"].to_json() if sin.parts else sin.to_json(),
        "lambda_consistency": lam_check,
        "geodesic": lc.max <= job.tolerances["eps_lc"],
    }
    measured = {
        "max_residual": max(lc.max, sin.max),
        "max_LC2": lc.max,
        "max_SIN": sin.max,
        "geodesic": result["geodesic"],
    }
    return _finish(job, result, measured, csv=lc)


def cmd_transform(job):
    g, gb = job.metric, job.partner
    pts = job.points()
    a_up = M.SinyukovField(g, gb, "a", "upper")
    rows = []
    for p in pts:
        md = M.sinyukov_forward(g, gb, p)
        Psi, psi = M.compute_psi(g, gb, p)
        row = {"point": [float(v) for v in p], **md.to_json()}
        row["Psi"], row["psi"] = Psi, psi.tolist()
        row["lambda_upper_trace"] = M.lambda_from_trace(g, a_up, p).tolist()
        rows.append(row)
    result = {"points": rows, "lambda_consistency": _lambda_consistency(g, gb, pts)}
    return _finish(job, result, {"max_lambda_relative": result["lambda_consistency"]["max_relative"]})


def _a_field(job):
    spec = job.require("a_field")
    g = job.metric
    if spec == "forward":
        return M.SinyukovField(g, job.partner, "a", "lower")
    if not isinstance(spec, dict) or "components" not in spec:
        raise JobError("'a_field' must be 'forward' or give 'components'")
    try:
        return SymmetricTensorField(spec["components"], g.dimension, spec.get("variance", "lower"))
    except GeomapError:
        raise
    except (ValueError, TypeError) as exc:
        raise JobError(f"invalid a_field: {exc}") from None


def cmd_reconstruct(job):
    g = job.metric
    a = _a_field(job)
    pts = job.points()
    gbar, Psi = M.reconstruct_batch(g, a, pts)
    result = {"points": [{"point": p.tolist(), "gbar": gb.tolist(), "Psi": float(s)}
                         for p, gb, s in zip(pts, gbar, Psi)]}
    measured = {}
    if "partner" in job.data and len(pts):
        err = float(np.max(np.abs(gbar - job.partner.values(pts))))
        result["max_component_error"] = err
        measured["max_component_error"] = err
    return _finish(job, result, measured)


def cmd_classify(job):
    t = job.tolerances
    cls = M.classify_mapping(job.metric, job.partner, job.grid, t["eps_lc"], t["eps_psi"], t["eps_h"])
    measured = {"label": cls.label, "c": cls.witness["c"]}
    return _finish(job, cls.to_json(), measured)


def cmd_geodesic(job):
    g = job.metric
    init = job.require("initial")
    s0 = GeodesicState(init["position"], init["velocity"], init.get("parameter", 0.0))
    traj = integrate_geodesic(g, s0, float(job.require("t_end")), float(job.data.get("step", DEFAULT_STEP)))
    E = energy(g, traj)
    result = {
        "termination": traj.termination,
        "message": traj.message,
        "samples": len(traj),
        "step": traj.step,
        "final_state": {"parameter": float(traj.params[-1]),
                        "position": traj.positions[-1].tolist(),
                        "velocity": traj.velocities[-1].tolist()},
        "energy_drift": float(np.max(np.abs(E - E[0])) / abs(E[0])) if E[0] else float(np.max(np.abs(E))),
    }
    measured = {"termination": traj.termination, "max_energy_drift": result["energy_drift"]}
    if "test_metric" in job.data:
        h = job._metric_from(job.data["test_metric"], "test_metric")
        rep = pregeodesic_residual(traj, h)
        result["pregeodesic"] = rep.to_json()
        measured["max_pregeodesic"] = rep.max
    return _finish(job, result, measured, csv=traj)


def _point_geometry(g, p):
    ch = christoffel(g, p)
    cv = curvature(g, p)
    nab = covariant_derivative_02(g, g, p)
    nab_up = covariant_derivative_20(InverseMetricField(g), g, p)
    jets = [eval_jet(e, p) for e in g.components]
    return {
        "point": [float(v) for v in p],
        "metric": g.values(p)[0].tolist(),
        "metric_gradients": [j.grad.tolist() for j in jets],
        "inverse": inverse_metric(g, p).tolist(),
        "christoffel": ch.gamma.tolist(),
        "ricci": cv.ricci.tolist(),
        "scalar": cv.scalar,
        "metricity": float(max(np.max(np.abs(nab)), np.max(np.abs(nab_up)))),
    }


HARNESSES = {
    "beltrami": S.beltrami_harness,
    "einstein_partner": S.theorem4_harness,
    "einstein4_rigidity": S.theorem5_harness,
}


def cmd_diagnose(job):
    g, grid = job.metric, job.grid
    t = job.tolerances
    d = S.diagnose_space(g, grid, t["einstein"], t["constant_curvature"])
    result = {"diagnosis": d.to_json()}
    if "points" in job.data:
        result["points"] = [_point_geometry(g, p) for p in job.points()]
    measured = {
        "einstein": d.is_einstein,
        "constant_curvature": d.is_constant_curvature,
        "K": d.constant_curvature,
        "max_einstein_residual": d.einstein_residual,
    }
    if "harness" in job.data:
        name = job.data["harness"]
        if name not in HARNESSES:
            raise JobError(f"unknown harness '{name}' (choose from {', '.join(sorted(HARNESSES))})")
        rep = HARNESSES[name](g, job.partner, grid)
        result["harness"] = rep.to_json()
        measured["harness_passed"] = rep.passed
        measured["class"] = rep.details["class"]
    return _finish(job, result, measured)


def cmd_semigeodesic(job):
    g = job.metric
    hs = job.require("hypersurface")
    sigma = HypersurfaceParam(hs["components"], hs["base"], hs.get("reference"))
    lat = job.data.get("lattice", {})
    lattice = Lattice(float(lat.get("dt", 0.02)), float(lat.get("du", 0.02)), int(lat.get("ku", 4)))
    t_range = job.data.get("t_range", [-0.2, 0.2])
    chart = build_semigeodesic_chart(g, sigma, t_range, lattice)
    t = job.tolerances
    rep = verify_semigeodesic(chart, t["semigeodesic_metric"], t["semigeodesic_gamma"],
                              t["semigeodesic_base"])
    result = {
        "unit_normal": unit_normal(g, sigma, hs["base"]).tolist(),
        "lattice": {"dt": lattice.dt, "du": lattice.du, "ku": lattice.ku,
                    "t_nodes": len(chart.t)},
        "verification": rep.to_json(),
    }
    measured = {"passed": rep.passed, "max_g11_defect": rep.g11_defect,
                "max_g1a_defect": rep.g1a_defect, "max_base_defect": rep.base_defect}
    return _finish(job, result, measured, csv=chart)


def cmd_corpus(job):
    entries = corpus_mod.corpus_list()
    result = corpus_mod.manifest()
    measured = {"entries": len(entries)}
    if job.data.get("validate"):
        checks, mismatches = [], 0
        for e in entries:
            g, partner = corpus_mod.instantiate(e.name)
            grid = corpus_mod.default_grid(e.name)
            row = {"name": e.name, "status": e.status}
            if partner is not None:
                cls = M.classify_mapping(g, partner, grid)
                row["class"] = cls.label
                row["lc2_max"] = cls.witness["lc2_max"]
                good = cls.label == e.expected_class
                if e.expected_c is not None:
                    good = good and abs(cls.witness["c"] - e.expected_c) < 1e-8 * abs(e.expected_c)
                row["matches_expected"] = good
                if e.status == corpus_mod.VALIDATED and not good:
                    mismatches += 1
            d = S.diagnose_space(g, grid)
            row["einstein"] = d.is_einstein
            row["K"] = d.constant_curvature
            checks.append(row)
        result["validation"] = checks
        measured["mismatches"] = mismatches
        if mismatches:
            return Outcome({**result, "expect_failures": [f"{mismatches} corpus mismatches"]}, False)
    return _finish(job, result, measured)


@dataclass(frozen=True)
class Command:
    handler: Callable
    operations: tuple
    help: str


COMMANDS = {
    "verify": Command(cmd_verify, (
        "parse_expr", "levi_civita_residual", "compute_psi", "sinyukov_forward", "sinyukov_residual",
        "lambda_from_trace", "emit_plot_data"), "Levi-Civita and Sinyukov residuals of a pair"),
    "transform": Command(cmd_transform, (
        "compute_psi", "sinyukov_forward", "lambda_from_trace"), "forward transform at points"),
    "reconstruct": Command(cmd_reconstruct, ("reconstruct_metric",), "recover gbar from (g, a)"),
    "classify": Command(cmd_classify, ("classify_mapping",), "label a metric pair"),
    "geodesic": Command(cmd_geodesic, (
        "integrate_geodesic", "pregeodesic_residual", "emit_plot_data"), "integrate a geodesic"),
    "diagnose": Command(cmd_diagnose, (
        "eval_jet", "inverse_metric", "christoffel", "curvature", "covariant_derivative_02",
        "covariant_derivative_20", "diagnose_space", "beltrami_harness", "theorem4_harness",
        "theorem5_harness"), "curvature diagnostics and theorem harnesses"),
    "semigeodesic": Command(cmd_semigeodesic, (
        "unit_normal", "build_semigeodesic_chart", "verify_semigeodesic", "emit_plot_data"),
        "semigeodesic chart from a hypersurface"),
    "corpus": Command(cmd_corpus, ("corpus_list", "instantiate"), "corpus manifest and validation"),
}


def run_job(command, job_data, out_dir=".", grid_res=None, seed=None, report_name=None):
    """Run one job; returns ``(exit_code, report_dict)`` and writes the outputs."""
    if command not in COMMANDS:
        return _error_exit(JobError(f"unknown command '{command}'"), out_dir, command, report_name)
    try:
        job = Job(job_data, grid_res, seed)
        outcome = COMMANDS[command].handler(job)
    except GeomapError as exc:
        return _error_exit(exc, out_dir, command, report_name)
    except (KeyError, TypeError, ValueError) as exc:
        return _error_exit(JobError(f"{type(exc).__name__}: {exc}"), out_dir, command, report_name)
    outputs = job.data.get("outputs", {})
    report = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "version": __version__,
        "status": "ok" if outcome.ok else "mismatch",
        "tolerances": job.tolerances,
        "seed": job.seed,
        "job": job.data,
        "result": outcome.result,
    }
    if outcome.csv is not None:
        csv_path = os.path.join(out_dir, outputs.get("csv", f"{command}.csv"))
        emit_plot_data(outcome.csv, csv_path)
        report["csv"] = os.path.basename(csv_path)
    name = report_name or outputs.get("report", f"{command}_report.json")
    write_atomic(os.path.join(out_dir, name), dumps(report))
    return (EXIT_OK if outcome.ok else EXIT_MISMATCH), report


def _error_exit(exc, out_dir, command, report_name):
    report = {
        "schema": SCHEMA_VERSION,
        "command": command,
        "status": "error",
        "error": {"code": getattr(exc, "code", "INPUT_ERROR"), "message": str(exc)},
    }
    try:
        write_atomic(os.path.join(out_dir, report_name or f"{command}_report.json"), dumps(report))
    except OSError:
        pass
    return EXIT_INPUT, report


def build_parser():
    p = argparse.ArgumentParser(prog="geomap", description="Geodesic-mapping verification jobs.")
    p.add_argument("--version", action="version", version=f"geomap {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, cmd in COMMANDS.items():
        sp = sub.add_parser(name, help=cmd.help)
        sp.add_argument("--job", help="job file (JSON); optional for 'corpus'")
        sp.add_argument("--out", default=".", help="output directory")
        sp.add_argument("--grid-res", type=int, help="override grid resolution")
        sp.add_argument("--seed", type=int, help="seed for random point sampling")
    return p


def _load_job(args):
    if args.job is None:
        if args.command == "corpus":
            return {}
        raise JobError("--job is required for this command")
    try:
        with open(args.job, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise JobError(f"cannot read job file: {exc}") from None


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        data = _load_job(args)
    except JobError as exc:
        code, report = _error_exit(exc, args.out, args.command, None)
    else:
        code, report = run_job(args.command, data, args.out, args.grid_res, args.seed)
    if code == EXIT_INPUT:
        sys.stderr.write(json.dumps(report["error"], sort_keys=True) + "\n")
    else:
        summary = {"command": args.command, "status": report["status"]}
        sys.stdout.write(json.dumps(summary, sort_keys=True) + "\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
