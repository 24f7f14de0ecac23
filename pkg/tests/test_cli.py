import json
import subprocess
import sys

import geomap
import pytest

from geomap import cli
from geomap.reports import SCHEMA_VERSION

SPEC_OPERATIONS = {
    "parse_expr", "eval_jet", "inverse_metric", "christoffel", "curvature", "covariant_derivative_02",
    "covariant_derivative_20", "integrate_geodesic", "pregeodesic_residual", "compute_psi",
    "levi_civita_residual", "sinyukov_forward", "lambda_from_trace", "sinyukov_residual",
    "reconstruct_metric", "classify_mapping", "diagnose_space", "beltrami_harness", "theorem4_harness",
    "theorem5_harness", "unit_normal", "build_semigeodesic_chart", "verify_semigeodesic",
    "corpus_list", "instantiate", "emit_plot_data",
}

GNOMONIC = {"metric": {"corpus": "sphere_gnomonic"}, "partner": "corpus"}

JOBS = {
    "verify": GNOMONIC,
    "transform": {**GNOMONIC, "points": [[0.1, 0.2], [0.5, -0.3]]},
    "reconstruct": {**GNOMONIC, "a_field": "forward", "points": {"random": 5}},
    "classify": {"metric": {"corpus": "sphere_angles"}, "partner": {"scale": 2}, "expect": {"label": "homothetic"}},
    "geodesic": {"metric": {"corpus": "sphere_gnomonic"}, "initial": {"position": [0.1, 0.0], "velocity": [0.3, 0.4]},
                 "t_end": 0.5, "step": 0.01, "test_metric": {"corpus": "flat"}},
    "diagnose": {"metric": {"corpus": "schwarzschild_exterior"}, "partner": {"scale": 2.0},
                 "harness": "einstein4_rigidity", "points": [[4.0, 1.2, 0.3, 0.0]]},
    "semigeodesic": {"metric": {"corpus": "sphere_angles"},
                     "hypersurface": {"components": ["1.5707963267948966", "x1"], "base": [0.0]},
                     "lattice": {"dt": 0.02, "du": 0.02, "ku": 3}, "t_range": [-0.1, 0.1]},
    "corpus": {"validate": True},
}


def run(tmp_path, command, job, **kw):
    return cli.run_job(command, job, str(tmp_path), **kw)


def test_command_table_covers_every_operation():
    reachable = set()
    for cmd in cli.COMMANDS.values():
        reachable.update(cmd.operations)
    assert SPEC_OPERATIONS <= reachable
    for op in reachable:
        assert callable(getattr(geomap, op)), op


@pytest.mark.parametrize("command", sorted(cli.COMMANDS))
def test_every_command_runs(tmp_path, command):
    code, report = run(tmp_path, command, JOBS[command])
    assert code == cli.EXIT_OK, report
    assert report["schema"] == SCHEMA_VERSION
    assert report["tolerances"] == cli.DEFAULT_TOLERANCES
    on_disk = json.loads((tmp_path / f"{command}_report.json").read_text())
    assert on_disk["status"] == "ok"


def test_verify_gnomonic(tmp_path):
    code, report = run(tmp_path, "verify", GNOMONIC)
    assert code == 0
    assert report["result"]["LC2"]["max"] < 1e-8
    assert report["result"]["geodesic"] is True
    lines = (tmp_path / "verify.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,residual"
    rows = [list(map(float, r.split(",")))[:2] for r in lines[1:]]
    assert rows == sorted(rows)


def test_classify_mismatch_exit_1(tmp_path):
    job = {**JOBS["classify"], "expect": {"label": "affine"}}
    code, report = run(tmp_path, "classify", job)
    assert code == cli.EXIT_MISMATCH
    assert report["status"] == "mismatch"
    assert report["result"]["expect_failures"]


def test_classify_constant_expectation(tmp_path):
    job = {**JOBS["classify"], "expect": {"label": "homothetic", "c": 2.0}}
    assert run(tmp_path, "classify", job)[0] == 0


def test_reconstruct_singular_exit_2(tmp_path):
    job = {"metric": {"corpus": "flat"}, "a_field": {"components": [["1", "1"], [None, "1"]]},
           "points": [[0.0, 0.0]]}
    code, report = run(tmp_path, "reconstruct", job)
    assert code == cli.EXIT_INPUT
    assert report["error"]["code"] == "RECONSTRUCTION_SINGULAR"


@pytest.mark.parametrize("job, code", [
    ({"metric": {"corpus": "nope"}, "partner": "corpus"}, "INPUT_ERROR"),
    ({"metric": {"components": [["1", "0"], ["1", "1"]]}, "partner": {"scale": 2}}, "INPUT_ERROR"),
    ({"metric": {"components": [["1 +", "0"], [None, "1"]]}, "partner": {"scale": 2}}, "SYNTAX_ERROR"),
    ({**GNOMONIC, "expect": {"bogus": 1}}, "INPUT_ERROR"),
    ({**GNOMONIC, "tolerances": {"bogus": 1}}, "INPUT_ERROR"),
    ({**GNOMONIC, "grid": {"bounds": [[-5, 5], [-5, 5]]}}, "INPUT_ERROR"),
])
def test_input_errors(tmp_path, job, code):
    status, report = run(tmp_path, "verify", job)
    assert status == cli.EXIT_INPUT
    assert report["error"]["code"] == code
    assert report["error"]["message"]


def test_unknown_command(tmp_path):
    assert run(tmp_path, "frobnicate", {})[0] == cli.EXIT_INPUT


def test_empty_grid_gives_header_only_csv(tmp_path):
    job = {**GNOMONIC, "grid": {"points": []}}
    code, _ = run(tmp_path, "verify", job)
    assert code == 0
    assert (tmp_path / "verify.csv").read_text().splitlines() == ["x1,x2,residual"]


def test_geodesic_csv_header(tmp_path):
    run(tmp_path, "geodesic", JOBS["geodesic"])
    assert (tmp_path / "geodesic.csv").read_text().splitlines()[0] == "t,x1,x2,v1,v2"


def test_tolerance_override_echoed(tmp_path):
    job = {**JOBS["classify"], "tolerances": {"eps_h": 1e-3}}
    _, report = run(tmp_path, "classify", job)
    assert report["tolerances"]["eps_h"] == 1e-3
    assert report["result"]["witness"]["tolerances"]["eps_h"] == 1e-3


def test_inline_metric_and_grid_res(tmp_path):
    job = {"metric": {"components": [["1", "0"], [None, "sin(x1)^2"]], "domain": [[0.5, 2.5], [-1, 1]]},
           "partner": {"scale": 3}, "grid": {"bounds": [[0.6, 2.4], [-0.9, 0.9]], "resolution": 9}}
    code, report = run(tmp_path, "verify", job, grid_res=5)
    assert code == 0
    assert report["result"]["LC2"]["grid"]["resolution"] == 5


def test_random_points_follow_seed(tmp_path):
    _, r1 = run(tmp_path, "transform", {**GNOMONIC, "points": {"random": 3}}, seed=7)
    _, r2 = run(tmp_path, "transform", {**GNOMONIC, "points": {"random": 3}}, seed=7)
    _, r3 = run(tmp_path, "transform", {**GNOMONIC, "points": {"random": 3}}, seed=8)
    assert r1["result"] == r2["result"] != r3["result"]


def test_reports_are_byte_identical(tmp_path):
    for sub in ("a", "b"):
        d = tmp_path / sub
        d.mkdir()
        for command, job in JOBS.items():
            run(d, command, job)
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert len(files) >= len(JOBS)
    for name in files:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_main_entry_point(tmp_path):
    job = tmp_path / "job.json"
    job.write_text(json.dumps(JOBS["classify"]))
    proc = subprocess.run([sys.executable, "-m", "geomap.cli", "classify", "--job", str(job),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout) == {"command": "classify", "status": "ok"}
    proc = subprocess.run([sys.executable, "-m", "geomap.cli", "verify", "--job", str(tmp_path / "missing"),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 2
    assert json.loads(proc.stderr)["code"] == "INPUT_ERROR"


def test_main_in_process(tmp_path, capsys):
    assert cli.main(["corpus", "--out", str(tmp_path)]) == 0
    assert json.loads(capsys.readouterr().out)["status"] == "ok"
