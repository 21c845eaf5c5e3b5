import json
import os
import subprocess
import sys

import numpy as np
import pytest

from qsdlab import cli
from qsdlab.errors import ValidationError


def _write(tmp_path, text, name="exp.spec"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


def _run(argv, **env_over):
    env = dict(os.environ)
    env.update(env_over)
    return subprocess.run(
        [sys.executable, "-m", "qsdlab.cli", *argv],
        capture_output=True,
        text=True,
        env=env,
    )


FAST_SPEC = """
# two cheap experiments
[fixed-point]
experiment = invariance
mu = qsd gamma=0.5 alpha=1
t_grid = 1, 2

[catalog]
experiment = classify
alpha = 1
"""


# --- spec parsing -----------------------------------------------------------------

def test_parse_valid_spec(tmp_path):
    specs = cli.parse_spec_file(_write(tmp_path, FAST_SPEC))
    assert [s.name for s in specs] == ["fixed-point", "catalog"]
    assert specs[0].experiment == "invariance"
    assert specs[0].t_grid == [1.0, 2.0]
    assert specs[1].mu is None


@pytest.mark.parametrize(
    "text,line,fragment",
    [
        ("[a]\nexperiment = invariance\nmu = qsd gamma=0.5\nt_grid = 1\n[a]\nexperiment = classify\n", 5, "duplicate section"),
        ("[a]\nexperiment = classify\nexperiment = classify\n", 3, "duplicate key"),
        ("[a]\nexperiment = frobnicate\n", 2, "unknown experiment"),
        ("[a]\nexperiment = classify\ncolor = blue\n", 3, "unknown key"),
        ("seed = 1\n", 1, "outside any"),
        ("[a]\nexperiment = yaglom\nmu = dirac x0=1\nt_grid = 3 2\n", 4, "strictly increasing"),
        ("[a]\nexperiment = yaglom\nmu = zeta s=2\nt_grid = 1\n", 3, "unknown family"),
        ("[a]\nexperiment = yaglom\nmu = dirac x0=zero\nt_grid = 1\n", 3, "not a number"),
        ("[a]\nexperiment = yaglom\nt_grid = 1\n", 1, "requires 'mu'"),
        ("[a]\nexperiment = yaglom\nmu = dirac x0=1\n", 1, "requires 't_grid'"),
        ("[a]\nexperiment = yaglom\nmu = dirac x0=1\nt_grid = 1\nmethod = magic\n", 5, "method must be"),
        ("[a]\nnot a pair\n", 2, "key = value"),
        ("", None, "no [section]"),
    ],
)
def test_parse_errors_carry_line_numbers(tmp_path, text, line, fragment):
    with pytest.raises(ValidationError) as err:
        cli.parse_spec_file(_write(tmp_path, text))
    assert fragment in str(err.value)
    assert err.value.line == line
    if line is not None:
        assert f"line {line}:" in str(err.value)


# --- run verb ----------------------------------------------------------------------

def test_run_writes_csv_and_manifest(tmp_path):
    spec = _write(tmp_path, FAST_SPEC)
    out = tmp_path / "out"
    r = _run(["--out", str(out), "run", spec])
    assert r.returncode == 0, r.stderr
    inv = (out / "fixed-point.csv").read_text(encoding="utf-8").splitlines()
    assert inv[0].startswith("# claim:")
    assert inv[1] == "t, ks_to_target, target_gamma, survival, survival_err"
    assert len(inv) == 4
    # the fixed point holds tightly even at default resolution
    for row in inv[2:]:
        ks = float(row.split(",")[1])
        assert ks < 1e-4
    cls = (out / "catalog.csv").read_text(encoding="utf-8").splitlines()
    assert cls[1] == "family, params, rho_inf, rho_sup, beta, kappa, regime, gamma_or_law"
    regimes = {r.split(", ")[0]: r.split(", ")[6] for r in cls[2:]}
    assert regimes["dirac"] == "AttractedTo"
    assert regimes["pareto"] == "HeavyScaled"
    manifest = json.loads((out / "fixed-point.manifest.json").read_text())
    for key in ("seed", "relative_tolerance", "threads", "version", "timestamp", "partial"):
        assert key in manifest
    assert manifest["partial"] is None


def test_run_byte_identical_reruns_and_thread_independence(tmp_path):
    spec = _write(tmp_path, FAST_SPEC)
    blobs = []
    for d, threads in (("a", "1"), ("b", "1"), ("c", "4")):
        out = tmp_path / d
        r = _run(["--out", str(out), "run", spec], QSDLAB_THREADS=threads)
        assert r.returncode == 0, r.stderr
        blobs.append(
            (out / "fixed-point.csv").read_bytes() + (out / "catalog.csv").read_bytes()
        )
    assert blobs[0] == blobs[1] == blobs[2]


def test_run_seed_override_lands_in_manifest(tmp_path):
    spec = _write(tmp_path, FAST_SPEC)
    out = tmp_path / "out"
    r = _run(["--out", str(out), "--seed", "777", "run", spec])
    assert r.returncode == 0, r.stderr
    assert json.loads((out / "catalog.manifest.json").read_text())["seed"] == 777


def test_run_bad_spec_exits_2(tmp_path):
    spec = _write(tmp_path, "[a]\nexperiment = nope\n")
    r = _run(["run", spec])
    assert r.returncode == 2
    assert "line 2" in r.stderr


def test_run_missing_file_exits_2(tmp_path):
    r = _run(["run", str(tmp_path / "ghost.spec")])
    assert r.returncode == 2


def test_run_extinction_exits_4(tmp_path):
    spec = _write(
        tmp_path,
        "[doomed]\n"
        "experiment = yaglom\n"
        "mu = dirac x0=0.001\n"
        "t_grid = 1\n"
        "method = mc\n"
        "conditioning = resampling\n"
        "n_particles = 1\n"
        "dt = 0.5\n"
        "seed = 0\n",
    )
    r = _run(["--out", str(tmp_path / "out"), "run", spec])
    assert r.returncode == 4
    assert "extinction" in r.stderr


def test_run_mc_method_writes_mc_rows(tmp_path):
    spec = _write(
        tmp_path,
        "[mc-fp]\n"
        "experiment = invariance\n"
        "mu = qsd gamma=0 alpha=1\n"
        "t_grid = 1\n"
        "method = mc\n"
        "n_particles = 20000\n"
        "seed = 3\n",
    )
    out = tmp_path / "out"
    r = _run(["--out", str(out), "run", spec])
    assert r.returncode == 0, r.stderr
    row = (out / "mc-fp.csv").read_text().splitlines()[2].split(",")
    ks, surv = float(row[1]), float(row[3])
    assert ks < 0.02
    assert abs(surv - np.exp(-0.5)) < 0.02


# --- other verbs --------------------------------------------------------------------

def test_list_families():
    r = _run(["list-families"])
    assert r.returncode == 0
    names = {ln.split()[0] for ln in r.stdout.splitlines() if ln.strip()}
    assert {"dirac", "exponential", "halfnormal", "weibull", "pareto",
            "halfcauchy", "logtail", "qsd", "tabulated"} <= names


def test_selftest_passes_and_writes_csv(tmp_path):
    r = _run(["--out", str(tmp_path), "selftest"])
    assert r.returncode == 0, r.stdout + r.stderr
    lines = (tmp_path / "selftest.csv").read_text().splitlines()
    assert lines[1] == "check, value, threshold, status"
    assert all(ln.endswith("pass") for ln in lines[2:])


def test_plot_renders_svg(tmp_path):
    spec = _write(tmp_path, FAST_SPEC)
    out = tmp_path / "out"
    assert _run(["--out", str(out), "run", spec]).returncode == 0
    r = _run(["plot", str(out / "fixed-point.csv")])
    assert r.returncode == 0, r.stderr
    svg = (out / "fixed-point.svg").read_text()
    assert svg.lstrip().startswith("<?xml")


def test_plot_rejects_non_numeric_csv(tmp_path):
    spec = _write(tmp_path, FAST_SPEC)
    out = tmp_path / "out"
    assert _run(["--out", str(out), "run", spec]).returncode == 0
    r = _run(["plot", str(out / "catalog.csv")])
    assert r.returncode == 2
    assert "non-numeric" in r.stderr
