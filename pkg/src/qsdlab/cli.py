"""Declarative experiment runner.

Spec files are line-oriented UTF-8 with one [section] per experiment and
"key = value" pairs, no nesting.  Each experiment writes one CSV with a
fixed header, a JSON manifest recording seed/tolerances/versions, and can be
rendered to an SVG chart with the `plot` verb.  CSVs are byte-reproducible
for a fixed seed; the manifest carries the only timestamp.

Exit codes: 0 success, 2 validation failure, 3 accuracy failure,
4 extinction.
"""

import argparse
import json
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, kernel, simulate, stats, tails
from .errors import (
    AccuracyError,
    ExtinctionError,
    ParameterDomainError,
    QsdLabError,
    ValidationError,
)
from .model import (
    FAMILIES,
    Dirac,
    Exponential,
    HalfCauchy,
    HalfNormal,
    LogTail,
    Pareto,
    QsdMeasure,
    Weibull,
    qsd_cdf,
)

EXPERIMENTS = (
    "invariance",
    "yaglom",
    "subcritical",
    "nu-evolution",
    "survival-curve",
    "heavy-scaled",
    "classify",
)

_HEADERS = {
    "invariance": "t, ks_to_target, target_gamma, survival, survival_err",
    "yaglom": "t, ks_to_target, target_gamma, survival, survival_err",
    "subcritical": "t, ks_to_target, target_gamma, survival, survival_err",
    "nu-evolution": "t, nu_median, predicted_gamma",
    "survival-curve": "t, survival, lower_bound_eighth_tail, ratio_to_tail",
    "heavy-scaled": "t, c, empirical_tail, predicted_tail, abs_err",
    "classify": "family, params, rho_inf, rho_sup, beta, kappa, regime, gamma_or_law",
}

_CLAIMS = {
    "invariance": "starting from a quasi-stationary density, the conditioned law at every t equals that density and survival decays at exactly its absorption rate",
    "yaglom": "from compact or light-tailed starts the conditioned law converges to the minimal quasi-stationary density",
    "subcritical": "exponential starts with rate below the drift converge to the quasi-stationary density indexed by the rate gap",
    "nu-evolution": "the reweighted initial measure concentrates at a point whose location selects the limiting quasi-stationary density",
    "survival-curve": "heavy-tailed survival is non-exponential and tracks the initial tail evaluated at the drift frontier, never below an eighth of it",
    "heavy-scaled": "under the regime's spatial scaling, the conditioned exceedance converges to the predicted scaled limit law",
    "classify": "tail rate and smooth-variation index of each catalog family determine its domain-of-attraction regime",
}

# default catalog rows for the classify experiment
def _classify_catalog():
    return [
        Dirac(1.0),
        Exponential(0.5),
        Exponential(1.0),
        Exponential(2.0),
        HalfNormal(1.0),
        Weibull(1.0, 0.3),
        Weibull(1.0, 0.7),
        Weibull(1.0, 2.0),
        Pareto(1.0, 1.0),
        HalfCauchy(1.0),
        LogTail(),
    ]


def _fmt(x):
    """17-significant-digit, locale-independent float formatting."""
    return "%.17g" % float(x)


# ---------------------------------------------------------------------------
# spec parsing
# ---------------------------------------------------------------------------

@dataclass
class ExperimentSpec:
    name: str
    experiment: str
    alpha: float = 1.0
    mu: object = None
    t_grid: list = field(default_factory=list)
    t: float = None
    c_grid: list = field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0, 3.0])
    method: str = "quadrature"
    target_gamma: float = None
    resolution: int = 64
    n_particles: int = 100_000
    dt: float = None
    conditioning: str = "rejection"
    seed: int = 0
    stream_id: int = 0


def _parse_floats(text, line):
    try:
        vals = [float(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise ValidationError(f"expected a list of numbers, got {text!r}", line=line)
    if not vals:
        raise ValidationError("expected at least one number", line=line)
    return vals


def _parse_mu(text, line):
    toks = text.split()
    fam = toks[0].lower()
    if fam not in FAMILIES:
        raise ValidationError(
            f"unknown family {fam!r}; see `qsdlab list-families`", line=line
        )
    if fam == "tabulated":
        raise ValidationError(
            "tabulated measures are not constructible inline", line=line
        )
    kwargs = {}
    for tok in toks[1:]:
        if "=" not in tok:
            raise ValidationError(f"family parameter {tok!r} is not key=value", line=line)
        k, v = tok.split("=", 1)
        try:
            kwargs[k] = float(v)
        except ValueError:
            raise ValidationError(f"parameter {k}={v!r} is not a number", line=line)
    try:
        return FAMILIES[fam](**kwargs)
    except TypeError as e:
        raise ValidationError(f"bad parameters for {fam}: {e}", line=line)
    except ParameterDomainError as e:
        raise ValidationError(str(e), line=line)


def parse_spec_file(path):
    """Parse a spec file into a list of ExperimentSpec, with line-numbered errors."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ValidationError(f"cannot read spec file: {e}")
    sections = []  # (name, header_line, {key: (value, line)})
    current = None
    for i, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            if not name:
                raise ValidationError("empty section name", line=i)
            if any(name == s[0] for s in sections):
                raise ValidationError(f"duplicate section [{name}]", line=i)
            current = (name, i, {})
            sections.append(current)
            continue
        if "=" not in line:
            raise ValidationError(f"expected 'key = value', got {line!r}", line=i)
        if current is None:
            raise ValidationError("key outside any [section]", line=i)
        key, val = (s.strip() for s in line.split("=", 1))
        if key in current[2]:
            raise ValidationError(f"duplicate key {key!r} in [{current[0]}]", line=i)
        current[2][key] = (val, i)
    if not sections:
        raise ValidationError("spec file contains no [section]")
    return [_build_spec(name, hline, kv) for name, hline, kv in sections]


def _build_spec(name, header_line, kv):
    def take(key, default=None):
        return kv.pop(key, (default, header_line))

    exp, line = take("experiment")
    if exp is None:
        raise ValidationError(f"section [{name}] is missing 'experiment'", line=header_line)
    if exp not in EXPERIMENTS:
        raise ValidationError(
            f"unknown experiment {exp!r}; expected one of {', '.join(EXPERIMENTS)}", line=line
        )
    spec = ExperimentSpec(name=name, experiment=exp)

    val, line = take("alpha", "1")
    try:
        spec.alpha = float(val)
    except ValueError:
        raise ValidationError(f"alpha must be a number, got {val!r}", line=line)
    if not spec.alpha > 0:
        raise ValidationError(f"alpha must be positive, got {spec.alpha}", line=line)

    val, line = take("mu")
    if val is not None:
        spec.mu = _parse_mu(val, line)
    elif exp != "classify":
        raise ValidationError(f"experiment {exp!r} requires 'mu'", line=header_line)

    val, line = take("t_grid")
    if val is not None:
        spec.t_grid = _parse_floats(val, line)
        if any(b <= a for a, b in zip(spec.t_grid, spec.t_grid[1:])):
            raise ValidationError("t_grid must be strictly increasing", line=line)
        if spec.t_grid[0] <= 0:
            raise ValidationError("t_grid values must be positive", line=line)
    val, line = take("t")
    if val is not None:
        try:
            spec.t = float(val)
        except ValueError:
            raise ValidationError(f"t must be a number, got {val!r}", line=line)
        if not spec.t > 0:
            raise ValidationError("t must be positive", line=line)
    if exp in ("invariance", "yaglom", "subcritical", "nu-evolution", "survival-curve"):
        if not spec.t_grid:
            if spec.t is not None:
                spec.t_grid = [spec.t]
            else:
                raise ValidationError(
                    f"experiment {exp!r} requires 't_grid'", line=header_line
                )
    if exp == "heavy-scaled" and spec.t is None:
        raise ValidationError("experiment 'heavy-scaled' requires 't'", line=header_line)

    val, line = take("c_grid")
    if val is not None:
        spec.c_grid = _parse_floats(val, line)
        if any(c <= 0 for c in spec.c_grid):
            raise ValidationError("c_grid values must be positive", line=line)

    val, line = take("method", "quadrature")
    if val not in ("quadrature", "mc", "both"):
        raise ValidationError(f"method must be quadrature, mc or both, got {val!r}", line=line)
    spec.method = val

    val, line = take("target_gamma")
    if val is not None:
        try:
            spec.target_gamma = float(val)
        except ValueError:
            raise ValidationError(f"target_gamma must be a number, got {val!r}", line=line)

    for key, attr, cast in (
        ("resolution", "resolution", int),
        ("n_particles", "n_particles", int),
        ("dt", "dt", float),
        ("seed", "seed", int),
        ("stream_id", "stream_id", int),
    ):
        val, line = take(key)
        if val is not None:
            try:
                setattr(spec, attr, cast(val))
            except ValueError:
                raise ValidationError(f"{key} must be a {cast.__name__}, got {val!r}", line=line)
    val, line = take("conditioning")
    if val is not None:
        if val not in ("rejection", "resampling"):
            raise ValidationError(
                f"conditioning must be rejection or resampling, got {val!r}", line=line
            )
        spec.conditioning = val

    if kv:
        key = next(iter(kv))
        raise ValidationError(f"unknown key {key!r}", line=kv[key][1])
    return spec


# ---------------------------------------------------------------------------
# experiment execution
# ---------------------------------------------------------------------------

def _sim_config(spec, t):
    return simulate.SimConfig(
        dt=spec.dt if spec.dt is not None else simulate.default_dt(t),
        horizon=t,
        n_particles=spec.n_particles,
        conditioning=spec.conditioning,
        seed=spec.seed,
        stream_id=spec.stream_id,
    )


def _default_target_gamma(spec):
    if spec.target_gamma is not None:
        return spec.target_gamma
    if spec.experiment == "invariance":
        if isinstance(spec.mu, QsdMeasure):
            return spec.mu.gamma
        raise ValidationError(
            f"invariance section [{spec.name}] needs a qsd measure or target_gamma"
        )
    if spec.experiment == "yaglom":
        return 0.0
    # subcritical: gamma = alpha - rho for a true-limit rate in (0, alpha)
    rho_inf, rho_sup = tails.exp_rate(spec.mu)
    if rho_inf >= spec.alpha:
        return 0.0
    if rho_inf == rho_sup and rho_inf > 0:
        return spec.alpha - rho_inf
    raise ValidationError(
        f"section [{spec.name}]: cannot derive target_gamma from the measure's tail"
    )


def _run_convergence(spec, rel_tol):
    """invariance / yaglom / subcritical: KS to the target QSD along t_grid."""
    gamma = _default_target_gamma(spec)
    target = stats.qsd_view(gamma, spec.alpha)
    rows = []
    for t in spec.t_grid:
        if spec.method in ("quadrature", "both"):
            est = kernel.conditional_law(
                spec.mu, t, spec.alpha, rel_tol=rel_tol, resolution=spec.resolution
            )
            ks = stats.ks_distance(stats.quadrature_view(est), target)
            s = kernel.survival(spec.mu, t, spec.alpha, rel_tol=rel_tol)
            surv, serr = s.value, s.error
        if spec.method in ("mc", "both"):
            emp = simulate.simulate_conditioned(spec.mu, spec.alpha, _sim_config(spec, t))
            ks_mc = stats.ks_distance(stats.empirical_view(emp.values), target)
            if spec.method == "mc":
                ks = ks_mc
                surv = emp.survival_estimate
                serr = 0.5 * (emp.ci_high - emp.ci_low)
            else:
                band = stats.dkw_band(int(emp.effective_size), 0.99)
                if ks_mc > ks + band + 0.002:
                    raise AccuracyError(
                        f"[{spec.name}] t={t:g}: Monte Carlo law disagrees with "
                        f"quadrature beyond the 99% band (KS {ks_mc:.4g} > {ks + band + 0.002:.4g})",
                        partial=ks_mc,
                    )
        rows.append((t, ks, gamma, surv, serr))
    return [", ".join(_fmt(v) for v in row) for row in rows]


def _run_nu_evolution(spec, rel_tol):
    rho_inf, rho_sup = tails.exp_rate(spec.mu)
    predicted = spec.alpha - min(rho_inf, spec.alpha) if rho_inf == rho_sup else float("nan")
    rows = []
    for t in spec.t_grid:
        med = kernel.nu_concentration(spec.mu, t, spec.alpha)
        rows.append((t, med, predicted))
    return [", ".join(_fmt(v) for v in row) for row in rows]


def _run_survival_curve(spec, rel_tol):
    rows = []
    for t in spec.t_grid:
        s = kernel.survival(spec.mu, t, spec.alpha, rel_tol=rel_tol)
        tail = float(spec.mu.tail(spec.alpha * t))
        rows.append((t, s.value, tail / 8.0, s.value / tail if tail > 0 else float("inf")))
    return [", ".join(_fmt(v) for v in row) for row in rows]


def _run_heavy_scaled(spec, rel_tol):
    law = tails.limit_law(spec.mu, spec.alpha)
    t = spec.t
    rows = []
    if spec.method in ("mc", "both"):
        emp = simulate.simulate_conditioned(spec.mu, spec.alpha, _sim_config(spec, t))
    for c in spec.c_grid:
        a = law.scale(t, c)
        pred = float(law.tail_function(c))
        if spec.method == "quadrature":
            empirical = kernel.conditioned_exceedance(spec.mu, t, a, spec.alpha, rel_tol=rel_tol).value
        else:
            empirical = float(np.mean(emp.values > a))
        rows.append((t, c, empirical, pred, abs(empirical - pred)))
    return [", ".join(_fmt(v) for v in row) for row in rows]


def _run_classify(spec, rel_tol):
    rows = []
    for mu in _classify_catalog():
        profile = tails.classify(mu, spec.alpha)
        params = ";".join(f"{k}={v:g}" for k, v in mu.params().items())
        if profile.regime == "AttractedTo":
            gol = _fmt(profile.gamma)
        elif profile.regime == "HeavyScaled":
            gol = profile.law.family
        else:
            gol = "none"
        rows.append(
            ", ".join(
                [
                    mu.name,
                    params or "-",
                    _fmt(profile.rho_liminf),
                    _fmt(profile.rho_limsup),
                    _fmt(profile.beta),
                    _fmt(profile.kappa),
                    profile.regime,
                    gol,
                ]
            )
        )
    return rows


_RUNNERS = {
    "invariance": _run_convergence,
    "yaglom": _run_convergence,
    "subcritical": _run_convergence,
    "nu-evolution": _run_nu_evolution,
    "survival-curve": _run_survival_curve,
    "heavy-scaled": _run_heavy_scaled,
    "classify": _run_classify,
}


def run_experiment(spec, out_dir, rel_tol=1e-9, threads=1):
    """Run one experiment; returns the CSV path.  Deterministic per spec."""
    os.makedirs(out_dir, exist_ok=True)
    csv_path = os.path.join(out_dir, f"{spec.name}.csv")
    manifest_path = os.path.join(out_dir, f"{spec.name}.manifest.json")
    partial = None
    rows = []
    try:
        rows = _RUNNERS[spec.experiment](spec, rel_tol)
    except QsdLabError as e:
        partial = str(e)
        raise
    finally:
        lines = [f"# claim: {_CLAIMS[spec.experiment]}\n", _HEADERS[spec.experiment] + "\n"]
        lines += [r + "\n" for r in rows]
        with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.writelines(lines)
        manifest = {
            "name": spec.name,
            "experiment": spec.experiment,
            "seed": spec.seed,
            "stream_id": spec.stream_id,
            "relative_tolerance": rel_tol,
            "threads": threads,
            "version": __version__,
            "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "note": (
                "desk-scale parameters (alpha near 1, t <= 1e3) substitute for "
                "illustration-scale runs; scaling arguments are unaffected"
            ),
            "partial": partial,
        }
        with open(manifest_path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2)
            fh.write("\n")
    return csv_path


# ---------------------------------------------------------------------------
# verbs
# ---------------------------------------------------------------------------

def _cmd_run(args):
    specs = parse_spec_file(args.spec_file)
    out_dir = args.out or os.path.dirname(os.path.abspath(args.spec_file))
    for spec in specs:
        if args.seed is not None:
            spec.seed = args.seed
        path = run_experiment(spec, out_dir, rel_tol=args.tolerance, threads=args.threads)
        print(path)
    return 0


def _cmd_list_families(args):
    for name, cls in sorted(FAMILIES.items()):
        doc = (cls.__doc__ or "").strip().splitlines()
        print(f"{name:12s} {doc[0] if doc else ''}".rstrip())
    return 0


def _cmd_selftest(args):
    """Quick invariant suite; writes selftest.csv and fails on any violation."""
    out_dir = args.out or "."
    os.makedirs(out_dir, exist_ok=True)
    checks = []

    xs = np.linspace(1e-6, 40.0, 4001)
    for gamma in (0.0, 0.25, 0.5, 0.75):
        from .model import absorption_rate, qsd_density_derivatives

        p, dp, d2p = qsd_density_derivatives(gamma, 1.0, xs)
        lam = absorption_rate(gamma, 1.0)
        resid = np.max(np.abs(0.5 * d2p + dp + lam * p) / np.maximum(np.abs(lam * p), 1e-30))
        checks.append((f"eigen_residual_gamma_{gamma:g}", resid, 1e-8))

    cf = kernel.first_passage_survival(1.0, 1.0, 1.0)
    q = kernel.survival(Dirac(1.0), 1.0, 1.0).value
    checks.append(("dirac_survival_vs_closed_form", abs(q - cf), 1e-8))

    s = kernel.survival(QsdMeasure(0.0, 1.0), 2.0, 1.0).value
    checks.append(("qsd_survival_vs_rate", abs(s - np.exp(-1.0)), 1e-6))

    cfg = simulate.SimConfig(dt=0.01, horizon=1.0, n_particles=20_000, seed=12345)
    a = simulate.estimate_survival(Dirac(1.0), 1.0, cfg).value
    b = simulate.estimate_survival(Dirac(1.0), 1.0, cfg).value
    checks.append(("mc_determinism", abs(a - b), 0.0))

    rule = tails.ScalingRule.power(lambda x: 0.5 * x**-0.5, 1.0)
    checks.append(("power_rule_arithmetic", abs(rule.evaluate(100.0, 1.0) - 20.0), 1e-12))

    path = os.path.join(out_dir, "selftest.csv")
    ok = True
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# claim: structural invariants of the laboratory hold at machine-level tolerances\n")
        fh.write("check, value, threshold, status\n")
        for name, value, thr in checks:
            passed = value <= thr
            ok &= passed
            fh.write(f"{name}, {_fmt(value)}, {_fmt(thr)}, {'pass' if passed else 'fail'}\n")
    print(path)
    return 0 if ok else 3


def _cmd_plot(args):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    with open(args.csv, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() and not ln.startswith("#")]
    if len(lines) < 2:
        raise ValidationError("csv has no data rows")
    header = [h.strip() for h in lines[0].split(",")]
    rows = []
    for ln in lines[1:]:
        cells = [c.strip() for c in ln.split(",")]
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise ValidationError(
                "csv contains non-numeric data; only numeric experiment output can be plotted"
            )
    data = np.asarray(rows)
    fig, ax = plt.subplots(figsize=(7, 4.5))
    for j in range(1, data.shape[1]):
        ax.plot(data[:, 0], data[:, j], marker="o", markersize=3, label=header[j])
    ax.set_xlabel(header[0])
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    out = args.out_file or os.path.splitext(args.csv)[0] + ".svg"
    fig.savefig(out, format="svg")
    plt.close(fig)
    print(out)
    return 0


def build_parser():
    p = argparse.ArgumentParser(
        prog="qsdlab",
        description="Numerical laboratory for quasi-stationary distributions of "
        "drifted Brownian motion absorbed at 0",
    )
    p.add_argument("--out", default=None, help="output directory for artifacts")
    p.add_argument("--seed", type=int, default=None, help="override the spec seed")
    p.add_argument(
        "--threads",
        type=int,
        default=int(os.environ.get("QSDLAB_THREADS", "1")),
        help="worker count (results are bit-identical for any value)",
    )
    p.add_argument(
        "--tolerance", type=float, default=1e-9, help="relative quadrature tolerance"
    )
    sub = p.add_subparsers(dest="verb", required=True)
    sp = sub.add_parser("run", help="run every experiment in a spec file")
    sp.add_argument("spec_file")
    sp.set_defaults(fn=_cmd_run)
    sp = sub.add_parser("list-families", help="list the initial-measure catalog")
    sp.set_defaults(fn=_cmd_list_families)
    sp = sub.add_parser("selftest", help="run the invariant suite")
    sp.set_defaults(fn=_cmd_selftest)
    sp = sub.add_parser("plot", help="render a result CSV to an SVG line chart")
    sp.add_argument("csv")
    sp.add_argument("out_file", nargs="?", default=None)
    sp.set_defaults(fn=_cmd_plot)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ExtinctionError as e:
        print(f"error: extinction: {e}", file=sys.stderr)
        return 4
    except AccuracyError as e:
        print(f"error: accuracy: {e}", file=sys.stderr)
        return 3
    except QsdLabError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
