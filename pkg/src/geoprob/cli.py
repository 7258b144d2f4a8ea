"""Command-line front end.

Subcommands: generate (point sets), evaluate (functionals on a point-set
file), estimate (V/D tables and stabilization tails), verify (full CLT
experiment from a JSON config), rerun (re-execute a recorded manifest).

Every run writes a manifest with the fully resolved arguments and the root
seed; re-running a manifest reproduces all CSV/JSON outputs byte-for-byte,
regardless of --workers.  Exit codes: 0 success, 1 verification criteria
failed, 2 usage/config error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import GeoprobError, ParameterError, ParseError
from .estimators import build_mean_table, build_vd_table, estimate_stab_tail
from .functionals import (
    make_functional,
    point_measure,
    rsa_pack,
    birth_growth,
    total_mass,
    write_acceptance,
    write_weighted_measure,
)
from .harness import (
    ExperimentConfig,
    make_test_function,
    run_clt_experiment,
    scaling_check,
)
from .point_process import (
    MarkLaw,
    attach_marks,
    read_pointset,
    sample_binomial,
    sample_homogeneous_poisson,
    sample_inhomogeneous_poisson,
    write_pointset,
)
from .rng import RngStream
from .windows import Window, make_density, unit_cube

_DEFAULT_REPS = 1000


def _parse_window(spec: str) -> Window:
    if spec.startswith("cube"):
        return unit_cube(int(spec[4:]))
    if spec.startswith("box:"):
        vals = [float(v) for v in spec[4:].split(",")]
        if len(vals) % 2:
            raise ParameterError("box window needs an even number of bounds")
        b = np.asarray(vals).reshape(-1, 2)
        return Window("box", bounds=b)
    if spec.startswith("ball:"):
        vals = [float(v) for v in spec[5:].split(",")]
        if len(vals) < 2:
            raise ParameterError("ball window needs center coords and radius")
        return Window("ball", center=np.asarray(vals[:-1]), radius=vals[-1])
    raise ParameterError(f"cannot parse window {spec!r}")


def _parse_mark_law(spec: str) -> MarkLaw:
    if spec == "uniform-time":
        return MarkLaw("uniform-time")
    if spec.startswith("constant-radius:"):
        return MarkLaw("constant-radius", radius=float(spec.split(":")[1]))
    if spec.startswith("iid-radius:"):
        a, b = (float(v) for v in spec.split(":")[1].split(","))
        return MarkLaw("iid-radius", low=a, high=b)
    raise ParameterError(f"cannot parse mark law {spec!r}")


def _functional_from_args(args, window=None):
    kw = {}
    if args.k is not None:
        kw["k"] = args.k
    if args.directed:
        kw["directed"] = True
    if args.p is not None:
        kw["p"] = args.p
    if args.ball_volume is not None:
        kw["ball_volume"] = args.ball_volume
    if args.speed is not None:
        kw["speed"] = args.speed
    if window is not None:
        kw["window"] = window
    return make_functional(args.functional, **kw)


def _resolve_seed(args_seed, manifest_args: dict) -> int:
    env = os.environ.get("GEOPROB_SEED")
    if env is not None:
        manifest_args["seed_from_env"] = True
        return int(env)
    manifest_args["seed_from_env"] = False
    return args_seed


def _write_manifest(path: Path, command: str, resolved: dict, outputs: list,
                    wall: float) -> None:
    manifest = {
        "artifact_version": __version__,
        "command": command,
        "args": resolved,
        "outputs": [str(p) for p in outputs],
        "wall_time_seconds": wall,
    }
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


def cmd_generate(args) -> int:
    t0 = time.perf_counter()
    resolved = {
        "process": args.process,
        "tau": args.tau,
        "lam": args.lam,
        "n": args.n,
        "density": args.density,
        "window": args.window,
        "marks": args.marks or [],
        "seed": args.seed,
        "output": args.output,
    }
    seed = _resolve_seed(args.seed, resolved)
    resolved["seed"] = seed
    rng = RngStream(seed)
    window = _parse_window(args.window)
    if args.process == "poisson":
        if args.tau is None:
            raise ParameterError("--process poisson needs --tau")
        X = sample_homogeneous_poisson(args.tau, window, rng)
    elif args.process == "inhomogeneous":
        if args.lam is None:
            raise ParameterError("--process inhomogeneous needs --lambda")
        kappa = make_density(args.density, window.dim, window)
        X = sample_inhomogeneous_poisson(kappa, args.lam, rng)
    elif args.process == "binomial":
        if args.n is None or args.n < 1:
            raise ParameterError("--process binomial needs --n >= 1")
        kappa = make_density(args.density, window.dim, window)
        X = sample_binomial(args.n, kappa, rng)
    else:
        raise ParameterError(f"unknown process {args.process!r}")
    for j, spec in enumerate(args.marks or []):
        X = attach_marks(X, _parse_mark_law(spec), rng.substream(100 + j))
    out = Path(args.output)
    write_pointset(X, out)
    print(f"wrote {len(X)} points (d={X.dim}) to {out}")
    _write_manifest(out.with_suffix(".manifest.json"), "generate", resolved,
                    [out], time.perf_counter() - t0)
    return 0


# ---------------------------------------------------------------------------
# evaluate
# ---------------------------------------------------------------------------


def cmd_evaluate(args) -> int:
    t0 = time.perf_counter()
    X = read_pointset(args.input)
    window = _parse_window(args.window) if args.window else None
    xi = _functional_from_args(args, window)
    lam = args.lam if args.lam is not None else 1.0
    resolved = {
        "input": args.input,
        "functional": args.functional,
        "k": args.k,
        "directed": args.directed,
        "p": args.p,
        "ball_volume": args.ball_volume,
        "speed": args.speed,
        "window": args.window,
        "lam": lam,
        "test_functions": args.f or [],
        "output": args.output,
    }
    mu = point_measure(xi, X, lam)
    outputs = []
    prefix = Path(args.output)
    measure_path = prefix.with_suffix(".measure.csv")
    write_weighted_measure(mu, measure_path)
    outputs.append(measure_path)
    summary = {"total_mass": mu.total_mass(), "pairings": {}}
    print(f"total mass: {mu.total_mass():.17g}")
    for name in args.f or []:
        f = make_test_function(name)
        val = float(np.dot(f(mu.positions), mu.weights))
        summary["pairings"][f.name] = val
        print(f"<{f.name}, measure>: {val:.17g}")
    summary_path = prefix.with_suffix(".summary.json")
    summary_path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    outputs.append(summary_path)
    if args.functional == "rsa":
        av = rsa_pack(X, args.ball_volume if args.ball_volume else 1.0)
        acc_path = prefix.with_suffix(".acceptance.csv")
        write_acceptance(av, acc_path)
        outputs.append(acc_path)
        print(f"accepted {av.accepted_count()} of {len(X)}")
    elif args.functional == "birth-growth":
        av = birth_growth(X, args.speed if args.speed else 0.0)
        acc_path = prefix.with_suffix(".acceptance.csv")
        write_acceptance(av, acc_path)
        outputs.append(acc_path)
        print(f"accepted {av.accepted_count()} of {len(X)}")
    _write_manifest(prefix.with_suffix(".manifest.json"), "evaluate", resolved,
                    outputs, time.perf_counter() - t0)
    return 0


# ---------------------------------------------------------------------------
# estimate
# ---------------------------------------------------------------------------


def cmd_estimate(args) -> int:
    t0 = time.perf_counter()
    reps = args.reps if args.reps is not None else _DEFAULT_REPS
    taus = [float(v) for v in args.tau.split(",")]
    resolved = {
        "functional": args.functional,
        "k": args.k,
        "directed": args.directed,
        "p": args.p,
        "ball_volume": args.ball_volume,
        "speed": args.speed,
        "gamma": args.gamma,
        "tau": taus,
        "dim": args.dim,
        "reps": reps,
        "L": args.L,
        "rho_max": args.rho_max,
        "shell_count": args.shell_count,
        "t_grid": args.t_grid,
        "battery": args.battery,
        "radius_law": args.radius_law,
        "seed": args.seed,
        "workers": args.workers,
        "output": args.output,
    }
    seed = _resolve_seed(args.seed, resolved)
    resolved["seed"] = seed
    rng = RngStream(seed)
    xi = _functional_from_args(args)
    if args.gamma is not None:
        xi.homogeneity_order = args.gamma
    radius_law = _parse_mark_law(args.radius_law) if args.radius_law else None

    lo, hi, cnt = (float(v) for v in args.t_grid.split(":"))
    t_grid = np.linspace(lo, hi, int(cnt))
    tail = estimate_stab_tail(
        xi, taus[0], args.dim, t_grid, args.battery, max(100, reps // 4),
        rng.substream(1), radius_law=radius_law, workers=args.workers,
    )
    L = args.L if args.L is not None else tail.suggested_half_width()
    resolved["L"] = L

    vd = build_vd_table(
        xi, taus, args.dim, L, reps, rng.substream(2), radius_law=radius_law,
        workers=args.workers, rho_max=args.rho_max, shell_count=args.shell_count,
    )
    outputs = []
    prefix = Path(args.output)
    vd_path = prefix.with_suffix(".vd.json")
    vd_path.write_text(vd.to_json() + "\n")
    outputs.append(vd_path)
    vd_csv = prefix.with_suffix(".vd.csv")
    vd_csv.write_text(vd.to_csv())
    outputs.append(vd_csv)
    tail_path = prefix.with_suffix(".tail.csv")
    tail_path.write_text(tail.to_csv())
    outputs.append(tail_path)
    for tau, rv, rd in zip(vd.tau_grid, vd.V_values, vd.D_values):
        print(f"tau={tau:g}: V = {rv.value:.6g} +- {rv.std_error:.2g}, "
              f"D = {rd.value:.6g} +- {rd.std_error:.2g}")
    print(f"stabilization tail rate: {tail.fitted_rate}")
    if args.gamma is not None:
        table = scaling_check(vd, args.gamma, args.dim)
        sc_path = prefix.with_suffix(".scaling.json")
        sc_path.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
        outputs.append(sc_path)
        print(f"scaling check (gamma={args.gamma}): "
              f"{'pass' if table['passed'] else 'FAIL'}")
    _write_manifest(prefix.with_suffix(".manifest.json"), "estimate", resolved,
                    outputs, time.perf_counter() - t0)
    return 0


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------


def _validate_config(raw: dict) -> list:
    problems = []
    if "functional" not in raw or "name" not in raw.get("functional", {}):
        problems.append("functional.name missing")
    dens = raw.get("density", {})
    if "name" not in dens:
        problems.append("density.name missing")
    if "dim" not in dens:
        problems.append("density.dim missing")
    inp = raw.get("input", {})
    if inp.get("kind") not in ("binomial", "poisson"):
        problems.append("input.kind must be 'binomial' or 'poisson'")
    grid = inp.get("grid", [])
    if not grid or any(b <= a for a, b in zip(grid, grid[1:])):
        problems.append("input.grid must be a nonempty increasing list")
    if not raw.get("test_functions"):
        problems.append("test_functions missing")
    if raw.get("replications", 0) < 100:
        problems.append("replications must be >= 100")
    if "seed" not in raw:
        problems.append("seed missing")
    return problems


def cmd_verify(args) -> int:
    t0 = time.perf_counter()
    raw = json.loads(Path(args.config).read_text())
    problems = _validate_config(raw)
    if problems:
        for p in problems:
            print(f"config error: {p}", file=sys.stderr)
        return 2
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    resolved = dict(raw)
    seed = raw["seed"]
    env = os.environ.get("GEOPROB_SEED")
    if env is not None:
        seed = int(env)
        resolved["seed_from_env"] = True
    resolved["seed"] = seed
    workers = args.workers if args.workers is not None else raw.get("workers", 1)
    resolved["workers"] = workers

    dim = raw["density"]["dim"]
    window = (
        _parse_window(raw["density"]["window"])
        if "window" in raw["density"]
        else unit_cube(dim)
    )
    kappa = make_density(raw["density"]["name"], dim, window)
    fun_spec = dict(raw["functional"])
    name = fun_spec.pop("name")
    if name == "germ-grain":
        fun_spec["window"] = window
    xi = make_functional(name, **fun_spec)
    if "gamma" in raw:
        xi.homogeneity_order = raw["gamma"]
    radius_law = (
        _parse_mark_law(raw["radius_law"]) if raw.get("radius_law") else None
    )
    fns = [make_test_function(n) for n in raw["test_functions"]]

    est = dict(raw.get("estimators", {}))
    est.setdefault("reps", _DEFAULT_REPS)
    est.setdefault("L_ref", 6.0)
    est.setdefault("rho_max", None)
    est.setdefault("shell_count", 12)
    if xi.homogeneity_order is not None:
        est.setdefault("tau_grid", [1.0])
    else:
        lo, hi = max(kappa.inf_bound, 1e-3), kappa.sup_bound
        est.setdefault(
            "tau_grid",
            list(np.geomspace(lo, hi, 9)) if hi > lo * 1.0001 else [float(hi)],
        )
    resolved["estimators"] = {k: (list(v) if isinstance(v, (list, tuple)) else v)
                              for k, v in est.items()}

    rng = RngStream(seed)
    vd = build_vd_table(
        xi, est["tau_grid"], dim, est["L_ref"], est["reps"], rng.substream(901),
        radius_law=radius_law, workers=workers,
        rho_max=est["rho_max"], shell_count=est["shell_count"],
    )
    mean_table = build_mean_table(
        xi, est["tau_grid"], dim, est["L_ref"], est["reps"], rng.substream(902),
        radius_law=radius_law, workers=workers,
    )
    cfg = ExperimentConfig(
        functional=xi,
        density=kappa,
        input_kind=raw["input"]["kind"],
        grid=raw["input"]["grid"],
        test_functions=fns,
        replications=raw["replications"],
        seed=seed,
        radius_law=radius_law,
        workers=workers,
        quadrature_nodes=raw.get("quadrature_nodes", 24),
        tolerances=raw.get("tolerances", {}),
    )
    report = run_clt_experiment(cfg, vd, mean_table)

    outputs = []
    for fname, text in (
        ("report.json", report.to_json() + "\n"),
        ("variance_vs_n.csv", report.variance_csv()),
        ("cumulants.csv", report.cumulants_csv()),
        ("covariance.csv", report.covariance_csv()),
        ("vd_table.json", vd.to_json() + "\n"),
    ):
        p = outdir / fname
        p.write_text(text)
        outputs.append(p)
    for c in report.criteria:
        status = "pass" if c["passed"] else "FAIL"
        print(f"[{status}] {c['name']}: value={c['value']:.6g} "
              f"target={c['target']:.6g} tol={c['tolerance']:.3g}")
    _write_manifest(outdir / "manifest.json", "verify", resolved, outputs,
                    time.perf_counter() - t0)
    print("result:", "PASS" if report.passed else "FAIL")
    return 0 if report.passed else 1


# ---------------------------------------------------------------------------
# rerun
# ---------------------------------------------------------------------------


def cmd_rerun(args) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    command = manifest["command"]
    stored = manifest["args"]
    if command == "verify":
        cfg_path = Path(args.output) / "rerun_config.json"
        Path(args.output).mkdir(parents=True, exist_ok=True)
        cfg = {k: v for k, v in stored.items() if k not in ("seed_from_env",)}
        cfg_path.write_text(json.dumps(cfg, indent=2, sort_keys=True))
        ns = argparse.Namespace(config=str(cfg_path), output=args.output,
                                workers=args.workers)
        return cmd_verify(ns)
    raise ParameterError(f"rerun supports 'verify' manifests, got {command!r}")


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="geoprob",
        description="Point-process simulation and Gaussian-limit verification",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="sample a point process to CSV")
    g.add_argument("--process", required=True,
                   choices=["poisson", "inhomogeneous", "binomial"])
    g.add_argument("--tau", type=float, help="homogeneous intensity")
    g.add_argument("--lambda", dest="lam", type=float,
                   help="inhomogeneous intensity multiplier")
    g.add_argument("--n", type=int, help="binomial sample size")
    g.add_argument("--density", default="uniform")
    g.add_argument("--window", default="cube2",
                   help="cube<d> | box:lo,hi,... | ball:c...,r")
    g.add_argument("--marks", action="append",
                   help="uniform-time | constant-radius:r | iid-radius:a,b")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("-o", "--output", required=True)
    g.set_defaults(func=cmd_generate)

    e = sub.add_parser("evaluate", help="evaluate a functional on a point set")
    e.add_argument("--input", required=True)
    _add_functional_flags(e)
    e.add_argument("--lambda", dest="lam", type=float,
                   help="rescale parameter for the weights")
    e.add_argument("--f", action="append", help="test function: 1 | x1 | cos")
    e.add_argument("--window", help="window for germ-grain evaluation")
    e.add_argument("-o", "--output", required=True)
    e.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("estimate", help="estimate V/D tables and tails")
    _add_functional_flags(s)
    s.add_argument("--gamma", type=float, help="declared homogeneity order")
    s.add_argument("--tau", default="1.0", help="comma-separated intensities")
    s.add_argument("--dim", type=int, default=2)
    s.add_argument("--reps", type=int, default=None,
                   help=f"replications (default {_DEFAULT_REPS})")
    s.add_argument("--L", type=float, default=None,
                   help="window half-width (default: from tail curve)")
    s.add_argument("--rho-max", type=float, default=None)
    s.add_argument("--shell-count", type=int, default=12)
    s.add_argument("--t-grid", default="0.5:6.0:12", help="lo:hi:count")
    s.add_argument("--battery", type=int, default=16)
    s.add_argument("--radius-law", dest="radius_law")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_estimate)

    v = sub.add_parser("verify", help="run a CLT experiment from a config")
    v.add_argument("--config", required=True)
    v.add_argument("--workers", type=int, default=None)
    v.add_argument("-o", "--output", required=True)
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("rerun", help="re-execute a recorded manifest")
    r.add_argument("--manifest", required=True)
    r.add_argument("--workers", type=int, default=None)
    r.add_argument("-o", "--output", required=True)
    r.set_defaults(func=cmd_rerun)
    return ap


def _add_functional_flags(p) -> None:
    p.add_argument("--functional", required=True,
                   help="counting | knn-len | knn-deg | knn-pow | sig-len | "
                        "delaunay-len | voronoi-len | rsa | birth-growth | "
                        "germ-grain")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--directed", action="store_true")
    p.add_argument("--p", type=float, default=None, help="power weight order")
    p.add_argument("--ball-volume", dest="ball_volume", type=float, default=None)
    p.add_argument("--speed", type=float, default=None)


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code else 0
    try:
        return args.func(args)
    except (ParameterError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except GeoprobError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
