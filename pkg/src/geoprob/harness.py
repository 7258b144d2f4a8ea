"""End-to-end verification harness.

Computes the limiting mean/variance/covariance predictions by quadrature of
the estimated ingredients against the sampling density, runs replicated
binomial/Poisson experiments, and compares empirical moments and cumulants
of the normalized measures with the predictions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator, RegularGridInterpolator

from ._parallel import replicate_map
from .errors import ExtrapolationError, ParameterError
from .estimators import MeanTable, VDTable, cumulant_stats
from .functionals import WeightFunctional
from .point_process import (
    MarkLaw,
    PointSet,
    rescale,
    sample_binomial,
    sample_inhomogeneous_poisson,
)
from .rng import RngStream
from .windows import DensityField

# ---------------------------------------------------------------------------
# Test functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TestFunction:
    """Continuous test function on the window: constant 1, first coordinate,
    cos(2 pi x1), or tabulated values on a regular grid (linear interp)."""

    __test__ = False  # not a pytest class despite the name

    kind: str
    grid: tuple = None  # tabulated: (axes tuple, values array)
    name: str = None

    def __post_init__(self):
        if self.kind not in ("constant", "coordinate", "cosine", "tabulated"):
            raise ParameterError(f"unknown test function kind {self.kind!r}")
        if self.kind == "tabulated" and self.grid is None:
            raise ParameterError("tabulated test function needs grid data")
        if self.name is None:
            object.__setattr__(self, "name", {
                "constant": "1",
                "coordinate": "x1",
                "cosine": "cos(2pi x1)",
                "tabulated": "tabulated",
            }[self.kind])

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.kind == "constant":
            return np.ones(pts.shape[0])
        if self.kind == "coordinate":
            return pts[:, 0].copy()
        if self.kind == "cosine":
            return np.cos(2 * np.pi * pts[:, 0])
        axes, values = self.grid
        interp = RegularGridInterpolator(
            axes, values, method="linear", bounds_error=False, fill_value=None
        )
        return interp(pts)


def make_test_function(name: str) -> TestFunction:
    table = {
        "1": "constant", "constant": "constant",
        "x1": "coordinate", "coordinate": "coordinate",
        "cos": "cosine", "cosine": "cosine", "cos(2pi x1)": "cosine",
    }
    if name not in table:
        raise ParameterError(f"unknown test function {name!r}")
    return TestFunction(table[name])


# ---------------------------------------------------------------------------
# Quadrature over the window and prediction integrals
# ---------------------------------------------------------------------------


def _box_quadrature(window, nodes_per_axis: int):
    if window.kind != "box":
        raise ParameterError("prediction quadrature supports box windows only")
    b = window.bounds
    x1, w1 = np.polynomial.legendre.leggauss(nodes_per_axis)
    axes, wts = [], []
    for lo, hi in b:
        axes.append(0.5 * (hi - lo) * x1 + 0.5 * (hi + lo))
        wts.append(0.5 * (hi - lo) * w1)
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    wgrids = np.meshgrid(*wts, indexing="ij")
    w = np.prod(np.stack([g.ravel() for g in wgrids], axis=1), axis=1)
    return pts, w


class _TauCurve:
    """tau -> value curve from a table: homogeneous scaling law when the
    order is known, otherwise monotone-cubic interpolation on the grid."""

    def __init__(self, tau_grid, reports, scaling_exponent, homogeneity_order):
        self.exponent = None
        self.interp = None
        tau_grid = np.asarray(tau_grid, dtype=float)
        vals = np.array([r.value for r in reports])
        if homogeneity_order is not None:
            # every grid entry rescales to tau = 1; combine by inverse variance
            e = scaling_exponent * homogeneity_order
            v1 = vals * tau_grid**e
            floor = 1e-12 * (np.abs(v1) + 1.0)
            ses = np.array([r.std_error for r in reports]) * tau_grid**e
            w = 1.0 / np.maximum(ses, floor) ** 2
            self.value1 = float(np.sum(v1 * w) / np.sum(w))
            self.exponent = -e
        elif tau_grid.size == 1:
            self.value1 = float(vals[0])
            self.exponent = 0.0
            self.range = (tau_grid[0], tau_grid[0])
        else:
            self.interp = PchipInterpolator(tau_grid, vals, extrapolate=False)
            self.range = (float(tau_grid[0]), float(tau_grid[-1]))

    def __call__(self, tau: np.ndarray) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if self.exponent is not None:
            return self.value1 * tau**self.exponent
        out = self.interp(tau)
        if np.any(np.isnan(out)):
            raise ExtrapolationError(
                f"density values {tau[np.isnan(out)][:3]}... leave the "
                f"estimate table range {self.range}"
            )
        return out


def predict_mean(
    mean_table: MeanTable, kappa: DensityField, f, quadrature_nodes: int = 24
) -> float:
    """Limit of E[<f, measure>]/n: integral of f(x) m(kappa(x)) kappa(x)."""
    pts, w = _box_quadrature(kappa.window, quadrature_nodes)
    m = _TauCurve(mean_table.tau_grid, mean_table.means, 1.0 / kappa.dim,
                  mean_table.homogeneity_order)
    kx = kappa(pts)
    return float(np.sum(w * f(pts) * m(kx) * kx))


def _vd_curves(vd: VDTable, dim: int):
    V = _TauCurve(vd.tau_grid, vd.V_values, 2.0 / dim, vd.homogeneity_order)
    D = _TauCurve(vd.tau_grid, vd.D_values, 1.0 / dim, vd.homogeneity_order)
    return V, D


def predict_variance_poisson(
    vd: VDTable, kappa: DensityField, f, quadrature_nodes: int = 24
) -> float:
    """Limit of Var[<f, poisson measure>]/lambda: integral of f^2 V(kappa) kappa."""
    pts, w = _box_quadrature(kappa.window, quadrature_nodes)
    V, _ = _vd_curves(vd, kappa.dim)
    kx = kappa(pts)
    return float(np.sum(w * f(pts) ** 2 * V(kx) * kx))


def predict_variance_binomial(
    vd: VDTable, kappa: DensityField, f, quadrature_nodes: int = 24
) -> float:
    """Binomial limit: the Poisson integral minus the squared D integral."""
    pts, w = _box_quadrature(kappa.window, quadrature_nodes)
    V, D = _vd_curves(vd, kappa.dim)
    kx = kappa(pts)
    fx = f(pts)
    first = float(np.sum(w * fx**2 * V(kx) * kx))
    second = float(np.sum(w * fx * D(kx) * kx))
    return first - second**2


def predict_covariance(
    vd: VDTable,
    kappa: DensityField,
    f1,
    f2,
    input_kind: str = "binomial",
    quadrature_nodes: int = 24,
) -> float:
    """Covariance kernel of the limiting Gaussian field for a pair of test
    functions (binomial subtracts the product of D integrals)."""
    pts, w = _box_quadrature(kappa.window, quadrature_nodes)
    V, D = _vd_curves(vd, kappa.dim)
    kx = kappa(pts)
    f1x, f2x = f1(pts), f2(pts)
    cross = float(np.sum(w * f1x * f2x * V(kx) * kx))
    if input_kind == "poisson":
        return cross
    d1 = float(np.sum(w * f1x * D(kx) * kx))
    d2 = float(np.sum(w * f2x * D(kx) * kx))
    return cross - d1 * d2


# ---------------------------------------------------------------------------
# Experiment configuration and report
# ---------------------------------------------------------------------------


@dataclass
class ExperimentConfig:
    functional: WeightFunctional
    density: DensityField
    input_kind: str  # "binomial" | "poisson"
    grid: list
    test_functions: list
    replications: int
    seed: int
    radius_law: MarkLaw | None = None
    workers: int = 1
    quadrature_nodes: int = 24
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.input_kind not in ("binomial", "poisson"):
            raise ParameterError("input_kind must be 'binomial' or 'poisson'")
        if self.replications < 100:
            raise ParameterError("replications must be >= 100")
        g = list(self.grid)
        if not g or any(b <= a for a, b in zip(g, g[1:])):
            raise ParameterError("grid must be nonempty and increasing")
        if self.input_kind == "binomial" and any(int(v) != v or v < 1 for v in g):
            raise ParameterError("binomial grid must hold positive integers")
        base = {
            "skewness": 0.25,
            "excess_kurtosis": 0.5,
            "variance_rel": 0.15,
            "variance_drift_rel": 0.10,
            "mean_sigmas": 3.0,
            "covariance_sigmas": 3.0,
        }
        base.update(self.tolerances)
        self.tolerances = base


def _worker_clt(args, lo, hi):
    functional, density, input_kind, gval, fns, rng, radius_law = args
    out = np.empty((hi - lo, len(fns)))
    for r in range(lo, hi):
        stream = rng.replicate(r)
        try:
            out[r - lo] = _one_replicate(
                functional, density, input_kind, gval, fns, stream, radius_law
            )
        except Exception as exc:
            raise RuntimeError(
                f"replicate failed at seed={stream.seed} "
                f"stream_id={stream.stream_id}: {exc}"
            ) from exc
    return (out,)


def _one_replicate(functional, density, input_kind, gval, fns, stream,
                   radius_law):
    if input_kind == "binomial":
        X = sample_binomial(int(gval), density, stream)
    else:
        X = sample_inhomogeneous_poisson(density, float(gval), stream)
    if functional.needs_marks:
        mgen = stream.substream(1).generator()
        times = radii = None
        if "time" in functional.needs_marks:
            times = mgen.random(len(X))
        if "radius" in functional.needs_marks:
            if radius_law is None:
                raise ParameterError(
                    f"{functional.name} needs a radius_law in the config"
                )
            if radius_law.kind == "constant-radius":
                radii = np.full(len(X), radius_law.radius)
            else:
                radii = mgen.uniform(radius_law.low, radius_law.high, len(X))
        X = PointSet(X.points, times, radii, dim=X.dim, _checked=True)
    if not len(X):
        return np.zeros(len(fns))
    weights = functional.values(rescale(X, float(gval)))
    return np.array([float(np.dot(f(X.points), weights)) for f in fns])


def _var_se(samples: np.ndarray) -> float:
    """Standard error of the sample variance (moment-based)."""
    n = samples.size
    c = samples - samples.mean()
    m2 = np.mean(c**2)
    m4 = np.mean(c**4)
    v = (m4 - m2**2 * (n - 3) / (n - 1)) / n
    return float(np.sqrt(max(v, 0.0)))


@dataclass
class CLTReport:
    config_summary: dict
    grid_results: list
    criteria: list
    passed: bool

    def to_json(self) -> str:
        return json.dumps(
            {
                "config": self.config_summary,
                "grid_results": self.grid_results,
                "criteria": self.criteria,
                "passed": self.passed,
            },
            indent=2,
            sort_keys=True,
        )

    def variance_csv(self) -> str:
        lines = ["f,n,var_over_n,se,prediction"]
        for g in self.grid_results:
            for fr in g["functions"]:
                lines.append(
                    "%s,%.17g,%.17g,%.17g,%.17g"
                    % (fr["f"], g["grid_value"], fr["var_over_n"], fr["var_se"],
                       fr["pred_variance"])
                )
        return "\n".join(lines) + "\n"

    def cumulants_csv(self) -> str:
        lines = ["f,n,skew,skew_se,exkurt,exkurt_se"]
        for g in self.grid_results:
            for fr in g["functions"]:
                lines.append(
                    "%s,%.17g,%.17g,%.17g,%.17g,%.17g"
                    % (fr["f"], g["grid_value"], fr["skewness"], fr["skew_se"],
                       fr["excess_kurtosis"], fr["exkurt_se"])
                )
        return "\n".join(lines) + "\n"

    def covariance_csv(self) -> str:
        lines = ["f1,f2,n,empirical,predicted,se"]
        for g in self.grid_results:
            for cr in g["covariances"]:
                lines.append(
                    "%s,%s,%.17g,%.17g,%.17g,%.17g"
                    % (cr["f1"], cr["f2"], g["grid_value"], cr["empirical"],
                       cr["predicted"], cr["se"])
                )
        return "\n".join(lines) + "\n"


def run_clt_experiment(
    cfg: ExperimentConfig, vd: VDTable, mean_table: MeanTable
) -> CLTReport:
    """Replicated experiment over the grid, with moment/cumulant comparison
    against the quadrature predictions."""
    rng = RngStream(cfg.seed)
    fns = cfg.test_functions
    tol = cfg.tolerances
    kappa = cfg.density
    grid_results = []
    R = cfg.replications
    for gi, gval in enumerate(cfg.grid):
        (samples,) = replicate_map(
            _worker_clt,
            (cfg.functional, kappa, cfg.input_kind, gval,
             fns, rng.substream(gi), cfg.radius_law),
            R,
            cfg.workers,
        )
        fres = []
        for j, f in enumerate(fns):
            s = samples[:, j]
            pred_mean = predict_mean(mean_table, kappa, f, cfg.quadrature_nodes)
            if cfg.input_kind == "binomial":
                pred_var = predict_variance_binomial(vd, kappa, f,
                                                     cfg.quadrature_nodes)
            else:
                pred_var = predict_variance_poisson(vd, kappa, f,
                                                    cfg.quadrature_nodes)
            sd = s.std(ddof=1)
            if sd > 0:
                z = (s - s.mean()) / sd
                cs = cumulant_stats(z)
                skew, exk = cs.skewness, cs.excess_kurtosis
                skew_se = cs.std_errors["skewness"]
                exk_se = cs.std_errors["excess_kurtosis"]
                degenerate = False
            else:
                skew = exk = 0.0
                skew_se = exk_se = float("nan")
                degenerate = True
            fres.append({
                "f": f.name,
                "mean_over_n": float(s.mean() / gval),
                "mean_se": float(s.std(ddof=1) / np.sqrt(R) / gval),
                "pred_mean": pred_mean,
                "var_over_n": float(s.var(ddof=1) / gval),
                "var_se": _var_se(s) / gval,
                "pred_variance": pred_var,
                "skewness": float(skew),
                "skew_se": float(skew_se),
                "excess_kurtosis": float(exk),
                "exkurt_se": float(exk_se),
                "degenerate_variance": degenerate,
            })
        covs = []
        for j1 in range(len(fns)):
            for j2 in range(j1 + 1, len(fns)):
                c = np.cov(samples[:, j1], samples[:, j2], ddof=1)
                emp = c[0, 1] / gval
                se = np.sqrt(
                    (c[0, 0] * c[1, 1] + c[0, 1] ** 2) / (R - 1)
                ) / gval
                pred = predict_covariance(vd, kappa, fns[j1], fns[j2],
                                          cfg.input_kind, cfg.quadrature_nodes)
                covs.append({
                    "f1": fns[j1].name,
                    "f2": fns[j2].name,
                    "empirical": float(emp),
                    "se": float(se),
                    "predicted": float(pred),
                })
        grid_results.append(
            {"grid_value": float(gval), "functions": fres, "covariances": covs}
        )

    criteria = _evaluate_criteria(grid_results, cfg)
    passed = all(c["passed"] for c in criteria)
    summary = {
        "functional": cfg.functional.name,
        "density": kappa.name,
        "input_kind": cfg.input_kind,
        "grid": [float(g) for g in cfg.grid],
        "test_functions": [f.name for f in fns],
        "replications": R,
        "seed": cfg.seed,
        "tolerances": tol,
    }
    return CLTReport(summary, grid_results, criteria, passed)


def _evaluate_criteria(grid_results, cfg) -> list:
    tol = cfg.tolerances
    last = grid_results[-1]
    crit = []

    for fr in last["functions"]:
        gap = abs(fr["mean_over_n"] - fr["pred_mean"])
        lim = tol["mean_sigmas"] * fr["mean_se"]
        crit.append({
            "name": f"mean_lln[{fr['f']}]",
            "passed": bool(gap <= lim or (fr["mean_se"] == 0 and gap == 0)),
            "value": fr["mean_over_n"],
            "target": fr["pred_mean"],
            "tolerance": lim,
        })

    for fr in last["functions"]:
        pred = fr["pred_variance"]
        if abs(pred) < 1e-12:
            ok = fr["var_over_n"] <= max(1e-12, 3 * fr["var_se"])
            lim = 0.0
        else:
            ok = abs(fr["var_over_n"] - pred) <= tol["variance_rel"] * abs(pred)
            lim = tol["variance_rel"] * abs(pred)
        crit.append({
            "name": f"variance[{fr['f']}]",
            "passed": bool(ok),
            "value": fr["var_over_n"],
            "target": pred,
            "tolerance": lim,
        })

    if len(grid_results) >= 2:
        prev = grid_results[-2]
        for fr_prev, fr_last in zip(prev["functions"], last["functions"]):
            if fr_last["var_over_n"] > 0:
                drift = abs(fr_last["var_over_n"] - fr_prev["var_over_n"])
                rel = drift / abs(fr_last["var_over_n"])
            else:
                rel = 0.0
            crit.append({
                "name": f"variance_drift[{fr_last['f']}]",
                "passed": bool(rel < tol["variance_drift_rel"]),
                "value": rel,
                "target": 0.0,
                "tolerance": tol["variance_drift_rel"],
            })

    for fr in last["functions"]:
        if fr["degenerate_variance"]:
            continue
        crit.append({
            "name": f"skewness[{fr['f']}]",
            "passed": bool(abs(fr["skewness"]) <= tol["skewness"]),
            "value": fr["skewness"],
            "target": 0.0,
            "tolerance": tol["skewness"],
        })
        crit.append({
            "name": f"excess_kurtosis[{fr['f']}]",
            "passed": bool(abs(fr["excess_kurtosis"]) <= tol["excess_kurtosis"]),
            "value": fr["excess_kurtosis"],
            "target": 0.0,
            "tolerance": tol["excess_kurtosis"],
        })

    for cr in last["covariances"]:
        gap = abs(cr["empirical"] - cr["predicted"])
        lim = tol["covariance_sigmas"] * cr["se"]
        crit.append({
            "name": f"covariance[{cr['f1']},{cr['f2']}]",
            "passed": bool(gap <= lim),
            "value": cr["empirical"],
            "target": cr["predicted"],
            "tolerance": lim,
        })
    return crit


# ---------------------------------------------------------------------------
# Homogeneity scaling check
# ---------------------------------------------------------------------------


def scaling_check(
    vd: VDTable,
    gamma: float,
    dim: int,
) -> dict:
    """Table of V(tau) tau^{2 gamma/d} and D(tau) tau^{gamma/d} with joint
    standard-error bands; passes iff each row is pairwise within 3 joint SE."""
    tau = np.asarray(vd.tau_grid, dtype=float)
    rows = {}
    ok_all = True
    for label, reports, e in (
        ("V_scaled", vd.V_values, 2.0 * gamma / dim),
        ("D_scaled", vd.D_values, 1.0 * gamma / dim),
    ):
        vals = np.array([r.value for r in reports]) * tau**e
        ses = np.array([r.std_error for r in reports]) * tau**e
        ok = True
        for i in range(len(tau)):
            for j in range(i + 1, len(tau)):
                joint = np.sqrt(ses[i] ** 2 + ses[j] ** 2)
                if abs(vals[i] - vals[j]) > 3.0 * joint:
                    ok = False
        rows[label] = {
            "tau": tau.tolist(),
            "values": vals.tolist(),
            "std_errors": ses.tolist(),
            "passed": bool(ok),
        }
        ok_all = ok_all and ok
    rows["gamma"] = gamma
    rows["passed"] = bool(ok_all)
    return rows
