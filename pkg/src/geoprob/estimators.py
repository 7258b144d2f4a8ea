"""Monte-Carlo estimators of the limit ingredients on homogeneous Poisson
input: the singleton mean E[xi(0)], the add-one mean D(tau), the variance
functional V(tau) (second moment plus integrated two-point covariance), the
stabilization-radius tail curve r(t), and pair correlations of inhomogeneous
processes.

All estimators restrict the infinite-volume process to a centered box of
half-width L; stabilization makes the truncation error exponentially small
when L is a couple of fitted tail scales.  Every report carries its standard
error, replication count, seed and truncation metadata.
"""

from __future__ import annotations

import json
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._parallel import replicate_map
from .errors import (
    DivergenceWarning,
    GridTooSmallError,
    ParameterError,
    TruncationError,
)
from .functionals import WeightFunctional, total_mass
from .point_process import MarkLaw, PointSet, rescale, sample_inhomogeneous_poisson
from .rng import RngStream
from .windows import DensityField

_TAU_RANGE = (1e-3, 1e3)
_TAIL_LEVEL = 1e-3


def _check_tau(tau: float) -> None:
    if not (_TAU_RANGE[0] <= tau <= _TAU_RANGE[1]):
        raise ParameterError(
            f"intensity tau={tau} outside supported range {_TAU_RANGE}"
        )


def _check_reps(reps: int) -> None:
    if reps < 100:
        raise ParameterError("estimates need at least 100 replications")


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


@dataclass
class EstimateReport:
    value: float
    std_error: float
    replications: int
    seed: int
    truncation: dict = field(default_factory=dict)
    wall_time: float | None = None

    def to_json_dict(self, persist: bool = True) -> dict:
        # wall_time is never persisted: output files must be bit-identical
        # across reruns and worker counts
        return {
            "value": self.value,
            "std_error": self.std_error,
            "replications": self.replications,
            "seed": self.seed,
            "truncation": self.truncation,
            "wall_time": None if persist else self.wall_time,
        }

    CSV_HEADER = "value,std_error,replications,seed,L,rho_max"

    def to_csv_row(self) -> str:
        L = self.truncation.get("L")
        rho = self.truncation.get("rho_max")
        return "%.17g,%.17g,%d,%d,%s,%s" % (
            self.value, self.std_error, self.replications, self.seed,
            "" if L is None else "%.17g" % L,
            "" if rho is None else "%.17g" % rho,
        )


@dataclass
class TailCurve:
    t_grid: np.ndarray
    tail_prob: np.ndarray
    fitted_rate: float | None
    isotonic_corrected: bool = False

    def tail_at(self, t: float) -> float:
        """Empirical tail, extrapolated with the fitted exponential beyond
        the grid."""
        tg, tp = self.t_grid, self.tail_prob
        if t <= tg[0]:
            return float(tp[0])
        if t <= tg[-1]:
            return float(np.interp(t, tg, tp))
        if self.fitted_rate is not None and self.fitted_rate > 0:
            ref = max(float(tp[-1]), 1e-12)
            return float(ref * np.exp(-self.fitted_rate * (t - tg[-1])))
        return float(tp[-1])

    def suggested_half_width(self, level: float = _TAIL_LEVEL) -> float:
        below = np.flatnonzero(self.tail_prob < level)
        if below.size:
            return 2.0 * float(self.t_grid[below[0]])
        if self.fitted_rate and self.fitted_rate > 0:
            t0 = float(self.t_grid[-1])
            ref = max(float(self.tail_prob[-1]), 1e-12)
            return 2.0 * (t0 + np.log(ref / level) / self.fitted_rate)
        return 4.0 * float(self.t_grid[-1])

    def to_csv(self) -> str:
        lines = ["t,tail_prob"]
        for t, p in zip(self.t_grid, self.tail_prob):
            lines.append("%.17g,%.17g" % (t, p))
        return "\n".join(lines) + "\n"

    def to_json_dict(self) -> dict:
        return {
            "t_grid": list(map(float, self.t_grid)),
            "tail_prob": list(map(float, self.tail_prob)),
            "fitted_rate": self.fitted_rate,
            "isotonic_corrected": self.isotonic_corrected,
        }


@dataclass
class MeanTable:
    """E[xi(0; P_tau)] on a tau grid."""

    tau_grid: np.ndarray
    means: list  # EstimateReport per tau
    homogeneity_order: float | None = None


@dataclass
class VDTable:
    tau_grid: np.ndarray
    V_values: list  # EstimateReport per tau
    D_values: list  # EstimateReport per tau
    homogeneity_order: float | None = None

    def to_json_dict(self) -> dict:
        return {
            "tau_grid": list(map(float, self.tau_grid)),
            "V_values": [r.to_json_dict() for r in self.V_values],
            "D_values": [r.to_json_dict() for r in self.D_values],
            "homogeneity_order": self.homogeneity_order,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["tau,V,V_se,D,D_se"]
        for tau, rv, rd in zip(self.tau_grid, self.V_values, self.D_values):
            lines.append(
                "%.17g,%.17g,%.17g,%.17g,%.17g"
                % (tau, rv.value, rv.std_error, rd.value, rd.std_error)
            )
        return "\n".join(lines) + "\n"


def _report(samples: np.ndarray, seed: int, truncation: dict, t0: float):
    r = samples.size
    se = float(samples.std(ddof=1) / np.sqrt(r)) if r > 1 else float("nan")
    return EstimateReport(
        value=float(samples.mean()),
        std_error=se,
        replications=r,
        seed=seed,
        truncation=truncation,
        wall_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# Replicate sampling helpers
# ---------------------------------------------------------------------------


def _sample_box_poisson(tau, dim, L, gen):
    """Homogeneous Poisson sample on [-L, L]^dim from an open generator."""
    vol = (2.0 * L) ** dim
    n = int(gen.poisson(tau * vol))
    pts = gen.uniform(-L, L, size=(n, dim))
    if n > 1:
        # duplicate rows are a measure-zero event; resample them
        while np.unique(pts, axis=0).shape[0] != n:
            _, first = np.unique(pts, axis=0, return_index=True)
            dup = np.setdiff1d(np.arange(n), first)
            pts[dup] = gen.uniform(-L, L, size=(dup.size, dim))
    return pts


def _draw_marks(xi, count, gen, radius_law):
    times = radii = None
    if "time" in xi.needs_marks:
        times = gen.random(count)
    if "radius" in xi.needs_marks:
        if radius_law is None:
            raise ParameterError(f"{xi.name} needs a radius_law for estimation")
        if radius_law.kind == "constant-radius":
            radii = np.full(count, radius_law.radius)
        elif radius_law.kind == "iid-radius":
            radii = gen.uniform(radius_law.low, radius_law.high, size=count)
        else:
            raise ParameterError("radius_law must be a radius mark law")
    return times, radii


def _marked_pointset(xi, pts, gen, radius_law) -> PointSet:
    times, radii = _draw_marks(xi, pts.shape[0], gen, radius_law)
    return PointSet(pts, times, radii, dim=pts.shape[1], _checked=True)


def _check_tail(tail_curve, L):
    if tail_curve is None:
        return
    t = tail_curve.tail_at(L)
    if t >= _TAIL_LEVEL:
        raise TruncationError(
            f"stabilization tail at L={L} is {t:.3g} >= {_TAIL_LEVEL}; "
            "enlarge the window",
            suggested_half_width=tail_curve.suggested_half_width(),
        )


# ---------------------------------------------------------------------------
# E[xi(0; P_tau)]
# ---------------------------------------------------------------------------


def _worker_xi_mean(args, lo, hi):
    xi, tau, dim, L, rng, radius_law = args
    out = np.empty(hi - lo)
    origin = np.zeros((1, dim))
    for r in range(lo, hi):
        gen = rng.replicate(r).generator()
        pts = _sample_box_poisson(tau, dim, L, gen)
        base = _marked_pointset(xi, pts, gen, radius_law)
        t0, rad0 = _draw_marks(xi, 1, gen, radius_law)
        w = xi.values_with_inserts(base, origin, t0, rad0)
        out[r - lo] = w[0]
    return (out,)


def estimate_xi_mean(
    xi: WeightFunctional,
    tau: float,
    dim: int,
    L: float,
    reps: int,
    rng: RngStream,
    radius_law: MarkLaw | None = None,
    tail_curve: TailCurve | None = None,
    workers: int = 1,
) -> EstimateReport:
    """Mean weight at the origin of P_tau restricted to [-L, L]^dim."""
    _check_tau(tau)
    _check_reps(reps)
    _check_tail(tail_curve, L)
    t0 = time.perf_counter()
    (vals,) = replicate_map(
        _worker_xi_mean, (xi, tau, dim, L, rng, radius_law), reps, workers
    )
    return _report(vals, rng.seed, {"L": L, "rho_max": None}, t0)


# ---------------------------------------------------------------------------
# D(tau): mean add-one cost at the origin
# ---------------------------------------------------------------------------


def _worker_D(args, lo, hi):
    xi, tau, dim, L, rng, radius_law, origin_time = args
    out = np.empty(hi - lo)
    origin = np.zeros(dim)
    for r in range(lo, hi):
        gen = rng.replicate(r).generator()
        pts = _sample_box_poisson(tau, dim, L, gen)
        base = _marked_pointset(xi, pts, gen, radius_law)
        t_ins, rad_ins = _draw_marks(xi, 1, gen, radius_law)
        if t_ins is not None and origin_time == "latest":
            t_ins = np.array([1.0])
        with_origin = base.with_inserted(
            origin,
            None if t_ins is None else t_ins[0],
            None if rad_ins is None else rad_ins[0],
        )
        out[r - lo] = total_mass(xi, with_origin) - total_mass(xi, base)
    return (out,)


def estimate_D(
    xi: WeightFunctional,
    tau: float,
    dim: int,
    L: float,
    reps: int,
    rng: RngStream,
    radius_law: MarkLaw | None = None,
    origin_time: str = "random",
    tail_curve: TailCurve | None = None,
    workers: int = 1,
) -> EstimateReport:
    """Mean add-one cost D(tau) = E[H(P u {0}) - H(P)] on the truncated box.

    Marked functionals draw the origin's mark from the mark law;
    origin_time="latest" forces time 1.0 (useful as a packing diagnostic).
    """
    _check_tau(tau)
    _check_reps(reps)
    _check_tail(tail_curve, L)
    t0 = time.perf_counter()
    (vals,) = replicate_map(
        _worker_D, (xi, tau, dim, L, rng, radius_law, origin_time), reps, workers
    )
    return _report(vals, rng.seed, {"L": L, "rho_max": None}, t0)


# ---------------------------------------------------------------------------
# Pair integrand and V(tau)
# ---------------------------------------------------------------------------


def _pair_products(xi, tau, dim, L, rng, radius_law, nodes, lo, hi):
    """Per replicate: the coupled pair-product difference at every node, the
    origin singleton weight, and the node singleton weights.

    On each sample P the pair integrand at node y splits as
        g(y) = E[a b - a0 by] + Cov(a0, by),
    where a = xi(0; P u {0,y}), b = xi(y; P u {0,y}), a0 = xi(0; P u 0),
    by = xi(y; P u y).  The coupled difference a b - a0 by vanishes exactly
    once y is outside the interaction range, so its Monte-Carlo noise
    collapses with distance; the covariance term is assembled after the
    replicate loop.
    """
    m = nodes.shape[0]
    diff = np.empty((hi - lo, m))
    a0 = np.empty(hi - lo)
    by = np.empty((hi - lo, m))
    origin = np.zeros((1, dim))
    for r in range(lo, hi):
        gen = rng.replicate(r).generator()
        pts = _sample_box_poisson(tau, dim, L, gen)
        base = _marked_pointset(xi, pts, gen, radius_law)
        t0m, rad0 = _draw_marks(xi, 1, gen, radius_law)
        t1m, rad1 = _draw_marks(xi, 1, gen, radius_law)
        evaluate = xi.inserts_evaluator(base)
        w0 = evaluate(origin, t0m, rad0)
        a0[r - lo] = w0[0]
        tt = None if t0m is None else np.array([t0m[0], t1m[0]])
        rr = None if rad0 is None else np.array([rad0[0], rad1[0]])
        t_nodes = None if t1m is None else np.broadcast_to(t1m, (m,))
        r_nodes = None if rad1 is None else np.broadcast_to(rad1, (m,))
        w, singles = evaluate.pair_stats(
            origin[0], nodes, (tt, rr), (t_nodes, r_nodes)
        )
        by[r - lo] = singles
        diff[r - lo] = w[:, 0] * w[:, 1] - w0[0] * singles
    return diff, a0, by


def _pair_z(diff, a0, by):
    """Per-replicate, per-node unbiased integrand samples: coupled difference
    plus the Bessel-corrected covariance contribution."""
    reps = a0.size
    cov = (a0 - a0.mean())[:, None] * (by - by.mean(axis=0)[None, :])
    return diff + cov * (reps / (reps - 1.0))


def _worker_pair_integrand(args, lo, hi):
    xi, tau, dim, L, rng, radius_law, y = args
    return _pair_products(xi, tau, dim, L, rng, radius_law, y.reshape(1, -1), lo, hi)


def estimate_pair_integrand(
    xi: WeightFunctional,
    tau: float,
    y,
    dim: int,
    L: float,
    reps: int,
    rng: RngStream,
    radius_law: MarkLaw | None = None,
    workers: int = 1,
) -> EstimateReport:
    """E[xi(0; P u y) xi(y; P u 0)] - E[xi(0; P)] E[xi(y; P')] at offset y,
    via the coupled difference-plus-covariance decomposition (see
    _pair_products)."""
    _check_tau(tau)
    _check_reps(reps)
    y = np.asarray(y, dtype=float).ravel()
    if np.sqrt(np.sum(y**2)) >= 2 * L:
        raise ParameterError("|y| must be < 2L")
    t0 = time.perf_counter()
    diff, a0, by = replicate_map(
        _worker_pair_integrand, (xi, tau, dim, L, rng, radius_law, y), reps, workers
    )
    z = _pair_z(diff, a0, by)[:, 0]
    return _report(z, rng.seed, {"L": L, "rho_max": None}, t0)


def _angular_rule(dim: int, n_angular: int | None):
    """Unit directions and surface-measure weights for the sphere S^{d-1}."""
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([1.0, 1.0])
    if dim == 2:
        m = n_angular or 24
        ang = (np.arange(m) + 0.5) * (2 * np.pi / m)
        dirs = np.stack([np.cos(ang), np.sin(ang)], axis=1)
        return dirs, np.full(m, 2 * np.pi / m)
    m_theta = 4
    m_phi = n_angular // 4 if n_angular else 8
    c, wc = np.polynomial.legendre.leggauss(m_theta)
    phi = (np.arange(m_phi) + 0.5) * (2 * np.pi / m_phi)
    dirs, wts = [], []
    for ci, wi in zip(c, wc):
        s = np.sqrt(1 - ci * ci)
        for p in phi:
            dirs.append([s * np.cos(p), s * np.sin(p), ci])
            wts.append(wi * 2 * np.pi / m_phi)
    return np.asarray(dirs), np.asarray(wts)


def _worker_V(args, lo, hi):
    xi, tau, dim, L, rng, radius_law, nodes = args
    return _pair_products(xi, tau, dim, L, rng, radius_law, nodes, lo, hi)


def estimate_V(
    xi: WeightFunctional,
    tau: float,
    dim: int,
    L: float,
    reps: int,
    rng: RngStream,
    rho_max: float | None = None,
    shell_count: int = 12,
    n_angular: int | None = None,
    radius_law: MarkLaw | None = None,
    tail_curve: TailCurve | None = None,
    workers: int = 1,
) -> EstimateReport:
    """V(tau) = E[xi^2(0; P_tau)] + tau * integral of the pair integrand.

    The radial integral uses midpoint shells times a fixed angular rule
    (two-point in d=1, uniform in d=2, Gauss product in d=3) out to rho_max
    (default L/2; recorded in the report).  Every shell enters the sum; the
    decay policy is enforced as a check on the outermost shell, which must
    be below 1e-3 of the estimate or within its own Monte-Carlo noise,
    otherwise a DivergenceWarning asks for a larger cutoff.  A data-driven
    early cutoff would bias the integral low by stopping on noise minima,
    so it is deliberately avoided.
    """
    _check_tau(tau)
    _check_reps(reps)
    _check_tail(tail_curve, L)
    t0 = time.perf_counter()
    R_max = rho_max if rho_max is not None else 0.5 * L
    if R_max >= 2 * L:
        raise ParameterError("rho_max must be < 2L")
    edges = np.linspace(0.0, R_max, shell_count + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    dr = np.diff(edges)
    dirs, wts = _angular_rule(dim, n_angular)
    nodes = (mids[:, None, None] * dirs[None, :, :]).reshape(-1, dim)

    diff, a0, by = replicate_map(
        _worker_V, (xi, tau, dim, L, rng, radius_law, nodes), reps, workers
    )
    v0 = a0**2
    z = _pair_z(diff, a0, by).reshape(reps, shell_count, len(wts))
    # per-rep shell contributions of the radial integral
    shell_w = mids ** (dim - 1) * dr
    c_shell = tau * shell_w[None, :] * np.einsum("rsa,a->rs", z, wts)

    totals = v0 + c_shell.sum(axis=1)
    # decay check at the cutoff: the outermost shell must be negligible
    # (below 1e-3 of the estimate) or statistically indistinguishable from 0
    last_mean = float(c_shell[:, -1].mean())
    last_se = float(c_shell[:, -1].std(ddof=1) / np.sqrt(reps))
    value = float(totals.mean())
    if abs(last_mean) >= max(1e-3 * abs(value), 2.0 * last_se):
        warnings.warn(
            f"pair integrand not negligible at rho_max={R_max:.3g} "
            f"(outermost shell {last_mean:.3g} vs estimate {value:.3g}); "
            "increase rho_max",
            DivergenceWarning,
        )
    return _report(totals, rng.seed, {"L": L, "rho_max": float(R_max)}, t0)


# ---------------------------------------------------------------------------
# Stabilization tail r(t)
# ---------------------------------------------------------------------------


def _battery_configs(dim, t, battery_size, gen):
    """Adversarial insertions just outside B_t(0): alternating single points
    and dense 9-point clusters."""
    configs = []
    for b in range(battery_size):
        u = gen.normal(size=dim)
        u /= np.sqrt(np.sum(u**2))
        center = u * t * (1.0 + 1e-6)
        if b % 2 == 0:
            pts = center[None, :]
        else:
            jitter = gen.normal(size=(9, dim)) * (0.005 * t)
            pts = center[None, :] + jitter
        configs.append(pts)
    return configs


def _worker_stab_tail(args, lo, hi):
    xi, tau, dim, rng, radius_law, t_grid, battery_size = args
    t_max = float(t_grid[-1])
    R_hat = np.empty(hi - lo)
    origin = np.zeros((1, dim))
    for r in range(lo, hi):
        gen = rng.replicate(r).generator()
        pts = _sample_box_poisson(tau, dim, t_max, gen)
        base = _marked_pointset(xi, pts, gen, radius_law)
        t0m, rad0 = _draw_marks(xi, 1, gen, radius_law)
        d2 = np.sum(pts**2, axis=1)
        vals = np.empty(len(t_grid))
        for gi, s in enumerate(t_grid):
            sub = base.subset(d2 <= s * s)
            vals[gi] = xi.values_with_inserts(sub, origin, t0m, rad0)[0]
        batteries = [
            _battery_configs(dim, s, battery_size, gen) for s in t_grid
        ]
        bat_marks = [
            [_draw_marks(xi, cfg.shape[0], gen, radius_law) for cfg in per_t]
            for per_t in batteries
        ]
        R_val = np.inf
        for gi, s in enumerate(t_grid):
            if not np.all(np.isclose(vals[gi:], vals[gi], rtol=1e-9, atol=1e-12)):
                continue
            sub = base.subset(d2 <= s * s)
            stable = True
            for cfg, (bt, br) in zip(batteries[gi], bat_marks[gi]):
                augmented = _append_points(sub, cfg, bt, br)
                w = xi.values_with_inserts(augmented, origin, t0m, rad0)[0]
                if not np.isclose(w, vals[gi], rtol=1e-9, atol=1e-12):
                    stable = False
                    break
            if stable:
                R_val = s
                break
        R_hat[r - lo] = R_val
    return (R_hat,)


def _append_points(X: PointSet, pts, times, radii) -> PointSet:
    allpts = np.vstack([X.points, pts]) if len(X) else pts

    def _cat(base, extra):
        if base is None and extra is None:
            return None
        base = np.empty(0) if base is None else base
        return np.concatenate([base, extra])

    return PointSet(
        allpts, _cat(X.times, times), _cat(X.radii, radii),
        dim=pts.shape[1], _checked=True,
    )


def estimate_stab_tail(
    xi: WeightFunctional,
    tau: float,
    dim: int,
    t_grid,
    battery_size: int,
    reps: int,
    rng: RngStream,
    radius_law: MarkLaw | None = None,
    workers: int = 1,
) -> TailCurve:
    """Empirical tail of the stabilization radius at the origin.

    Per replicate, R is the smallest grid t such that the origin weight on
    P_tau restricted to B_s(0) is constant for all grid s >= t and is
    unchanged by every adversarial battery insertion outside B_t(0).  This is
    a lower-bound estimator (the battery is finite); stability under battery
    doubling is checked in the tests.
    """
    _check_tau(tau)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size < 2 or np.any(np.diff(t_grid) <= 0):
        raise ParameterError("t_grid must be increasing with >= 2 entries")
    (R_hat,) = replicate_map(
        _worker_stab_tail,
        (xi, tau, dim, rng, radius_law, t_grid, battery_size),
        reps,
        workers,
    )
    overflow = float(np.mean(np.isinf(R_hat)))
    if overflow > 0.01:
        raise GridTooSmallError(
            f"stabilization radius exceeded the grid in {overflow:.1%} of "
            f"replicates (max grid t = {t_grid[-1]})"
        )
    tail = np.array([np.mean(R_hat >= t) for t in t_grid])
    corrected = np.minimum.accumulate(tail)
    rate = _fit_tail_rate(t_grid, corrected)
    return TailCurve(
        t_grid, corrected, rate, isotonic_corrected=bool(np.any(corrected != tail))
    )


def _fit_tail_rate(t_grid, tail):
    """Least-squares exponential rate over the decaying range.

    The fit uses the genuinely decaying part of the curve (tail <= 0.6),
    so an initial shoulder near 1 does not inflate the asymptotic rate."""
    decaying = (tail > 0) & (tail <= 0.6)
    if decaying.sum() < 3:
        decaying = (tail > 0) & (tail < 1)
    if decaying.sum() < 2:
        return None
    t = t_grid[decaying]
    logp = np.log(tail[decaying])
    slope = np.polyfit(t, logp, 1)[0]
    return float(-slope) if slope < 0 else None


# ---------------------------------------------------------------------------
# Pair correlation on inhomogeneous input
# ---------------------------------------------------------------------------


def _worker_pair_corr(args, lo, hi):
    xi, kappa, lam, x, y, rng, radius_law = args
    out = np.empty(hi - lo)
    dim = kappa.dim
    a_lam = lam ** (1.0 / dim)
    xy = np.vstack([x, y]) * a_lam
    for r in range(lo, hi):
        stream = rng.replicate(r)
        gen = stream.substream(0).generator()
        P = sample_inhomogeneous_poisson(kappa, lam, stream)
        base = _marked_pointset(xi, P.points * a_lam, gen, radius_law)
        tm, rm = _draw_marks(xi, 2, gen, radius_law)
        w = xi.values_with_inserts(base, xy, tm, rm)
        paired = w[0] * w[1]
        singles = []
        for j in range(2):
            Pi = sample_inhomogeneous_poisson(kappa, lam, stream.substream(j + 1))
            base_i = _marked_pointset(xi, Pi.points * a_lam, gen, radius_law)
            ti, ri = _draw_marks(xi, 1, gen, radius_law)
            wi = xi.values_with_inserts(base_i, xy[j : j + 1], ti, ri)
            singles.append(wi[0])
        out[r - lo] = paired - singles[0] * singles[1]
    return (out,)


def estimate_pair_correlation(
    xi: WeightFunctional,
    kappa: DensityField,
    lam: float,
    x,
    y,
    reps: int,
    rng: RngStream,
    radius_law: MarkLaw | None = None,
    workers: int = 1,
) -> EstimateReport:
    """c_lam(x, y): covariance of the rescaled weights at two inserted points
    of P_{lam kappa}, minus the product of independent singleton means."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    w = kappa.window
    if not (w.contains(x[None, :])[0] and w.contains(y[None, :])[0]):
        raise ParameterError("x and y must lie in the window interior")
    _check_reps(reps)
    t0 = time.perf_counter()
    (z,) = replicate_map(
        _worker_pair_corr, (xi, kappa, lam, x, y, rng, radius_law), reps, workers
    )
    return _report(z, rng.seed, {"L": None, "rho_max": None}, t0)


# ---------------------------------------------------------------------------
# Cumulant statistics
# ---------------------------------------------------------------------------


@dataclass
class CumulantStats:
    mean: float
    variance: float
    k3: float
    k4: float
    skewness: float
    excess_kurtosis: float
    std_errors: dict
    degenerate: bool
    n: int


def cumulant_stats(samples) -> CumulantStats:
    """Unbiased k-statistics up to order 4 plus standardized shape measures.

    The reported skewness/kurtosis standard errors are the normal-null values
    sqrt(6/R) and sqrt(24/R), sized for Gaussianity testing.
    """
    x = np.asarray(samples, dtype=float).ravel()
    n = x.size
    if n < 100:
        raise ParameterError("cumulant statistics need at least 100 samples")
    mean = float(x.mean())
    c = x - mean
    s2 = float(np.sum(c**2))
    s3 = float(np.sum(c**3))
    s4 = float(np.sum(c**4))
    k2 = s2 / (n - 1)
    k3 = n * s3 / ((n - 1) * (n - 2))
    m2 = s2 / n
    m4 = s4 / n
    k4 = (n**2 * ((n + 1) * m4 - 3 * (n - 1) * m2**2)) / (
        (n - 1) * (n - 2) * (n - 3)
    )
    degenerate = k2 <= (1e-12 * (abs(mean) + 1.0)) ** 2
    if degenerate:
        skew = exk = float("nan")
    else:
        skew = k3 / k2**1.5
        exk = k4 / k2**2
    return CumulantStats(
        mean=mean,
        variance=float(k2),
        k3=float(k3),
        k4=float(k4),
        skewness=float(skew),
        excess_kurtosis=float(exk),
        std_errors={
            "mean": float(np.sqrt(k2 / n)) if not degenerate else 0.0,
            "skewness": float(np.sqrt(6.0 / n)),
            "excess_kurtosis": float(np.sqrt(24.0 / n)),
        },
        degenerate=degenerate,
        n=n,
    )


# ---------------------------------------------------------------------------
# Tables and diagnostics
# ---------------------------------------------------------------------------


def build_vd_table(
    xi: WeightFunctional,
    tau_grid,
    dim: int,
    L_ref: float,
    reps: int,
    rng: RngStream,
    radius_law: MarkLaw | None = None,
    workers: int = 1,
    **v_kwargs,
) -> VDTable:
    """V and D estimates over a tau grid; the window half-width scales with
    tau**(-1/d) so every intensity sees the same effective neighborhood."""
    tau_grid = np.asarray(tau_grid, dtype=float)
    if np.any(np.diff(tau_grid) <= 0):
        raise ParameterError("tau_grid must be increasing")
    rho_ref = v_kwargs.pop("rho_max", None)
    Vs, Ds = [], []
    for j, tau in enumerate(tau_grid):
        scale = tau ** (-1.0 / dim)
        L = L_ref * scale
        rho = None if rho_ref is None else rho_ref * scale
        sub = rng.substream(17 + 2 * j)
        Vs.append(
            estimate_V(xi, tau, dim, L, reps, sub, radius_law=radius_law,
                       workers=workers, rho_max=rho, **v_kwargs)
        )
        Ds.append(
            estimate_D(xi, tau, dim, L, reps, rng.substream(18 + 2 * j),
                       radius_law=radius_law, workers=workers)
        )
    return VDTable(tau_grid, Vs, Ds, xi.homogeneity_order)


def build_mean_table(
    xi: WeightFunctional,
    tau_grid,
    dim: int,
    L_ref: float,
    reps: int,
    rng: RngStream,
    radius_law: MarkLaw | None = None,
    workers: int = 1,
) -> MeanTable:
    tau_grid = np.asarray(tau_grid, dtype=float)
    ms = []
    for j, tau in enumerate(tau_grid):
        L = L_ref * tau ** (-1.0 / dim)
        ms.append(
            estimate_xi_mean(xi, tau, dim, L, reps, rng.substream(41 + j),
                             radius_law=radius_law, workers=workers)
        )
    return MeanTable(tau_grid, ms, xi.homogeneity_order)


def moment_sweep(
    xi: WeightFunctional,
    tau: float,
    dim: int,
    L: float,
    reps: int,
    rng: RngStream,
    ps=(1, 2, 4),
    radius_law: MarkLaw | None = None,
    workers: int = 1,
) -> dict:
    """Diagnostic: empirical E|xi(0; P_tau)|^p for p in ps."""
    _check_tau(tau)
    (vals,) = replicate_map(
        _worker_xi_mean, (xi, tau, dim, L, rng, radius_law), reps, workers
    )
    t0 = time.perf_counter()
    out = {}
    for p in ps:
        out[p] = _report(np.abs(vals) ** p, rng.seed, {"L": L, "rho_max": None}, t0)
    return out
