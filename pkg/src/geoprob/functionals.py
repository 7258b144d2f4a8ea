"""Weight functionals: per-point weights xi(x; X) and the objects built from
them (rescaled weights, point measures, total/weighted mass, add-one cost).

Graph functionals sum an edge weight phi over the edges incident to a point
(for the Voronoi kind, over the dual boundary segments, with phi(inf) = 0).
Packing functionals (RSA, birth-growth) are acceptance indicators of a
time-ordered thinning; the germ-grain functional is the area of the grain
union inside a point's Voronoi cell.

Small-configuration conventions (needed because stabilization probes evaluate
xi on tiny restricted sets): a k-NN functional connects to min(k, n-1)
neighbors; graph functionals are 0 on singletons; Delaunay/Voronoi functionals
on collinear configurations use the consecutive-pair chain with infinite dual
boundaries.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError
from .geometry import (
    Graph,
    delaunay_2d,
    knn_struct,
    sig_graph,
    voronoi_graph,
)
from .point_process import PointSet, rescale
from .windows import Window, unit_ball_volume

# ---------------------------------------------------------------------------
# Edge weights
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EdgeWeight:
    """Weight phi(t) applied to edge lengths, defined on [0, inf].

    kinds: 'power' (scale * t**p, 0 at infinity), 'indicator' (1 if t <=
    threshold), 'constant' (value; nonzero at infinity, so rejected for
    Voronoi use).
    """

    kind: str
    p: float = 1.0
    scale: float = 1.0
    threshold: float = 1.0
    value: float = 1.0

    def __post_init__(self):
        if self.kind not in ("power", "indicator", "constant"):
            raise ParameterError(f"unknown edge weight kind {self.kind!r}")
        if self.kind == "power" and (self.p < 0 or self.scale < 0):
            raise ParameterError("power weight needs p >= 0 and scale >= 0")
        if self.kind == "indicator" and self.threshold < 0:
            raise ParameterError("indicator weight needs threshold >= 0")
        if self.kind == "constant" and self.value < 0:
            raise ParameterError("constant weight must be nonnegative")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "power":
            v = self.scale * t if self.p == 1.0 else self.scale * t**self.p
            out = np.where(np.isfinite(t), v, 0.0)
        elif self.kind == "indicator":
            out = np.where(t <= self.threshold, 1.0, 0.0)
        else:
            out = np.full_like(t, self.value)
        return out if out.ndim else float(out)

    @property
    def at_infinity(self) -> float:
        return self.value if self.kind == "constant" else 0.0

    @property
    def homogeneity(self) -> float | None:
        if self.kind == "power":
            return self.p
        if self.kind == "constant":
            return 0.0
        return None


def phi_len_half() -> EdgeWeight:
    """phi(t) = t/2: summing over all points gives the total edge length."""
    return EdgeWeight("power", p=1.0, scale=0.5)


# ---------------------------------------------------------------------------
# Functional base
# ---------------------------------------------------------------------------


class WeightFunctional:
    """Base: a translation-invariant per-point weight rule xi(x; X)."""

    name = "base"
    homogeneity_order: float | None = None
    needs_marks: tuple = ()
    supported_dims: tuple = (1, 2, 3)

    def values(self, X: PointSet) -> np.ndarray:
        raise NotImplementedError

    def value_at(self, X: PointSet, i: int) -> float:
        if not 0 <= i < len(X):
            raise ParameterError(f"point index {i} out of range")
        return float(self.values(X)[i])

    def check_input(self, X: PointSet) -> None:
        if X.dim not in self.supported_dims:
            raise ParameterError(
                f"{self.name} supports dimensions {self.supported_dims}, got d={X.dim}"
            )
        if "time" in self.needs_marks and X.times is None:
            raise ParameterError(f"{self.name} needs time-marked input")
        if "radius" in self.needs_marks and X.radii is None:
            raise ParameterError(f"{self.name} needs radius-marked input")

    # estimators evaluate xi at a few inserted points; subclasses may override
    # with an incremental fast path
    def values_with_inserts(self, X, ins_points, ins_times=None, ins_radii=None):
        return self.inserts_evaluator(X)(ins_points, ins_times, ins_radii)

    def inserts_evaluator(self, X: PointSet) -> "InsertsEvaluator":
        """Evaluator of xi at inserted probe points, reusing per-configuration
        precomputation across many probes."""
        return InsertsEvaluator(self, X)


class InsertsEvaluator:
    """Default probe evaluation: rebuild the combined configuration."""

    def __init__(self, xi: WeightFunctional, X: PointSet):
        self.xi = xi
        self.X = X

    def __call__(self, ins_points, ins_times=None, ins_radii=None) -> np.ndarray:
        ins_points = np.atleast_2d(np.asarray(ins_points, dtype=float))
        combined = _combine(self.X, ins_points, ins_times, ins_radii)
        return self.xi.values(combined)[len(self.X):]

    def pairs_with(self, anchor, nodes, times=None, radii=None) -> np.ndarray:
        """Weights (m, 2) at the pair (anchor, node_j) inserted together,
        one configuration per node."""
        anchor = np.asarray(anchor, dtype=float).ravel()
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        out = np.empty((nodes.shape[0], 2))
        for j in range(nodes.shape[0]):
            ins = np.vstack([anchor, nodes[j]])
            out[j] = self(ins, times, radii)
        return out

    def singles(self, nodes, times=None, radii=None) -> np.ndarray:
        """Weights (m,) at each node inserted alone, one configuration each."""
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        out = np.empty(nodes.shape[0])
        for j in range(nodes.shape[0]):
            t = None if times is None else times[j : j + 1]
            r = None if radii is None else radii[j : j + 1]
            out[j] = self(nodes[j : j + 1], t, r)[0]
        return out

    def pair_stats(self, anchor, nodes, pair_marks=None, node_marks=None):
        """(pair weights (m, 2), node singleton weights (m,)) in one pass."""
        times = radii = None
        if pair_marks is not None:
            times, radii = pair_marks
        nt = nr = None
        if node_marks is not None:
            nt, nr = node_marks
        w = self.pairs_with(anchor, nodes, times, radii)
        s = self.singles(nodes, nt, nr)
        return w, s

    def params(self) -> dict:
        return {}


def _combine(X: PointSet, ins_points, ins_times, ins_radii) -> PointSet:
    m = ins_points.shape[0]
    pts = np.vstack([X.points, ins_points]) if len(X) else ins_points

    def _cat(base, extra, what):
        if base is None and extra is None:
            return None
        if base is None:
            if len(X):
                raise ParameterError(f"cannot add {what} marks to an unmarked set")
            base = np.empty(0)
        if extra is None:
            raise ParameterError(f"inserted points need {what} marks")
        return np.concatenate([base, np.broadcast_to(np.asarray(extra, float), (m,))])

    return PointSet(
        pts,
        _cat(X.times, ins_times, "time"),
        _cat(X.radii, ins_radii, "radius"),
        _checked=True,
    )


# ---------------------------------------------------------------------------
# Graph edge-weight functionals
# ---------------------------------------------------------------------------


def _vertex_sums(n: int, G: Graph, phi: EdgeWeight) -> np.ndarray:
    vals = np.zeros(n)
    if G.edges.size == 0:
        return vals
    w = np.asarray(phi(G.lengths), dtype=float)
    np.add.at(vals, G.edges[:, 0], w)
    if not G.directed:
        np.add.at(vals, G.edges[:, 1], w)
    return vals


class CountingFunctional(WeightFunctional):
    """xi identically 1: the counting measure."""

    name = "counting"
    homogeneity_order = 0.0

    def values(self, X: PointSet) -> np.ndarray:
        self.check_input(X)
        return np.ones(len(X))

    def values_with_inserts(self, X, ins_points, ins_times=None, ins_radii=None):
        return np.ones(np.atleast_2d(ins_points).shape[0])


class KnnEdgeFunctional(WeightFunctional):
    """Sum of phi over k-nearest-neighbor edges at a point.

    Directed graphs sum over the out-edges of the point only.  On
    configurations with n <= k the point connects to all other points.
    """

    name = "knn-edge"

    def __init__(self, k: int, directed: bool, phi: EdgeWeight):
        if k < 1:
            raise ParameterError("k must be >= 1")
        self.k = int(k)
        self.directed = bool(directed)
        self.phi = phi
        self.homogeneity_order = phi.homogeneity

    def params(self):
        return {"k": self.k, "directed": self.directed, "phi": self.phi}

    def values(self, X: PointSet) -> np.ndarray:
        self.check_input(X)
        n = len(X)
        if n <= 1:
            return np.zeros(n)
        k = min(self.k, n - 1)
        nn_idx, nn_d = knn_struct(X.points, k)
        vals = np.asarray(self.phi(nn_d), dtype=float).sum(axis=1)
        if self.directed:
            return vals
        src = np.repeat(np.arange(n), k)
        dst = nn_idx.ravel()
        arc = src * n + dst
        arc_sorted = np.sort(arc)
        rev_present = np.isin(dst * n + src, arc_sorted, assume_unique=False)
        nonmutual = ~rev_present
        w = np.asarray(self.phi(nn_d.ravel()[nonmutual]), dtype=float)
        np.add.at(vals, dst[nonmutual], w)
        return vals

    def inserts_evaluator(self, X: PointSet):
        if len(X) < self.k + 1:
            return InsertsEvaluator(self, X)
        return _KnnInsertsEvaluator(self, X)


class _KnnInsertsEvaluator(InsertsEvaluator):
    """Incremental k-NN probe evaluation on a frozen base configuration."""

    def __init__(self, xi: KnnEdgeFunctional, X: PointSet):
        super().__init__(xi, X)
        self.P = X.points
        nn_idx, _ = knn_struct(self.P, xi.k)
        base_d2 = np.sum((self.P[:, None, :] - self.P[nn_idx]) ** 2, axis=2)
        self.base_d2 = np.sort(base_d2, axis=1) if xi.k > 1 else base_d2

    def __call__(self, ins_points, ins_times=None, ins_radii=None) -> np.ndarray:
        xi, P, n, k = self.xi, self.P, len(self.X), self.xi.k
        ins = np.atleast_2d(np.asarray(ins_points, dtype=float))
        m = ins.shape[0]
        d2_yP = np.sum((ins[:, None, :] - P[None, :, :]) ** 2, axis=2)
        d2_yy = np.sum((ins[:, None, :] - ins[None, :, :]) ** 2, axis=2)
        np.fill_diagonal(d2_yy, np.inf)
        # k-th smallest distance from each base point once inserts join
        merged = np.concatenate([self.base_d2, d2_yP.T], axis=1)
        kth_val = np.partition(merged, k - 1, axis=1)[:, k - 1]
        out = np.zeros(m)
        for a in range(m):
            cand_d2 = np.concatenate([d2_yP[a], d2_yy[a]])
            order = np.argpartition(cand_d2, k - 1)[:k]
            mask = np.zeros(n + m, dtype=bool)
            mask[order] = True
            if not xi.directed:
                mask[:n] |= d2_yP[a] <= kth_val
                for b in range(m):
                    if b == a:
                        continue
                    cand_b = np.concatenate([d2_yP[b], d2_yy[b]])
                    kth_b = np.partition(cand_b, k - 1)[k - 1]
                    if d2_yy[b, a] <= kth_b:
                        mask[n + b] = True
            mask[n + a] = False
            out[a] = float(np.sum(xi.phi(np.sqrt(cand_d2[mask]))))
        return out

    def _k1_stats(self, anchor, nodes, want_pairs=True, want_singles=True):
        phi = self.xi.phi
        P = self.P
        o = np.asarray(anchor, dtype=float).ravel()
        Y = np.atleast_2d(np.asarray(nodes, dtype=float))
        m = Y.shape[0]
        rows = np.arange(m)
        base1 = self.base_d2[:, 0]  # squared NN distance within the base set
        d2_o = np.sum((P - o) ** 2, axis=1)
        d2_y = np.sum((Y[:, None, :] - P[None, :, :]) ** 2, axis=2)
        d2_oy = np.sum((Y - o) ** 2, axis=1)

        o_base_min = float(d2_o.min())
        o_base_arg = int(d2_o.argmin())
        y_base_min = d2_y.min(axis=1)
        y_base_arg = d2_y.argmin(axis=1)
        phi_y = phi(np.sqrt(d2_y)) if not self.xi.directed else None

        pair = single = None
        if want_pairs:
            out_o_d2 = np.minimum(o_base_min, d2_oy)
            out_y_d2 = np.minimum(y_base_min, d2_oy)
            o_picks_y = d2_oy < o_base_min
            y_picks_o = d2_oy < y_base_min
            w_o = phi(np.sqrt(out_o_d2))
            w_y = phi(np.sqrt(out_y_d2))
            if not self.xi.directed:
                phi_o = phi(np.sqrt(d2_o))
                phi_oy = phi(np.sqrt(d2_oy))
                in_o = d2_o[None, :] <= np.minimum(base1[None, :], d2_y)
                in_y = d2_y <= np.minimum(base1, d2_o)[None, :]
                w_o = w_o + in_o @ phi_o
                w_o -= np.where(
                    ~o_picks_y & in_o[:, o_base_arg], phi_o[o_base_arg], 0.0
                )
                w_o += np.where(y_picks_o & ~o_picks_y, phi_oy, 0.0)
                w_y = w_y + np.einsum("ij,ij->i", in_y, phi_y)
                w_y -= np.where(
                    ~y_picks_o & in_y[rows, y_base_arg], phi_y[rows, y_base_arg], 0.0
                )
                w_y += np.where(o_picks_y & ~y_picks_o, phi_oy, 0.0)
            pair = np.stack([w_o, w_y], axis=1)
        if want_singles:
            w = phi(np.sqrt(y_base_min))
            if not self.xi.directed:
                in_s = d2_y <= base1[None, :]
                w = w + np.einsum("ij,ij->i", in_s, phi_y)
                w -= np.where(in_s[rows, y_base_arg], phi_y[rows, y_base_arg], 0.0)
            single = w
        return pair, single

    def pairs_with(self, anchor, nodes, times=None, radii=None) -> np.ndarray:
        if self.xi.k != 1:
            return super().pairs_with(anchor, nodes, times, radii)
        return self._k1_stats(anchor, nodes, want_singles=False)[0]

    def singles(self, nodes, times=None, radii=None) -> np.ndarray:
        if self.xi.k != 1:
            return super().singles(nodes, times, radii)
        return self._k1_stats(np.zeros(self.P.shape[1]), nodes, want_pairs=False)[1]

    def pair_stats(self, anchor, nodes, pair_marks=None, node_marks=None):
        if self.xi.k != 1:
            return super().pair_stats(anchor, nodes, pair_marks, node_marks)
        return self._k1_stats(anchor, nodes)


class DelaunayEdgeFunctional(WeightFunctional):
    """Sum of phi over Delaunay edges at a point (d = 2)."""

    name = "delaunay-edge"
    supported_dims = (2,)

    def __init__(self, phi: EdgeWeight):
        self.phi = phi
        self.homogeneity_order = phi.homogeneity

    def params(self):
        return {"phi": self.phi}

    def values(self, X: PointSet) -> np.ndarray:
        self.check_input(X)
        G = _delaunay_or_chain(X, dual=False)
        return _vertex_sums(len(X), G, self.phi)


class VoronoiEdgeFunctional(WeightFunctional):
    """Sum of phi over the Voronoi boundary segments at a point (d = 2).

    phi(inf) must vanish, so constant weights are rejected up front.
    """

    name = "voronoi-edge"
    supported_dims = (2,)

    def __init__(self, phi: EdgeWeight):
        if phi.at_infinity != 0.0:
            raise ParameterError(
                "Voronoi functionals need phi(inf) = 0; constant phi is invalid"
            )
        self.phi = phi
        self.homogeneity_order = phi.homogeneity

    def params(self):
        return {"phi": self.phi}

    def values(self, X: PointSet) -> np.ndarray:
        self.check_input(X)
        G = _delaunay_or_chain(X, dual=True)
        return _vertex_sums(len(X), G, self.phi)


def _collinear_chain(X: PointSet, dual: bool) -> Graph:
    n = len(X)
    if n <= 1:
        return Graph(n, np.empty((0, 2), dtype=np.int64), np.empty(0), False)
    order = np.lexsort((np.arange(n), X.points[:, 1], X.points[:, 0]))
    a, b = order[:-1], order[1:]
    edges = np.stack([np.minimum(a, b), np.maximum(a, b)], axis=1)
    if dual:
        lens = np.full(n - 1, np.inf)
        return Graph(n, edges, lens, False, "voronoi-dual")
    lens = np.sqrt(np.sum((X.points[a] - X.points[b]) ** 2, axis=1))
    return Graph(n, edges, lens, False, "delaunay")


def _delaunay_or_chain(X: PointSet, dual: bool) -> Graph:
    if len(X) < 3:
        return _collinear_chain(X, dual)
    try:
        return voronoi_graph(X) if dual else delaunay_2d(X)
    except DegenerateInputError:
        return _collinear_chain(X, dual)


class SigEdgeFunctional(WeightFunctional):
    """Sum of phi over sphere-of-influence edges at a point."""

    name = "sig-edge"

    def __init__(self, phi: EdgeWeight):
        self.phi = phi
        self.homogeneity_order = phi.homogeneity

    def params(self):
        return {"phi": self.phi}

    def values(self, X: PointSet) -> np.ndarray:
        self.check_input(X)
        if len(X) <= 1:
            return np.zeros(len(X))
        return _vertex_sums(len(X), sig_graph(X), self.phi)


# ---------------------------------------------------------------------------
# Packing functionals
# ---------------------------------------------------------------------------


@dataclass
class AcceptanceVector:
    """Accept/reject flags parallel to a time-marked point set."""

    flags: np.ndarray  # (n,) bool
    times: np.ndarray  # (n,) float

    def accepted_count(self) -> int:
        return int(self.flags.sum())

    def to_csv(self) -> str:
        lines = ["index,time,accepted"]
        for i, (t, f) in enumerate(zip(self.times, self.flags)):
            lines.append("%d,%.17g,%d" % (i, t, int(f)))
        return "\n".join(lines) + "\n"


def _time_order(X: PointSet) -> np.ndarray:
    if X.times is None:
        raise ParameterError("packing needs time-marked input")
    t = X.times
    if np.unique(t).size != t.size:
        raise DegenerateInputError("duplicate time marks")
    return np.argsort(t)


def rsa_pack(X: PointSet, ball_volume: float) -> AcceptanceVector:
    """Random sequential adsorption: process points in increasing time order,
    accept a ball iff it does not overlap any previously accepted ball
    (strict overlap: center distance < 2r, touching balls both pack)."""
    if not ball_volume > 0:
        raise ParameterError("ball_volume must be > 0")
    order = _time_order(X)
    d = X.dim
    r = (ball_volume / unit_ball_volume(d)) ** (1.0 / d)
    pts = X.points
    flags = np.zeros(len(X), dtype=bool)
    accepted: list[int] = []
    two_r = 2.0 * r
    for i in order:
        if accepted:
            dist = np.sqrt(np.sum((pts[accepted] - pts[i]) ** 2, axis=1))
            if np.any(dist < two_r):
                continue
        flags[i] = True
        accepted.append(i)
    return AcceptanceVector(flags, X.times.copy())


def birth_growth(X: PointSet, v: float) -> AcceptanceVector:
    """Spatial birth-growth: a seed (initial radius rho_i, born at t_i) is
    accepted iff it clears every previously accepted cell, with cells modeled
    as balls grown at speed v: distance > rho_i + rho_j + v (t_i - t_j)."""
    if v < 0:
        raise ParameterError("growth speed must be >= 0")
    if X.radii is None:
        raise ParameterError("birth-growth needs radius-marked input")
    order = _time_order(X)
    pts, rho, t = X.points, X.radii, X.times
    flags = np.zeros(len(X), dtype=bool)
    accepted: list[int] = []
    for i in order:
        if accepted:
            acc = np.asarray(accepted)
            dist = np.sqrt(np.sum((pts[acc] - pts[i]) ** 2, axis=1))
            reach = rho[i] + rho[acc] + v * (t[i] - t[acc])
            if not np.all(dist > reach):
                continue
        flags[i] = True
        accepted.append(i)
    return AcceptanceVector(flags, t.copy())


class RsaFunctional(WeightFunctional):
    """Packing indicator: 1 iff the ball at the point is accepted."""

    name = "rsa"
    needs_marks = ("time",)

    def __init__(self, ball_volume: float = 1.0):
        if not ball_volume > 0:
            raise ParameterError("ball_volume must be > 0")
        self.ball_volume = float(ball_volume)

    def params(self):
        return {"ball_volume": self.ball_volume}

    def values(self, X: PointSet) -> np.ndarray:
        self.check_input(X)
        return rsa_pack(X, self.ball_volume).flags.astype(float)


class BirthGrowthFunctional(WeightFunctional):
    """Acceptance indicator of the spatial birth-growth model."""

    name = "birth-growth"
    needs_marks = ("time", "radius")

    def __init__(self, speed: float = 0.0):
        if speed < 0:
            raise ParameterError("growth speed must be >= 0")
        self.speed = float(speed)

    def params(self):
        return {"speed": self.speed}

    def values(self, X: PointSet) -> np.ndarray:
        self.check_input(X)
        return birth_growth(X, self.speed).flags.astype(float)


# ---------------------------------------------------------------------------
# Germ-grain volume functional
# ---------------------------------------------------------------------------

# 2-D low-discrepancy lattice directions (plastic-constant Kronecker sequence)
_QMC_ALPHA = (0.7548776662466927, 0.5698402909980532)


def _qmc_points(n: int, bbox: np.ndarray) -> np.ndarray:
    i = np.arange(1, n + 1)
    u = np.empty((n, 2))
    u[:, 0] = (0.5 + i * _QMC_ALPHA[0]) % 1.0
    u[:, 1] = (0.5 + i * _QMC_ALPHA[1]) % 1.0
    return bbox[:, 0] + u * (bbox[:, 1] - bbox[:, 0])


def _inside_convex_polygon(q: np.ndarray, poly: np.ndarray) -> np.ndarray:
    inside = np.ones(q.shape[0], dtype=bool)
    m = poly.shape[0]
    for i in range(m):
        a = poly[i]
        e = poly[(i + 1) % m] - a
        cross = e[0] * (q[:, 1] - a[1]) - e[1] * (q[:, 0] - a[0])
        inside &= cross >= -1e-12
    return inside


def _inside_ball_union(q: np.ndarray, centers: np.ndarray, radii: np.ndarray):
    inside = np.zeros(q.shape[0], dtype=bool)
    for c, r in zip(centers, radii):
        if r <= 0:
            continue
        inside |= np.sum((q - c) ** 2, axis=1) <= r * r
    return inside


def germ_grain_volume(
    X: PointSet, i: int, W: Window, qmc_samples: int = 100_000
) -> float:
    """Area of (union of all grain balls) cut to the Voronoi cell of point i,
    clipped to the window (quasi-Monte-Carlo over the cell's bounding box)."""
    from .geometry import voronoi_cells_2d

    if X.dim != 2:
        raise ParameterError("germ-grain volume implemented for d = 2 only")
    if X.radii is None:
        raise ParameterError("germ-grain needs radius-marked input")
    if not 0 <= i < len(X):
        raise ParameterError(f"point index {i} out of range")
    cell = voronoi_cells_2d(X, W)[i].polygon
    return _grain_area_in_cell(cell, X.points, X.radii, qmc_samples)


def _grain_area_in_cell(cell, centers, radii, qmc_samples) -> float:
    if cell.shape[0] < 3:
        return 0.0
    bbox = np.stack([cell.min(axis=0), cell.max(axis=0)], axis=1)
    area_bbox = float(np.prod(bbox[:, 1] - bbox[:, 0]))
    if area_bbox == 0.0:
        return 0.0
    q = _qmc_points(qmc_samples, bbox)
    hit = _inside_convex_polygon(q, cell) & _inside_ball_union(q, centers, radii)
    return area_bbox * float(hit.mean())


class GermGrainFunctional(WeightFunctional):
    """Per-point volume of the grain union inside the point's Voronoi cell."""

    name = "germ-grain"
    needs_marks = ("radius",)
    supported_dims = (2,)

    def __init__(self, window: Window, qmc_samples: int = 100_000):
        self.window = window
        self.qmc_samples = int(qmc_samples)

    def params(self):
        return {"qmc_samples": self.qmc_samples}

    def values(self, X: PointSet) -> np.ndarray:
        from .geometry import voronoi_cells_2d

        self.check_input(X)
        cells = voronoi_cells_2d(X, self.window)
        return np.array(
            [
                _grain_area_in_cell(c.polygon, X.points, X.radii, self.qmc_samples)
                for c in cells
            ]
        )


# ---------------------------------------------------------------------------
# Derived objects: rescaled weights, measures, masses, add-one cost
# ---------------------------------------------------------------------------


def xi_rescaled(xi: WeightFunctional, lam: float, i: int, X: PointSet) -> float:
    """xi evaluated on the lam**(1/d)-dilated configuration."""
    return xi.value_at(rescale(X, lam), i)


def xi_graph(xi: WeightFunctional, i: int, X: PointSet) -> float:
    """Weight of point i under a graph functional (unrescaled)."""
    return xi.value_at(X, i)


@dataclass
class WeightedMeasure:
    """Atoms at the unscaled positions, weights from the rescaled weights."""

    positions: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def to_csv(self) -> str:
        lines = []
        for x, w in zip(self.positions, self.weights):
            lines.append(",".join("%.17g" % v for v in x) + ",%.17g" % w)
        return "\n".join(lines) + "\n"


def point_measure(xi: WeightFunctional, X: PointSet, lam: float) -> WeightedMeasure:
    return WeightedMeasure(X.points.copy(), np.asarray(xi.values(rescale(X, lam))))


def integrate(f, mu: WeightedMeasure) -> float:
    fx = np.asarray(f(mu.positions), dtype=float)
    return float(np.dot(fx, mu.weights))


def total_mass(xi: WeightFunctional, X: PointSet, lam: float = 1.0) -> float:
    if len(X) == 0:
        return 0.0
    return float(np.sum(xi.values(rescale(X, lam))))


def weighted_mass(xi: WeightFunctional, f, X: PointSet, n: float) -> float:
    return integrate(f, point_measure(xi, X, n))


def add_one_cost(
    xi: WeightFunctional, x, X: PointSet, time=None, radius=None
) -> float:
    """H(X u {x}) - H(X)."""
    x = np.asarray(x, dtype=float).ravel()
    if len(X) and np.any(np.all(X.points == x, axis=1)):
        raise ParameterError("inserted point already belongs to the set")
    if len(X) == 0:
        combined = _combine(PointSet.empty(x.size), x[None, :], time, radius)
    else:
        combined = _combine(X, x[None, :], time, radius)
    return total_mass(xi, combined) - total_mass(xi, X)


def write_weighted_measure(mu: WeightedMeasure, path) -> None:
    with io.open(path, "w", newline="\n") as fh:
        fh.write(mu.to_csv())


def write_acceptance(av: AcceptanceVector, path) -> None:
    with io.open(path, "w", newline="\n") as fh:
        fh.write(av.to_csv())


# ---------------------------------------------------------------------------
# Registry used by the CLI and experiment configs
# ---------------------------------------------------------------------------


def make_functional(name: str, **kw) -> WeightFunctional:
    """Build a functional from a short name.

    counting | knn-len | knn-deg | knn-pow | delaunay-len | voronoi-len |
    sig-len | rsa | birth-growth | germ-grain
    """
    if name == "counting":
        return CountingFunctional()
    if name == "knn-len":
        return KnnEdgeFunctional(
            kw.get("k", 1), kw.get("directed", False), phi_len_half()
        )
    if name == "knn-deg":
        return KnnEdgeFunctional(
            kw.get("k", 1), kw.get("directed", False), EdgeWeight("constant", value=1.0)
        )
    if name == "knn-pow":
        phi = EdgeWeight("power", p=kw.get("p", 1.0), scale=kw.get("scale", 1.0))
        return KnnEdgeFunctional(kw.get("k", 1), kw.get("directed", False), phi)
    if name == "delaunay-len":
        return DelaunayEdgeFunctional(phi_len_half())
    if name == "voronoi-len":
        return VoronoiEdgeFunctional(phi_len_half())
    if name == "sig-len":
        return SigEdgeFunctional(phi_len_half())
    if name == "rsa":
        return RsaFunctional(kw.get("ball_volume", 1.0))
    if name == "birth-growth":
        return BirthGrowthFunctional(kw.get("speed", 0.0))
    if name == "germ-grain":
        if "window" not in kw:
            raise ParameterError("germ-grain functional needs a window")
        return GermGrainFunctional(kw["window"], kw.get("qmc_samples", 100_000))
    raise ParameterError(f"unknown functional {name!r}")
