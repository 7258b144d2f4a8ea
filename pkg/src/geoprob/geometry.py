"""Geometric structures: spatial grid index, k-nearest-neighbor graphs,
2-D Delaunay triangulation and Voronoi cells, sphere-of-influence graph.

Every accelerated construction has a brute-force oracle next to it
(knn_brute, sig_brute) and the triangulation is checked against the
empty-circumcircle property in the tests.

Tie-breaking is deterministic everywhere: candidate neighbors at equal
distance are ordered by lexicographic coordinates, then by index; exactly
cocircular quads take the diagonal containing the smallest vertex index.
"""

from __future__ import annotations

import io
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import DegenerateInputError, ParameterError, ParseError
from .point_process import PointSet
from .windows import Window

# ---------------------------------------------------------------------------
# Graph
# ---------------------------------------------------------------------------


@dataclass
class Graph:
    """Edge list with Euclidean lengths.

    Undirected graphs store each edge once with i < j.  kind "voronoi-dual"
    marks graphs whose edges are Delaunay point pairs but whose lengths are
    the dual Voronoi boundary-segment lengths (np.inf for unbounded rays).
    """

    n: int
    edges: np.ndarray  # (m, 2) int
    lengths: np.ndarray  # (m,) float
    directed: bool
    kind: str = "generic"
    _inc: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        self.lengths = np.asarray(self.lengths, dtype=float).reshape(-1)
        if self.edges.shape[0] != self.lengths.shape[0]:
            raise ParameterError("edges and lengths must parallel")
        if self.edges.size and (self.edges.min() < 0 or self.edges.max() >= self.n):
            raise ParameterError("edge indices out of range")
        if not self.directed and self.edges.size:
            if np.any(self.edges[:, 0] >= self.edges[:, 1]):
                raise ParameterError("undirected edges must be stored with i < j")

    def incident_edge_ids(self, i: int) -> np.ndarray:
        if not 0 <= i < self.n:
            raise ParameterError(f"vertex index {i} out of range")
        if self._inc is None:
            inc = [[] for _ in range(self.n)]
            for eid, (a, b) in enumerate(self.edges):
                inc[a].append(eid)
                if not self.directed:
                    inc[b].append(eid)
            self._inc = [np.asarray(v, dtype=np.int64) for v in inc]
        return self._inc[i]

    def degree_sum(self) -> int:
        return sum(len(self.incident_edge_ids(i)) for i in range(self.n))


def incident_edges(G: Graph, i: int) -> np.ndarray:
    """Lengths of edges meeting vertex i (out-edges for directed graphs;
    dual boundary-segment lengths for Voronoi graphs, +inf when unbounded)."""
    return G.lengths[G.incident_edge_ids(i)]


def graph_to_csv(G: Graph) -> str:
    lines = [f"# directed={int(G.directed)} n={G.n}"]
    for (a, b), ln in zip(G.edges, G.lengths):
        lines.append("%d,%d,%.17g" % (a, b, ln))
    return "\n".join(lines) + "\n"


def graph_from_csv(text: str) -> Graph:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise ParseError("expected '# directed=<0|1> n=<count>' header", 1)
    try:
        fields = dict(p.split("=") for p in lines[0][1:].split())
        directed = bool(int(fields["directed"]))
        n = int(fields["n"])
    except (ValueError, KeyError):
        raise ParseError(f"bad header {lines[0]!r}", 1) from None
    edges, lengths = [], []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 3:
            raise ParseError("expected i,j,length", ln)
        try:
            edges.append((int(parts[0]), int(parts[1])))
            lengths.append(float(parts[2]))
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", ln) from None
    return Graph(n, np.asarray(edges).reshape(-1, 2), np.asarray(lengths), directed)


def write_graph(G: Graph, path) -> None:
    with io.open(path, "w", newline="\n") as fh:
        fh.write(graph_to_csv(G))


# ---------------------------------------------------------------------------
# Uniform-grid spatial index
# ---------------------------------------------------------------------------


def _tie_order(cands: np.ndarray, d2: np.ndarray, pts: np.ndarray) -> np.ndarray:
    """Sort candidate indices by (distance, lexicographic coords, index)."""
    keys = [cands] + [pts[cands, ax] for ax in range(pts.shape[1] - 1, -1, -1)]
    keys.append(d2)
    return np.lexsort(keys)


class SpatialIndex:
    """Uniform grid over a point set; query results equal brute force."""

    def __init__(self, X: PointSet):
        if len(X) == 0:
            raise ParameterError("cannot index an empty point set")
        pts = X.points
        self.points = pts
        n, d = pts.shape
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        ext = hi - lo
        scale = float(ext.max()) if ext.max() > 0 else 1.0
        vol = float(np.prod(np.maximum(ext, 1e-3 * scale)))
        h = max((vol / n) ** (1.0 / d), scale / 128.0, 1e-12)
        self.lo = lo
        self.h = h
        self.shape = np.maximum(1, np.ceil(np.maximum(ext, 1e-300) / h).astype(int))
        self.shape = np.minimum(self.shape, 256)
        cells = self._cell_of(pts)
        flat = np.ravel_multi_index(cells.T, self.shape)
        order = np.argsort(flat, kind="stable")
        self._order = order
        self._flat_sorted = flat[order]

    def _cell_of(self, pts: np.ndarray) -> np.ndarray:
        c = np.floor((np.atleast_2d(pts) - self.lo) / self.h).astype(int)
        return np.clip(c, 0, self.shape - 1)

    def _points_in_cells(self, cells: np.ndarray) -> np.ndarray:
        flats = np.ravel_multi_index(cells.T, self.shape)
        out = []
        for f in np.unique(flats):
            a = np.searchsorted(self._flat_sorted, f, side="left")
            b = np.searchsorted(self._flat_sorted, f, side="right")
            if b > a:
                out.append(self._order[a:b])
        return np.concatenate(out) if out else np.empty(0, dtype=np.int64)

    def _ring_cells(self, center: np.ndarray, r: int) -> np.ndarray:
        d = len(self.shape)
        rngs = [
            np.arange(max(0, center[a] - r), min(self.shape[a], center[a] + r + 1))
            for a in range(d)
        ]
        grids = np.meshgrid(*rngs, indexing="ij")
        cells = np.stack([g.ravel() for g in grids], axis=1)
        if r > 0:
            cheb = np.max(np.abs(cells - center), axis=1)
            cells = cells[cheb == r]
        return cells

    def _max_ring(self, center: np.ndarray) -> int:
        return int(
            max(
                max(center[a], self.shape[a] - 1 - center[a])
                for a in range(len(self.shape))
            )
        )

    def nearest(self, q, k: int = 1, exclude: int | None = None):
        """k nearest indexed points to q; ties broken by coords then index.

        Returns (indices, distances), both length k.
        """
        q = np.asarray(q, dtype=float).ravel()
        n = self.points.shape[0]
        avail = n - (1 if exclude is not None else 0)
        if k > avail:
            raise ParameterError(f"k={k} exceeds available points {avail}")
        center = self._cell_of(q)[0]
        cand = []
        rmax = self._max_ring(center)
        for r in range(rmax + 1):
            got = self._points_in_cells(self._ring_cells(center, r))
            if exclude is not None:
                got = got[got != exclude]
            if got.size:
                cand.append(got)
            total = sum(c.size for c in cand)
            if total >= k:
                cc = np.concatenate(cand)
                d2 = np.sum((self.points[cc] - q) ** 2, axis=1)
                kth = np.partition(d2, k - 1)[k - 1]
                # everything beyond explored rings is at distance >= r*h
                if np.sqrt(kth) < r * self.h or r == rmax:
                    order = _tie_order(cc, d2, self.points)[:k]
                    sel = cc[order]
                    return sel, np.sqrt(np.sum((self.points[sel] - q) ** 2, axis=1))
        raise AssertionError("unreachable: ring expansion exhausted")

    def range_query(self, q, radius: float, exclude_coincident: bool = True):
        """Indices of points with |p - q| <= radius, dropping exact matches of q."""
        if radius < 0:
            raise ParameterError("radius must be >= 0")
        q = np.asarray(q, dtype=float).ravel()
        lo_cell = self._cell_of(q - radius)[0]
        hi_cell = self._cell_of(q + radius)[0]
        rngs = [np.arange(lo_cell[a], hi_cell[a] + 1) for a in range(len(self.shape))]
        grids = np.meshgrid(*rngs, indexing="ij")
        cells = np.stack([g.ravel() for g in grids], axis=1)
        cand = self._points_in_cells(cells)
        if cand.size == 0:
            return cand
        d2 = np.sum((self.points[cand] - q) ** 2, axis=1)
        keep = d2 <= radius * radius
        if exclude_coincident:
            keep &= d2 > 0
        cand = cand[keep]
        return cand[_tie_order(cand, d2[keep], self.points)]


def build_spatial_index(X: PointSet) -> SpatialIndex:
    return SpatialIndex(X)


# ---------------------------------------------------------------------------
# k-nearest-neighbor structure and graphs
# ---------------------------------------------------------------------------

_STENCIL_REACH = {1: 3, 2: 2, 3: 1}


def knn_struct(points: np.ndarray, k: int):
    """(indices, distances) of the k nearest neighbors of every point,
    columns sorted; deterministic tie-break by coords then index.

    Small sets use the dense distance matrix; larger ones a cell-list batch
    pass with a per-point ring-expansion fallback for the few points whose
    k-th candidate is not provably nearest.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    n, d = pts.shape
    if k < 1 or k > n - 1:
        raise ParameterError(f"k must satisfy 1 <= k <= n-1 (k={k}, n={n})")
    if n <= 512:
        return _knn_small(pts, k)
    idx = SpatialIndex(PointSet(pts, _checked=True))
    reach = _STENCIL_REACH[d]
    cells = idx._cell_of(pts)
    flat = np.ravel_multi_index(cells.T, idx.shape)
    order = np.argsort(flat, kind="stable")
    flat_sorted = flat[order]

    offs = np.stack(
        [g.ravel() for g in np.meshgrid(*([np.arange(-reach, reach + 1)] * d),
                                        indexing="ij")],
        axis=1,
    )
    # all (point, neighbor-cell) combinations in one sweep; validity per axis
    deltas = np.arange(-reach, reach + 1)
    ok = np.ones((n, offs.shape[0]), dtype=bool)
    for ax in range(d):
        ok_ax = (cells[:, ax, None] + deltas >= 0) & (
            cells[:, ax, None] + deltas < idx.shape[ax]
        )
        ok &= ok_ax[:, offs[:, ax] + reach]
    strides = np.empty(d, dtype=np.int64)
    strides[-1] = 1
    for ax in range(d - 2, -1, -1):
        strides[ax] = strides[ax + 1] * idx.shape[ax + 1]
    off_flat = offs @ strides
    target = (flat[:, None] + off_flat[None, :])[ok]
    src_all = np.broadcast_to(np.arange(n)[:, None], ok.shape)[ok]
    a = np.searchsorted(flat_sorted, target, side="left")
    b = np.searchsorted(flat_sorted, target, side="right")
    cnt = b - a
    has = cnt > 0
    src_all, a, cnt = src_all[has], a[has], cnt[has]
    pi = np.repeat(src_all, cnt)
    starts_rep = np.repeat(a, cnt)
    within = np.arange(cnt.sum()) - np.repeat(np.cumsum(cnt) - cnt, cnt)
    pj = order[starts_rep + within]
    keep = pi != pj
    pi, pj = pi[keep], pj[keep]
    diff = pts[pi] - pts[pj]
    d2 = np.einsum("ij,ij->i", diff, diff)

    # successive stable sorts = lexsort((d2, pi))
    s1 = np.argsort(d2, kind="stable")
    srt = s1[np.argsort(pi[s1], kind="stable")]
    dup = (pi[srt][1:] == pi[srt][:-1]) & (d2[srt][1:] == d2[srt][:-1])
    if dup.any():
        # exact distance ties: order by coords then index as well
        keys = [pj]
        keys += [pts[pj, ax] for ax in range(d - 1, -1, -1)]
        keys += [d2, pi]
        srt = np.lexsort(keys)
    pi, pj, d2 = pi[srt], pj[srt], d2[srt]
    starts = np.searchsorted(pi, np.arange(n), side="left")
    counts = np.searchsorted(pi, np.arange(n), side="right") - starts
    rank = np.arange(pi.size) - starts[pi]

    nn_idx = np.full((n, k), -1, dtype=np.int64)
    nn_d = np.full((n, k), np.inf)
    sel = rank < k
    nn_idx[pi[sel], rank[sel]] = pj[sel]
    nn_d[pi[sel], rank[sel]] = np.sqrt(d2[sel])

    guarantee = reach * idx.h
    need_fallback = (counts < k) | (nn_d[:, k - 1] >= guarantee)
    for i in np.flatnonzero(need_fallback):
        ind, dist = idx.nearest(pts[i], k=k, exclude=int(i))
        nn_idx[i] = ind
        nn_d[i] = dist
    return nn_idx, nn_d


def _knn_small(pts: np.ndarray, k: int):
    """Dense-matrix k nearest neighbors with the same tie-break rules."""
    n, d = pts.shape
    d2 = np.sum((pts[:, None, :] - pts[None, :, :]) ** 2, axis=2)
    np.fill_diagonal(d2, np.inf)
    sel = np.argpartition(d2, min(k, n - 2), axis=1)[:, : k + 1]
    sel_d2 = np.take_along_axis(d2, sel, axis=1)
    order = np.argsort(sel_d2, axis=1, kind="stable")
    sel = np.take_along_axis(sel, order, axis=1)
    sel_d2 = np.take_along_axis(sel_d2, order, axis=1)
    nn_idx = sel[:, :k].copy()
    nn_d2 = sel_d2[:, :k].copy()
    # rows with any exact distance tie among the k+1 closest get the full
    # (distance, coords, index) ordering
    ties = np.any(sel_d2[:, 1:] == sel_d2[:, :-1], axis=1)
    for i in np.flatnonzero(ties):
        cands = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        o = _tie_order(cands, d2[i, cands], pts)[:k]
        nn_idx[i] = cands[o]
        nn_d2[i] = d2[i, nn_idx[i]]
    return nn_idx, np.sqrt(nn_d2)


def knn_graph(X: PointSet, k: int, directed: bool) -> Graph:
    """k-nearest-neighbor graph (grid accelerated; equals knn_brute)."""
    if len(X) < 2:
        raise ParameterError("need at least 2 points")
    nn_idx, nn_d = knn_struct(X.points, k)
    return _knn_to_graph(len(X), nn_idx, nn_d, directed)


def knn_brute(X: PointSet, k: int, directed: bool) -> Graph:
    """O(n^2) reference k-NN graph with the same tie-break rules."""
    pts = X.points
    n, d = pts.shape
    if n < 2:
        raise ParameterError("need at least 2 points")
    if k < 1 or k > n - 1:
        raise ParameterError(f"k must satisfy 1 <= k <= n-1 (k={k}, n={n})")
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    nn_idx = np.empty((n, k), dtype=np.int64)
    nn_d = np.empty((n, k))
    for i in range(n):
        cands = np.concatenate([np.arange(i), np.arange(i + 1, n)])
        order = _tie_order(cands, d2[i, cands], pts)[:k]
        nn_idx[i] = cands[order]
        nn_d[i] = np.sqrt(d2[i, nn_idx[i]])
    return _knn_to_graph(n, nn_idx, nn_d, directed)


def _knn_to_graph(n: int, nn_idx: np.ndarray, nn_d: np.ndarray, directed: bool):
    k = nn_idx.shape[1]
    src = np.repeat(np.arange(n), k)
    dst = nn_idx.ravel()
    lens = nn_d.ravel()
    if directed:
        return Graph(n, np.stack([src, dst], axis=1), lens, True, "knn")
    a = np.minimum(src, dst)
    b = np.maximum(src, dst)
    key = a * n + b
    _, first = np.unique(key, return_index=True)
    edges = np.stack([a[first], b[first]], axis=1)
    return Graph(n, edges, lens[first], False, "knn")


# ---------------------------------------------------------------------------
# Sphere-of-influence graph
# ---------------------------------------------------------------------------


def _sig_from_radii(pts: np.ndarray, radii: np.ndarray) -> Graph:
    n = pts.shape[0]
    ii, jj = np.triu_indices(n, k=1)
    dist = np.sqrt(np.sum((pts[ii] - pts[jj]) ** 2, axis=1))
    # open overlap: strictly closer than the sum of influence radii
    keep = dist < radii[ii] + radii[jj]
    return Graph(n, np.stack([ii[keep], jj[keep]], axis=1), dist[keep], False, "sig")


def sig_graph(X: PointSet) -> Graph:
    """Sphere-of-influence graph; influence radius = distance to nearest
    neighbor, edge iff the two balls overlap (strict inequality)."""
    if len(X) < 2:
        raise ParameterError("need at least 2 points")
    _, nn_d = knn_struct(X.points, 1)
    return _sig_from_radii(X.points, nn_d[:, 0])


def sig_brute(X: PointSet) -> Graph:
    """O(n^2) direct check for the sphere-of-influence graph."""
    pts = X.points
    n = pts.shape[0]
    if n < 2:
        raise ParameterError("need at least 2 points")
    diff = pts[:, None, :] - pts[None, :, :]
    d2 = np.sum(diff * diff, axis=2)
    np.fill_diagonal(d2, np.inf)
    radii = np.sqrt(d2.min(axis=1))
    return _sig_from_radii(pts, radii)


# ---------------------------------------------------------------------------
# Exact-filtered predicates
# ---------------------------------------------------------------------------


def _orient2d(pa, pb, pc) -> int:
    """Sign of twice the signed area of triangle pa->pb->pc (exact)."""
    detl = (pb[0] - pa[0]) * (pc[1] - pa[1])
    detr = (pb[1] - pa[1]) * (pc[0] - pa[0])
    det = detl - detr
    err = 1e-14 * (abs(detl) + abs(detr))
    if det > err:
        return 1
    if det < -err:
        return -1
    ax, ay = Fraction(float(pa[0])), Fraction(float(pa[1]))
    bx, by = Fraction(float(pb[0])), Fraction(float(pb[1]))
    cx, cy = Fraction(float(pc[0])), Fraction(float(pc[1]))
    dd = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
    return (dd > 0) - (dd < 0)


def _incircle(pa, pb, pc, pd) -> int:
    """With (pa,pb,pc) counterclockwise: +1 if pd strictly inside their
    circumcircle, -1 if strictly outside, 0 if exactly cocircular (exact)."""
    adx, ady = pa[0] - pd[0], pa[1] - pd[1]
    bdx, bdy = pb[0] - pd[0], pb[1] - pd[1]
    cdx, cdy = pc[0] - pd[0], pc[1] - pd[1]
    ad2 = adx * adx + ady * ady
    bd2 = bdx * bdx + bdy * bdy
    cd2 = cdx * cdx + cdy * cdy
    det = (
        ad2 * (bdx * cdy - bdy * cdx)
        - bd2 * (adx * cdy - ady * cdx)
        + cd2 * (adx * bdy - ady * bdx)
    )
    mag = (
        ad2 * (abs(bdx * cdy) + abs(bdy * cdx))
        + bd2 * (abs(adx * cdy) + abs(ady * cdx))
        + cd2 * (abs(adx * bdy) + abs(ady * bdx))
    )
    err = 1e-13 * mag
    if det > err:
        return 1
    if det < -err:
        return -1
    fa = [Fraction(float(v)) for v in (pa[0], pa[1])]
    fb = [Fraction(float(v)) for v in (pb[0], pb[1])]
    fc = [Fraction(float(v)) for v in (pc[0], pc[1])]
    fd = [Fraction(float(v)) for v in (pd[0], pd[1])]
    Adx, Ady = fa[0] - fd[0], fa[1] - fd[1]
    Bdx, Bdy = fb[0] - fd[0], fb[1] - fd[1]
    Cdx, Cdy = fc[0] - fd[0], fc[1] - fd[1]
    A2 = Adx * Adx + Ady * Ady
    B2 = Bdx * Bdx + Bdy * Bdy
    C2 = Cdx * Cdx + Cdy * Cdy
    dd = (
        A2 * (Bdx * Cdy - Bdy * Cdx)
        - B2 * (Adx * Cdy - Ady * Cdx)
        + C2 * (Adx * Bdy - Ady * Bdx)
    )
    return (dd > 0) - (dd < 0)


def circumcenter(pa, pb, pc) -> np.ndarray:
    bx, by = pb[0] - pa[0], pb[1] - pa[1]
    cx, cy = pc[0] - pa[0], pc[1] - pa[1]
    d = 2.0 * (bx * cy - by * cx)
    b2 = bx * bx + by * by
    c2 = cx * cx + cy * cy
    ux = (cy * b2 - by * c2) / d
    uy = (bx * c2 - cx * b2) / d
    return np.array([pa[0] + ux, pa[1] + uy])


# ---------------------------------------------------------------------------
# Delaunay triangulation (incremental hull build + Lawson flips)
# ---------------------------------------------------------------------------


class _Triangulation:
    def __init__(self, pts: np.ndarray):
        self.pts = pts
        self.tris: dict[int, tuple] = {}
        self.edge2tri: dict[tuple, list] = {}
        self._next = 0

    def add(self, a: int, b: int, c: int):
        tid = self._next
        self._next += 1
        self.tris[tid] = (a, b, c)
        for e in ((a, b), (b, c), (c, a)):
            self.edge2tri.setdefault(_ekey(e), []).append(tid)
        return tid

    def remove(self, tid: int):
        a, b, c = self.tris.pop(tid)
        for e in ((a, b), (b, c), (c, a)):
            key = _ekey(e)
            lst = self.edge2tri[key]
            lst.remove(tid)
            if not lst:
                del self.edge2tri[key]


def _ekey(e):
    return (e[0], e[1]) if e[0] < e[1] else (e[1], e[0])


def _initial_triangulation(pts: np.ndarray) -> _Triangulation:
    n = pts.shape[0]
    order = np.lexsort((np.arange(n), pts[:, 1], pts[:, 0]))
    T = _Triangulation(pts)
    chain = [int(order[0])]
    hull: list | None = None
    for raw in order[1:]:
        p = int(raw)
        if hull is None:
            if len(chain) >= 2 and _orient2d(pts[chain[0]], pts[chain[-1]], pts[p]) != 0:
                side = _orient2d(pts[chain[0]], pts[chain[-1]], pts[p])
                for i in range(len(chain) - 1):
                    a, b = chain[i], chain[i + 1]
                    if _orient2d(pts[a], pts[b], pts[p]) > 0:
                        T.add(a, b, p)
                    else:
                        T.add(b, a, p)
                hull = chain + [p] if side > 0 else chain[::-1] + [p]
            else:
                chain.append(p)
            continue
        _hull_insert(T, hull, p)
    if hull is None:
        raise DegenerateInputError("all points are collinear")
    return T


def _hull_insert(T: _Triangulation, hull: list, p: int):
    pts = T.pts
    m = len(hull)
    vis = [
        _orient2d(pts[hull[i]], pts[hull[(i + 1) % m]], pts[p]) < 0 for i in range(m)
    ]
    if not any(vis):
        raise DegenerateInputError("point coincides with the hull boundary")
    # visible edges form one contiguous cyclic run
    start = 0
    if all(vis):
        raise DegenerateInputError("inconsistent hull orientation")
    while vis[(start - 1) % m]:
        start = (start - 1) % m
    while not vis[start]:
        start = (start + 1) % m
    run = []
    i = start
    while vis[i]:
        run.append(i)
        i = (i + 1) % m
    for e in run:
        a, b = hull[e], hull[(e + 1) % m]
        T.add(b, a, p)
    first, last = run[0], (run[-1] + 1) % m
    new_hull = []
    i = last
    while True:
        new_hull.append(hull[i])
        if i == first:
            break
        i = (i + 1) % m
    new_hull.append(p)
    hull[:] = new_hull


def _lawson_flips(T: _Triangulation):
    pts = T.pts
    queue = deque(k for k, v in T.edge2tri.items() if len(v) == 2)
    queued = set(queue)
    budget = 64 * (len(pts) ** 2 + 64)
    while queue:
        if budget <= 0:
            raise DegenerateInputError("edge-flip budget exhausted")
        budget -= 1
        key = queue.popleft()
        queued.discard(key)
        tids = T.edge2tri.get(key)
        if not tids or len(tids) != 2:
            continue
        t1, t2 = tids
        a, b = key
        c = _opposite(T.tris[t1], a, b)
        d = _opposite(T.tris[t2], a, b)
        # orient t1 as (a, b, c) counterclockwise
        if _orient2d(pts[a], pts[b], pts[c]) < 0:
            a, b = b, a
        s = _incircle(pts[a], pts[b], pts[c], pts[d])
        do_flip = s > 0
        if s == 0:
            mn = min(a, b, c, d)
            do_flip = mn in (c, d) and _is_strictly_convex(pts, a, d, b, c)
        if not do_flip:
            continue
        T.remove(t1)
        T.remove(t2)
        T.add(a, d, c)
        T.add(d, b, c)
        for e in ((a, d), (d, b), (b, c), (c, a)):
            k2 = _ekey(e)
            if k2 not in queued and len(T.edge2tri.get(k2, ())) == 2:
                queue.append(k2)
                queued.add(k2)


def _opposite(tri, a, b):
    for v in tri:
        if v != a and v != b:
            return v
    raise AssertionError("degenerate triangle")


def _is_strictly_convex(pts, a, d, b, c) -> bool:
    quad = (a, d, b, c)
    for i in range(4):
        if _orient2d(pts[quad[i]], pts[quad[(i + 1) % 4]], pts[quad[(i + 2) % 4]]) <= 0:
            return False
    return True


def delaunay_triangles(X: PointSet) -> np.ndarray:
    """Triangles (t, 3) of the Delaunay triangulation (d = 2 only)."""
    if X.dim != 2:
        raise ParameterError("triangulation implemented for d = 2 only")
    if len(X) < 3:
        raise ParameterError("need at least 3 points")
    T = _initial_triangulation(X.points)
    _lawson_flips(T)
    tris = np.asarray(sorted(tuple(sorted(t)) for t in T.tris.values()), dtype=np.int64)
    return tris


def delaunay_2d(X: PointSet) -> Graph:
    """Delaunay graph: edges of the triangulation with Euclidean lengths."""
    tris = delaunay_triangles(X)
    edges = np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [0, 2]]])
    a = edges.min(axis=1)
    b = edges.max(axis=1)
    key = a.astype(np.int64) * len(X) + b
    _, first = np.unique(key, return_index=True)
    edges = np.stack([a[first], b[first]], axis=1)
    lens = np.sqrt(np.sum((X.points[edges[:, 0]] - X.points[edges[:, 1]]) ** 2, axis=1))
    return Graph(len(X), edges, lens, False, "delaunay")


def voronoi_graph(X: PointSet) -> Graph:
    """Planar dual of the Delaunay graph: one edge per Delaunay pair, length
    equal to the shared Voronoi boundary segment (np.inf for hull rays,
    zero-length degenerate duals dropped)."""
    tris = delaunay_triangles(X)
    pts = X.points
    centers = np.array([circumcenter(pts[t[0]], pts[t[1]], pts[t[2]]) for t in tris])
    edge_map: dict[tuple, list] = {}
    for tid, t in enumerate(tris):
        for e in ((t[0], t[1]), (t[1], t[2]), (t[0], t[2])):
            edge_map.setdefault(_ekey(e), []).append(tid)
    scale = float(np.max(pts.max(axis=0) - pts.min(axis=0))) or 1.0
    edges, lens = [], []
    for key, tids in sorted(edge_map.items()):
        if len(tids) == 1:
            edges.append(key)
            lens.append(np.inf)
        else:
            ln = float(np.hypot(*(centers[tids[0]] - centers[tids[1]])))
            if ln > 1e-12 * scale:
                edges.append(key)
                lens.append(ln)
    return Graph(len(X), np.asarray(edges).reshape(-1, 2), np.asarray(lens), False,
                 "voronoi-dual")


# ---------------------------------------------------------------------------
# Voronoi cells by half-plane clipping
# ---------------------------------------------------------------------------


@dataclass
class VoronoiCell:
    site_index: int
    polygon: np.ndarray  # (m, 2) counterclockwise, clipped to the window
    unbounded_flag: bool

    def area(self) -> float:
        return polygon_area(self.polygon)


def polygon_area(poly: np.ndarray) -> float:
    if poly.shape[0] < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _clip_halfplane(poly: list, point_on, normal) -> list:
    """Keep the side where (v - point_on) . normal <= 0 (Sutherland-Hodgman)."""
    out = []
    m = len(poly)
    if m == 0:
        return out
    d = [float(np.dot(np.asarray(v) - point_on, normal)) for v in poly]
    for i in range(m):
        j = (i + 1) % m
        vi, vj = poly[i], poly[j]
        if d[i] <= 0:
            out.append(vi)
            if d[j] > 0:
                t = d[i] / (d[i] - d[j])
                out.append(vi + t * (vj - vi))
        elif d[j] <= 0:
            t = d[i] / (d[i] - d[j])
            out.append(vi + t * (vj - vi))
    return out


def voronoi_cells_2d(X: PointSet, W: Window) -> list[VoronoiCell]:
    """Voronoi cells of all sites, clipped to a box window.

    Cells are convex, contain their site, and tile the window.
    """
    if X.dim != 2:
        raise ParameterError("Voronoi cells implemented for d = 2 only")
    if len(X) < 1:
        raise ParameterError("need at least 1 point")
    if W.kind != "box":
        raise ParameterError("Voronoi clipping supports box windows only")
    pts = X.points
    n = len(X)
    bb = W.bounding_box()
    span = float(max(bb[:, 1] - bb[:, 0]))
    big = 1e7 * span
    cx = bb.mean(axis=1)
    huge = [
        np.array([cx[0] - big, cx[1] - big]),
        np.array([cx[0] + big, cx[1] - big]),
        np.array([cx[0] + big, cx[1] + big]),
        np.array([cx[0] - big, cx[1] + big]),
    ]
    window_poly = [
        np.array([bb[0, 0], bb[1, 0]]),
        np.array([bb[0, 1], bb[1, 0]]),
        np.array([bb[0, 1], bb[1, 1]]),
        np.array([bb[0, 0], bb[1, 1]]),
    ]
    cells = []
    for i in range(n):
        poly = list(huge)
        for j in range(n):
            if j == i:
                continue
            mid = 0.5 * (pts[i] + pts[j])
            normal = pts[j] - pts[i]
            poly = _clip_halfplane(poly, mid, normal)
        arr = np.asarray(poly)
        unbounded = bool(arr.size and np.max(np.abs(arr - cx)) > 0.5 * big)
        for k in range(4):
            a, b = window_poly[k], window_poly[(k + 1) % 4]
            edge = b - a
            normal = np.array([edge[1], -edge[0]])  # outward for CCW window
            poly = _clip_halfplane(poly, a, normal)
        cells.append(VoronoiCell(i, np.asarray(poly).reshape(-1, 2), unbounded))
    return cells
