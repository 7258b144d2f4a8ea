"""Point processes: homogeneous/inhomogeneous Poisson, binomial, marks, rescaling.

A PointSet is a finite set of distinct d-dimensional points, optionally
carrying time marks (arrival order in [0,1]) and/or radius marks.  Samplers
are pure functions of (parameters, RngStream) and are safe to call
concurrently; identical stream addresses reproduce identical sets bit-exactly.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError, ParseError
from .rng import RngStream
from .windows import DensityField, Window


@dataclass(frozen=True)
class Mark:
    """Marks of a single point (either component may be absent)."""

    time: float | None = None
    radius: float | None = None


class PointSet:
    """Finite set of distinct points with optional parallel mark arrays."""

    __slots__ = ("points", "times", "radii")

    def __init__(self, points, times=None, radii=None, dim=None, _checked=False):
        pts = np.asarray(points, dtype=float)
        if pts.size == 0:
            if dim is None and pts.ndim == 2:
                dim = pts.shape[1]
            if dim is None:
                raise ParameterError("empty point set needs an explicit dim")
            pts = pts.reshape(0, dim)
        pts = np.atleast_2d(pts)
        if pts.ndim != 2:
            raise ParameterError("points must be an (n, d) array")
        if not 1 <= pts.shape[1] <= 3:
            raise ParameterError("supported dimensions are 1 <= d <= 3")
        if not _checked and pts.shape[0] > 1:
            if np.unique(pts, axis=0).shape[0] != pts.shape[0]:
                raise ParameterError("point sets must not contain duplicate points")
        self.points = pts
        self.times = None if times is None else np.asarray(times, dtype=float)
        self.radii = None if radii is None else np.asarray(radii, dtype=float)
        for arr, what in ((self.times, "times"), (self.radii, "radii")):
            if arr is not None and arr.shape != (pts.shape[0],):
                raise ParameterError(f"{what} must parallel the point list")
        if self.times is not None and self.times.size:
            if self.times.min() < 0 or self.times.max() > 1:
                raise ParameterError("time marks must lie in [0, 1]")
        if self.radii is not None and self.radii.size and self.radii.min() < 0:
            raise ParameterError("radius marks must be nonnegative")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self) -> int:
        return self.points.shape[0]

    def mark(self, i: int) -> Mark:
        return Mark(
            None if self.times is None else float(self.times[i]),
            None if self.radii is None else float(self.radii[i]),
        )

    def with_inserted(self, coords, time=None, radius=None) -> "PointSet":
        """New PointSet with extra point(s) appended (marks filled per-column)."""
        extra = np.atleast_2d(np.asarray(coords, dtype=float))
        pts = np.vstack([self.points, extra])
        m = extra.shape[0]

        def _extend(cur, val, what):
            if cur is None and val is None:
                return None
            if cur is None:
                raise ParameterError(f"cannot add a {what} mark to an unmarked set")
            if val is None:
                raise ParameterError(f"inserted point needs a {what} mark")
            return np.concatenate([cur, np.broadcast_to(np.asarray(val, float), (m,))])

        times = _extend(self.times, time, "time")
        radii = _extend(self.radii, radius, "radius")
        return PointSet(pts, times, radii)

    def subset(self, mask_or_idx) -> "PointSet":
        idx = np.asarray(mask_or_idx)
        return PointSet(
            self.points[idx],
            None if self.times is None else self.times[idx],
            None if self.radii is None else self.radii[idx],
            dim=self.dim,
            _checked=True,
        )

    @classmethod
    def empty(cls, dim: int) -> "PointSet":
        return cls(np.empty((0, dim)), _checked=True)


def _resample_duplicates(pts: np.ndarray, draw, gen) -> np.ndarray:
    """Rejection-resample exact duplicate rows (measure-zero but possible)."""
    for _ in range(64):
        _, first = np.unique(pts, axis=0, return_index=True)
        if first.size == pts.shape[0]:
            return pts
        dup = np.setdiff1d(np.arange(pts.shape[0]), first)
        pts[dup] = draw(dup.size, gen)
    raise ParameterError("could not produce distinct points (degenerate sampler)")


def sample_homogeneous_poisson(tau: float, window: Window, rng: RngStream) -> PointSet:
    """Homogeneous Poisson process with intensity tau on the window."""
    if not tau > 0:
        raise ParameterError("intensity tau must be > 0")
    gen = rng.generator()
    n = int(gen.poisson(tau * window.volume()))
    pts = window.sample_uniform(n, gen)
    if n > 1:
        pts = _resample_duplicates(pts, window.sample_uniform, gen)
    return PointSet(pts, _checked=True)


def sample_inhomogeneous_poisson(
    kappa: DensityField, lam: float, rng: RngStream
) -> PointSet:
    """Poisson process with intensity lam * kappa, by thinning a dominating
    homogeneous process of intensity lam * sup_bound."""
    if not lam > 0:
        raise ParameterError("intensity multiplier lam must be > 0")
    if not kappa.sup_bound > 0:
        raise ParameterError("density sup_bound must be > 0 for thinning")
    gen = rng.generator()
    w = kappa.window
    n = int(gen.poisson(lam * kappa.sup_bound * w.volume()))
    cand = w.sample_uniform(n, gen)
    if n > 0:
        keep = gen.random(n) * kappa.sup_bound < kappa(cand)
        pts = cand[keep]
    else:
        pts = cand

    def draw(m, g):
        # replacement draws for duplicate rows keep the target law: a fresh
        # accepted point of the thinned process
        out = np.empty((m, w.dim))
        got = 0
        while got < m:
            c = w.sample_uniform(max(4 * (m - got), 8), g)
            ok = c[g.random(c.shape[0]) * kappa.sup_bound < kappa(c)]
            take = min(m - got, ok.shape[0])
            out[got : got + take] = ok[:take]
            got += take
        return out

    if pts.shape[0] > 1:
        pts = _resample_duplicates(pts, draw, gen)
    return PointSet(pts, _checked=True)


def sample_binomial(n: int, kappa: DensityField, rng: RngStream) -> PointSet:
    """Exactly n i.i.d. points with density kappa (rejection sampling)."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ParameterError("binomial sample size must be an integer >= 1")
    if not kappa.sup_bound > 0:
        raise ParameterError("density sup_bound must be > 0 for rejection")
    gen = rng.generator()
    w = kappa.window

    def draw(m, g):
        out = np.empty((m, w.dim))
        got = 0
        while got < m:
            c = w.sample_uniform(max(2 * (m - got), 8), g)
            ok = c[g.random(c.shape[0]) * kappa.sup_bound < kappa(c)]
            take = min(m - got, ok.shape[0])
            out[got : got + take] = ok[:take]
            got += take
        return out

    pts = draw(n, gen)
    if n > 1:
        pts = _resample_duplicates(pts, draw, gen)
    return PointSet(pts, _checked=True)


@dataclass(frozen=True)
class MarkLaw:
    """Mark distribution: 'uniform-time', 'constant-radius', or 'iid-radius'."""

    kind: str
    radius: float = None
    low: float = None
    high: float = None

    def __post_init__(self):
        if self.kind == "uniform-time":
            return
        if self.kind == "constant-radius":
            if self.radius is None or not np.isfinite(self.radius) or self.radius < 0:
                raise ParameterError("constant-radius law needs a finite radius >= 0")
            return
        if self.kind == "iid-radius":
            ok = (
                self.low is not None
                and self.high is not None
                and np.isfinite(self.low)
                and np.isfinite(self.high)
                and 0 <= self.low <= self.high
            )
            if not ok:
                raise ParameterError(
                    "iid-radius law needs finite bounds 0 <= low <= high"
                )
            return
        raise ParameterError(f"unknown mark law {self.kind!r}")


def attach_marks(X: PointSet, law: MarkLaw, rng: RngStream) -> PointSet:
    """Return a copy of X with the mark component of `law` (re)populated."""
    gen = rng.generator()
    n = len(X)
    if law.kind == "uniform-time":
        t = gen.random(n)
        for _ in range(64):
            _, first = np.unique(t, return_index=True)
            if first.size == n:
                break
            dup = np.setdiff1d(np.arange(n), first)
            t[dup] = gen.random(dup.size)
        return PointSet(X.points, t, X.radii, _checked=True)
    if law.kind == "constant-radius":
        return PointSet(X.points, X.times, np.full(n, float(law.radius)), _checked=True)
    r = gen.uniform(law.low, law.high, size=n)
    return PointSet(X.points, X.times, r, _checked=True)


def rescale(X: PointSet, lam: float) -> PointSet:
    """Dilate coordinates by lam**(1/d); marks are unchanged."""
    if not lam > 0:
        raise ParameterError("rescale factor lam must be > 0")
    a = lam ** (1.0 / X.dim)
    return PointSet(X.points * a, X.times, X.radii, _checked=True)


# ---------------------------------------------------------------------------
# CSV serialization: header `dim=<d>` (plus `,marks=...` when marks present),
# one row per point, 17-significant-digit decimals; round-trips bit-exactly.
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return "%.17g" % x


def pointset_to_csv(X: PointSet) -> str:
    marks = []
    if X.times is not None:
        marks.append("time")
    if X.radii is not None:
        marks.append("radius")
    header = f"dim={X.dim}"
    if marks:
        header += ",marks=" + "+".join(marks)
    lines = [header]
    for i in range(len(X)):
        row = [_fmt(v) for v in X.points[i]]
        if X.times is not None:
            row.append(_fmt(X.times[i]))
        if X.radii is not None:
            row.append(_fmt(X.radii[i]))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def pointset_from_csv(text: str) -> PointSet:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("dim="):
        raise ParseError("expected header starting with dim=<d>", 1)
    head = lines[0].split(",")
    try:
        dim = int(head[0][4:])
    except ValueError:
        raise ParseError(f"bad dimension in header {lines[0]!r}", 1) from None
    marks = []
    for extra in head[1:]:
        if extra.startswith("marks="):
            marks = extra[6:].split("+")
        else:
            raise ParseError(f"unknown header field {extra!r}", 1)
    ncol = dim + len(marks)
    rows = []
    for ln, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != ncol:
            raise ParseError(f"expected {ncol} columns, found {len(parts)}", ln)
        try:
            rows.append([float(p) for p in parts])
        except ValueError:
            raise ParseError(f"non-numeric value in {line!r}", ln) from None
    arr = np.asarray(rows, dtype=float).reshape(len(rows), ncol)
    pts = arr[:, :dim]
    times = radii = None
    col = dim
    if "time" in marks:
        times = arr[:, col]
        col += 1
    if "radius" in marks:
        radii = arr[:, col]
    return PointSet(pts, times, radii)


def write_pointset(X: PointSet, path) -> None:
    with io.open(path, "w", newline="\n") as fh:
        fh.write(pointset_to_csv(X))


def read_pointset(path) -> PointSet:
    with io.open(path, "r") as fh:
        return pointset_from_csv(fh.read())
