"""Observation windows and probability densities on them.

Windows are the compact convex sets the point processes live on: axis-aligned
boxes (including unit cubes) and Euclidean balls, in dimension 1 to 3.
A DensityField is a probability density on a window together with the upper
and lower bounds needed for rejection/thinning.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_UNIT_BALL_VOLUME = {1: 2.0, 2: math.pi, 3: 4.0 * math.pi / 3.0}


def unit_ball_volume(dim: int) -> float:
    if dim not in _UNIT_BALL_VOLUME:
        raise ParameterError(f"dimension {dim} unsupported (need 1 <= d <= 3)")
    return _UNIT_BALL_VOLUME[dim]


@dataclass(frozen=True)
class Window:
    """Compact convex window: 'box' with bounds, or 'ball' with center/radius.

    bounds: (d, 2) array of [low, high] per axis (box kind).
    """

    kind: str
    bounds: np.ndarray = None
    center: np.ndarray = None
    radius: float = None

    def __post_init__(self):
        if self.kind == "box":
            b = np.atleast_2d(np.asarray(self.bounds, dtype=float))
            if b.shape[1] != 2 or not np.all(b[:, 1] > b[:, 0]):
                raise ParameterError("box window needs low < high on every axis")
            object.__setattr__(self, "bounds", b)
        elif self.kind == "ball":
            c = np.asarray(self.center, dtype=float).ravel()
            if not (self.radius and self.radius > 0):
                raise ParameterError("ball window needs radius > 0")
            if c.size < 1 or c.size > 3:
                raise ParameterError("ball window supports 1 <= d <= 3")
            object.__setattr__(self, "center", c)
        else:
            raise ParameterError(f"unknown window kind {self.kind!r}")
        if self.dim < 1 or self.dim > 3:
            raise ParameterError("windows support 1 <= d <= 3")

    @property
    def dim(self) -> int:
        return self.bounds.shape[0] if self.kind == "box" else self.center.size

    def volume(self) -> float:
        if self.kind == "box":
            return float(np.prod(self.bounds[:, 1] - self.bounds[:, 0]))
        return unit_ball_volume(self.dim) * self.radius ** self.dim

    def bounding_box(self) -> np.ndarray:
        if self.kind == "box":
            return self.bounds
        lo = self.center - self.radius
        hi = self.center + self.radius
        return np.stack([lo, hi], axis=1)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        if self.kind == "box":
            return np.all(
                (pts >= self.bounds[:, 0]) & (pts <= self.bounds[:, 1]), axis=1
            )
        return np.sum((pts - self.center) ** 2, axis=1) <= self.radius**2

    def sample_uniform(self, n: int, gen: np.random.Generator) -> np.ndarray:
        """n i.i.d. uniform points; rejection from the bounding box for balls."""
        if self.kind == "box":
            lo, hi = self.bounds[:, 0], self.bounds[:, 1]
            return gen.uniform(lo, hi, size=(n, self.dim))
        out = np.empty((n, self.dim))
        got = 0
        bb = self.bounding_box()
        while got < n:
            m = max(16, int(1.5 * (n - got) / max(self._ball_fill(), 1e-3)))
            cand = gen.uniform(bb[:, 0], bb[:, 1], size=(m, self.dim))
            keep = cand[self.contains(cand)]
            take = min(n - got, keep.shape[0])
            out[got : got + take] = keep[:take]
            got += take
        return out

    def _ball_fill(self) -> float:
        return unit_ball_volume(self.dim) / 2.0**self.dim


def unit_cube(dim: int) -> Window:
    return Window("box", bounds=np.array([[0.0, 1.0]] * dim))


def centered_box(half_width: float, dim: int) -> Window:
    """[-L, L]^d simulation window used by the infinite-volume estimators."""
    return Window("box", bounds=np.array([[-half_width, half_width]] * dim))


class UniformDensity:
    def __init__(self, window: Window):
        self._v = window.volume()

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.full(np.atleast_2d(pts).shape[0], 1.0 / self._v)


class LinearDensity:
    """kappa(x) = (1 + x1) / Z on the unit cube, bounded away from 0."""

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return (1.0 + pts[:, 0]) / 1.5


class GaussianBumpDensity:
    """Truncated isotropic Gaussian bump on the unit cube (s = 1/2)."""

    SIGMA = 0.5

    def __init__(self, dim: int):
        s = self.SIGMA
        # one-axis normalizer: integral of exp(-(x-1/2)^2 / (2 s^2)) over [0,1]
        z1 = s * math.sqrt(2 * math.pi) * (
            _norm_cdf(0.5 / s) - _norm_cdf(-0.5 / s)
        )
        self._z = z1**dim
        self._dim = dim

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        q = np.sum((pts - 0.5) ** 2, axis=1)
        return np.exp(-q / (2 * self.SIGMA**2)) / self._z


def _norm_cdf(x: float) -> float:
    return 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))


@dataclass(frozen=True)
class DensityField:
    """Probability density kappa on a window, with bounds for thinning."""

    window: Window
    evaluate: object  # callable (n, d) -> (n,)
    sup_bound: float
    inf_bound: float = 0.0
    name: str = "custom"

    def __post_init__(self):
        if self.sup_bound < 0 or self.inf_bound < 0:
            raise ParameterError("density bounds must be nonnegative")

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.asarray(self.evaluate(pts), dtype=float)

    @property
    def dim(self) -> int:
        return self.window.dim


_BUILTIN_DENSITIES = ("uniform", "linear", "gaussian-bump")


def make_density(name: str, dim: int, window: Window | None = None) -> DensityField:
    """Built-in densities; 'linear' and 'gaussian-bump' live on the unit cube."""
    if window is None:
        window = unit_cube(dim)
    if name == "uniform":
        v = window.volume()
        return DensityField(window, UniformDensity(window), 1.0 / v, 1.0 / v, name)
    if name == "linear":
        if window.kind != "box" or not np.allclose(window.bounds, unit_cube(dim).bounds):
            raise ParameterError("linear density is defined on the unit cube")
        return DensityField(window, LinearDensity(), 4.0 / 3.0, 2.0 / 3.0, name)
    if name == "gaussian-bump":
        if window.kind != "box" or not np.allclose(window.bounds, unit_cube(dim).bounds):
            raise ParameterError("gaussian-bump density is defined on the unit cube")
        f = GaussianBumpDensity(dim)
        sup = float(f(np.full((1, dim), 0.5))[0])
        inf = float(f(np.zeros((1, dim)))[0])
        return DensityField(window, f, sup, inf, name)
    raise ParameterError(
        f"unknown density {name!r}; built-ins: {', '.join(_BUILTIN_DENSITIES)}"
    )
