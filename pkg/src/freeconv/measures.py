"""Probability measures on the real line.

Each measure knows its Stieltjes transform ``m(z) = int mu(dx) / (x - z)``
and the first two derivatives, its CDF, and (for the continuous laws) its
density and quantile function.  Measures are immutable and hashable, so they
can be used as cache keys and shared between threads.

Closed-form transforms use the product ``sqrt(z - a) * sqrt(z - b)`` of two
principal square roots.  That product has its branch cut on ``[a, b]`` only
and behaves like ``z`` at infinity, which is the branch that keeps ``m``
mapping the upper half-plane into itself.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    InvalidParameter,
    NonFiniteValue,
    NonPositiveImaginaryPart,
    UnsupportedMeasure,
    UnsupportedOrder,
)

__all__ = [
    "MeasureSpec",
    "Atoms",
    "Semicircle",
    "MarchenkoPastur",
    "Cauchy",
    "AffineImage",
    "Empirical",
    "dirac",
    "scale",
    "shift",
    "stieltjes",
    "stieltjes_derivative",
    "cdf",
    "levy_distance",
    "quantize",
    "closed_form_density",
    "eigenvalue_grid",
]

MAX_AFFINE_DEPTH = 8
WEIGHT_SUM_TOL = 1e-12
# tail mass cut off when bounding heavy-tailed supports
TAIL_MASS = 1e-6
LEVY_GRID_POINTS = 4096


def _branch_sqrt(z, a, b):
    return cmath.sqrt(z - a) * cmath.sqrt(z - b)


@dataclass(frozen=True)
class MeasureSpec:
    """Base class.  Subclasses implement the private evaluation hooks."""

    def _transform(self, z: complex, order: int) -> complex:
        raise NotImplementedError

    def _cdf(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _density(self, x: np.ndarray):
        return None

    def _quantile(self, p: np.ndarray) -> np.ndarray:
        raise UnsupportedMeasure(f"{type(self).__name__} has no quantile function")

    def support(self) -> tuple[float, float]:
        """Effective support ``(lo, hi)``; heavy tails are cut at TAIL_MASS."""
        raise NotImplementedError

    def breakpoints(self) -> np.ndarray:
        """Locations of CDF jumps."""
        return np.empty(0)

    def radius(self) -> float:
        """Length scale of the measure around the origin.

        Equals ``max |x|`` over the support for compactly supported laws; for
        the Cauchy law it is the scale ``gamma`` (the tails do not affect how
        fast ``m'`` decays away from the axis).
        """
        lo, hi = self.support()
        return max(abs(lo), abs(hi))

    @property
    def is_atomic(self) -> bool:
        return False

    def depth(self) -> int:
        return 0


@dataclass(frozen=True)
class _Discrete(MeasureSpec):
    @cached_property
    def _x(self):
        return np.asarray(self.positions, dtype=float)

    @cached_property
    def _w(self):
        return np.asarray(self.weights, dtype=float)

    @cached_property
    def _cw(self):
        return np.cumsum(self._w)

    def _transform(self, z, order):
        d = self._x - z
        if order == 0:
            return complex(np.sum(self._w / d))
        return complex(math.factorial(order) * np.sum(self._w / d ** (order + 1)))

    def _cdf(self, x):
        idx = np.searchsorted(self._x, x, side="right")
        out = np.where(idx > 0, self._cw[np.maximum(idx - 1, 0)], 0.0)
        return np.minimum(out, 1.0)

    def _quantile(self, p):
        # generalized inverse inf{x : F(x) >= p}
        idx = np.searchsorted(self._cw, p, side="left")
        return self._x[np.minimum(idx, len(self._x) - 1)]

    def support(self):
        return float(self._x[0]), float(self._x[-1])

    def breakpoints(self):
        return self._x

    @property
    def is_atomic(self):
        return True

    def mean(self) -> float:
        return float(np.dot(self._w, self._x))

    def variance(self) -> float:
        mu = self.mean()
        return float(np.dot(self._w, (self._x - mu) ** 2))


@dataclass(frozen=True)
class Atoms(_Discrete):
    """Finite atomic measure ``sum_k w_k delta_{x_k}``.

    Positions must be strictly increasing and weights positive with unit sum.
    Use :meth:`from_pairs` to build one from unsorted ``(position, weight)``
    pairs.
    """

    positions: tuple[float, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "positions", tuple(float(x) for x in self.positions))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if not self.positions or len(self.positions) != len(self.weights):
            raise InvalidParameter("atoms need equally many positions and weights, at least one")
        if not all(math.isfinite(x) for x in self.positions):
            raise InvalidParameter("atom positions must be finite")
        if any(b <= a for a, b in zip(self.positions, self.positions[1:])):
            raise InvalidParameter("atom positions must be strictly increasing")
        if any(not (w > 0) for w in self.weights):
            raise InvalidParameter("atom weights must be strictly positive")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise InvalidParameter(f"atom weights sum to {total!r}, not 1")

    @classmethod
    def from_pairs(cls, pairs) -> "Atoms":
        pairs = sorted((float(x), float(w)) for x, w in pairs)
        return cls(tuple(x for x, _ in pairs), tuple(w for _, w in pairs))


@dataclass(frozen=True)
class Empirical(_Discrete):
    """Uniform measure on a sample; ``source`` only records where it came from."""

    samples: tuple[float, ...]
    source: str | None = field(default=None, compare=False)

    def __post_init__(self):
        s = tuple(sorted(float(x) for x in self.samples))
        if not s:
            raise InvalidParameter("empirical measure needs at least one sample")
        if not all(math.isfinite(x) for x in s):
            raise InvalidParameter("samples must be finite")
        object.__setattr__(self, "samples", s)

    @cached_property
    def _unique(self):
        return np.unique(np.asarray(self.samples), return_counts=True)

    @property
    def positions(self):
        return self._unique[0]

    @property
    def weights(self):
        return self._unique[1] / len(self.samples)


def dirac(x: float = 0.0) -> Atoms:
    return Atoms((x,), (1.0,))


@dataclass(frozen=True)
class Semicircle(MeasureSpec):
    """Centered semicircle law with the given variance, support ``[-2s, 2s]``."""

    variance: float = 1.0

    def __post_init__(self):
        if not (self.variance > 0 and math.isfinite(self.variance)):
            raise InvalidParameter("semicircle variance must be positive")

    @cached_property
    def _edge(self):
        return 2.0 * math.sqrt(self.variance)

    def _transform(self, z, order):
        a = self._edge
        root = _branch_sqrt(z, a, -a)
        # -2/(z + root) equals (-z + root)/(2v) without the cancellation at large |z|
        m = -2.0 / (z + root)
        if order == 0:
            return m
        dm = -m / root
        if order == 1:
            return dm
        return -(dm * root - m * z / root) / (root * root)

    def _cdf(self, x):
        u = np.clip(np.asarray(x, dtype=float) / math.sqrt(self.variance), -2.0, 2.0)
        return 0.5 + u * np.sqrt(4.0 - u * u) / (4.0 * math.pi) + np.arcsin(u / 2.0) / math.pi

    def _density(self, x):
        x = np.asarray(x, dtype=float)
        inside = np.clip(4.0 * self.variance - x * x, 0.0, None)
        return np.sqrt(inside) / (2.0 * math.pi * self.variance)

    def _quantile(self, p):
        return _bisect_quantile(self._cdf, -self._edge, self._edge, p)

    def support(self):
        return -self._edge, self._edge


@dataclass(frozen=True)
class MarchenkoPastur(MeasureSpec):
    """Free Poisson law with rate ``lam >= 1`` and unit jump size.

    Density ``sqrt(4x - (1 - lam + x)^2) / (2 pi x)`` on
    ``[(1 - sqrt(lam))^2, (1 + sqrt(lam))^2]``.
    """

    lam: float = 1.0

    def __post_init__(self):
        if not (self.lam >= 1.0 and math.isfinite(self.lam)):
            raise InvalidParameter("Marchenko-Pastur parameter must be >= 1")

    @cached_property
    def _edges(self):
        r = math.sqrt(self.lam)
        return (1.0 - r) ** 2, (1.0 + r) ** 2

    def _transform(self, z, order):
        lo, hi = self._edges
        lam = self.lam
        root = _branch_sqrt(z, lo, hi)
        # m solves z m^2 + (z + 1 - lam) m + 1 = 0
        m = -2.0 / (z + 1.0 - lam + root)
        if order == 0:
            return m
        dm = -m * (m + 1.0) / root
        if order == 1:
            return dm
        droot = (z - 1.0 - lam) / root
        return -((2.0 * m + 1.0) * dm * root - m * (m + 1.0) * droot) / (root * root)

    def _cdf(self, x):
        # x = c - r cos(theta) turns the integral into elementary functions
        lam = self.lam
        c, r = 1.0 + lam, 2.0 * math.sqrt(lam)
        lo, hi = self._edges
        x = np.asarray(x, dtype=float)
        xc = np.clip(x, lo, hi)
        theta = np.arccos(np.clip((c - xc) / r, -1.0, 1.0))
        out = r * np.sin(theta) + c * theta
        if lam > 1.0:
            k = (1.0 + math.sqrt(lam)) / abs(1.0 - math.sqrt(lam))
            out = out - 2.0 * (lam - 1.0) * np.arctan2(k * np.sin(theta / 2), np.cos(theta / 2))
        out = np.clip(out / (2.0 * math.pi), 0.0, 1.0)
        return np.where(x <= lo, 0.0, np.where(x >= hi, 1.0, out))

    def _density(self, x):
        x = np.asarray(x, dtype=float)
        lo, hi = self._edges
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.sqrt(np.clip(4.0 * x - (1.0 - self.lam + x) ** 2, 0.0, None)) / (2.0 * math.pi * x)
        return np.where((x > lo) & (x < hi), val, 0.0)

    def _quantile(self, p):
        return _bisect_quantile(self._cdf, *self._edges, p)

    def support(self):
        return self._edges


@dataclass(frozen=True)
class Cauchy(MeasureSpec):
    """Centered Cauchy law with scale ``gamma``; ``m(z) = -1/(z + i gamma)``."""

    gamma: float = 1.0

    def __post_init__(self):
        if not (self.gamma > 0 and math.isfinite(self.gamma)):
            raise InvalidParameter("Cauchy scale must be positive")

    def _transform(self, z, order):
        w = z + 1j * self.gamma
        if order == 0:
            return -1.0 / w
        if order == 1:
            return 1.0 / (w * w)
        return -2.0 / (w * w * w)

    def _cdf(self, x):
        return 0.5 + np.arctan(np.asarray(x, dtype=float) / self.gamma) / math.pi

    def _density(self, x):
        x = np.asarray(x, dtype=float)
        return self.gamma / (math.pi * (x * x + self.gamma**2))

    def _quantile(self, p):
        return self.gamma * np.tan(math.pi * (np.asarray(p, dtype=float) - 0.5))

    def support(self):
        q = self._quantile(np.array([TAIL_MASS, 1.0 - TAIL_MASS]))
        return float(q[0]), float(q[1])

    def radius(self):
        return self.gamma


@dataclass(frozen=True)
class AffineImage(MeasureSpec):
    """Pushforward of ``inner`` under ``x -> scale * x + shift``."""

    inner: MeasureSpec
    scale: float = 1.0
    shift: float = 0.0

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)) or not math.isfinite(self.shift):
            raise InvalidParameter("affine scale must be positive and shift finite")
        if self.depth() > MAX_AFFINE_DEPTH:
            raise InvalidParameter(f"affine nesting deeper than {MAX_AFFINE_DEPTH}")

    def depth(self):
        return 1 + self.inner.depth()

    def _transform(self, z, order):
        a = self.scale
        return self.inner._transform((z - self.shift) / a, order) / a ** (order + 1)

    def _cdf(self, x):
        return self.inner._cdf((np.asarray(x, dtype=float) - self.shift) / self.scale)

    def _density(self, x):
        d = self.inner._density((np.asarray(x, dtype=float) - self.shift) / self.scale)
        return None if d is None else d / self.scale

    def _quantile(self, p):
        return self.scale * self.inner._quantile(p) + self.shift

    def support(self):
        lo, hi = self.inner.support()
        return self.scale * lo + self.shift, self.scale * hi + self.shift

    def breakpoints(self):
        return self.scale * np.asarray(self.inner.breakpoints()) + self.shift

    def radius(self):
        return self.scale * self.inner.radius() + abs(self.shift)

    @property
    def is_atomic(self):
        return self.inner.is_atomic


def scale(m: MeasureSpec, a: float) -> AffineImage:
    return AffineImage(m, float(a), 0.0)


def shift(m: MeasureSpec, b: float) -> AffineImage:
    return AffineImage(m, 1.0, float(b))


def _bisect_quantile(F, lo, hi, p, iters=80):
    p = np.asarray(p, dtype=float)
    a = np.full(p.shape, float(lo))
    b = np.full(p.shape, float(hi))
    for _ in range(iters):
        mid = 0.5 * (a + b)
        below = F(mid) < p
        a = np.where(below, mid, a)
        b = np.where(below, b, mid)
    return 0.5 * (a + b)


def _check_upper(z) -> complex:
    z = complex(z)
    if not (z.imag > 0):
        raise NonPositiveImaginaryPart(f"need Im z > 0, got z = {z!r}")
    return z


def _finite(value: complex, what: str) -> complex:
    if not (math.isfinite(value.real) and math.isfinite(value.imag)):
        raise NonFiniteValue(f"{what} is not finite")
    return value


def stieltjes(m: MeasureSpec, z) -> complex:
    """Stieltjes transform ``int m(dx) / (x - z)`` for ``Im z > 0``.

    >>> stieltjes(dirac(0.0), 1j)
    1j
    """
    z = _check_upper(z)
    return _finite(m._transform(z, 0), "Stieltjes transform")


def stieltjes_derivative(m: MeasureSpec, z, order: int = 1) -> complex:
    """First or second complex derivative of the Stieltjes transform."""
    if order not in (1, 2):
        raise UnsupportedOrder(f"derivative order must be 1 or 2, got {order!r}")
    z = _check_upper(z)
    return _finite(m._transform(z, order), "Stieltjes derivative")


def cdf(m: MeasureSpec, x):
    """Right-continuous CDF; scalar in, float out, arrays elementwise."""
    out = m._cdf(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def closed_form_density(m: MeasureSpec, x):
    """Density at ``x``, or None for atomic and empirical measures."""
    out = m._density(np.asarray(x, dtype=float))
    if out is None:
        return None
    return float(out) if np.ndim(out) == 0 else out


def quantize(m: MeasureSpec, n: int) -> Atoms:
    """Replace a continuous law by ``n`` equal atoms at its midpoint quantiles."""
    if m.is_atomic:
        raise UnsupportedMeasure("quantize needs a measure with continuous CDF")
    n = int(n)
    if n < 2:
        raise InvalidParameter("quantize needs n >= 2")
    p = (np.arange(1, n + 1) - 0.5) / n
    x = m._quantile(p)
    return Atoms(tuple(x), (1.0 / n,) * n)


def eigenvalue_grid(m: MeasureSpec, n: int) -> np.ndarray:
    """``n`` deterministic points whose empirical law approximates ``m``.

    Midpoint quantiles ``F^{-1}((k - 1/2)/n)``; for an atomic law this puts
    ``round(n * w)`` points on each atom.
    """
    p = (np.arange(1, int(n) + 1) - 0.5) / n
    return np.asarray(m._quantile(p), dtype=float)


def levy_distance(m1: MeasureSpec, m2: MeasureSpec, tol: float = 1e-9) -> float:
    """Levy distance by bisection on the slack ``s``.

    A candidate ``s`` is feasible when ``F2(x - s) - s <= F1(x) <= F2(x + s) + s``
    holds, together with the same condition with the roles swapped, at every
    CDF breakpoint, every breakpoint shifted by ``+-s`` and a uniform grid over
    both effective supports.  For atomic measures the check set contains every
    point where either side of the inequalities jumps, so the answer is exact
    up to ``tol``.
    """
    if m1 == m2:
        return 0.0
    lo = min(m1.support()[0], m2.support()[0])
    hi = max(m1.support()[1], m2.support()[1])
    pad = 1e-9 * max(1.0, hi - lo)
    grid = np.linspace(lo - pad, hi + pad, LEVY_GRID_POINTS)
    brk = np.concatenate([np.asarray(m1.breakpoints()), np.asarray(m2.breakpoints())])
    F1, F2 = m1._cdf, m2._cdf

    def feasible(s):
        x = np.concatenate([grid, brk, brk - s, brk + s])
        f1, f2 = F1(x), F2(x)
        return bool(
            np.all(F2(x - s) - s <= f1)
            and np.all(f1 <= F2(x + s) + s)
            and np.all(F1(x - s) - s <= f2)
            and np.all(f2 <= F1(x + s) + s)
        )

    if feasible(0.0):
        return 0.0
    a, b = 0.0, 1.0
    while b - a > tol:
        mid = 0.5 * (a + b)
        if feasible(mid):
            b = mid
        else:
            a = mid
    return b
