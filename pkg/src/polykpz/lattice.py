"""Simple random walk kernels on Z^d.

Exact heat kernels by iterated nearest-neighbour averaging, random walk
bridge probabilities, the parity relation, and the Gaussian local-limit
approximation used as a diagnostic against the exact kernel.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels, resources


@dataclass(frozen=True)
class SpaceTimePoint:
    t: int
    x: tuple

    def __post_init__(self):
        if self.t < 0:
            raise ValueError(f"time must be >= 0, got {self.t}")
        object.__setattr__(self, "x", tuple(int(c) for c in self.x))

    @property
    def d(self):
        return len(self.x)


class BoxField:
    """Dense real field over a finite box in Z^d.

    lo is the lower corner; values is a dense array indexed by offset from
    lo.  Reads outside the box return 0.
    """

    __slots__ = ("lo", "values")

    def __init__(self, lo, values):
        self.lo = tuple(int(c) for c in lo)
        self.values = np.asarray(values, dtype=np.float64)
        if len(self.lo) != self.values.ndim:
            raise ValueError("lo and values dimensions disagree")

    @classmethod
    def zeros(cls, lo, shape):
        return cls(lo, np.zeros(tuple(shape)))

    @property
    def d(self):
        return self.values.ndim

    @property
    def shape(self):
        return self.values.shape

    @property
    def hi(self):
        # inclusive upper corner
        return tuple(l + s - 1 for l, s in zip(self.lo, self.shape))

    def index(self, x):
        idx = tuple(int(c) - l for c, l in zip(x, self.lo))
        if any(i < 0 or i >= s for i, s in zip(idx, self.shape)):
            return None
        return idx

    def get(self, x):
        idx = self.index(x)
        return 0.0 if idx is None else float(self.values[idx])

    def set(self, x, v):
        idx = self.index(x)
        if idx is None:
            raise IndexError(f"{x} outside box lo={self.lo} shape={self.shape}")
        self.values[idx] = v

    def sum(self):
        return float(self.values.sum())

    def restrict(self, lo, shape):
        idx = tuple(slice(l - sl, l - sl + s) for l, sl, s in zip(lo, self.lo, shape))
        if any(s.start < 0 or s.stop > n for s, n in zip(idx, self.shape)):
            raise IndexError("restriction exceeds the box")
        return BoxField(lo, self.values[idx].copy())

    def sites(self):
        """Iterate (coordinate tuple, value)."""
        for idx in np.ndindex(*self.shape):
            yield tuple(i + l for i, l in zip(idx, self.lo)), float(self.values[idx])

    def coords(self, axis):
        return np.arange(self.lo[axis], self.lo[axis] + self.shape[axis])


def box_around(center, radius, d=None):
    """(lo, shape) of the cube of given radius around a center point."""
    if d is None:
        d = len(center)
    lo = tuple(int(c) - radius for c in center)
    shape = (2 * radius + 1,) * d
    return lo, shape


def dilate(lo, shape, r):
    return tuple(l - r for l in lo), tuple(s + 2 * r for s in shape)


def intersect(lo1, shape1, lo2, shape2):
    lo = tuple(max(a, b) for a, b in zip(lo1, lo2))
    hi = tuple(min(a + s - 1, b + t - 1) for a, s, b, t in zip(lo1, shape1, lo2, shape2))
    if any(h < l for l, h in zip(lo, hi)):
        raise ValueError("boxes do not intersect")
    return lo, tuple(h - l + 1 for l, h in zip(lo, hi))


def parity_connected(a, b):
    """True iff a walk can go from a to b: enough time, matching parity."""
    if a.t > b.t:
        raise ValueError(f"need a.t <= b.t, got {a.t} > {b.t}")
    steps = b.t - a.t
    dist = sum(abs(p - q) for p, q in zip(a.x, b.x))
    return steps >= dist and (steps - dist) % 2 == 0


_kernel_cache = {}


def heat_kernel(d, n, cell_budget=None):
    """Exact n-step kernel p_n as a BoxField, via n averaging sweeps."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    key = (d, n)
    cached = _kernel_cache.get(key)
    if cached is not None:
        return cached
    resources.check_cells((2 * n + 1) ** d, cell_budget, what=f"heat kernel d={d} n={n}")
    lo, shape = box_around((0,) * d, n, d)
    p = np.zeros(shape)
    p[(n,) * d] = 1.0
    buf = np.empty_like(p)
    for _ in range(n):
        kernels.sweep(p, out=buf)
        p, buf = buf, p
    field = BoxField(lo, p)
    field.values.flags.writeable = False
    _kernel_cache[key] = field
    return field


def walk_prob(d, n, x):
    """p_n(x) = P(X_n = x)."""
    return heat_kernel(d, n).get(x)


def bridge_prob(a, b, k, z):
    """Transition probability of the walk bridge from a to b, at time k, site z.

    p_{k-s}(z-x) p_{t-k}(y-z) / p_{t-s}(y-x); endpoints are pinned.
    """
    if not (a.t <= k <= b.t):
        raise ValueError(f"need {a.t} <= k <= {b.t}")
    if not parity_connected(a, b):
        raise ValueError(f"{a} and {b} are not connected")
    d = a.d
    denom = walk_prob(d, b.t - a.t, tuple(q - p for p, q in zip(a.x, b.x)))
    if denom == 0.0:
        raise ValueError("bridge undefined: endpoint transition has probability 0")
    num1 = walk_prob(d, k - a.t, tuple(c - p for p, c in zip(a.x, z)))
    if num1 == 0.0:
        return 0.0
    num2 = walk_prob(d, b.t - k, tuple(q - c for c, q in zip(z, b.x)))
    return num1 * num2 / denom


def lclt_approx(d, n, x):
    """Gaussian local-limit form 2 (d/(2 pi n))^{d/2} exp(-d|x|^2/(2n)).

    Zero off the parity-allowed sublattice.  Diagnostic companion to the
    exact kernel; the prefactor 2 accounts for the parity restriction.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    origin = SpaceTimePoint(0, (0,) * d)
    if not parity_connected(origin, SpaceTimePoint(n, tuple(x))):
        return 0.0
    norm2 = sum(c * c for c in x)
    return 2.0 * (d / (2.0 * math.pi * n)) ** (d / 2.0) * math.exp(-d * norm2 / (2.0 * n))
