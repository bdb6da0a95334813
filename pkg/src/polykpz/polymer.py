"""Partition functions of the directed polymer on a shared environment.

All variants (forward point-to-plane, all-starting-points field, reverse
plane-to-point, pinned point-to-point, restricted/functional weights) read
the same keyed disorder field, so shifted and windowed quantities are
consistent by construction.  Sweeps are dense slab recursions; a box given
to an op is an explicit confinement (absorbing outside), never a silent
truncation.

Conventions, locked by the enumeration oracle tests:
  - forward Z over horizon n from (s, x) weights times s+1 .. s+n; the
    environment at the starting point never enters.
  - the pinned partition function excludes the environment at both
    endpoint times and normalises by one lambda per weighted time, so its
    mean is 1.
  - alpha_n uses environment horizon n-1 with the walk evaluated at time n.
  - horizon 0 gives Z = 1 (empty product).
"""

import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np

from . import env as env_mod
from . import kernels, resources
from .lattice import BoxField, SpaceTimePoint, box_around, dilate, heat_kernel, intersect, parity_connected

_OVERFLOW_MSG = "partition sweep overflowed float range; reduce beta or horizon"


@dataclass(frozen=True)
class PolymerSystem:
    """One environment realization: spec + seed + space-time origin shift.

    The origin shift implements composition with the environment shift: all
    reads at local (k, y) hit the absolute key (origin.t + k, origin.x + y),
    so a shifted system computes Z composed with the shift exactly.
    """

    spec: env_mod.EnvSpec
    seed: int
    d: int
    origin: SpaceTimePoint = None

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.origin is None:
            object.__setattr__(self, "origin", SpaceTimePoint(0, (0,) * self.d))
        if self.origin.d != self.d:
            raise ValueError("origin dimension mismatch")

    def shifted(self, k, x):
        """System reading the environment shifted by (k, x)."""
        new_origin = SpaceTimePoint(self.origin.t + k, tuple(a + b for a, b in zip(self.origin.x, x)))
        return replace(self, origin=new_origin)

    def _abs_lo(self, lo):
        return tuple(l + c for l, c in zip(lo, self.origin.x))

    def weights(self, t, lo, shape, out=None):
        """Weight slab w = exp(beta*omega - lambda) at local time t."""
        return env_mod.weight_field(self.spec, self.seed, self.origin.t + t, self._abs_lo(lo), shape, out=out)

    def noises(self, t, lo, shape):
        """Slab of E = w - 1 at local time t."""
        e = self.weights(t, lo, shape)
        e -= 1.0
        return e

    def omegas(self, t, lo, shape):
        return env_mod.omega_field(self.spec, self.seed, self.origin.t + t, self._abs_lo(lo), shape)


@dataclass(frozen=True)
class TimeInterval:
    """Integer time interval with explicit endpoint inclusion."""

    lo: int
    hi: int
    lo_closed: bool = True
    hi_closed: bool = False

    def times(self):
        a = self.lo if self.lo_closed else self.lo + 1
        b = self.hi if self.hi_closed else self.hi - 1
        return range(a, b + 1)

    def __len__(self):
        return max(0, len(self.times()))


@dataclass
class PathConstraint:
    """Trajectory constraint as per-time multiplicative site masks.

    confine: optional (lo, shape) box every step must stay in.
    masks: local time -> BoxField multiplied into the slab at that time
    (0/1 for events, bounded reals for functional weights such as g(X_0)).
    """

    confine: tuple = None
    masks: dict = field(default_factory=dict)

    @classmethod
    def pin(cls, t, x, d):
        m = BoxField.zeros(tuple(x), (1,) * d)
        m.values[(0,) * d] = 1.0
        return cls(masks={t: m})

    @classmethod
    def confined(cls, lo, shape):
        return cls(confine=(tuple(lo), tuple(shape)))

    def mask_at(self, t):
        return self.masks.get(t)


def _apply_mask(slab, lo, mask_field):
    """Multiply a mask BoxField into slab (zero where the mask is absent)."""
    out = np.zeros_like(slab)
    shape = slab.shape
    try:
        mlo, mshape = intersect(lo, shape, mask_field.lo, mask_field.shape)
    except ValueError:
        return out
    sl_s = tuple(slice(a - b, a - b + s) for a, b, s in zip(mlo, lo, mshape))
    sl_m = tuple(slice(a - b, a - b + s) for a, b, s in zip(mlo, mask_field.lo, mshape))
    out[sl_s] = slab[sl_s] * mask_field.values[sl_m]
    return out


def _sweep_box(sys, center_lo, center_shape, reach, radius, constraint, cell_budget, slabs=1):
    """Choose the sweep box: support dilated by reach, capped by radius/confinement."""
    r = reach if radius is None else min(reach, radius)
    lo, shape = dilate(center_lo, center_shape, r)
    if constraint is not None and constraint.confine is not None:
        lo, shape = intersect(lo, shape, *constraint.confine)
    cells = int(np.prod(shape))
    resources.check_cells(cells * max(1, slabs), cell_budget, what=f"sweep box {shape}")
    return lo, shape


def _check_finite(value):
    if not np.all(np.isfinite(value)):
        raise OverflowError(_OVERFLOW_MSG)
    return value


def forward_slabs(sys, start, n, constraint=None, radius=None, cell_budget=None):
    """Generator of (k, slab) for the forward recursion from a point start.

    slab at step k carries the weighted path mass at time start.t + k with
    weights over times start.t+1 .. start.t+k; yields k = 0 .. n.
    """
    lo, shape = _sweep_box(sys, tuple(start.x), (1,) * sys.d, n, radius, constraint, cell_budget)
    rho = np.zeros(shape)
    rho[tuple(s - l for s, l in zip(start.x, lo))] = 1.0
    if constraint is not None:
        m = constraint.mask_at(start.t)
        if m is not None:
            rho = _apply_mask(rho, lo, m)
    yield 0, BoxField(lo, rho)
    buf = np.empty_like(rho)
    w = np.empty_like(rho)
    for k in range(1, n + 1):
        t = start.t + k
        sys.weights(t, lo, shape, out=w)
        kernels.sweep(rho, w, out=buf)
        rho, buf = buf, rho
        if constraint is not None:
            m = constraint.mask_at(t)
            if m is not None:
                rho = _apply_mask(rho, lo, m)
        yield k, BoxField(lo, rho)


def forward_partition(sys, start, n, constraint=None, radius=None, cell_budget=None):
    """Point-to-plane partition function over horizon (start.t, start.t + n]."""
    if n < 0:
        raise ValueError(f"horizon must be >= 0, got {n}")
    last = None
    for _, slab in forward_slabs(sys, start, n, constraint, radius, cell_budget):
        last = slab
    return float(_check_finite(last.values.sum()))


def forward_profile(sys, start, n, constraint=None, radius=None, cell_budget=None):
    """Array of Z over horizons 0..n from one sweep (Z[0] = 1)."""
    out = np.empty(n + 1)
    for k, slab in forward_slabs(sys, start, n, constraint, radius, cell_budget):
        out[k] = slab.values.sum()
    return _check_finite(out)


def all_starts_partition(sys, n, start_lo, start_shape, radius=None, cell_budget=None):
    """Field of partition functions Z^x over all x in the start box.

    One backward sweep: W_n = w_n, W_k = w_k * avg(W_{k+1}), then a final
    unweighted averaging step.  Agrees with forward_partition per site.
    """
    if n < 0:
        raise ValueError(f"horizon must be >= 0, got {n}")
    start_lo = tuple(start_lo)
    start_shape = tuple(start_shape)
    if n == 0:
        return BoxField(start_lo, np.ones(start_shape))
    lo, shape = _sweep_box(sys, start_lo, start_shape, n, radius, None, cell_budget)
    W = sys.weights(n, lo, shape)
    buf = np.empty_like(W)
    w = np.empty_like(W)
    for k in range(n - 1, 0, -1):
        sys.weights(k, lo, shape, out=w)
        kernels.sweep(W, w, out=buf)
        W, buf = buf, W
    kernels.sweep(W, out=buf)
    _check_finite(buf.max())
    return BoxField(lo, buf).restrict(start_lo, start_shape)


def reverse_partition(sys, end, interval, constraint=None, radius=None, cell_budget=None):
    """Plane-to-point partition function into (end.t, end.x).

    The time-reversed walk is pinned at the endpoint and runs down through
    the interval; weights are multiplied on interval times only.
    """
    times = interval.times()
    if len(times) == 0:
        return 1.0
    if times.stop - 1 >= end.t:
        raise ValueError("interval must lie strictly below the endpoint time")
    if times.start < 1:
        raise ValueError("interval reaches below time 1 where no environment exists")
    bottom = times.start
    if constraint is not None and constraint.masks:
        bottom = min(bottom, min(constraint.masks))
    lo, shape = _sweep_box(sys, tuple(end.x), (1,) * sys.d, end.t - bottom, radius, constraint, cell_budget)
    V = np.zeros(shape)
    V[tuple(c - l for c, l in zip(end.x, lo))] = 1.0
    buf = np.empty_like(V)
    w = np.empty_like(V)
    for s in range(end.t - 1, bottom - 1, -1):
        if s in times:
            sys.weights(s, lo, shape, out=w)
            kernels.sweep(V, w, out=buf)
        else:
            kernels.sweep(V, out=buf)
        V, buf = buf, V
        if constraint is not None:
            m = constraint.mask_at(s)
            if m is not None:
                V = _apply_mask(V, lo, m)
    return float(_check_finite(V.sum()))


def reverse_window_field(sys, t, interval, ybox_lo, ybox_shape, cell_budget=None):
    """Reverse partition values into (t, y) for every y in a box, one sweep.

    Runs the window recursion upward and ends with one unweighted step, so
    entry y equals reverse_partition(sys, (t,y), interval).  Interval times
    must sit in [1, t).
    """
    times = interval.times()
    if len(times) == 0:
        return BoxField(ybox_lo, np.ones(ybox_shape))
    if times.start < 1 or times.stop - 1 >= t:
        raise ValueError("window must lie within [1, t)")
    m = t - times.start
    lo, shape = dilate(tuple(ybox_lo), tuple(ybox_shape), m)
    resources.check_cells(int(np.prod(shape)), cell_budget, what=f"reverse window box {shape}")
    T = sys.weights(times.start, lo, shape)
    buf = np.empty_like(T)
    w = np.empty_like(T)
    for s in range(times.start + 1, t):
        if s in times:
            sys.weights(s, lo, shape, out=w)
            kernels.sweep(T, w, out=buf)
        else:
            kernels.sweep(T, out=buf)
        T, buf = buf, T
    kernels.sweep(T, out=buf)
    _check_finite(buf.max())
    return BoxField(lo, buf).restrict(tuple(ybox_lo), tuple(ybox_shape))


def pinned_partition(sys, a, b, cell_budget=None):
    """Point-to-point partition function between a and b over (a.t, b.t).

    Environment at both endpoint times is excluded; the bridge expectation
    is a forward sweep pinned at b, normalised by the free transition
    probability.  Mean 1 over environments.
    """
    if not parity_connected(a, b):
        raise ValueError(f"{a} and {b} are not parity connected")
    gap = b.t - a.t
    if gap < 2:
        raise ValueError(f"need b.t - a.t >= 2, got {gap}")
    d = sys.d
    denom = heat_kernel(d, gap).get(tuple(q - p for p, q in zip(a.x, b.x)))
    if denom == 0.0:
        raise ValueError("bridge undefined: endpoint transition has probability 0")
    lo1, sh1 = box_around(a.x, gap, d)
    lo2, sh2 = box_around(b.x, gap, d)
    lo, shape = intersect(lo1, sh1, lo2, sh2)
    resources.check_cells(int(np.prod(shape)), cell_budget, what=f"pinned box {shape}")
    rho = np.zeros(shape)
    rho[tuple(c - l for c, l in zip(a.x, lo))] = 1.0
    buf = np.empty_like(rho)
    w = np.empty_like(rho)
    for k in range(a.t + 1, b.t):
        sys.weights(k, lo, shape, out=w)
        kernels.sweep(rho, w, out=buf)
        rho, buf = buf, rho
    kernels.sweep(rho, out=buf)
    mass = buf[tuple(c - l for c, l in zip(b.x, lo))]
    return float(_check_finite(mass / denom))


def polymer_measure_alpha(sys, x, n, radius=None, cell_budget=None):
    """Endpoint law alpha_n(x, .): environment horizon n-1, walk at time n.

    Returns a BoxField summing to 1 (normalised by the partition value).
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    lo, shape = _sweep_box(sys, tuple(x), (1,) * sys.d, n, radius, None, cell_budget)
    rho = np.zeros(shape)
    rho[tuple(c - l for c, l in zip(x, lo))] = 1.0
    buf = np.empty_like(rho)
    w = np.empty_like(rho)
    for k in range(1, n):
        sys.weights(k, lo, shape, out=w)
        kernels.sweep(rho, w, out=buf)
        rho, buf = buf, rho
    kernels.sweep(rho, out=buf)
    total = _check_finite(buf.sum())
    if total <= 0.0:
        raise ArithmeticError("partition value vanished; cannot normalise alpha")
    buf /= total
    return BoxField(lo, buf.copy())


class AlphaTilde(NamedTuple):
    field: BoxField
    clipped: int


_WINDOW_EXP = 0.125  # reverse window length scale: ceil(k^(1/8)), floored at 1


def window_length(k):
    return max(1, math.ceil(k**_WINDOW_EXP))


def window_interval(k):
    """Reverse window [k - ceil(k^(1/8)), k), clipped to available times."""
    return TimeInterval(max(1, k - window_length(k)), k)


def alpha_tilde(sys, x, k, cell_budget=None):
    """Kernel-times-window approximation of alpha_k, clipped at 1."""
    if k < 2:
        raise ValueError(f"need k >= 2, got {k}")
    d = sys.d
    p = heat_kernel(d, k, cell_budget)
    lo = tuple(l + c for l, c in zip(p.lo, x))
    G = reverse_window_field(sys, k, window_interval(k), lo, p.shape, cell_budget)
    raw = p.values * G.values
    clipped = int(np.count_nonzero(raw > 1.0))
    return AlphaTilde(BoxField(lo, np.minimum(raw, 1.0)), clipped)


def path_marginal_slice(sys, n, t, start=None, cell_budget=None):
    """Polymer measure of the walk position at time t: field over the slice.

    One forward sweep to t and one backward sweep from n meet at the slice;
    the product normalised by their pairing is the marginal, summing to 1.
    """
    if not 1 <= t <= n:
        raise ValueError(f"need 1 <= t <= n, got t={t} n={n}")
    if start is None:
        start = SpaceTimePoint(0, (0,) * sys.d)
    lo, shape = _sweep_box(sys, tuple(start.x), (1,) * sys.d, n, None, None, cell_budget)
    rho = np.zeros(shape)
    rho[tuple(c - l for c, l in zip(start.x, lo))] = 1.0
    buf = np.empty_like(rho)
    w = np.empty_like(rho)
    for k in range(1, t + 1):
        sys.weights(k, lo, shape, out=w)
        kernels.sweep(rho, w, out=buf)
        rho, buf = buf, rho
    if t == n:
        back = np.ones(shape)
    else:
        back = sys.weights(n, lo, shape)
        for k in range(n - 1, t, -1):
            sys.weights(k, lo, shape, out=w)
            kernels.sweep(back, w, out=buf)
            back, buf = buf, back
        kernels.sweep(back, out=buf)
        back, buf = buf, back
    mu = rho * back
    total = _check_finite(mu.sum())
    if total <= 0.0:
        raise ArithmeticError("partition value vanished; cannot normalise marginal")
    mu /= total
    return BoxField(lo, mu)


def path_marginal(sys, n, t, x, start=None, cell_budget=None):
    """mu_n(X_t = x) for the polymer from start (origin by default)."""
    return path_marginal_slice(sys, n, t, start, cell_budget).get(x)


class SheKpzFields(NamedTuple):
    U: list          # U[k] = BoxField at time k; U[n] is identically 1
    H: list          # log U
    residual: float  # max deviation from the discrete evolution identity
    n_checked: int


def she_kpz_fields(sys, n, box_lo, box_shape, cell_budget=None):
    """Space-time field U(k, x) = Z over horizon n-k started at (k, x), plus log.

    U solves, in reversed time, the difference equation driven by the
    re-centered exponentiated environment; the returned residual re-evaluates
    that identity site by site (time derivative minus lattice Laplacian minus
    noise term) over the requested box and all interior times.  The stored
    field satisfies U[n] = 1 and U[0][x] = Z_n^x.
    """
    box_lo = tuple(box_lo)
    box_shape = tuple(box_shape)
    lo, shape = dilate(box_lo, box_shape, n)
    cells = int(np.prod(shape))
    resources.check_cells(cells * 2 + int(np.prod(box_shape)) * (n + 1), cell_budget, what="space-time field")
    cur = np.ones(shape)

    def clip(arr):
        return BoxField(lo, arr).restrict(box_lo, box_shape)

    slabs = [None] * (n + 1)
    slabs[n] = clip(cur)
    prev_ext = None  # slab j on the once-dilated box, for the residual stencil
    ext_lo, ext_shape = dilate(box_lo, box_shape, 1)
    cur_ext = BoxField(lo, cur).restrict(ext_lo, ext_shape).values
    residual = 0.0
    tmp = np.empty_like(cur)
    w = np.empty_like(cur)
    for j in range(n, 0, -1):
        # U(j-1, x) = avg over neighbours y of w_{j,y} U(j, y)
        sys.weights(j, lo, shape, out=w)
        np.multiply(cur, w, out=tmp)
        nxt = np.empty_like(cur)
        kernels.sweep(tmp, out=nxt)
        prev_ext, cur, cur_prev = cur_ext, nxt, cur
        cur_ext = BoxField(lo, cur).restrict(ext_lo, ext_shape).values
        slabs[j - 1] = clip(cur)
        # independent re-evaluation of the identity on the requested box:
        # U(j-1) - U(j) = lap U(j) + avg_y U(j,y) E_{j,y}
        Ej = sys.noises(j, ext_lo, ext_shape)
        lap = kernels.sweep(prev_ext) - prev_ext
        noise = kernels.sweep(prev_ext * Ej)
        inner = tuple(slice(1, -1) for _ in range(sys.d))
        res_j = slabs[j - 1].values - (prev_ext + lap + noise)[inner]
        residual = max(residual, float(np.max(np.abs(res_j))))
    _check_finite(residual)
    H = [BoxField(f.lo, np.log(f.values)) for f in slabs]
    n_checked = int(np.prod(box_shape)) * n
    return SheKpzFields(slabs, H, residual, n_checked)
