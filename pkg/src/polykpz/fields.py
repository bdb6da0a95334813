"""Fluctuation fields of the polymer and their decompositions.

The two observables are spatial averages against a rescaled test function:
the linear field S (partition values minus their mean 1) and the
logarithmic field K (log partition values minus an injected ensemble mean).
Both are split at an intermediate horizon n^(1-delta) and approximated by a
martingale built from reverse window partition functions; this module also
carries the per-step Doob decomposition of log Z and the scalar inequality
diagnostics for weighted sums of unit-mean variables.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .lattice import BoxField, dilate
from .polymer import forward_slabs, reverse_window_field, window_interval
from .lattice import SpaceTimePoint
from . import polymer


@dataclass(frozen=True)
class TestFunction:
    """Compactly supported test function on R^d, evaluated at x/sqrt(n).

    kinds: "bump" (mollifier, 1 at the origin), "indicator" (box),
    "hat" (tensor product of triangles).  Support radius L in sup norm.
    """

    kind: str = "bump"
    L: float = 1.0

    def __post_init__(self):
        if self.kind not in ("bump", "indicator", "hat"):
            raise ValueError(f"unknown test function kind {self.kind!r}")
        if self.L <= 0:
            raise ValueError("support radius must be positive")

    def __call__(self, u):
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "indicator":
            return (np.max(np.abs(u), axis=-1) <= self.L).astype(np.float64)
        if self.kind == "hat":
            return np.prod(np.maximum(0.0, 1.0 - np.abs(u) / self.L), axis=-1)
        r2 = np.sum(u * u, axis=-1) / (self.L * self.L)
        out = np.zeros(r2.shape)
        inside = r2 < 1.0
        with np.errstate(divide="ignore"):
            out[inside] = np.exp(1.0 - 1.0 / (1.0 - r2[inside]))
        return out

    def lattice_support(self, n, d):
        """(lo, shape, values) of f(x/sqrt(n)) over its supporting lattice box."""
        R = int(math.floor(self.L * math.sqrt(n)))
        lo = (-R,) * d
        shape = (2 * R + 1,) * d
        axes = np.indices(shape).astype(np.float64)
        for j in range(d):
            axes[j] += lo[j]
        pts = np.moveaxis(axes, 0, -1) / math.sqrt(n)
        return lo, shape, self(pts)

    def as_dict(self):
        return {"kind": self.kind, "L": self.L}

    @classmethod
    def from_dict(cls, dd):
        return cls(kind=dd.get("kind", "bump"), L=float(dd.get("L", 1.0)))


@dataclass(frozen=True)
class WindowParams:
    """Split horizon: cut = floor(n^(1-delta)) with delta in (0, 1/6)."""

    delta: float
    n: int

    def __post_init__(self):
        if not 0.0 < self.delta < 1.0 / 6.0:
            raise ValueError(f"delta must be in (0, 1/6), got {self.delta}")

    @property
    def cut(self):
        c = int(math.floor(self.n ** (1.0 - self.delta)))
        if c >= self.n:
            raise ValueError(f"window cut {c} must be below n={self.n}")
        return max(1, c)


@dataclass
class FluctuationSample:
    """One environment's realized fields and decomposition terms."""

    S_n: float
    K_n: float
    logZ_mean_used: float
    s_n_delta: float = None
    S_n_delta: float = None
    k_n_delta: float = None
    K_n_delta: BoxField = None
    M_n_delta: float = None


def _scaled_sum(fvals, values, n, d):
    return float(np.sum(fvals * values)) / n ** (d / 2.0)


def fluct_fields(sys, n, f, logZ_mean, radius=None, cell_budget=None):
    """(S_n(f), K_n(f)) from one all-starting-points sweep.

    logZ_mean must come from an independent seed block; using in-sample
    means would bias the logarithmic field toward zero.
    """
    if not np.isfinite(logZ_mean):
        raise ValueError("logZ_mean must be finite")
    d = sys.d
    lo, shape, fvals = f.lattice_support(n, d)
    Z = polymer.all_starts_partition(sys, n, lo, shape, radius=radius, cell_budget=cell_budget)
    S = _scaled_sum(fvals, Z.values - 1.0, n, d)
    K = _scaled_sum(fvals, np.log(Z.values) - logZ_mean, n, d)
    return S, K


class WindowDecomposition(NamedTuple):
    s_small: float      # early-horizon linear part
    S_large: float      # late-window linear part
    k_small: float      # early-horizon logarithmic part
    K_field: BoxField   # late-window logarithmic field over x
    Z_full: BoxField
    Z_cut: BoxField


def window_decomposition(sys, n, f, delta, logZ_cut_mean, ratio_mean, radius=None, cell_budget=None):
    """Windowed split of both fields at cut = floor(n^(1-delta)).

    Exact identity by construction: s_small + S_large equals S_n(f) for the
    same environment.  The two injected constants are ensemble estimates of
    E[log Z_cut] and E[log(Z_n/Z_cut)] from disjoint seeds.
    """
    cut = WindowParams(delta, n).cut
    d = sys.d
    lo, shape, fvals = f.lattice_support(n, d)
    Zn = polymer.all_starts_partition(sys, n, lo, shape, radius=radius, cell_budget=cell_budget)
    Zc = polymer.all_starts_partition(sys, cut, lo, shape, radius=radius, cell_budget=cell_budget)
    s_small = _scaled_sum(fvals, Zc.values - 1.0, n, d)
    S_large = _scaled_sum(fvals, Zn.values - Zc.values, n, d)
    k_small = _scaled_sum(fvals, np.log(Zc.values) - logZ_cut_mean, n, d)
    K_field = BoxField(lo, np.log(Zn.values / Zc.values) - ratio_mean)
    return WindowDecomposition(s_small, S_large, k_small, K_field, Zn, Zc)


def martingale_approx(sys, n, delta, f=None, x=None, radius=None, cell_budget=None):
    """Martingale approximant of the late-window fields.

    Sums, over times k in (cut, n], the reverse window partition value times
    the re-centered environment, propagated to the starting points by k free
    steps (evaluated by iterated averaging, never by storing kernels).
    Returns the value paired with f, the value at x, or the whole field.

    The spatial range is the start box dilated by `radius` (default: full
    reach n); widening it changes the result below statistical resolution,
    which the tests certify by doubling.
    """
    cut = WindowParams(delta, n).cut
    d = sys.d
    if f is not None:
        xlo, xshape, fvals = f.lattice_support(n, d)
    elif x is not None:
        xlo, xshape = tuple(x), (1,) * d
    else:
        raise ValueError("need a test function or a point")
    reach = n if radius is None else min(n, radius)
    lo, shape = dilate(xlo, xshape, reach)
    from . import resources

    resources.check_cells(int(np.prod(shape)) * 2, cell_budget, what=f"martingale box {shape}")
    acc = None
    for k in range(n, cut, -1):
        G = reverse_window_field(sys, k, window_interval(k), lo, shape, cell_budget)
        g = G.values * sys.noises(k, lo, shape)
        if acc is None:
            acc = g
        else:
            acc = kernels.sweep(acc) + g
    buf = np.empty_like(acc)
    for _ in range(cut + 1):
        kernels.sweep(acc, out=buf)
        acc, buf = buf, acc
    field = BoxField(lo, acc).restrict(xlo, xshape)
    if f is not None:
        return _scaled_sum(fvals, field.values, n, d)
    return field.get(x)


def khat(sys, n, x, radius=None, cell_budget=None):
    """Cumulative polymer-measure pairing with the re-centered environment.

    Running sum over k <= n of sum_y alpha_k(x, y) E_{k, y}, evaluated along
    one forward sweep; each term equals the relative one-step increment of
    the partition value on the sweep box.
    """
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    total = 0.0
    prev_sum = None
    start = SpaceTimePoint(0, tuple(x))
    for k, slab in forward_slabs(sys, start, n, radius=radius, cell_budget=cell_budget):
        cur = slab.values.sum()
        if k > 0:
            total += cur / prev_sum - 1.0
        prev_sum = cur
    return float(total)


class DoobIncrements(NamedTuple):
    raw: np.ndarray        # realized log ratios, telescoping to log Z_n
    cond: np.ndarray       # inner-MC conditional means given the past
    cond_se: np.ndarray    # inner-MC standard errors
    mg: np.ndarray         # raw - cond: martingale part
    prev: np.ndarray       # cond - injected mean: previsible part


def doob_increments(sys, n, x, inner_samples, prev_means=None, radius=None, cell_budget=None, stream=0):
    """Martingale/previsible split of the log partition increments.

    The conditional mean given the past resamples the newest time slice only
    (the endpoint law alpha is fixed) with inner Monte Carlo; prev_means is
    the injected ensemble estimate of the unconditional increment mean, one
    entry per time (zeros if omitted).
    """
    if inner_samples < 1000:
        raise ValueError(f"inner_samples must be >= 1000, got {inner_samples}")
    if prev_means is None:
        prev_means = np.zeros(n)
    prev_means = np.asarray(prev_means, dtype=np.float64)
    if prev_means.shape != (n,):
        raise ValueError(f"prev_means must have length {n}")
    spec = sys.spec
    raw = np.empty(n)
    cond = np.empty(n)
    cond_se = np.empty(n)
    start = SpaceTimePoint(0, tuple(x))
    it = forward_slabs(sys, start, n, radius=radius, cell_budget=cell_budget)
    _, slab = next(it)
    prev_vals = slab.values.copy()
    free = np.empty_like(prev_vals)
    for k, slab in it:
        kernels.sweep(prev_vals, out=free)
        zprev = free.sum()
        alpha = (free / zprev).ravel()
        nz = np.nonzero(alpha)[0]
        av = alpha[nz]
        raw[k - 1] = math.log(slab.values.sum() / zprev)
        cond[k - 1], cond_se[k - 1] = _inner_conditional_mean(
            spec, av, inner_samples, kernels.derive_seed(sys.seed, 0xD00B, stream, k)
        )
        prev_vals[...] = slab.values
    mg = raw - cond
    prev = cond - prev_means
    return DoobIncrements(raw, cond, cond_se, mg, prev)


def _inner_conditional_mean(spec, alpha_vals, samples, seed, chunk_elems=8_000_000):
    """E[log(1 + sum_y alpha_y E_y)] over a fresh slice, by Monte Carlo."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    m = alpha_vals.size
    chunk = max(1, min(samples, chunk_elems // max(1, m)))
    done = 0
    acc = 0.0
    acc2 = 0.0
    while done < samples:
        b = min(chunk, samples - done)
        w = _sample_weights(spec, rng, (b, m))
        vals = np.log1p((w - 1.0) @ alpha_vals)
        acc += float(vals.sum())
        acc2 += float((vals * vals).sum())
        done += b
    mean = acc / samples
    var = max(0.0, acc2 / samples - mean * mean)
    return mean, math.sqrt(var / samples)


def _sample_weights(spec, rng, shape):
    """Fresh unit-mean weights from the environment family (inner MC only)."""
    beta, lam = spec.beta, spec.lam
    if beta == 0.0:
        return np.ones(shape)
    if spec.family == "gaussian":
        om = rng.standard_normal(shape)
    elif spec.family == "rademacher":
        om = np.where(rng.random(shape) < 0.5, 1.0, -1.0)
    elif spec.family == "bernoulli":
        om = (rng.random(shape) < spec.p) - spec.p
    else:
        om = (rng.random(shape) - 0.5) * spec.width
    return np.exp(beta * om - lam)


class PhiDiag(NamedTuple):
    mean_abs_phi: float
    mean_log1p_sq: float
    sum_a_sq: float
    se_abs_phi: float
    se_log1p_sq: float


def phi(x):
    """phi(x) = x - log(1+x), nonnegative for x > -1."""
    return x - np.log1p(x)


def lognormal_eta(beta):
    """Unit-mean lognormal sampler exp(beta g - beta^2/2), g standard normal."""

    def sample(rng, shape):
        return np.exp(beta * rng.standard_normal(shape) - 0.5 * beta * beta)

    return sample


def appendix_phi_diag(a, eta_sampler, n_samples, seed=0, chunk_elems=8_000_000):
    """Monte Carlo check that E|phi(U)| and E[(log(1+U))^2] scale like sum a_i^2.

    U = sum_i a_i (eta_i - 1) for a probability vector a and i.i.d. positive
    unit-mean eta.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 1 or np.any(a < 0) or abs(a.sum() - 1.0) > 1e-12:
        raise ValueError("a must be a probability vector")
    rng = np.random.Generator(np.random.Philox(key=kernels.derive_seed(seed, 0xA11A)))
    m = a.size
    chunk = max(1, min(n_samples, chunk_elems // m))
    done = 0
    s_phi = s_phi2 = s_l2 = s_l4 = 0.0
    while done < n_samples:
        b = min(chunk, n_samples - done)
        eta = eta_sampler(rng, (b, m))
        U = (eta - 1.0) @ a
        ph = np.abs(phi(U))
        l2 = np.log1p(U) ** 2
        s_phi += float(ph.sum())
        s_phi2 += float((ph * ph).sum())
        s_l2 += float(l2.sum())
        s_l4 += float((l2 * l2).sum())
        done += b
    mean_phi = s_phi / n_samples
    mean_l2 = s_l2 / n_samples
    se_phi = math.sqrt(max(0.0, s_phi2 / n_samples - mean_phi**2) / n_samples)
    se_l2 = math.sqrt(max(0.0, s_l4 / n_samples - mean_l2**2) / n_samples)
    return PhiDiag(mean_phi, mean_l2, float(np.sum(a * a)), se_phi, se_l2)
