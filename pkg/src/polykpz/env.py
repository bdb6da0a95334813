"""Environment distributions and reproducible sampling of the disorder field.

The disorder is an i.i.d. field of centered random variables omega indexed by
(time k >= 1, site x in Z^d).  Every value is a pure function of
(seed, k, x) via a counter-based hash, so all partition function variants and
all space-time shifts read one consistent field without storing it.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

_FAMILY_CODES = {
    "gaussian": kernels.GAUSSIAN,
    "rademacher": kernels.RADEMACHER,
    "bernoulli": kernels.BERNOULLI,
    "uniform": kernels.UNIFORM,
}


def lambda_cgf(family, beta, p=0.5, width=1.0):
    """log E[exp(beta * omega)] for the given centered family.

    gaussian:    beta^2 / 2
    rademacher:  log cosh beta
    bernoulli:   omega = 1{U<p} - p, so log(1 - p + p e^beta) - beta p
    uniform:     omega uniform on [-h, h] with h = width/2: log(sinh(bh)/(bh))
    """
    if beta < 0:
        raise ValueError(f"beta must be >= 0, got {beta}")
    if beta == 0.0:
        return 0.0
    if family == "gaussian":
        return 0.5 * beta * beta
    if family == "rademacher":
        # log cosh, stable for large beta
        return float(np.logaddexp(beta, -beta) - math.log(2.0))
    if family == "bernoulli":
        if not 0.0 < p < 1.0:
            raise ValueError(f"bernoulli p must be in (0,1), got {p}")
        return math.log1p(p * math.expm1(beta)) - beta * p
    if family == "uniform":
        h = 0.5 * width
        if h <= 0:
            raise ValueError(f"uniform width must be > 0, got {width}")
        x = beta * h
        if x < 1e-4:
            return math.log1p(x * x / 6.0 + x**4 / 120.0)
        return math.log(math.sinh(x) / x)
    raise ValueError(f"unknown family {family!r}")


@dataclass(frozen=True)
class EnvSpec:
    """Environment family, inverse temperature and precomputed cumulant.

    conc_ok marks families known to satisfy the convex-Lipschitz
    concentration property (Gaussian or bounded support); lower-tail
    experiments refuse specs without it.  All four built-in families
    qualify; the flag exists so e.g. Poisson-like inputs can be rejected.
    """

    family: str = "gaussian"
    beta: float = 0.0
    p: float = 0.5          # bernoulli success probability
    width: float = 1.0      # uniform support width (b - a)
    lam: float = field(init=False)
    conc_ok: bool = field(init=False)

    def __post_init__(self):
        if self.family not in _FAMILY_CODES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.beta < 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        object.__setattr__(self, "lam", lambda_cgf(self.family, self.beta, self.p, self.width))
        object.__setattr__(self, "conc_ok", True)

    @property
    def family_code(self):
        return _FAMILY_CODES[self.family]

    @property
    def family_param(self):
        if self.family == "bernoulli":
            return self.p
        if self.family == "uniform":
            return 0.5 * self.width
        return 0.0

    def as_dict(self):
        d = {"family": self.family, "beta": self.beta}
        if self.family == "bernoulli":
            d["p"] = self.p
        if self.family == "uniform":
            d["width"] = self.width
        return d

    @classmethod
    def from_dict(cls, d):
        return cls(
            family=d.get("family", "gaussian"),
            beta=float(d.get("beta", 0.0)),
            p=float(d.get("p", 0.5)),
            width=float(d.get("width", 1.0)),
        )


@dataclass(frozen=True)
class EnvKey:
    """Identifies one disorder variable: (seed, time k >= 1, site x)."""

    seed: int
    k: int
    x: tuple

    def __post_init__(self):
        if self.k <= 0:
            raise ValueError(f"environment time must be >= 1, got {self.k}")


def omega_field(spec, seed, t, lo, shape, out=None):
    """Slab of omega values at time t over the box (lo, shape)."""
    if t <= 0:
        raise ValueError(f"environment time must be >= 1, got {t}")
    return kernels.omega_slab(spec.family_code, spec.family_param, seed, t, tuple(lo), tuple(shape), out=out)


def weight_field(spec, seed, t, lo, shape, out=None):
    """Slab of weights w = exp(beta*omega - lambda); E[w] = 1."""
    if spec.beta == 0.0:
        if out is None:
            return np.ones(tuple(shape))
        out[...] = 1.0
        return out
    w = omega_field(spec, seed, t, lo, shape, out=out)
    if spec.family in ("rademacher", "bernoulli"):
        # two-point laws: map the two omega values straight to weights
        hi = math.exp(spec.beta * (1.0 - spec.p if spec.family == "bernoulli" else 1.0) - spec.lam)
        lo_w = math.exp(spec.beta * (-spec.p if spec.family == "bernoulli" else -1.0) - spec.lam)
        res = np.where(w > 0, hi, lo_w)
        if out is None:
            return res
        out[...] = res
        return out
    w *= spec.beta
    w -= spec.lam
    np.exp(w, out=w)
    return w


def noise_field(spec, seed, t, lo, shape):
    """Slab of the re-centered exponentiated environment, w - 1; mean zero."""
    e = weight_field(spec, seed, t, lo, shape)
    e -= 1.0
    return e


def sample_omega(spec, key):
    """One omega value; repeated calls with equal keys are bit-identical."""
    d = len(key.x)
    slab = omega_field(spec, key.seed, key.k, key.x, (1,) * d)
    return float(slab.ravel()[0])


def weight_and_noise(spec, key):
    """(w, e) at one key, with w = exp(beta*omega - lambda) and e = w - 1."""
    omega = sample_omega(spec, key)
    w = math.exp(spec.beta * omega - spec.lam)
    return w, w - 1.0
