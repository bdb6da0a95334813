"""Pure numpy kernel backend.

Reference implementation of the two hot operations: environment slab
generation and the nearest-neighbour averaging sweep.  The compiled backend
reproduces these element by element; keep the arithmetic order here in sync
with `_cy_core.pyx`.
"""

import numpy as np

from . import common

_U = np.uint64

_M1 = _U(0xBF58476D1CE4E5B9)
_M2 = _U(0x94D049BB133111EB)
_S30 = _U(30)
_S27 = _U(27)
_S31 = _U(31)
_S11 = _U(11)


def _mix64(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


# AS241 (PPND16) rational approximations for the standard normal quantile.
_A = (3.3871328727963666080e0, 1.3314166789178437745e2, 1.9715909503065514427e3,
      1.3731693765509461125e4, 4.5921953931549871457e4, 6.7265770927008700853e4,
      3.3430575583588128105e4, 2.5090809287301226727e3)
_B = (1.0, 4.2313330701600911252e1, 6.8718700749205790830e2,
      5.3941960214247511077e3, 2.1213794301586595867e4, 3.9307895800092710610e4,
      2.8729085735721942674e4, 5.2264952788528545610e3)
_C = (1.42343711074968357734e0, 4.63033784615654529590e0, 5.76949722146069140550e0,
      3.64784832476320460504e0, 1.27045825245236838258e0, 2.41780725177450611770e-1,
      2.27238449892691845833e-2, 7.74545014278341407640e-4)
_D = (1.0, 2.05319162663775882187e0, 1.67638483018380384940e0,
      6.89767334985100004550e-1, 1.48103976427480074590e-1, 1.51986665636164571966e-2,
      5.47593808499534494600e-4, 1.05075007164441684324e-9)
_E = (6.65790464350110377720e0, 5.46378491116411436990e0, 1.78482653991729133580e0,
      2.96560571828504891230e-1, 2.65321895265761230930e-2, 1.24266094738807843860e-3,
      2.71155556874348757815e-5, 2.01033439929228813265e-7)
_F = (1.0, 5.99832206555887937690e-1, 1.36929880922735805310e-1,
      1.48753612908506148525e-2, 7.86869131145613259100e-4, 1.84631831751005468180e-5,
      1.42151175831644588870e-7, 2.04426310338993978564e-15)


def _poly(coeffs, r):
    acc = np.full_like(r, coeffs[7])
    for c in (coeffs[6], coeffs[5], coeffs[4], coeffs[3], coeffs[2], coeffs[1], coeffs[0]):
        acc = acc * r + c
    return acc


def normal_quantile(u):
    """Standard normal inverse CDF, accurate to ~1e-16 (AS241)."""
    u = np.asarray(u, dtype=np.float64)
    q = u - 0.5
    central = np.abs(q) <= 0.425

    r_c = 0.180625 - q * q
    x_c = q * _poly(_A, r_c) / _poly(_B, r_c)

    with np.errstate(invalid="ignore", divide="ignore"):
        r_t = np.where(q < 0.0, u, 1.0 - u)
        r_t = np.sqrt(-np.log(np.where(central, 0.25, r_t)))
        near = r_t <= 5.0
        r1 = r_t - 1.6
        r2 = r_t - 5.0
        x_t = np.where(near, _poly(_C, r1) / _poly(_D, r1), _poly(_E, r2) / _poly(_F, r2))
        x_t = np.where(q < 0.0, -x_t, x_t)
    return np.where(central, x_c, x_t)


def uniform_slab(seed, t, lo, shape):
    """Hash uniforms in (0,1) for the lattice slab at time t.

    lo/shape give the box (lower corner and extents).  Values depend only on
    (seed, t, absolute coordinate), never on the box placement.
    """
    d = len(shape)
    # time stage on python ints (numpy warns on scalar uint64 wraparound)
    h0 = common.mix64((seed & common.MASK64) ^ common.SALT_TIME ^ (t & common.MASK64))
    h = _U(h0)
    with np.errstate(over="ignore"):
        for j in range(d):
            coords = (np.arange(lo[j], lo[j] + shape[j], dtype=np.int64)).astype(np.uint64)
            stage = _U(common.axis_salt(j)) ^ coords
            h = _mix64(h[..., None] ^ stage) if j > 0 else _mix64(h ^ stage)
    return ((h >> _S11).astype(np.float64) + 0.5) * common.U53


def omega_slab(family, param, seed, t, lo, shape, out=None):
    """Environment variables omega on a slab, per the family transform."""
    u = uniform_slab(seed, t, lo, shape)
    if family == common.GAUSSIAN:
        res = normal_quantile(u)
    elif family == common.RADEMACHER:
        res = np.copysign(1.0, 0.5 - u)
    elif family == common.BERNOULLI:
        res = (u < param) - param
    elif family == common.UNIFORM:
        res = (2.0 * u - 1.0) * param
    else:
        raise ValueError(f"unknown family code {family}")
    if out is not None:
        out[...] = res
        return out
    return res


def sweep(src, weight=None, out=None):
    """One transfer step: out = (2d)^-1 * sum of nearest neighbours [* weight].

    Sites outside the array contribute zero (absorbing box edges).
    """
    d = src.ndim
    acc = np.zeros_like(src) if out is None else out
    if acc is src:
        raise ValueError("sweep cannot run in place")
    acc[...] = 0.0
    for j in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[j] = slice(1, None)
        hi[j] = slice(None, -1)
        acc[tuple(lo)] += src[tuple(hi)]
        acc[tuple(hi)] += src[tuple(lo)]
    acc *= 1.0 / (2 * d)
    if weight is not None:
        acc *= weight
    return acc
