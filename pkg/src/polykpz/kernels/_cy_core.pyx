# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend: counter-based slab RNG and stencil sweeps.

Must stay element-for-element in sync with `_np_core.py` (same hash chain,
same quantile approximation, same neighbour accumulation order).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport copysign, fabs, log, sqrt
from libc.stdint cimport int64_t, uint64_t

from . import common

cnp.import_array()

cdef uint64_t SALT_TIME = <uint64_t>common.SALT_TIME

DEF GAUSSIAN = 0
DEF RADEMACHER = 1
DEF BERNOULLI = 2
DEF UNIFORM = 3

cdef double U53 = 2.0 ** -53


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline double ppnd16(double u) noexcept nogil:
    # AS241 rational approximation of the standard normal quantile.
    cdef double q = u - 0.5
    cdef double r, num, den, x
    if fabs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r
                    + 6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r
                  + 1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r
                + 1.3314166789178437745e2) * r + 3.3871328727963666080e0)
        den = (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r
                    + 3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r
                  + 5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r
                + 4.2313330701600911252e1) * r + 1.0)
        return q * num / den
    if q < 0.0:
        r = u
    else:
        r = 1.0 - u
    r = sqrt(-log(r))
    if r <= 5.0:
        r = r - 1.6
        num = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r
                    + 2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r
                  + 3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r
                + 4.63033784615654529590e0) * r + 1.42343711074968357734e0)
        den = (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r
                    + 1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r
                  + 6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r
                + 2.05319162663775882187e0) * r + 1.0)
    else:
        r = r - 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r
                  + 2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r
                + 5.46378491116411436990e0) * r + 6.65790464350110377720e0)
        den = (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r
                    + 1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r
                  + 1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r
                + 5.99832206555887937690e-1) * r + 1.0)
    x = num / den
    if q < 0.0:
        return -x
    return x


cdef inline double transform(double u, int family, double param) noexcept nogil:
    # two-point families are computed branch-free: the comparison outcome is
    # an unpredictable 50/50 branch otherwise
    if family == GAUSSIAN:
        return ppnd16(u)
    elif family == RADEMACHER:
        return copysign(1.0, 0.5 - u)
    elif family == BERNOULLI:
        return (<double>(u < param)) - param
    else:
        return (2.0 * u - 1.0) * param


def omega_slab(int family, double param, object seed, object t, lo, shape, out=None):
    """Environment slab at time t on the box (lo, shape)."""
    cdef uint64_t seed_u = <uint64_t>(int(seed) & common.MASK64)
    cdef uint64_t h0 = mix64(seed_u ^ SALT_TIME ^ (<uint64_t><int64_t>int(t)))
    cdef int d = len(shape)
    salts_list = common.axis_salts(d)
    if out is None:
        out = np.empty(tuple(shape), dtype=np.float64)
    cdef uint64_t s0, s1, s2, h1, h2, h
    cdef int64_t lo0, lo1, lo2
    cdef Py_ssize_t n0, n1, n2, i0, i1, i2
    cdef double[::1] v1
    cdef double[:, ::1] v2
    cdef double[:, :, ::1] v3
    cdef double u

    if d == 1:
        s0 = <uint64_t>salts_list[0]
        lo0 = lo[0]; n0 = shape[0]
        v1 = out
        with nogil:
            for i0 in range(n0):
                h = mix64(h0 ^ s0 ^ (<uint64_t>(lo0 + i0)))
                u = (<double>(h >> 11) + 0.5) * U53
                v1[i0] = transform(u, family, param)
    elif d == 2:
        s0 = <uint64_t>salts_list[0]; s1 = <uint64_t>salts_list[1]
        lo0 = lo[0]; lo1 = lo[1]; n0 = shape[0]; n1 = shape[1]
        v2 = out
        with nogil:
            for i0 in range(n0):
                h1 = mix64(h0 ^ s0 ^ (<uint64_t>(lo0 + i0)))
                for i1 in range(n1):
                    h = mix64(h1 ^ s1 ^ (<uint64_t>(lo1 + i1)))
                    u = (<double>(h >> 11) + 0.5) * U53
                    v2[i0, i1] = transform(u, family, param)
    elif d == 3:
        s0 = <uint64_t>salts_list[0]; s1 = <uint64_t>salts_list[1]; s2 = <uint64_t>salts_list[2]
        lo0 = lo[0]; lo1 = lo[1]; lo2 = lo[2]
        n0 = shape[0]; n1 = shape[1]; n2 = shape[2]
        v3 = out
        with nogil:
            for i0 in range(n0):
                h1 = mix64(h0 ^ s0 ^ (<uint64_t>(lo0 + i0)))
                for i1 in range(n1):
                    h2 = mix64(h1 ^ s1 ^ (<uint64_t>(lo1 + i1)))
                    for i2 in range(n2):
                        h = mix64(h2 ^ s2 ^ (<uint64_t>(lo2 + i2)))
                        u = (<double>(h >> 11) + 0.5) * U53
                        v3[i0, i1, i2] = transform(u, family, param)
    else:
        from . import _np_core
        return _np_core.omega_slab(family, param, seed, t, lo, shape, out=out)
    return out


def sweep(src, weight=None, out=None):
    """out = (2d)^-1 * sum over nearest neighbours of src [* weight]."""
    cdef int d = src.ndim
    if out is None:
        out = np.empty_like(src)
    if out is src:
        raise ValueError("sweep cannot run in place")
    cdef double[::1] s1, o1, w1
    cdef double[:, ::1] s2, o2, w2
    cdef double[:, :, ::1] s3, o3, w3
    cdef Py_ssize_t n0, n1, n2, i0, i1, i2
    cdef double inv, v
    cdef bint has_w = weight is not None
    inv = 1.0 / (2.0 * d)

    if d == 1:
        s1 = src; o1 = out
        if has_w:
            w1 = weight
        n0 = src.shape[0]
        with nogil:
            for i0 in range(n0):
                v = 0.0
                if i0 > 0:
                    v += s1[i0 - 1]
                if i0 < n0 - 1:
                    v += s1[i0 + 1]
                v *= inv
                if has_w:
                    v *= w1[i0]
                o1[i0] = v
    elif d == 2:
        s2 = src; o2 = out
        if has_w:
            w2 = weight
        n0 = src.shape[0]; n1 = src.shape[1]
        with nogil:
            for i0 in range(n0):
                for i1 in range(n1):
                    v = 0.0
                    if i0 > 0:
                        v += s2[i0 - 1, i1]
                    if i0 < n0 - 1:
                        v += s2[i0 + 1, i1]
                    if i1 > 0:
                        v += s2[i0, i1 - 1]
                    if i1 < n1 - 1:
                        v += s2[i0, i1 + 1]
                    v *= inv
                    if has_w:
                        v *= w2[i0, i1]
                    o2[i0, i1] = v
    elif d == 3:
        s3 = src; o3 = out
        if has_w:
            w3 = weight
        n0 = src.shape[0]; n1 = src.shape[1]; n2 = src.shape[2]
        with nogil:
            for i0 in range(n0):
                for i1 in range(n1):
                    for i2 in range(n2):
                        v = 0.0
                        if i0 > 0:
                            v += s3[i0 - 1, i1, i2]
                        if i0 < n0 - 1:
                            v += s3[i0 + 1, i1, i2]
                        if i1 > 0:
                            v += s3[i0, i1 - 1, i2]
                        if i1 < n1 - 1:
                            v += s3[i0, i1 + 1, i2]
                        if i2 > 0:
                            v += s3[i0, i1, i2 - 1]
                        if i2 < n2 - 1:
                            v += s3[i0, i1, i2 + 1]
                        v *= inv
                        if has_w:
                            v *= w3[i0, i1, i2]
                        o3[i0, i1, i2] = v
    else:
        from . import _np_core
        return _np_core.sweep(src, weight=weight, out=out)
    return out


def normal_quantile(u):
    """Vectorised AS241 quantile (for tests and diagnostics)."""
    arr = np.ascontiguousarray(np.atleast_1d(np.asarray(u, dtype=np.float64)))
    out = np.empty_like(arr)
    cdef double[::1] src = arr.ravel()
    cdef double[::1] dst = out.ravel()
    cdef Py_ssize_t i
    with nogil:
        for i in range(src.shape[0]):
            dst[i] = ppnd16(src[i])
    return out.reshape(np.shape(u)) if np.shape(u) else out[0]
