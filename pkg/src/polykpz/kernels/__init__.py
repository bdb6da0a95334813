"""Kernel backend selection.

The hot operations (slab RNG, nearest-neighbour sweep) have two
implementations: a compiled Cython core and a pure numpy fallback computing
the same values.  The compiled core is used when available; set
``POLYKPZ_BACKEND=numpy`` (or ``cython``) to force a choice.  ``polykpz bench``
compares the two.
"""

import os

from . import _np_core, common

try:
    from . import _cy_core

    _HAVE_CYTHON = True
except ImportError:
    _cy_core = None
    _HAVE_CYTHON = False

_requested = os.environ.get("POLYKPZ_BACKEND", "").strip().lower()
if _requested == "numpy":
    _impl = _np_core
elif _requested == "cython":
    if not _HAVE_CYTHON:
        raise ImportError("POLYKPZ_BACKEND=cython but the compiled core is not built")
    _impl = _cy_core
else:
    _impl = _cy_core if _HAVE_CYTHON else _np_core

BACKEND = "cython" if _impl is _cy_core else "numpy"

omega_slab = _impl.omega_slab
sweep = _impl.sweep
normal_quantile = _impl.normal_quantile

mix64 = common.mix64
derive_seed = common.derive_seed
GAUSSIAN = common.GAUSSIAN
RADEMACHER = common.RADEMACHER
BERNOULLI = common.BERNOULLI
UNIFORM = common.UNIFORM


def backends():
    """Mapping of available backend name -> module."""
    out = {"numpy": _np_core}
    if _HAVE_CYTHON:
        out["cython"] = _cy_core
    return out
