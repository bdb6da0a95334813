"""Shared constants for the counter-based lattice RNG.

Both kernel backends implement the same map (seed, t, x) -> omega.  The key
is hashed with a splitmix64-style chain, one stage per coordinate, so every
site value is a pure function of its key and can be regenerated in any order,
from any process, one cell at a time or a whole slab at once.
"""

MASK64 = (1 << 64) - 1

# Stage salts keep (t, x0, x1, ...) from aliasing each other.
SALT_TIME = 0x8C6E1D29F5A34B07
_AXIS_SALT_BASE = 0x3C79AC492BA7B653
_GOLDEN = 0x9E3779B97F4A7C15

# Family codes understood by both backends.
GAUSSIAN = 0
RADEMACHER = 1
BERNOULLI = 2
UNIFORM = 3

#: 2**-53, scale turning the top 53 hash bits into a uniform in (0, 1).
U53 = 2.0**-53


def mix64(z: int) -> int:
    """Splitmix64 finalizer on 64-bit integers (python-int reference)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def axis_salt(j: int) -> int:
    """Salt mixed into the chain stage for spatial axis j."""
    return mix64((_AXIS_SALT_BASE + (j + 1) * _GOLDEN) & MASK64)


def axis_salts(d: int) -> list[int]:
    return [axis_salt(j) for j in range(d)]


def derive_seed(base: int, *tags: int) -> int:
    """Derive a child seed from a base seed and integer stream tags.

    Distinct tag tuples give independent streams; used to keep replica
    blocks, mean-estimation blocks and inner resampling streams disjoint.
    """
    h = mix64(base & MASK64)
    for tag in tags:
        h = mix64(h ^ ((tag & MASK64) * _GOLDEN & MASK64))
    return h
