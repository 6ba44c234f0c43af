"""Counter-based random numbers.

Every random value in the lab is a pure function of a 64-bit seed and a
tuple of integer counters (stream tag, item index, step, component, ...).
Nothing carries state between calls, so any chunking or thread schedule
reproduces the same numbers bit for bit.

The mixer is the splitmix64 finalizer applied in a sponge-like chain over
the counter words.
"""

from enum import IntEnum

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 2.0 ** -53


class Stream(IntEnum):
    """Stream tags keep independent uses of one seed from colliding."""

    METRIC = 1
    VARIANCE = 2
    SPREAD = 3
    UNCERTAINTY = 4
    PHOTON_POL = 5
    PHOTON_PHASE = 6
    MALUS = 7
    CHAIN = 8
    PAIR = 9
    CHSH = 10
    SLIT = 11
    CRYPTO_PHASE = 12


def _as_u64(x):
    a = np.asarray(x)
    if a.dtype.kind == "f":
        raise TypeError("counter words must be integers")
    if a.dtype.kind == "i" and np.any(a < 0):
        raise ValueError("counter words must be non-negative")
    return np.atleast_1d(a.astype(np.uint64))


def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


def hash64(seed, *words):
    """Mix ``seed`` and the counter ``words`` (broadcast together) to uint64."""
    with np.errstate(over="ignore"):
        h = _mix(_as_u64(seed) + _GOLDEN)
        for w in words:
            h = _mix(h ^ _mix(_as_u64(w) + _GOLDEN))
    shape = np.broadcast_shapes(np.shape(seed), *(np.shape(w) for w in words))
    return h.reshape(shape) if shape != h.shape else h


def uniform(seed, *words):
    """Uniform doubles on [0, 1) with 53 random bits."""
    return (hash64(seed, *words) >> _S11).astype(np.float64) * _INV53


def normal(seed, *words):
    """Standard normal variates by Box-Muller over two counter uniforms."""
    u1 = uniform(seed, *words, 0)
    u2 = uniform(seed, *words, 1)
    r = np.sqrt(-2.0 * np.log1p(-u1))
    return r * np.cos(2.0 * np.pi * u2)


def generator(seed, *words):
    """A numpy Generator keyed by ``(seed, *words)``.

    Used where a sequential stream is more convenient than counters; the key
    is still a pure function of the indices, so streams never overlap between
    differently indexed callers.
    """
    key = int(hash64(seed, *words).reshape(-1)[0])
    return np.random.Generator(np.random.Philox(key=key))
