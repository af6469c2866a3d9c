"""Counter-based splittable random numbers.

Output ``n`` (n = 1, 2, ...) of stream ``(seed, stream_id)`` is

    key  = mix64(mix64(seed) ^ mix64(stream_id + STREAM_SALT))
    out  = mix64(key + n * GOLDEN)              (mod 2**64)

where ``mix64`` is the SplitMix64 finaliser.  Uniforms on [0, 1) take the
top 53 bits, ``(out >> 11) * 2**-53``; uniforms on (0, 1) add half an ulp,
``((out >> 11) + 0.5) * 2**-53``.  Any output can be recomputed from
``(seed, stream_id, n)`` alone, so replicates are reproducible in any order.
"""

from __future__ import annotations

import numpy as np
from numba import njit

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
STREAM_SALT = 0xD1B54A32D192ED03
TWO_M53 = 2.0**-53


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * MIX1) & MASK
    z = ((z ^ (z >> 27)) * MIX2) & MASK
    return z ^ (z >> 31)


def stream_key(seed: int, stream_id: int) -> int:
    return mix64(mix64(seed & MASK) ^ mix64((stream_id + STREAM_SALT) & MASK))


class RngStream:
    """One reproducible stream; ``counter`` is the number of outputs drawn so far."""

    __slots__ = ("seed", "stream_id", "key", "counter")

    def __init__(self, seed: int, stream_id: int = 0, counter: int = 0):
        self.seed = int(seed) & MASK
        self.stream_id = int(stream_id) & MASK
        self.key = stream_key(self.seed, self.stream_id)
        self.counter = int(counter)

    def next_u64(self) -> int:
        self.counter += 1
        return mix64(self.key + self.counter * GOLDEN)

    def random(self) -> float:
        """Uniform on [0, 1)."""
        return (self.next_u64() >> 11) * TWO_M53

    def open01(self) -> float:
        """Uniform on the open interval (0, 1)."""
        return ((self.next_u64() >> 11) + 0.5) * TWO_M53

    def exponential(self) -> float:
        return -float(np.log(self.open01()))

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id}, counter={self.counter})"


# numba twins; the constants are unsigned so no arithmetic is promoted to float.
_U_GOLDEN = np.uint64(GOLDEN)
_U_MIX1 = np.uint64(MIX1)
_U_MIX2 = np.uint64(MIX2)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)


@njit(cache=True, nogil=True)
def mix64_nb(z):
    z = (z ^ (z >> _S30)) * _U_MIX1
    z = (z ^ (z >> _S27)) * _U_MIX2
    return z ^ (z >> _S31)


@njit(cache=True, nogil=True)
def open01_nb(key, counter):
    """Return the uniform on (0, 1) for output ``counter`` (already incremented)."""
    out = mix64_nb(key + counter * _U_GOLDEN)
    return (np.float64(out >> _S11) + 0.5) * TWO_M53


@njit(cache=True, nogil=True)
def random_nb(key, counter):
    out = mix64_nb(key + counter * _U_GOLDEN)
    return np.float64(out >> _S11) * TWO_M53
