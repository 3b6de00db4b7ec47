"""Counter-based random primitives shared by streams and simulation loops.

Philox4x64-10: a keyed bijection from a 256-bit counter to four 64-bit words.
Every random draw in the package is addressed as

    word (i & 3) of philox(key, block = i >> 3 ... i >> 2, c2, c3)

for a draw index i consumed sequentially per stream, where the 128-bit key
encodes (master seed, path, role) and the counter words (c2, c3) carry the
channel and partition indices directly. Because draws are a pure function of
(key, c2, c3, i), any consumer, whether a Python-level stream object or a
jitted simulation loop, observes the identical realization with no shared state.

Exponential gaps use exact inverse-CDF (-log1p(-u)) and epochs accumulate
strictly sequentially; both transformations live here, jitted, so all callers
agree bit-for-bit.
"""

import numpy as np
from numba import njit

U64 = np.uint64

PHILOX_M0 = U64(0xD2E7470EE14C6C93)
PHILOX_M1 = U64(0xCA5A826395121157)
PHILOX_W0 = U64(0x9E3779B97F4A7C15)
PHILOX_W1 = U64(0xBB67AE8584CAA73B)
_MASK32 = U64(0xFFFFFFFF)
_SHIFT32 = U64(32)
_SHIFT11 = U64(11)
_ZERO = U64(0)
_ONE = U64(1)
_TWO = U64(2)
_THREE = U64(3)
# 2^-53: top 53 bits of a word become a double in [0, 1)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True, inline="always")
def _mulhilo(a, b):
    """Full 64x64 -> 128 bit product as (hi, lo), via 32-bit limbs."""
    lo = a * b
    a_lo = a & _MASK32
    a_hi = a >> _SHIFT32
    b_lo = b & _MASK32
    b_hi = b >> _SHIFT32
    m1 = a_hi * b_lo
    m2 = a_lo * b_hi
    m3 = a_lo * b_lo
    carry = ((m3 >> _SHIFT32) + (m1 & _MASK32) + (m2 & _MASK32)) >> _SHIFT32
    hi = a_hi * b_hi + (m1 >> _SHIFT32) + (m2 >> _SHIFT32) + carry
    return hi, lo


@njit(cache=True, nogil=True, inline="always")
def philox_block(k0, k1, c0, c1, c2, c3):
    """One Philox4x64-10 block: four uint64 outputs for one counter value."""
    x0, x1, x2, x3 = c0, c1, c2, c3
    for _ in range(10):
        hi0, lo0 = _mulhilo(x0, PHILOX_M0)
        hi1, lo1 = _mulhilo(x2, PHILOX_M1)
        x0 = hi1 ^ x1 ^ k0
        x1 = lo1
        x2 = hi0 ^ x3 ^ k1
        x3 = lo0
        k0 = k0 + PHILOX_W0
        k1 = k1 + PHILOX_W1
    return x0, x1, x2, x3


@njit(cache=True, nogil=True, inline="always")
def draw_word(k0, k1, c2, c3, i):
    """The i-th raw 64-bit word of the stream (key, c2, c3)."""
    b0, b1, b2, b3 = philox_block(k0, k1, i >> _TWO, _ZERO, c2, c3)
    w = i & _THREE
    if w == _ZERO:
        return b0
    if w == _ONE:
        return b1
    if w == _TWO:
        return b2
    return b3


@njit(cache=True, nogil=True, inline="always")
def buffered_word(k0, k1, c2, c3, i, buf):
    """Same mapping as draw_word, caching each block in buf (uint64[4]).

    Valid only for strictly sequential i per (stream, buf); simulation loops
    use this to pay for one Philox block per four draws.
    """
    w = i & _THREE
    if w == _ZERO:
        b0, b1, b2, b3 = philox_block(k0, k1, i >> _TWO, _ZERO, c2, c3)
        buf[0] = b0
        buf[1] = b1
        buf[2] = b2
        buf[3] = b3
    return buf[w]


@njit(cache=True, nogil=True, inline="always")
def to_unit(word):
    """Map a raw word to a double in [0, 1): top 53 bits over 2^53."""
    return float(word >> _SHIFT11) * _INV53


@njit(cache=True, nogil=True)
def fill_uniforms(k0, k1, c2, c3, start, out):
    """out[j] = uniform draw number start + j of the stream."""
    for j in range(out.shape[0]):
        out[j] = to_unit(draw_word(k0, k1, c2, c3, U64(start + j)))


@njit(cache=True, nogil=True)
def fill_epochs(k0, k1, c2, c3, start, last, out):
    """Append epochs start .. start+len(out)-1 of the unit Poisson stream.

    Epoch i = epoch i-1 + (-log1p(-u_i)); `last` is epoch start-1 (0.0 when
    start == 0). Accumulation is strictly sequential: the sum association is
    part of the reproducibility contract.
    """
    e = last
    for j in range(out.shape[0]):
        u = to_unit(draw_word(k0, k1, c2, c3, U64(start + j)))
        e = e + (-np.log1p(-u))
        out[j] = e
    return e
