"""Reproducible random streams addressed by (seed, path, role, channel, partition).

Monte Carlo over coupled paths needs many independent randomness sources per
path: one unit-rate Poisson process per reaction channel (and per partition
cell for the locally-restarted coupling), plus uniform selectors and
initial-condition draws. Streams are derived, not split: the key tuple alone
determines the full realization, so workers need no coordination and any two
readers of the same stream observe identical values regardless of access
order. Epoch caches below only memoize what the counter-based generator
(see _philox) defines.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._philox import U64, fill_epochs, fill_uniforms

__all__ = [
    "ROLES",
    "StreamKey",
    "PoissonStream",
    "UniformStream",
    "derive_stream",
    "key_words",
]

# role -> code embedded in the stream key. "single" also serves as the X side
# of the independent coupling (so that side reproduces simulate_single
# bit-for-bit); "single_alt" is the disjoint Z side.
ROLES = {
    "single": 0,
    "single_alt": 1,
    "crn_holding": 2,
    "crn_uniform": 3,
    "crp_channel": 4,
    "split_shared": 5,
    "split_x_only": 6,
    "split_z_only": 7,
    "init": 8,
}

_UNIFORM_ROLES = frozenset(("crn_uniform", "init"))

_MASK64 = (1 << 64) - 1
_SEED_STIR = 0x5851F42D4C957F2D
_KEY1_STIR = 0xD6E8FEB86659FD93
_MAX_PATH = 1 << 56


def _mix64(z: int) -> int:
    """SplitMix64 finalizer: a 64-bit bijection with full avalanche."""
    z &= _MASK64
    z ^= z >> 30
    z = (z * 0xBF58476D1CE4E5B9) & _MASK64
    z ^= z >> 27
    z = (z * 0x94D049BB133111EB) & _MASK64
    z ^= z >> 31
    return z


@dataclass(frozen=True)
class StreamKey:
    """Address of one stream. channel and partition_index select substreams
    within a (seed, path, role) family."""

    master_seed: int
    path_index: int = 0
    role: str = "single"
    channel: int = 0
    partition_index: int = 0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}; valid: {sorted(ROLES)}")
        if not 0 <= self.path_index < _MAX_PATH:
            raise ValueError(f"path_index out of range: {self.path_index}")
        if self.channel < 0 or self.partition_index < 0:
            raise ValueError("channel and partition_index must be >= 0")


def key_words(master_seed: int, path_index: int, role: str):
    """128-bit Philox key for a (seed, path, role) family, as two uint64.

    (path, role) pack injectively into one word before mixing; channel and
    partition ride in the counter instead (see _philox), so deriving the
    thousands of per-channel, per-partition substreams of a path costs integer
    arithmetic only.
    """
    h = _mix64((master_seed & _MASK64) ^ _SEED_STIR)
    v = (path_index & (_MAX_PATH - 1)) | (ROLES[role] << 56)
    k0 = _mix64(h ^ v)
    k1 = _mix64(k0 ^ _KEY1_STIR)
    return U64(k0), U64(k1)


class PoissonStream:
    """Unit-rate Poisson process realization: strictly increasing epochs.

    Lazily extended and append-only, so several readers at different positions
    share one consistent realization. Identity is the key tuple; the cache is
    only a memo.
    """

    def __init__(self, key: StreamKey):
        self.key = key
        self._k0, self._k1 = key_words(key.master_seed, key.path_index, key.role)
        self._c2 = U64(key.channel)
        self._c3 = U64(key.partition_index)
        self._epochs = np.empty(64, dtype=np.float64)
        self._n = 0
        self._last = 0.0

    @classmethod
    def from_epochs(cls, epochs):
        """Fixed-realization stream for tests and replay; cannot be extended."""
        obj = cls.__new__(cls)
        obj.key = None
        arr = np.asarray(epochs, dtype=np.float64)
        if arr.ndim != 1 or (arr.size > 1 and np.any(np.diff(arr) <= 0)):
            raise ValueError("epochs must be a strictly increasing 1-d sequence")
        obj._epochs = arr.copy()
        obj._n = arr.size
        obj._last = float(arr[-1]) if arr.size else 0.0
        return obj

    @property
    def epochs(self):
        """View of the epochs materialized so far."""
        return self._epochs[: self._n]

    def _extend(self, count: int):
        if self.key is None:
            raise RuntimeError("fixed-realization stream exhausted")
        need = self._n + count
        if need > self._epochs.size:
            grown = np.empty(max(need, 2 * self._epochs.size), dtype=np.float64)
            grown[: self._n] = self._epochs[: self._n]
            self._epochs = grown
        out = self._epochs[self._n : need]
        self._last = fill_epochs(
            self._k0, self._k1, self._c2, self._c3, self._n, self._last, out
        )
        self._n = need

    def ensure_count(self, n: int):
        if n > self._n:
            self._extend(n - self._n)

    def next_epoch_after(self, t: float) -> float:
        """Smallest epoch strictly greater than t."""
        while self._n == 0 or self._epochs[self._n - 1] <= t:
            self._extend(max(64, self._n))
        i = np.searchsorted(self._epochs[: self._n], t, side="right")
        return float(self._epochs[i])

    def count_through(self, t: float) -> int:
        """Number of epochs in [0, t]."""
        while self._n == 0 or self._epochs[self._n - 1] <= t:
            self._extend(max(64, self._n))
        return int(np.searchsorted(self._epochs[: self._n], t, side="right"))


class UniformStream:
    """Index-addressable uniforms on [0, 1): draw i is stable regardless of
    access order or chunking."""

    def __init__(self, key: StreamKey):
        self.key = key
        self._k0, self._k1 = key_words(key.master_seed, key.path_index, key.role)
        self._c2 = U64(key.channel)
        self._c3 = U64(key.partition_index)
        self._vals = np.empty(64, dtype=np.float64)
        self._n = 0

    def uniform_at(self, i: int) -> float:
        if i < 0:
            raise ValueError("draw index must be >= 0")
        if i >= self._n:
            need = max(i + 1, 64, 2 * self._n)
            if need > self._vals.size:
                grown = np.empty(need, dtype=np.float64)
                grown[: self._n] = self._vals[: self._n]
                self._vals = grown
            out = self._vals[self._n : need]
            fill_uniforms(self._k0, self._k1, self._c2, self._c3, self._n, out)
            self._n = need
        return float(self._vals[i])


def derive_stream(key: StreamKey):
    """Pure derivation: equal keys give bit-identical streams, distinct keys
    give statistically independent ones."""
    if key.role in _UNIFORM_ROLES:
        return UniformStream(key)
    return PoissonStream(key)
