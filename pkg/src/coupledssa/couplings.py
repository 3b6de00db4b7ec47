"""Exact path simulation of a single process and of coupled pairs.

Five pair constructions are provided, all with exact marginals:

* independent: the two processes spend disjoint randomness.
* crn: shared holding-time epochs and shared channel-selection uniforms,
  each consumed against a process's own clock and jump count.
* crp: one shared unit-rate Poisson realization per channel, consumed
  against each process's own integrated channel intensity.
* local-crp: crp restarted with fresh per-channel streams at every point of
  a partition of [0, T], internal times reset to zero.
* split: the pair simulated as one chain whose channel k splits into a
  shared firing at rate min(lambda, lambda~) plus one-sided residuals.

simulate_general_split accepts an arbitrary nonnegative rate splitter; the
result notes whether the splitter's row sums recovered both intensities (the
regime with exact marginals).

Paths record every event; eval_at_grid gives right-continuous state readout.
All randomness is addressed through streams, so a path is a pure function of
(master seed, path index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import (
    STATUS_EXPLODED,
    STATUS_FULL,
    crn_path,
    merge_pair_events,
    split_pair_path,
    time_change_path,
)
from .model import Network, intensity
from .streams import PoissonStream, StreamKey, key_words

__all__ = [
    "WHICH_X",
    "WHICH_Z",
    "WHICH_BOTH",
    "DEFAULT_EXPLOSION_CAP",
    "SimulationExplosion",
    "SplitRates",
    "split_rates",
    "total_intensity",
    "categorical_select",
    "Partition",
    "uniform_partition",
    "SinglePath",
    "CoupledPath",
    "validate_single_path",
    "validate_coupled_path",
    "eval_at_grid",
    "simulate_single",
    "simulate_independent",
    "simulate_crn",
    "simulate_crp",
    "simulate_local_crp",
    "simulate_split",
    "simulate_general_split",
]

# event attribution codes, also used by the jitted loops
WHICH_X = 0
WHICH_Z = 1
WHICH_BOTH = 2

DEFAULT_EXPLOSION_CAP = 10_000_000

_EV_CHUNK = 1 << 15
_EMPTY_F = np.empty(0, dtype=np.float64)
_EMPTY_I = np.empty(0, dtype=np.int64)


class SimulationExplosion(RuntimeError):
    """A path exceeded its event cap; carries how far it got."""

    def __init__(self, t: float, n_events: int):
        self.t = t
        self.n_events = n_events
        super().__init__(
            f"event cap reached after {n_events} events at t = {t:.6g}; "
            "raise explosion_cap if the model is genuinely this active"
        )


# ---------------------------------------------------------------------------
# rate algebra
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SplitRates:
    """Per-channel rate triple of the split coupling: shared, X-only, Z-only."""

    r1: float
    r2: float
    r3: float

    def __post_init__(self):
        for v in (self.r1, self.r2, self.r3):
            if not (v >= 0.0) or not math.isfinite(v):
                raise ValueError(f"split rates must be finite and >= 0, got {v}")

    def __iter__(self):
        return iter((self.r1, self.r2, self.r3))


def split_rates(lambda_x: float, lambda_z: float) -> SplitRates:
    """Canonical splitting (min, lambda_x - min, lambda_z - min).

    At most one residual is positive, and the residual sums rebuild the two
    inputs, which is what makes both marginals exact.
    """
    for v in (lambda_x, lambda_z):
        if not (v >= 0.0) or not math.isfinite(v):
            raise ValueError(f"intensities must be finite and >= 0, got {v}")
    r1 = lambda_x if lambda_x < lambda_z else lambda_z
    return SplitRates(r1, lambda_x - r1, lambda_z - r1)


def total_intensity(net: Network, x) -> float:
    """Sum of channel intensities at x, accumulated in channel order (the
    same association the simulation loops use)."""
    x = np.asarray(x)
    total = 0.0
    for ch in net.channels:
        total += intensity(ch, x)
    return total


def categorical_select(rates, u: float) -> int:
    """Channel index whose half-open cumulative slot [cum_<k, cum_<=k)
    contains u * total. Zero-rate channels own empty slots and are never
    chosen; if rounding pushes u * total past every slot, the last positive
    channel is returned."""
    rates = np.asarray(rates, dtype=np.float64)
    if rates.ndim != 1 or rates.size == 0:
        raise ValueError("rates must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(rates)) or np.any(rates < 0):
        raise ValueError("rates must be finite and >= 0")
    if not 0.0 <= u < 1.0:
        raise ValueError(f"u must lie in [0, 1), got {u}")
    total = 0.0
    for w in rates:
        total += w
    if total <= 0.0:
        raise ValueError("all rates are zero")
    target = u * total
    chosen = -1
    last_pos = -1
    cum = 0.0
    for k in range(rates.shape[0]):
        w = rates[k]
        if w > 0.0:
            last_pos = k
        cum_next = cum + w
        if chosen < 0 and cum <= target < cum_next:
            chosen = k
        cum = cum_next
    return chosen if chosen >= 0 else last_pos


# ---------------------------------------------------------------------------
# partitions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Partition:
    """Restart points 0 = s_0 < s_1 < ... < s_n = T for the local coupling."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.ascontiguousarray(self.points, dtype=np.float64)
        if pts.ndim != 1 or pts.size < 2:
            raise ValueError("a partition needs at least the two endpoints")
        if not np.all(np.isfinite(pts)):
            raise ValueError("partition points must be finite")
        if pts[0] != 0.0:
            raise ValueError("partition must start at 0")
        if np.any(np.diff(pts) <= 0):
            raise ValueError("partition points must be strictly increasing")
        object.__setattr__(self, "points", pts)

    @property
    def n_intervals(self) -> int:
        return self.points.size - 1

    @property
    def t_final(self) -> float:
        return float(self.points[-1])

    @property
    def mesh(self) -> float:
        return float(np.diff(self.points).max())


def uniform_partition(T: float, n: int) -> Partition:
    """n equal subintervals of [0, T]: s_m = m T / n, endpoint pinned to T
    so the invariant s_n = T holds even when m T / n rounds."""
    T = float(T)
    if not (T > 0) or not math.isfinite(T):
        raise ValueError("T must be positive and finite")
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = np.array([m * T / n for m in range(n + 1)], dtype=np.float64)
    pts[-1] = T
    return Partition(pts)


# ---------------------------------------------------------------------------
# path records
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SinglePath:
    """One process's event record; states[i] is the state just after event i."""

    t_final: float
    x0: np.ndarray
    times: np.ndarray
    channels: np.ndarray
    states: np.ndarray

    @property
    def n_events(self) -> int:
        return self.times.size


@dataclass(frozen=True, eq=False)
class CoupledPath:
    """Joint event record of the pair. which flags who moved (WHICH_X,
    WHICH_Z, WHICH_BOTH); states_x/states_z are the post-event pair states.
    marginals_exact is False only for a general split whose rate sums failed
    to rebuild the two intensities."""

    t_final: float
    x0: np.ndarray
    z0: np.ndarray
    times: np.ndarray
    which: np.ndarray
    channels: np.ndarray
    states_x: np.ndarray
    states_z: np.ndarray
    marginals_exact: bool = True

    @property
    def n_events(self) -> int:
        return self.times.size


def _replay(initial, nu, channels, active=None):
    """Post-event states from the event list: cumulative sum of net changes."""
    n = channels.shape[0]
    d = nu.shape[1]
    if n == 0:
        return np.empty((0, d), dtype=np.int64)
    dx = np.zeros((n, d), dtype=np.int64)
    if active is None:
        dx[:] = nu[channels]
    elif active.any():
        dx[active] = nu[channels[active]]
    return initial[None, :] + np.cumsum(dx, axis=0)


def validate_single_path(path: SinglePath, net: Network):
    """Raise ValueError unless the record is internally consistent with net."""
    _validate_common(path.times, path.channels, net.n_channels, path.t_final)
    if path.x0.shape != (net.n_species,) or np.any(path.x0 < 0):
        raise ValueError("initial state malformed or negative")
    if np.any(path.states < 0):
        raise ValueError("negative state on the path")
    expected = _replay(path.x0, net.change_matrix, path.channels)
    if not np.array_equal(expected, path.states):
        raise ValueError("states do not match the event-by-event net changes")


def validate_coupled_path(path: CoupledPath, net_x: Network, net_z: Network):
    """Raise ValueError unless the pair record satisfies its invariants:
    nondecreasing times, nonnegative states, and each event moving exactly
    the flagged side(s) by that channel's net change."""
    _check_pair_nets(net_x, net_z)
    _validate_common(path.times, path.channels, net_x.n_channels, path.t_final)
    if not np.all((path.which >= 0) & (path.which <= 2)):
        raise ValueError("bad which flag")
    for v0, states, active in (
        (path.x0, path.states_x, path.which != WHICH_Z),
        (path.z0, path.states_z, path.which != WHICH_X),
    ):
        if v0.shape != (net_x.n_species,) or np.any(v0 < 0):
            raise ValueError("initial state malformed or negative")
        if np.any(states < 0):
            raise ValueError("negative state on the path")
        expected = _replay(v0, net_x.change_matrix, path.channels, active)
        if not np.array_equal(expected, states):
            raise ValueError("states do not match the event-by-event net changes")


def _validate_common(times, channels, n_channels, t_final):
    if times.size and (times[0] < 0 or np.any(np.diff(times) < 0)):
        raise ValueError("event times must be nondecreasing and >= 0")
    if times.size and times[-1] > t_final:
        raise ValueError("event beyond the horizon")
    if channels.size and (channels.min() < 0 or channels.max() >= n_channels):
        raise ValueError("channel index out of range")


def eval_at_grid(path, grid):
    """Right-continuous readout: the value at t is the post-state of the last
    event at time <= t. Returns one state matrix for a SinglePath and an
    (X, Z) pair for a CoupledPath. Grid points outside [0, t_final] error."""
    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1:
        raise ValueError("grid must be 1-d")
    if grid.size and (grid.min() < 0 or grid.max() > path.t_final):
        raise ValueError("grid point beyond the path horizon")
    pos = np.searchsorted(path.times, grid, side="right") - 1

    def pick(initial, states):
        out = np.empty((grid.size, initial.size), dtype=np.int64)
        before = pos < 0
        out[before] = initial
        out[~before] = states[pos[~before]]
        return out

    if isinstance(path, CoupledPath):
        return pick(path.x0, path.states_x), pick(path.z0, path.states_z)
    return pick(path.x0, path.states)


# ---------------------------------------------------------------------------
# argument checking shared by the simulators
# ---------------------------------------------------------------------------


def _check_T(T) -> float:
    T = float(T)
    if not (T > 0.0) or not math.isfinite(T):
        raise ValueError(f"T must be positive and finite, got {T}")
    return T


def _check_state(net: Network, x0) -> np.ndarray:
    arr = np.asarray(x0)
    if arr.shape != (net.n_species,):
        raise ValueError(
            f"initial state has shape {arr.shape}, expected ({net.n_species},)"
        )
    out = np.asarray(arr, dtype=np.int64)
    if np.any(out != arr):
        raise ValueError("initial state must be integer-valued")
    if np.any(out < 0):
        raise ValueError("initial state must be nonnegative")
    return out.copy()


def _check_pair_nets(net_x: Network, net_z: Network):
    if net_x.species != net_z.species:
        raise ValueError("coupled networks must have identical species")
    if net_x.n_channels != net_z.n_channels:
        raise ValueError("coupled networks must have the same channels")
    if not np.array_equal(net_x.change_matrix, net_z.change_matrix):
        raise ValueError("coupled networks must share their net-change vectors")


def _base_key(key):
    """(master_seed, path_index) from an int, a (seed, path) pair, or a
    StreamKey. Substreams (roles, channels, partition cells) are derived
    internally, so a StreamKey must not preselect them."""
    if isinstance(key, StreamKey):
        if key.channel != 0 or key.partition_index != 0:
            raise ValueError(
                "pass a base key (channel 0, partition 0); per-channel "
                "substreams are derived internally"
            )
        return key.master_seed, key.path_index
    if isinstance(key, (int, np.integer)):
        return int(key), 0
    seed, path = key
    return int(seed), int(path)


# ---------------------------------------------------------------------------
# jitted-loop drivers (drain the bounded event buffers)
# ---------------------------------------------------------------------------


def _drain_time_change(k0s, k1s, c2s, c3s, use_interval, net, x, bounds, cap):
    """Run time_change_path to completion; returns (times, channels), with x
    mutated to the final state."""
    cap = int(cap)
    K = net.n_channels
    d = net.n_species
    tk = np.zeros(K, dtype=np.float64)
    e_next = np.zeros(K, dtype=np.float64)
    idx = np.zeros(K, dtype=np.int64)
    buf = np.zeros((K, 4), dtype=np.uint64)
    st_i = np.zeros(5, dtype=np.int64)
    st_f = np.zeros(1, dtype=np.float64)
    out_grid = np.empty((0, d), dtype=np.int64)
    ev_t = np.empty(_EV_CHUNK, dtype=np.float64)
    ev_k = np.empty(_EV_CHUNK, dtype=np.int64)
    ts, ks = [], []
    while True:
        status = time_change_path(
            k0s, k1s, c2s, c3s, use_interval,
            net.reactant_matrix, net.change_matrix, net.rate_constants,
            bounds, _EMPTY_F, out_grid, 1, ev_t, ev_k,
            x, tk, e_next, idx, buf, st_i, st_f, cap,
        )
        n = int(st_i[4])
        if n:
            ts.append(ev_t[:n].copy())
            ks.append(ev_k[:n].copy())
        if status == STATUS_FULL:
            continue
        if status == STATUS_EXPLODED:
            raise SimulationExplosion(float(st_f[0]), int(st_i[3]))
        break
    times = np.concatenate(ts) if ts else _EMPTY_F.copy()
    chans = np.concatenate(ks) if ks else _EMPTY_I.copy()
    return times, chans


def _drain_crn(k0h, k1h, k0u, k1u, net, x, T, cap):
    cap = int(cap)
    d = net.n_species
    hbuf = np.zeros(4, dtype=np.uint64)
    ubuf = np.zeros(4, dtype=np.uint64)
    st_i = np.zeros(6, dtype=np.int64)
    st_f = np.zeros(3, dtype=np.float64)
    out_grid = np.empty((0, d), dtype=np.int64)
    ev_t = np.empty(_EV_CHUNK, dtype=np.float64)
    ev_k = np.empty(_EV_CHUNK, dtype=np.int64)
    ts, ks = [], []
    while True:
        status = crn_path(
            k0h, k1h, k0u, k1u,
            net.reactant_matrix, net.change_matrix, net.rate_constants,
            T, _EMPTY_F, out_grid, 1, ev_t, ev_k,
            x, hbuf, ubuf, st_i, st_f, cap,
        )
        n = int(st_i[3])
        if n:
            ts.append(ev_t[:n].copy())
            ks.append(ev_k[:n].copy())
        if status == STATUS_FULL:
            continue
        if status == STATUS_EXPLODED:
            raise SimulationExplosion(float(st_f[0]), int(st_i[2]))
        break
    times = np.concatenate(ts) if ts else _EMPTY_F.copy()
    chans = np.concatenate(ks) if ks else _EMPTY_I.copy()
    return times, chans


def _role_words(seed, path, role, K):
    k0, k1 = key_words(seed, path, role)
    k0s = np.full(K, k0, dtype=np.uint64)
    k1s = np.full(K, k1, dtype=np.uint64)
    return k0s, k1s


def _channel_counters(K):
    return np.arange(K, dtype=np.uint64), np.zeros(K, dtype=np.uint64)


def _merged_coupled(net, x0, z0, T, tx, kx, tz, kz) -> CoupledPath:
    nu = net.change_matrix
    n_max = tx.size + tz.size
    out_t = np.empty(n_max, dtype=np.float64)
    out_k = np.empty(n_max, dtype=np.int64)
    out_w = np.empty(n_max, dtype=np.int8)
    n = merge_pair_events(tx, kx, tz, kz, out_t, out_k, out_w)
    times = out_t[:n].copy()
    chans = out_k[:n].copy()
    which = out_w[:n].copy()
    states_x = _replay(x0, nu, chans, which != WHICH_Z)
    states_z = _replay(z0, nu, chans, which != WHICH_X)
    return CoupledPath(T, x0, z0, times, which, chans, states_x, states_z)


# ---------------------------------------------------------------------------
# public simulators
# ---------------------------------------------------------------------------


def simulate_single(net: Network, x0, T, streams, *, explosion_cap=DEFAULT_EXPLOSION_CAP) -> SinglePath:
    """Exact sample of the process on [0, T], driven by one unit-rate Poisson
    stream per channel (next-reaction form: channel k fires when its
    integrated intensity reaches the stream's next epoch).

    Key-backed streams run in the jitted loop; fixed-realization streams
    (PoissonStream.from_epochs) take a pure-Python loop with identical
    arithmetic, so both produce the same events for the same epochs.
    """
    x0 = _check_state(net, x0)
    T = _check_T(T)
    streams = list(streams)
    if len(streams) != net.n_channels:
        raise ValueError(
            f"need one stream per channel: got {len(streams)} for {net.n_channels}"
        )
    for s in streams:
        if not isinstance(s, PoissonStream):
            raise TypeError("streams must be PoissonStream instances")

    if all(s.key is not None for s in streams):
        K = net.n_channels
        k0s = np.empty(K, dtype=np.uint64)
        k1s = np.empty(K, dtype=np.uint64)
        c2s = np.empty(K, dtype=np.uint64)
        c3s = np.empty(K, dtype=np.uint64)
        for k, s in enumerate(streams):
            k0s[k], k1s[k] = key_words(s.key.master_seed, s.key.path_index, s.key.role)
            c2s[k] = s.key.channel
            c3s[k] = s.key.partition_index
        x = x0.copy()
        bounds = np.array([0.0, T], dtype=np.float64)
        times, chans = _drain_time_change(k0s, k1s, c2s, c3s, 0, net, x, bounds, explosion_cap)
    else:
        times, chans = _single_python(net, x0, T, streams, explosion_cap)

    states = _replay(x0, net.change_matrix, chans)
    return SinglePath(T, x0, times, chans, states)


def _single_python(net, x0, T, streams, cap):
    """Reference next-reaction loop over explicit stream objects. Mirrors
    time_change_path operation-for-operation; epochs are fetched lazily so a
    fixed realization only needs epochs while its channel stays active."""
    K = net.n_channels
    nu = net.change_matrix
    x = x0.copy()
    tk = [0.0] * K
    idx = [0] * K
    e_next = [None] * K
    lam = [0.0] * K
    t = 0.0
    total = 0
    times, chans = [], []
    while True:
        best = -1
        best_dt = math.inf
        for k in range(K):
            v = intensity(net.channels[k], x)
            lam[k] = v
            if v > 0.0:
                if e_next[k] is None:
                    streams[k].ensure_count(idx[k] + 1)
                    e_next[k] = float(streams[k].epochs[idx[k]])
                dt = (e_next[k] - tk[k]) / v
                if dt < best_dt:
                    best_dt = dt
                    best = k
        if best < 0:
            break
        t_new = t + best_dt
        if not (t_new < T):
            dt_end = T - t
            for k in range(K):
                if lam[k] > 0.0:
                    tk[k] += lam[k] * dt_end
            break
        if total >= cap:
            raise SimulationExplosion(t, total)
        for k in range(K):
            if lam[k] > 0.0:
                tk[k] += lam[k] * best_dt
        tk[best] = e_next[best]
        t = t_new
        x += nu[best]
        idx[best] += 1
        e_next[best] = None
        total += 1
        times.append(t)
        chans.append(best)
    return (
        np.array(times, dtype=np.float64),
        np.array(chans, dtype=np.int64),
    )


def simulate_independent(net_x, net_z, x0, z0, T, key, *, explosion_cap=DEFAULT_EXPLOSION_CAP) -> CoupledPath:
    """Baseline coupling: the two processes run on disjoint stream roles, so
    the X side reproduces simulate_single under the same (seed, path)."""
    _check_pair_nets(net_x, net_z)
    x0 = _check_state(net_x, x0)
    z0 = _check_state(net_z, z0)
    T = _check_T(T)
    seed, path = _base_key(key)
    K = net_x.n_channels
    c2s, c3s = _channel_counters(K)
    bounds = np.array([0.0, T], dtype=np.float64)

    k0s, k1s = _role_words(seed, path, "single", K)
    x = x0.copy()
    tx, kx = _drain_time_change(k0s, k1s, c2s, c3s, 1, net_x, x, bounds, explosion_cap)
    k0s, k1s = _role_words(seed, path, "single_alt", K)
    z = z0.copy()
    tz, kz = _drain_time_change(k0s, k1s, c2s, c3s, 1, net_z, z, bounds, explosion_cap)
    return _merged_coupled(net_x, x0, z0, T, tx, kx, tz, kz)


def simulate_crn(net_x, net_z, x0, z0, T, key, *, explosion_cap=DEFAULT_EXPLOSION_CAP) -> CoupledPath:
    """Common-random-numbers coupling: both processes read the same holding
    epochs against their own integrated total intensity, and jump j of each
    process selects its channel with the same uniform draw number j."""
    _check_pair_nets(net_x, net_z)
    x0 = _check_state(net_x, x0)
    z0 = _check_state(net_z, z0)
    T = _check_T(T)
    seed, path = _base_key(key)
    k0h, k1h = key_words(seed, path, "crn_holding")
    k0u, k1u = key_words(seed, path, "crn_uniform")

    x = x0.copy()
    tx, kx = _drain_crn(k0h, k1h, k0u, k1u, net_x, x, T, explosion_cap)
    z = z0.copy()
    tz, kz = _drain_crn(k0h, k1h, k0u, k1u, net_z, z, T, explosion_cap)
    return _merged_coupled(net_x, x0, z0, T, tx, kx, tz, kz)


def simulate_crp(net_x, net_z, x0, z0, T, key, *, explosion_cap=DEFAULT_EXPLOSION_CAP) -> CoupledPath:
    """Common-reaction-path coupling: one shared Poisson realization per
    channel, each process consuming it against its own integrated channel
    intensity."""
    _check_pair_nets(net_x, net_z)
    x0 = _check_state(net_x, x0)
    z0 = _check_state(net_z, z0)
    T = _check_T(T)
    seed, path = _base_key(key)
    bounds = np.array([0.0, T], dtype=np.float64)
    return _run_crp_like(net_x, net_z, x0, z0, bounds, seed, path, explosion_cap)


def simulate_local_crp(net_x, net_z, x0, z0, partition: Partition, key, *, explosion_cap=DEFAULT_EXPLOSION_CAP) -> CoupledPath:
    """Locally restarted CRP: on each [s_m, s_{m+1}) the CRP mechanism runs
    with fresh per-channel streams (partition cell m selects the substream)
    and internal times reset to zero; states carry across the boundary."""
    if not isinstance(partition, Partition):
        partition = Partition(np.asarray(partition, dtype=np.float64))
    _check_pair_nets(net_x, net_z)
    x0 = _check_state(net_x, x0)
    z0 = _check_state(net_z, z0)
    seed, path = _base_key(key)
    return _run_crp_like(net_x, net_z, x0, z0, partition.points, seed, path, explosion_cap)


def _run_crp_like(net_x, net_z, x0, z0, bounds, seed, path, cap) -> CoupledPath:
    K = net_x.n_channels
    c2s, c3s = _channel_counters(K)
    k0s, k1s = _role_words(seed, path, "crp_channel", K)
    T = float(bounds[-1])
    x = x0.copy()
    tx, kx = _drain_time_change(k0s, k1s, c2s, c3s, 1, net_x, x, bounds, cap)
    z = z0.copy()
    tz, kz = _drain_time_change(k0s, k1s, c2s, c3s, 1, net_z, z, bounds, cap)
    return _merged_coupled(net_x, x0, z0, T, tx, kx, tz, kz)


def simulate_split(net_x, net_z, x0, z0, T, key, *, explosion_cap=DEFAULT_EXPLOSION_CAP) -> CoupledPath:
    """Split coupling: the pair as one chain with three subchannels per
    reaction; the shared subchannel fires both sides at the pointwise
    minimum intensity and the residuals fire one side each."""
    _check_pair_nets(net_x, net_z)
    x0 = _check_state(net_x, x0)
    z0 = _check_state(net_z, z0)
    T = _check_T(T)
    seed, path = _base_key(key)
    explosion_cap = int(explosion_cap)
    k0a, k1a = key_words(seed, path, "split_shared")
    k0b, k1b = key_words(seed, path, "split_x_only")
    k0c, k1c = key_words(seed, path, "split_z_only")
    K = net_x.n_channels
    d = net_x.n_species

    x = x0.copy()
    z = z0.copy()
    tkp = np.zeros((3, K), dtype=np.float64)
    e_nextp = np.zeros((3, K), dtype=np.float64)
    idxp = np.zeros((3, K), dtype=np.int64)
    bufp = np.zeros((3, K, 4), dtype=np.uint64)
    st_i = np.zeros(4, dtype=np.int64)
    st_f = np.zeros(1, dtype=np.float64)
    out_g = np.empty((0, d), dtype=np.int64)
    ev_t = np.empty(_EV_CHUNK, dtype=np.float64)
    ev_k = np.empty(_EV_CHUNK, dtype=np.int64)
    ev_w = np.empty(_EV_CHUNK, dtype=np.int8)
    ts, ks, ws = [], [], []
    while True:
        status = split_pair_path(
            k0a, k1a, k0b, k1b, k0c, k1c,
            net_x.reactant_matrix, net_z.reactant_matrix, net_x.change_matrix,
            net_x.rate_constants, net_z.rate_constants,
            T, _EMPTY_F, out_g, out_g, 1, ev_t, ev_k, ev_w,
            x, z, tkp, e_nextp, idxp, bufp, st_i, st_f, explosion_cap,
        )
        n = int(st_i[3])
        if n:
            ts.append(ev_t[:n].copy())
            ks.append(ev_k[:n].copy())
            ws.append(ev_w[:n].copy())
        if status == STATUS_FULL:
            continue
        if status == STATUS_EXPLODED:
            raise SimulationExplosion(float(st_f[0]), int(st_i[2]))
        break
    times = np.concatenate(ts) if ts else _EMPTY_F.copy()
    chans = np.concatenate(ks) if ks else _EMPTY_I.copy()
    which = np.concatenate(ws) if ws else np.empty(0, dtype=np.int8)
    states_x = _replay(x0, net_x.change_matrix, chans, which != WHICH_Z)
    states_z = _replay(z0, net_x.change_matrix, chans, which != WHICH_X)
    return CoupledPath(T, x0, z0, times, which, chans, states_x, states_z)


def simulate_general_split(net_x, net_z, x0, z0, T, rate_splitter, key, *, explosion_cap=DEFAULT_EXPLOSION_CAP) -> CoupledPath:
    """Split-style pair with user-supplied subchannel rates.

    rate_splitter(k, x, z) returns the (shared, X-only, Z-only) rate triple
    for channel k; any nonnegative choice yields a valid pair chain, but the
    marginals are the exact process laws only when r1 + r2 rebuilds
    lambda_k(x) and r1 + r3 rebuilds lambda_z_k(z). The returned path's
    marginals_exact reports whether that held (to a few ulps) at every
    recomputation.

    Runs in pure Python with the same arithmetic as the jitted split loop,
    so the canonical splitter reproduces simulate_split event-for-event
    under the same key.
    """
    _check_pair_nets(net_x, net_z)
    x0 = _check_state(net_x, x0)
    z0 = _check_state(net_z, z0)
    T = _check_T(T)
    seed, path = _base_key(key)
    explosion_cap = int(explosion_cap)
    K = net_x.n_channels
    nu = net_x.change_matrix
    streams = [
        [
            PoissonStream(StreamKey(seed, path, role, channel=k))
            for k in range(K)
        ]
        for role in ("split_shared", "split_x_only", "split_z_only")
    ]

    x = x0.copy()
    z = z0.copy()
    tkp = [[0.0] * K for _ in range(3)]
    idxp = [[0] * K for _ in range(3)]
    e_nextp = [[None] * K for _ in range(3)]
    rates = [[0.0] * K for _ in range(3)]
    t = 0.0
    total = 0
    exact = True
    times, chans, which = [], [], []

    while True:
        best_i = -1
        best_k = -1
        best_dt = math.inf
        for k in range(K):
            lx = intensity(net_x.channels[k], x)
            lz = intensity(net_z.channels[k], z)
            triple = rate_splitter(k, x.copy(), z.copy())
            if isinstance(triple, SplitRates):
                r1, r2, r3 = triple.r1, triple.r2, triple.r3
            else:
                r1, r2, r3 = (float(v) for v in triple)
            for v in (r1, r2, r3):
                if not (v >= 0.0) or not math.isfinite(v):
                    raise ValueError(
                        f"splitter returned a bad rate {v} for channel {k} at t = {t:.6g}"
                    )
            if exact and not (
                _close_ulps(r1 + r2, lx) and _close_ulps(r1 + r3, lz)
            ):
                exact = False
            rates[0][k] = r1
            rates[1][k] = r2
            rates[2][k] = r3
            for i3 in range(3):
                w = rates[i3][k]
                if w > 0.0:
                    if e_nextp[i3][k] is None:
                        s = streams[i3][k]
                        s.ensure_count(idxp[i3][k] + 1)
                        e_nextp[i3][k] = float(s.epochs[idxp[i3][k]])
                    dt = (e_nextp[i3][k] - tkp[i3][k]) / w
                    if dt < best_dt:
                        best_dt = dt
                        best_i = i3
                        best_k = k
        if best_k < 0:
            break
        t_new = t + best_dt
        if not (t_new < T):
            dt_end = T - t
            for k in range(K):
                for i3 in range(3):
                    if rates[i3][k] > 0.0:
                        tkp[i3][k] += rates[i3][k] * dt_end
            break
        if total >= explosion_cap:
            raise SimulationExplosion(t, total)
        for k in range(K):
            for i3 in range(3):
                if rates[i3][k] > 0.0:
                    tkp[i3][k] += rates[i3][k] * best_dt
        tkp[best_i][best_k] = e_nextp[best_i][best_k]
        t = t_new
        if best_i != 2:
            x += nu[best_k]
        if best_i != 1:
            z += nu[best_k]
        idxp[best_i][best_k] += 1
        e_nextp[best_i][best_k] = None
        total += 1
        times.append(t)
        chans.append(best_k)
        which.append(WHICH_BOTH if best_i == 0 else (WHICH_X if best_i == 1 else WHICH_Z))

    times = np.array(times, dtype=np.float64)
    chans = np.array(chans, dtype=np.int64)
    which = np.array(which, dtype=np.int8)
    states_x = _replay(x0, nu, chans, which != WHICH_Z)
    states_z = _replay(z0, nu, chans, which != WHICH_X)
    return CoupledPath(T, x0, z0, times, which, chans, states_x, states_z, marginals_exact=exact)


def _close_ulps(a: float, b: float) -> bool:
    """Equal up to a few ulps: a splitter that rebuilds an intensity via
    min/subtract can land one rounding step away from the directly computed
    value, which still leaves the marginals exact at float precision."""
    if a == b:
        return True
    return abs(a - b) <= 4.0 * np.spacing(max(abs(a), abs(b)))


# ---------------------------------------------------------------------------
# grid-readout driver for the Monte Carlo estimators
# ---------------------------------------------------------------------------

_KINDS = ("independent", "crn", "crp", "local-crp", "split")


class _GridSampler:
    """Reusable per-path runner: simulates one coupled pair per run() call and
    fills two (grid, species) state matrices in place, skipping event
    recording entirely. One instance per (coupling, nets, grid); run() is
    cheap enough to call tens of thousands of times.
    """

    def __init__(self, kind, net_x, net_z, grid, *, t_final=None, partition=None,
                 explosion_cap=DEFAULT_EXPLOSION_CAP):
        if kind not in _KINDS:
            raise ValueError(f"unknown coupling {kind!r}; valid: {_KINDS}")
        _check_pair_nets(net_x, net_z)
        if kind == "local-crp":
            if partition is None:
                raise ValueError("local-crp needs a partition")
            if not isinstance(partition, Partition):
                partition = Partition(np.asarray(partition, dtype=np.float64))
            bounds = partition.points
        else:
            if t_final is None:
                raise ValueError("t_final required for non-partitioned couplings")
            bounds = np.array([0.0, _check_T(t_final)], dtype=np.float64)
        self.kind = kind
        self.net_x = net_x
        self.net_z = net_z
        self.t_final = float(bounds[-1])
        self.bounds = bounds
        self.cap = int(explosion_cap)
        grid = np.ascontiguousarray(grid, dtype=np.float64)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("grid must be a nonempty 1-d array")
        if np.any(np.diff(grid) < 0):
            raise ValueError("grid must be nondecreasing")
        if grid[0] < 0 or grid[-1] > self.t_final:
            raise ValueError("grid point beyond the horizon")
        self.grid = grid

        K = net_x.n_channels
        d = net_x.n_species
        G = grid.size
        self.gx = np.empty((G, d), dtype=np.int64)
        self.gz = np.empty((G, d), dtype=np.int64)
        self._x = np.empty(d, dtype=np.int64)
        self._z = np.empty(d, dtype=np.int64)
        self._ev_t = np.empty(0, dtype=np.float64)
        self._ev_k = np.empty(0, dtype=np.int64)
        self._ev_w = np.empty(0, dtype=np.int8)
        if kind == "crn":
            self._hbuf = np.zeros(4, dtype=np.uint64)
            self._ubuf = np.zeros(4, dtype=np.uint64)
            self._st_i = np.zeros(6, dtype=np.int64)
            self._st_f = np.zeros(3, dtype=np.float64)
        elif kind == "split":
            self._tkp = np.zeros((3, K), dtype=np.float64)
            self._e_nextp = np.zeros((3, K), dtype=np.float64)
            self._idxp = np.zeros((3, K), dtype=np.int64)
            self._bufp = np.zeros((3, K, 4), dtype=np.uint64)
            self._st_i = np.zeros(4, dtype=np.int64)
            self._st_f = np.zeros(1, dtype=np.float64)
        else:
            self._c2s, self._c3s = _channel_counters(K)
            self._tk = np.zeros(K, dtype=np.float64)
            self._e_next = np.zeros(K, dtype=np.float64)
            self._idx = np.zeros(K, dtype=np.int64)
            self._buf = np.zeros((K, 4), dtype=np.uint64)
            self._st_i = np.zeros(5, dtype=np.int64)
            self._st_f = np.zeros(1, dtype=np.float64)

    def _side(self, seed, path, role, net, state0, out):
        K = net.n_channels
        k0, k1 = key_words(seed, path, role)
        k0s = np.full(K, k0, dtype=np.uint64)
        k1s = np.full(K, k1, dtype=np.uint64)
        self._st_i[:] = 0
        self._st_f[:] = 0.0
        x = self._x
        x[:] = state0
        status = time_change_path(
            k0s, k1s, self._c2s, self._c3s, 1,
            net.reactant_matrix, net.change_matrix, net.rate_constants,
            self.bounds, self.grid, out, 0, self._ev_t, self._ev_k,
            x, self._tk, self._e_next, self._idx, self._buf,
            self._st_i, self._st_f, self.cap,
        )
        if status == STATUS_EXPLODED:
            raise SimulationExplosion(float(self._st_f[0]), int(self._st_i[3]))

    def run(self, master_seed, path_index, x0, z0):
        """Fill self.gx / self.gz with the pair's grid states for this path.
        The buffers are overwritten by the next call."""
        kind = self.kind
        if kind == "split":
            k0a, k1a = key_words(master_seed, path_index, "split_shared")
            k0b, k1b = key_words(master_seed, path_index, "split_x_only")
            k0c, k1c = key_words(master_seed, path_index, "split_z_only")
            self._st_i[:] = 0
            self._st_f[:] = 0.0
            self._x[:] = x0
            self._z[:] = z0
            status = split_pair_path(
                k0a, k1a, k0b, k1b, k0c, k1c,
                self.net_x.reactant_matrix, self.net_z.reactant_matrix,
                self.net_x.change_matrix,
                self.net_x.rate_constants, self.net_z.rate_constants,
                self.t_final, self.grid, self.gx, self.gz,
                0, self._ev_t, self._ev_k, self._ev_w,
                self._x, self._z, self._tkp, self._e_nextp, self._idxp,
                self._bufp, self._st_i, self._st_f, self.cap,
            )
            if status == STATUS_EXPLODED:
                raise SimulationExplosion(float(self._st_f[0]), int(self._st_i[2]))
        elif kind == "crn":
            k0h, k1h = key_words(master_seed, path_index, "crn_holding")
            k0u, k1u = key_words(master_seed, path_index, "crn_uniform")
            for net, s0, out in ((self.net_x, x0, self.gx), (self.net_z, z0, self.gz)):
                self._st_i[:] = 0
                self._st_f[:] = 0.0
                self._x[:] = s0
                status = crn_path(
                    k0h, k1h, k0u, k1u,
                    net.reactant_matrix, net.change_matrix, net.rate_constants,
                    self.t_final, self.grid, out, 0, self._ev_t, self._ev_k,
                    self._x, self._hbuf, self._ubuf, self._st_i, self._st_f, self.cap,
                )
                if status == STATUS_EXPLODED:
                    raise SimulationExplosion(float(self._st_f[0]), int(self._st_i[2]))
        elif kind == "independent":
            self._side(master_seed, path_index, "single", self.net_x, x0, self.gx)
            self._side(master_seed, path_index, "single_alt", self.net_z, z0, self.gz)
        else:  # crp, local-crp
            self._side(master_seed, path_index, "crp_channel", self.net_x, x0, self.gx)
            self._side(master_seed, path_index, "crp_channel", self.net_z, z0, self.gz)
        return self.gx, self.gz
