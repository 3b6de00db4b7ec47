"""Monte Carlo estimation over coupled pairs of reaction-network paths.

Estimates are built from per-path samples of the coupled difference
D(t) = f(X(t)) - f(Z(t)) on a fixed time grid. Streaming accumulators carry
central-moment sums through the fourth order so that variance estimates come
with their own standard errors, and they merge pairwise so that path blocks
can be farmed to workers and recombined in a fixed order. All estimates are
a pure function of (master_seed, n_paths): the block layout and merge order
never depend on the worker count.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ._kernels import STATUS_EXPLODED, split_pair_path
from .couplings import (
    DEFAULT_EXPLOSION_CAP,
    Partition,
    SimulationExplosion,
    _check_pair_nets,
    _check_state,
    _check_T,
    _GridSampler,
)
from .model import Network, sample_initial
from .streams import StreamKey, UniformStream, key_words

__all__ = [
    "Accumulator",
    "CouplingSpec",
    "EstimateSeries",
    "Observable",
    "alpha_delta",
    "merge",
    "sensitivity_fd",
    "shared_first_jump_frequency",
    "uniform_grid",
    "variance_trajectory",
]

COUPLING_KINDS = ("independent", "crn", "crp", "local-crp", "split")

DEFAULT_GRID_POINTS = 301

# paths are accumulated in fixed blocks of consecutive indices; workers pick
# up whole blocks, so the merge tree is independent of scheduling
_BLOCK = 256


class Accumulator:
    """Streaming count / mean / central-moment sums through fourth order.

    Works elementwise over ndarray-valued samples of a fixed shape. The
    third-moment sum is carried because the pairwise merge update for the
    fourth moment needs it, even though no estimate exposes it directly.
    """

    __slots__ = ("count", "mean", "m2", "m3", "m4")

    def __init__(self, shape=()):
        self.count = 0
        self.mean = np.zeros(shape)
        self.m2 = np.zeros(shape)
        self.m3 = np.zeros(shape)
        self.m4 = np.zeros(shape)

    def add(self, sample):
        """Fold one sample in (Welford/Pebay single-observation update)."""
        x = np.asarray(sample, dtype=np.float64)
        if x.shape != self.mean.shape:
            raise ValueError(f"sample shape {x.shape} != accumulator shape {self.mean.shape}")
        n1 = self.count
        n = n1 + 1
        self.count = n
        delta = x - self.mean
        dn = delta / n
        dn2 = dn * dn
        term1 = delta * dn * n1
        self.mean = self.mean + dn
        self.m4 = (
            self.m4
            + term1 * dn2 * (n * n - 3.0 * n + 3.0)
            + 6.0 * dn2 * self.m2
            - 4.0 * dn * self.m3
        )
        self.m3 = self.m3 + term1 * dn * (n - 2.0) - 3.0 * dn * self.m2
        self.m2 = self.m2 + term1
        return self

    @property
    def variance(self):
        """Unbiased sample variance (NaN below two samples)."""
        if self.count < 2:
            return np.full_like(self.mean, np.nan)
        return self.m2 / (self.count - 1)

    def se_mean(self):
        return np.sqrt(self.variance / self.count)

    def se_variance(self):
        """Standard error of the sample variance from the fourth moment:
        sqrt((m4 - s^4 (n-3)/(n-1)) / n), clamped at zero against roundoff."""
        n = self.count
        if n < 2:
            return np.full_like(self.mean, np.nan)
        s2 = self.m2 / (n - 1)
        m4 = self.m4 / n
        val = (m4 - s2 * s2 * ((n - 3.0) / (n - 1.0))) / n
        return np.sqrt(np.maximum(val, 0.0))

    def copy(self):
        out = Accumulator(self.mean.shape)
        out.count = self.count
        out.mean = self.mean.copy()
        out.m2 = self.m2.copy()
        out.m3 = self.m3.copy()
        out.m4 = self.m4.copy()
        return out


def merge(a: Accumulator, b: Accumulator) -> Accumulator:
    """Combine two accumulators as if their samples had been concatenated."""
    if a.mean.shape != b.mean.shape:
        raise ValueError(f"accumulator shape mismatch: {a.mean.shape} vs {b.mean.shape}")
    if a.count == 0:
        return b.copy()
    if b.count == 0:
        return a.copy()
    na = float(a.count)
    nb = float(b.count)
    n = na + nb
    delta = b.mean - a.mean
    d2 = delta * delta
    out = Accumulator(a.mean.shape)
    out.count = a.count + b.count
    out.mean = a.mean + delta * (nb / n)
    out.m2 = a.m2 + b.m2 + d2 * (na * nb / n)
    out.m3 = (
        a.m3
        + b.m3
        + delta * d2 * (na * nb * (na - nb) / (n * n))
        + 3.0 * delta * (na * b.m2 - nb * a.m2) / n
    )
    out.m4 = (
        a.m4
        + b.m4
        + d2 * d2 * (na * nb * (na * na - na * nb + nb * nb) / (n * n * n))
        + 6.0 * d2 * (na * na * b.m2 + nb * nb * a.m2) / (n * n)
        + 4.0 * delta * (na * b.m3 - nb * a.m3) / n
    )
    return out


@dataclass(frozen=True)
class Observable:
    """Linear readout of the state: a species index or a weight per species."""

    selector: object

    def weights(self, n_species: int) -> np.ndarray:
        if isinstance(self.selector, (int, np.integer)):
            i = int(self.selector)
            if not 0 <= i < n_species:
                raise ValueError(f"species index {i} out of range for {n_species} species")
            w = np.zeros(n_species)
            w[i] = 1.0
            return w
        w = np.asarray(self.selector, dtype=np.float64)
        if w.ndim != 1 or w.shape[0] != n_species:
            raise ValueError(f"observable needs one weight per species ({n_species}), got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise ValueError("observable weights must be finite")
        return w


def _as_weights(observable, n_species: int) -> np.ndarray:
    if isinstance(observable, Observable):
        return observable.weights(n_species)
    return Observable(observable).weights(n_species)


@dataclass(frozen=True)
class CouplingSpec:
    """Which pair construction to simulate; local-crp carries its partition."""

    kind: str
    partition: Partition | None = None

    def __post_init__(self):
        if self.kind not in COUPLING_KINDS:
            raise ValueError(f"unknown coupling {self.kind!r}; expected one of {COUPLING_KINDS}")
        if self.kind == "local-crp":
            if self.partition is None:
                raise ValueError("local-crp requires a partition")
            if not isinstance(self.partition, Partition):
                object.__setattr__(self, "partition", Partition(np.asarray(self.partition, dtype=np.float64)))
        elif self.partition is not None:
            raise ValueError(f"partition is only meaningful for local-crp, not {self.kind!r}")


def _as_spec(spec) -> CouplingSpec:
    if isinstance(spec, CouplingSpec):
        return spec
    return CouplingSpec(str(spec))


@dataclass(frozen=True)
class EstimateSeries:
    """Grid-indexed estimates of the coupled difference D(t) = f(X(t)) - f(Z(t)).

    mean_x / se_mean_x track the X-marginal of the same observable from the
    same runs, so marginal checks do not need a second simulation pass.
    """

    times: np.ndarray
    mean_diff: np.ndarray
    var_diff: np.ndarray
    se_mean: np.ndarray
    se_var: np.ndarray
    n_paths: int
    mean_x: np.ndarray
    se_mean_x: np.ndarray


def uniform_grid(T, n_points: int = DEFAULT_GRID_POINTS) -> np.ndarray:
    """n_points evenly spaced readout times on [0, T], endpoints included."""
    T = _check_T(T)
    n_points = int(n_points)
    if n_points < 2:
        raise ValueError("a grid needs at least 2 points")
    return np.linspace(0.0, T, n_points)


def _block_ranges(n_paths: int):
    return [(s, min(s + _BLOCK, n_paths)) for s in range(0, n_paths, _BLOCK)]


def variance_trajectory(
    spec,
    net_x: Network,
    net_z: Network,
    grid,
    n_paths: int,
    observable,
    master_seed: int,
    *,
    init_coupling=None,
    workers: int = 1,
    explosion_cap: int = DEFAULT_EXPLOSION_CAP,
) -> EstimateSeries:
    """Simulate n_paths coupled pairs and estimate mean and variance of the
    difference D(t) = f(X(t)) - f(Z(t)) at every grid time.

    Paths use independent streams keyed by (master_seed, path index); initial
    states are drawn per path from the network's init spec (init_coupling
    overrides the file's shared/independent directive). The result is
    bit-reproducible for a fixed master_seed, regardless of workers.
    """
    spec = _as_spec(spec)
    _check_pair_nets(net_x, net_z)
    grid = np.asarray(grid, dtype=np.float64)
    n_paths = int(n_paths)
    if n_paths < 2:
        raise ValueError("n_paths must be at least 2")
    weights = _as_weights(observable, net_x.n_species)
    master_seed = int(master_seed)
    if spec.kind == "local-crp":
        sampler_kw = {"partition": spec.partition}
    else:
        if grid.size == 0:
            raise ValueError("grid must be nonempty")
        sampler_kw = {"t_final": float(grid[-1])}

    def run_block(block):
        start, stop = block
        sampler = _GridSampler(spec.kind, net_x, net_z, grid, explosion_cap=explosion_cap, **sampler_kw)
        acc_d = Accumulator(grid.shape)
        acc_x = Accumulator(grid.shape)
        for i in range(start, stop):
            rng = UniformStream(StreamKey(master_seed, i, "init"))
            x0, z0 = sample_initial(net_x, mode=init_coupling, rng=rng)
            gx, gz = sampler.run(master_seed, i, x0, z0)
            fx = gx @ weights
            acc_d.add(fx - gz @ weights)
            acc_x.add(fx)
        return acc_d, acc_x

    blocks = _block_ranges(n_paths)
    workers = int(workers)
    if workers <= 1 or len(blocks) == 1:
        results = [run_block(b) for b in blocks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_block, blocks))
    acc_d, acc_x = results[0]
    for bd, bx in results[1:]:
        acc_d = merge(acc_d, bd)
        acc_x = merge(acc_x, bx)
    return EstimateSeries(
        times=grid,
        mean_diff=acc_d.mean,
        var_diff=acc_d.variance,
        se_mean=acc_d.se_mean(),
        se_var=acc_d.se_variance(),
        n_paths=n_paths,
        mean_x=acc_x.mean,
        se_mean_x=acc_x.se_mean(),
    )


def sensitivity_fd(
    spec,
    net_x: Network,
    net_z: Network,
    spread: float,
    T: float,
    n_paths: int,
    observable,
    master_seed: int,
    *,
    init_coupling=None,
    workers: int = 1,
    explosion_cap: int = DEFAULT_EXPLOSION_CAP,
):
    """Finite-difference sensitivity from a coupled pair.

    net_x carries the larger parameter value and net_z the smaller; spread is
    the full parameter gap between them. Returns (estimate, se) for
    mean[f(X(T)) - f(Z(T))] / spread.
    """
    spread = float(spread)
    if not spread > 0.0:
        raise ValueError("parameter spread must be positive; the X network carries the larger parameter")
    series = variance_trajectory(
        spec,
        net_x,
        net_z,
        np.array([float(T)]),
        n_paths,
        observable,
        master_seed,
        init_coupling=init_coupling,
        workers=workers,
        explosion_cap=explosion_cap,
    )
    return float(series.mean_diff[0] / spread), float(series.se_mean[0] / spread)


def alpha_delta(theta: float, h: float, x0: int, delta: float) -> float:
    """Probability that a split-coupled pair of linear birth processes with
    per-unit rates theta and theta + h, both starting at x0, makes its first
    jump a shared one within [0, delta]:

        theta / (theta + h) * (1 - exp(-(theta + h) * x0 * delta))
    """
    theta = float(theta)
    h = float(h)
    delta = float(delta)
    if not theta > 0.0:
        raise ValueError("theta must be positive")
    if not h >= 0.0:
        raise ValueError("h must be nonnegative")
    if int(x0) != x0 or x0 < 1:
        raise ValueError("x0 must be a positive integer")
    if not delta > 0.0:
        raise ValueError("delta must be positive")
    rate = (theta + h) * int(x0)
    return theta / (theta + h) * (1.0 - math.exp(-rate * delta))


def shared_first_jump_frequency(
    net_x: Network,
    net_z: Network,
    x0,
    z0,
    delta: float,
    n_paths: int,
    master_seed: int,
    *,
    explosion_cap: int = DEFAULT_EXPLOSION_CAP,
):
    """Fraction of split-coupled paths whose first event is a shared jump
    occurring before delta. Returns (frequency, binomial se).

    Drives the split-pair kernel directly with a one-event buffer, so paths
    cost only their first event or two; outcomes are identical, path for
    path, to inspecting simulate_split(...) records.
    """
    _check_pair_nets(net_x, net_z)
    x0 = _check_state(net_x, x0)
    z0 = _check_state(net_z, z0)
    delta = _check_T(delta)
    n_paths = int(n_paths)
    if n_paths < 1:
        raise ValueError("n_paths must be at least 1")
    master_seed = int(master_seed)
    explosion_cap = int(explosion_cap)
    K = net_x.n_channels
    d = net_x.n_species
    reac_x = net_x.reactant_matrix
    reac_z = net_z.reactant_matrix
    nu = net_x.change_matrix
    cx = net_x.rate_constants
    cz = net_z.rate_constants

    x = np.empty(d, dtype=np.int64)
    z = np.empty(d, dtype=np.int64)
    tkp = np.zeros((3, K), dtype=np.float64)
    e_nextp = np.zeros((3, K), dtype=np.float64)
    idxp = np.zeros((3, K), dtype=np.int64)
    bufp = np.zeros((3, K, 4), dtype=np.uint64)
    st_i = np.zeros(4, dtype=np.int64)
    st_f = np.zeros(1, dtype=np.float64)
    no_grid = np.empty(0, dtype=np.float64)
    no_out = np.empty((0, d), dtype=np.int64)
    ev_t = np.empty(1, dtype=np.float64)
    ev_k = np.empty(1, dtype=np.int64)
    ev_w = np.empty(1, dtype=np.int8)

    hits = 0
    for i in range(n_paths):
        k0a, k1a = key_words(master_seed, i, "split_shared")
        k0b, k1b = key_words(master_seed, i, "split_x_only")
        k0c, k1c = key_words(master_seed, i, "split_z_only")
        x[:] = x0
        z[:] = z0
        st_i[:] = 0
        st_f[0] = 0.0
        status = split_pair_path(
            k0a, k1a, k0b, k1b, k0c, k1c,
            reac_x, reac_z, nu, cx, cz,
            delta, no_grid, no_out, no_out, 1, ev_t, ev_k, ev_w,
            x, z, tkp, e_nextp, idxp, bufp, st_i, st_f, explosion_cap,
        )
        if status == STATUS_EXPLODED and st_i[3] == 0:
            raise SimulationExplosion(float(st_f[0]), int(st_i[2]))
        if st_i[3] >= 1 and ev_w[0] == 2:
            hits += 1
    freq = hits / n_paths
    se = math.sqrt(freq * (1.0 - freq) / n_paths)
    return freq, se
