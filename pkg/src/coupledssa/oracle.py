"""Exact transient moments for small networks, independent of any simulation.

Two routes, deliberately disjoint from the path samplers so they can serve as
references for Monte Carlo output:

* uniformization of the truncated generator (any network, state space clipped
  to a finite box), and
* the closed mean ODE for networks whose intensities are affine in the state,
  integrated with a fixed-step RK4.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.stats import poisson as _poisson

from .model import Network

__all__ = [
    "TruncatedSpace",
    "GeneratorMatrix",
    "build_generator",
    "initial_distribution",
    "transient_distribution",
    "transient_expectation",
    "moment_ode_mean",
    "is_affine",
]

UNIFORMIZATION_TAIL = 1e-12
ODE_STEP = 1e-3


@dataclass(frozen=True)
class TruncatedSpace:
    """Finite box {0..b_1} x ... x {0..b_d} enumerated in C order
    (last species fastest)."""

    bounds: tuple

    def __post_init__(self):
        if not self.bounds or any(int(b) != b or b < 0 for b in self.bounds):
            raise ValueError(f"bounds must be nonnegative integers, got {self.bounds}")

    @property
    def dims(self):
        return tuple(int(b) + 1 for b in self.bounds)

    @property
    def n_states(self) -> int:
        n = 1
        for m in self.dims:
            n *= m
        return n

    def index(self, state) -> int:
        state = np.asarray(state)
        if np.any(state < 0) or np.any(state > np.asarray(self.bounds)):
            raise ValueError(f"state {state} outside truncation {self.bounds}")
        return int(np.ravel_multi_index(tuple(int(s) for s in state), self.dims))

    def state(self, ordinal: int):
        return np.array(np.unravel_index(ordinal, self.dims), dtype=np.int64)

    def all_states(self):
        """(n_states, d) int64 matrix of every state, in enumeration order."""
        grids = np.indices(self.dims).reshape(len(self.dims), -1).T
        return grids.astype(np.int64)


@dataclass
class GeneratorMatrix:
    """Conservative generator on a truncated box.

    Jumps that would leave the box are dropped along with their diagonal
    contribution (the boundary "reflects by inaction"), so rows still sum to
    zero and no probability mass is lost; dropped_rate records, per state, the
    total outgoing rate that was removed, and max_dropped_rate is its maximum
    over states. Growing the box until the occupied region carries no dropped
    rate makes the truncation bias negligible.
    """

    matrix: sp.csr_matrix
    space: TruncatedSpace
    dropped_rate: np.ndarray = field(repr=False)

    @property
    def max_dropped_rate(self) -> float:
        return float(self.dropped_rate.max()) if self.dropped_rate.size else 0.0


def _channel_intensities(net: Network, states):
    """(n_states, n_channels) mass-action intensities, vectorized over states."""
    n = states.shape[0]
    nu = net.reactant_matrix
    lam = np.empty((n, net.n_channels))
    for k in range(net.n_channels):
        v = np.full(n, net.rate_constants[k])
        for i in range(net.n_species):
            for j in range(nu[k, i]):
                v = v * (states[:, i] - j)
        # integer states make the falling factorial vanish exactly when
        # x_i < nu, but guard anyway for safety
        lam[:, k] = np.maximum(v, 0.0)
    return lam


def build_generator(net: Network, space: TruncatedSpace) -> GeneratorMatrix:
    if len(space.bounds) != net.n_species:
        raise ValueError(
            f"truncation has {len(space.bounds)} bounds for {net.n_species} species"
        )
    states = space.all_states()
    n = states.shape[0]
    lam = _channel_intensities(net, states)
    zeta = net.change_matrix
    bounds = np.asarray(space.bounds, dtype=np.int64)

    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    dropped = np.zeros(n)
    for k in range(net.n_channels):
        target = states + zeta[k]
        ok = np.all((target >= 0) & (target <= bounds), axis=1) & (lam[:, k] > 0)
        src = np.nonzero(ok)[0]
        if src.size:
            dst = np.ravel_multi_index(tuple(target[src].T), space.dims)
            rows.append(src)
            cols.append(dst)
            vals.append(lam[src, k])
            np.add.at(diag, src, -lam[src, k])
        lost = np.nonzero(~ok & (lam[:, k] > 0))[0]
        if lost.size:
            dropped[lost] += lam[lost, k]

    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    q = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    ).tocsr()
    return GeneratorMatrix(q, space, dropped)


def initial_distribution(net: Network, space: TruncatedSpace) -> np.ndarray:
    """Distribution of the network's declared initial condition on the box.

    Fixed counts become point masses (error if outside the box); Poisson
    marginals are truncated to the box and renormalized (the clipped tail is
    expected to be negligible for a sensible truncation).
    """
    per_species = []
    for i, (kind, value) in enumerate(net.init):
        b = int(space.bounds[i])
        if kind == "fixed":
            if value > b:
                raise ValueError(
                    f"truncation too small: init {net.species[i]}={int(value)} "
                    f"exceeds bound {b}"
                )
            v = np.zeros(b + 1)
            v[int(value)] = 1.0
        else:
            v = _poisson.pmf(np.arange(b + 1), value)
        per_species.append(v)
    p = per_species[0]
    for v in per_species[1:]:
        p = np.kron(p, v)  # C order: later species vary fastest
    s = p.sum()
    if s <= 0:
        raise ValueError("initial distribution has no mass on the truncation")
    return p / s


def transient_distribution(gen: GeneratorMatrix, init, t: float):
    """Distribution at time t by uniformization.

    Returns (dist, boundary_mass) where boundary_mass is the probability, at
    time t, of sitting in a state whose outgoing rate was clipped by the
    truncation; it bounds how much the truncation can be distorting the answer
    and should be driven below tolerance by growing the box.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    p0 = np.asarray(init, dtype=np.float64)
    if p0.shape != (gen.space.n_states,):
        raise ValueError("init distribution has wrong length")
    q = gen.matrix
    rate = float(-q.diagonal().min())
    if t == 0.0 or rate == 0.0:
        dist = p0.copy()
    else:
        # P = I + Q/rate is substochastic-free here (rows sum to 1 exactly)
        p_mat = sp.eye(q.shape[0], format="csr") + q.multiply(1.0 / rate)
        lt = rate * t
        jmax = int(_poisson.isf(UNIFORMIZATION_TAIL, lt)) + 2
        weights = _poisson.pmf(np.arange(jmax + 1), lt)
        dist = np.zeros_like(p0)
        v = p0
        for j in range(jmax + 1):
            dist += weights[j] * v
            if j < jmax:
                v = v @ p_mat
        dist /= dist.sum()  # reinstate the 1e-12 tail
    boundary = float(dist[gen.dropped_rate > 0].sum())
    return dist, boundary


def transient_expectation(gen: GeneratorMatrix, init, t: float, f) -> float:
    """E[f(X(t))] under the truncated chain.

    f may be a vector over the enumerated states or a callable applied to the
    (n_states, d) state matrix.
    """
    if callable(f):
        fvec = np.asarray(f(gen.space.all_states()), dtype=np.float64)
    else:
        fvec = np.asarray(f, dtype=np.float64)
    if fvec.shape != (gen.space.n_states,):
        raise ValueError("observable vector has wrong length")
    dist, _ = transient_distribution(gen, init, t)
    return float(dist @ fvec)


def is_affine(net: Network) -> bool:
    """True when every channel has at most one reactant molecule in total,
    making all intensities affine functions of the state."""
    return bool(np.all(net.reactant_matrix.sum(axis=1) <= 1))


def moment_ode_mean(net: Network, x0, t: float, step: float = ODE_STEP) -> np.ndarray:
    """Mean trajectory endpoint for affine networks.

    For affine intensities the mean obeys the closed linear ODE
    dm/dt = sum_k zeta_k lambda_k(m) exactly; integrate it with fixed-step
    RK4. Raises for non-affine networks (use the uniformization route there).
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    if not is_affine(net):
        raise ValueError(
            "network has a channel with more than one reactant molecule; the "
            "mean equation is not closed; use build_generator/transient_expectation"
        )
    nu = net.reactant_matrix.astype(np.float64)
    zeta_t = net.change_matrix.T.astype(np.float64)
    c = net.rate_constants
    source = (net.reactant_matrix.sum(axis=1) == 0).astype(np.float64)

    def rhs(m):
        lam = c * (nu @ m + source)
        return zeta_t @ lam

    m = np.asarray(x0, dtype=np.float64).copy()
    if m.shape != (net.n_species,):
        raise ValueError("x0 has wrong length")
    remaining = float(t)
    while remaining > 0.0:
        h = step if remaining >= step else remaining
        k1 = rhs(m)
        k2 = rhs(m + 0.5 * h * k1)
        k3 = rhs(m + 0.5 * h * k2)
        k4 = rhs(m + h * k3)
        m = m + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        remaining -= h
    return m
