import math

import numpy as np
import pytest

from coupledssa.couplings import uniform_partition
from coupledssa.estimators import (
    Accumulator,
    CouplingSpec,
    Observable,
    alpha_delta,
    merge,
    sensitivity_fd,
    shared_first_jump_frequency,
    uniform_grid,
    variance_trajectory,
)
from coupledssa.couplings import WHICH_BOTH, simulate_split
from coupledssa.model import Perturbation, apply_perturbation, parse_network

from helpers import GENE, PURE_BIRTH, gene_mean_protein

SEED = 515151


def _gene_pair():
    net = parse_network(GENE)
    return apply_perturbation(net, Perturbation("mrna_decay", 0.2625, 0.2375))


def _alpha_pair(theta=1.0, h=0.5):
    net = parse_network(PURE_BIRTH)
    return apply_perturbation(net, Perturbation("birth", theta + h, theta))


# ---------------------------------------------------------------------------
# accumulators
# ---------------------------------------------------------------------------


def _direct_stats(samples):
    a = np.asarray(samples, dtype=np.float64)
    n = a.shape[0]
    mean = a.mean(axis=0)
    c = a - mean
    return n, mean, (c * c).sum(axis=0), (c ** 3).sum(axis=0), (c ** 4).sum(axis=0)


def _assert_matches_direct(acc, samples, rel=1e-10):
    n, mean, m2, m3, m4 = _direct_stats(samples)
    assert acc.count == n
    scale2 = max(1.0, float(np.max(np.abs(m2))))
    assert np.allclose(acc.mean, mean, rtol=rel, atol=rel)
    assert np.allclose(acc.m2, m2, rtol=rel, atol=rel * scale2)
    assert np.allclose(acc.m3, m3, rtol=rel, atol=rel * max(1.0, float(np.max(np.abs(m3)))))
    assert np.allclose(acc.m4, m4, rtol=rel, atol=rel * max(1.0, float(np.max(np.abs(m4)))))


def test_accumulator_matches_direct_numpy():
    rng = np.random.default_rng(SEED)
    samples = rng.normal(3.0, 2.0, size=(1000, 5)) ** 2
    acc = Accumulator((5,))
    for s in samples:
        acc.add(s)
    _assert_matches_direct(acc, samples)
    n = len(samples)
    v = samples.var(axis=0, ddof=1)
    assert np.allclose(acc.variance, v, rtol=1e-10)
    assert np.allclose(acc.se_mean(), np.sqrt(v / n), rtol=1e-10)
    m4 = ((samples - samples.mean(axis=0)) ** 4).mean(axis=0)
    want = np.sqrt((m4 - v * v * (n - 3) / (n - 1)) / n)
    assert np.allclose(acc.se_variance(), want, rtol=1e-10)


def test_accumulator_scalar_and_validation():
    acc = Accumulator()
    for v in (1.0, 2.0, 4.0):
        acc.add(v)
    assert acc.count == 3
    assert acc.mean == pytest.approx(7.0 / 3.0)
    assert acc.variance == pytest.approx(np.var([1, 2, 4], ddof=1))
    with pytest.raises(ValueError, match="shape"):
        acc.add(np.zeros(2))
    fresh = Accumulator((2,))
    assert np.isnan(fresh.variance).all()
    assert np.isnan(fresh.se_variance()).all()


def test_merge_equals_concatenated_accumulation():
    rng = np.random.default_rng(SEED + 1)
    samples = rng.gamma(2.0, 1.5, size=(2000, 3))
    a = Accumulator((3,))
    b = Accumulator((3,))
    for s in samples[:1000]:
        a.add(s)
    for s in samples[1000:]:
        b.add(s)
    ab = merge(a, b)
    ba = merge(b, a)
    _assert_matches_direct(ab, samples)
    assert ab.count == ba.count
    for f in ("mean", "m2", "m3", "m4"):
        assert np.allclose(getattr(ab, f), getattr(ba, f), rtol=1e-10)


def test_merge_identity_and_errors():
    rng = np.random.default_rng(SEED + 2)
    a = Accumulator((4,))
    for s in rng.normal(size=(37, 4)):
        a.add(s)
    out = merge(a, Accumulator((4,)))
    assert out.count == a.count
    assert np.array_equal(out.mean, a.mean)
    assert np.array_equal(out.m4, a.m4)
    out2 = merge(Accumulator((4,)), a)
    assert np.array_equal(out2.m2, a.m2)
    with pytest.raises(ValueError, match="mismatch"):
        merge(a, Accumulator((3,)))


# ---------------------------------------------------------------------------
# observables and specs
# ---------------------------------------------------------------------------


def test_observable():
    assert Observable(1).weights(3).tolist() == [0.0, 1.0, 0.0]
    assert Observable([1.0, -2.0]).weights(2).tolist() == [1.0, -2.0]
    with pytest.raises(ValueError, match="out of range"):
        Observable(3).weights(3)
    with pytest.raises(ValueError, match="per species"):
        Observable([1.0, 2.0]).weights(3)
    with pytest.raises(ValueError, match="finite"):
        Observable([math.inf, 0.0]).weights(2)


def test_coupling_spec():
    assert CouplingSpec("split").partition is None
    part = uniform_partition(1.0, 4)
    assert CouplingSpec("local-crp", part).partition is part
    coerced = CouplingSpec("local-crp", [0.0, 0.5, 1.0])
    assert coerced.partition.n_intervals == 2
    with pytest.raises(ValueError, match="unknown coupling"):
        CouplingSpec("mirror")
    with pytest.raises(ValueError, match="requires a partition"):
        CouplingSpec("local-crp")
    with pytest.raises(ValueError, match="only meaningful"):
        CouplingSpec("crp", part)


def test_uniform_grid():
    g = uniform_grid(30.0)
    assert g.shape == (301,)
    assert g[0] == 0.0 and g[-1] == 30.0
    assert uniform_grid(2.0, 5).tolist() == [0.0, 0.5, 1.0, 1.5, 2.0]
    with pytest.raises(ValueError):
        uniform_grid(2.0, 1)
    with pytest.raises(ValueError):
        uniform_grid(-1.0)


# ---------------------------------------------------------------------------
# variance trajectories
# ---------------------------------------------------------------------------


def test_variance_trajectory_h_zero_is_exactly_zero():
    net = parse_network(GENE)
    grid = np.linspace(0.0, 3.0, 5)
    for spec in (
        "crn",
        "crp",
        "split",
        CouplingSpec("local-crp", uniform_partition(3.0, 3)),
    ):
        s = variance_trajectory(spec, net, net, grid, 64, 1, SEED)
        assert np.all(s.mean_diff == 0.0), spec
        assert np.all(s.var_diff == 0.0), spec
        assert np.all(s.se_mean == 0.0), spec
        assert np.all(s.se_var == 0.0), spec
        assert s.n_paths == 64


def test_variance_trajectory_independent_doubles_marginal_variance():
    net = parse_network(PURE_BIRTH)
    n = 2000
    s = variance_trajectory("independent", net, net, [1.0], n, 0, SEED)
    # Var(X(1)) = e(e-1) for a unit-rate linear birth from one individual
    target = 2.0 * math.e * (math.e - 1.0)
    assert abs(s.var_diff[0] - target) < 4 * s.se_var[0]
    assert abs(s.mean_diff[0]) < 4 * s.se_mean[0]
    assert abs(s.mean_x[0] - math.e) < 4 * s.se_mean_x[0]


def test_variance_trajectory_marginal_mean_tracks_oracle():
    net_x, net_z = _gene_pair()
    grid = np.array([1.0, 3.0])
    s = variance_trajectory("crp", net_x, net_z, grid, 800, 1, SEED)
    for j, t in enumerate(grid):
        target = gene_mean_protein(0.2625, t)
        assert abs(s.mean_x[j] - target) < 4 * s.se_mean_x[j]
    assert np.all(s.var_diff >= 0.0)
    assert s.var_diff[1] > 0.0


def test_variance_trajectory_worker_invariance():
    net_x, net_z = _gene_pair()
    grid = np.linspace(0.0, 2.0, 4)
    a = variance_trajectory("crp", net_x, net_z, grid, 600, 1, SEED, workers=1)
    b = variance_trajectory("crp", net_x, net_z, grid, 600, 1, SEED, workers=3)
    for f in ("mean_diff", "var_diff", "se_mean", "se_var", "mean_x", "se_mean_x"):
        assert np.array_equal(getattr(a, f), getattr(b, f)), f


def test_variance_trajectory_validation():
    net = parse_network(GENE)
    with pytest.raises(ValueError, match="at least 2"):
        variance_trajectory("split", net, net, [1.0], 1, 1, SEED)
    with pytest.raises(ValueError, match="unknown coupling"):
        variance_trajectory("frog", net, net, [1.0], 4, 1, SEED)
    with pytest.raises(ValueError, match="out of range"):
        variance_trajectory("split", net, net, [1.0], 4, 7, SEED)


# ---------------------------------------------------------------------------
# sensitivity
# ---------------------------------------------------------------------------


def test_sensitivity_fd_matches_oracle_quotient():
    net_x, net_z = _gene_pair()
    t = 5.0
    est, se = sensitivity_fd("split", net_x, net_z, 0.025, t, 800, 1, SEED)
    target = (gene_mean_protein(0.2625, t) - gene_mean_protein(0.2375, t)) / 0.025
    assert se > 0
    assert abs(est - target) < 4 * se


def test_sensitivity_fd_identical_nets_is_exact_zero():
    net = parse_network(GENE)
    for spec in ("crp", "split"):
        est, se = sensitivity_fd(spec, net, net, 0.025, 2.0, 32, 1, SEED)
        assert est == 0.0
        assert se == 0.0


def test_sensitivity_fd_zero_spread_errors():
    net = parse_network(GENE)
    with pytest.raises(ValueError, match="spread"):
        sensitivity_fd("split", net, net, 0.0, 2.0, 16, 1, SEED)
    with pytest.raises(ValueError, match="spread"):
        sensitivity_fd("split", net, net, -0.1, 2.0, 16, 1, SEED)


# ---------------------------------------------------------------------------
# first-jump probability
# ---------------------------------------------------------------------------


def test_alpha_delta_closed_form():
    assert alpha_delta(1.0, 0.5, 1, 1.0) == pytest.approx((2.0 / 3.0) * (1.0 - math.exp(-1.5)))
    assert alpha_delta(1.0, 0.5, 1, 1.0) == pytest.approx(0.51791, abs=5e-6)
    theta, x0, delta = 0.7, 3, 0.9
    assert alpha_delta(theta, 0.0, x0, delta) == 1.0 - math.exp(-theta * x0 * delta)
    assert alpha_delta(2.0, 1.0, 1, 1e3) == pytest.approx(2.0 / 3.0, rel=1e-12)
    for bad in ((0.0, 0.5, 1, 1.0), (1.0, -0.1, 1, 1.0), (1.0, 0.5, 0, 1.0),
                (1.0, 0.5, 1.5, 1.0), (1.0, 0.5, 1, 0.0)):
        with pytest.raises(ValueError):
            alpha_delta(*bad)


def test_shared_first_jump_frequency_agrees_with_path_records():
    net_x, net_z = _alpha_pair()
    n = 300
    freq, _ = shared_first_jump_frequency(net_x, net_z, [1], [1], 1.0, n, SEED)
    hits = 0
    for i in range(n):
        p = simulate_split(net_x, net_z, [1], [1], 1.0, (SEED, i))
        if p.n_events and p.which[0] == WHICH_BOTH:
            hits += 1
    assert freq == hits / n


def test_shared_first_jump_frequency_matches_alpha_delta():
    theta, h = 1.0, 0.5
    net_x, net_z = _alpha_pair(theta, h)
    n = 20_000
    freq, se = shared_first_jump_frequency(net_x, net_z, [1], [1], 1.0, n, SEED)
    assert se == pytest.approx(math.sqrt(freq * (1 - freq) / n))
    assert abs(freq - alpha_delta(theta, h, 1, 1.0)) < 3.5 * se
