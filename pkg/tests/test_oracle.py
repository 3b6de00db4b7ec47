import math

import numpy as np
import pytest

from coupledssa.model import parse_network, apply_perturbation, Perturbation
from coupledssa.oracle import (
    TruncatedSpace,
    build_generator,
    initial_distribution,
    is_affine,
    moment_ode_mean,
    transient_distribution,
    transient_expectation,
)

from helpers import BIRTH_DEATH, GENE, QUADRATIC, gene_mean_mrna, gene_mean_protein


def test_space_enumeration_roundtrip():
    space = TruncatedSpace((3, 2))
    assert space.n_states == 12
    seen = set()
    for ordinal in range(space.n_states):
        s = space.state(ordinal)
        assert space.index(s) == ordinal
        seen.add(tuple(s))
    assert len(seen) == 12
    states = space.all_states()
    assert states.shape == (12, 2)
    # C order: second species varies fastest
    assert list(states[0]) == [0, 0] and list(states[1]) == [0, 1]


def test_space_rejects_bad_bounds_and_states():
    with pytest.raises(ValueError):
        TruncatedSpace((-1,))
    space = TruncatedSpace((4,))
    with pytest.raises(ValueError):
        space.index([5])


def test_birth_death_generator_exact_rows():
    net = parse_network(BIRTH_DEATH)
    gen = build_generator(net, TruncatedSpace((2,)))
    q = gen.matrix.toarray()
    expected = np.array(
        [
            [-1.0, 1.0, 0.0],
            [1.0, -2.0, 1.0],
            [0.0, 2.0, -2.0],
        ]
    )
    assert np.allclose(q, expected)
    # the birth out of state 2 was clipped
    assert gen.dropped_rate[2] == 1.0
    assert gen.max_dropped_rate == 1.0


def test_generator_rows_sum_to_zero():
    net = parse_network(GENE)
    gen = build_generator(net, TruncatedSpace((6, 9)))
    sums = np.asarray(gen.matrix.sum(axis=1)).ravel()
    assert np.max(np.abs(sums)) < 1e-12
    assert gen.max_dropped_rate > 0  # a finite box must clip something here


def test_birth_death_transient_mean():
    net = parse_network(BIRTH_DEATH)
    space = TruncatedSpace((40,))
    gen = build_generator(net, space)
    p0 = initial_distribution(net, space)
    counts = space.all_states()[:, 0].astype(float)

    assert transient_expectation(gen, p0, 0.0, counts) == pytest.approx(0.0, abs=1e-14)
    mean_1 = transient_expectation(gen, p0, 1.0, counts)
    assert mean_1 == pytest.approx(1.0 - math.exp(-1.0), abs=1e-9)
    # total mass conserved
    ones = np.ones(space.n_states)
    assert transient_expectation(gen, p0, 1.0, ones) == pytest.approx(1.0, abs=1e-12)
    # near stationarity the law is Poisson(1)
    at_zero = (space.all_states()[:, 0] == 0).astype(float)
    p_zero = transient_expectation(gen, p0, 30.0, at_zero)
    assert p_zero == pytest.approx(math.exp(-1.0), abs=1e-6)


def test_transient_accepts_callable_observable():
    net = parse_network(BIRTH_DEATH)
    space = TruncatedSpace((30,))
    gen = build_generator(net, space)
    p0 = initial_distribution(net, space)
    val = transient_expectation(gen, p0, 1.0, lambda s: s[:, 0].astype(float))
    assert val == pytest.approx(1.0 - math.exp(-1.0), abs=1e-9)


def test_uniformization_agrees_with_mean_ode_on_affine_net():
    net = parse_network(BIRTH_DEATH)
    space = TruncatedSpace((50,))
    gen = build_generator(net, space)
    p0 = initial_distribution(net, space)
    counts = space.all_states()[:, 0].astype(float)
    for t in (0.3, 0.7, 2.0):
        by_uniformization = transient_expectation(gen, p0, t, counts)
        by_ode = moment_ode_mean(net, [0.0], t)[0]
        assert by_uniformization == pytest.approx(by_ode, rel=1e-6)


def test_gene_mean_ode_matches_closed_form():
    net = parse_network(GENE)
    net_x, net_z = apply_perturbation(net, Perturbation("mrna_decay", 0.2625, 0.2375))
    for gamma, sub in ((0.2625, net_x), (0.2375, net_z)):
        m = moment_ode_mean(sub, [0.0, 0.0], 30.0)
        assert m[0] == pytest.approx(gene_mean_mrna(gamma, 30.0), rel=1e-7)
        assert m[1] == pytest.approx(gene_mean_protein(gamma, 30.0), rel=1e-7)
    # frozen reference values
    mx = moment_ode_mean(net_x, [0.0, 0.0], 30.0)
    mz = moment_ode_mean(net_z, [0.0, 0.0], 30.0)
    assert mx[0] == pytest.approx(7.6161513984, rel=1e-6)
    assert mx[1] == pytest.approx(76.1512054023, rel=1e-6)
    assert mz[0] == pytest.approx(8.4142759325, rel=1e-6)
    assert mz[1] == pytest.approx(84.1216515744, rel=1e-6)
    assert (mx[1] - mz[1]) / 0.025 == pytest.approx(-318.817847, rel=1e-5)


def test_moment_ode_handles_zero_time_and_validates():
    net = parse_network(GENE)
    m = moment_ode_mean(net, [3.0, 5.0], 0.0)
    assert np.allclose(m, [3.0, 5.0])
    with pytest.raises(ValueError):
        moment_ode_mean(net, [0.0], 1.0)  # wrong length
    with pytest.raises(ValueError):
        moment_ode_mean(net, [0.0, 0.0], -1.0)


def test_moment_ode_rejects_nonaffine():
    net = parse_network(QUADRATIC)
    assert not is_affine(net)
    assert is_affine(parse_network(GENE))
    with pytest.raises(ValueError, match="reactant"):
        moment_ode_mean(net, [15.0], 1.0)


def test_quadratic_boundary_mass_negligible():
    net = parse_network(QUADRATIC)
    space = TruncatedSpace((120,))
    gen = build_generator(net, space)
    p0 = initial_distribution(net, space)
    _, boundary = transient_distribution(gen, p0, 1.0)
    assert boundary < 1e-8


def test_initial_distribution_fixed_and_poisson():
    net = parse_network(BIRTH_DEATH)
    space = TruncatedSpace((10,))
    p0 = initial_distribution(net, space)
    assert p0[0] == 1.0 and p0.sum() == pytest.approx(1.0)

    net_p = parse_network(QUADRATIC)
    space_p = TruncatedSpace((160,))
    p = initial_distribution(net_p, space_p)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    from scipy.stats import poisson

    assert p[15] == pytest.approx(poisson.pmf(15, 15.0), rel=1e-10)


def test_initial_distribution_rejects_fixed_outside_box():
    net = parse_network("species A\ninit A 7\nreaction r: A -> 0 rate 1.0\n")
    with pytest.raises(ValueError, match="truncation too small"):
        initial_distribution(net, TruncatedSpace((5,)))


def test_generator_bounds_dimension_mismatch():
    net = parse_network(GENE)
    with pytest.raises(ValueError):
        build_generator(net, TruncatedSpace((5,)))
