"""
Markov Layer Tests
Chain validation, spectra, hitting times, schedules and the adiabatic sequence
"""

import math

import networkx as nx
import numpy as np
import pytest
from numpy.testing import assert_allclose

from interp_walks.errors import (
    AllMarked,
    BadSpec,
    EmptyMarkedSet,
    NonStochastic,
    NonStochasticQ,
    NotErgodic,
    NotReversible,
    QOutOfRange,
    ROutOfRange,
    SOutOfRange,
)
from interp_walks.markov import (
    absorbing,
    adiabatic_sequence,
    alternate_angle,
    ambainis_parameters,
    discriminant,
    graph_walk,
    hitting_time_classical,
    hitting_time_spectral,
    interpolate,
    interpolated_hitting_time,
    lazy,
    marked_set,
    max_hitting_time,
    max_equal_angle_steps,
    schedule_from_Q,
    schedule_equal_angle,
    schedule_stationary,
    s_of_theta,
    spectrum,
    stationary_amplitudes,
    stationary_power,
    theta_of_s,
    validate,
)


def test_validate_rejects_bad_matrices():
    """Row sums, periodicity and detailed balance are all checked"""
    with pytest.raises(NonStochastic):
        validate([[0.5, 0.6], [0.5, 0.5]])
    with pytest.raises(NotErgodic):
        validate([[0.0, 1.0], [1.0, 0.0]])

    drift = [[0.5, 0.4, 0.1], [0.1, 0.5, 0.4], [0.4, 0.1, 0.5]]
    chain = validate(drift)
    assert not chain.reversible
    with pytest.raises(NotReversible):
        validate(drift, require_reversible=True)


def test_two_chain_basics(two_chain):
    assert_allclose(two_chain.pi, [0.5, 0.5])
    assert two_chain.reversible and two_chain.is_lazy
    assert_allclose(two_chain.spectral.eigenvalues, [1.0, 0.0], atol=1e-12)
    assert two_chain.spectral.gap == pytest.approx(1.0)


def test_lazy_cycle_rows(lazy_cycle):
    P = lazy_cycle(4).P
    for x in range(4):
        assert_allclose(np.roll(P[x], -x), [0.5, 0.25, 0.0, 0.25])


def test_lazy_shares_stationary_distribution(random_reversible):
    chain = random_reversible(6)
    raw = 2.0 * chain.P - np.eye(6)
    assert_allclose(lazy(raw).pi, chain.pi, atol=1e-12)
    assert_allclose(stationary_power(chain), chain.pi, atol=1e-10)
    assert chain.detailed_balance_residual() < 1e-12


def test_discriminant_spectrum_reconstructs(random_reversible):
    chain = random_reversible(7, seed=3)
    D = discriminant(chain)
    assert_allclose(D, D.T)
    data = spectrum(D)
    assert np.all(np.diff(data.eigenvalues) <= 1e-14)
    assert_allclose(data.reconstruct(), D, atol=1e-12)
    assert_allclose(np.abs(data.eigenvectors[:, 0]), np.sqrt(chain.pi), atol=1e-10)


def test_cycle_gap(lazy_cycle):
    assert lazy_cycle(8).spectral.gap == pytest.approx((1 - math.cos(math.pi / 4)) / 2)


def test_marked_set_errors():
    assert marked_set([3, 1, 3], 5) == (1, 3)
    with pytest.raises(EmptyMarkedSet):
        marked_set([], 4)
    with pytest.raises(AllMarked):
        marked_set([0, 1], 2)


def test_absorbing_rows(lazy_cycle):
    chain = lazy_cycle(5)
    Pprime = absorbing(chain, 2).P
    assert_allclose(Pprime[2], np.eye(5)[2])
    assert_allclose(np.delete(Pprime, 2, axis=0), np.delete(chain.P, 2, axis=0))


def test_interpolate_range(two_chain):
    Pprime = absorbing(two_chain, 1)
    with pytest.raises(SOutOfRange):
        interpolate(two_chain, Pprime, 1.5)
    mid = interpolate(two_chain, Pprime, 0.5)
    assert_allclose(mid.P, [[0.5, 0.5], [0.25, 0.75]])
    assert mid.spectral.eigenvalues[1] == pytest.approx(0.25)


def test_hitting_time_two_chain(two_chain):
    assert hitting_time_spectral(two_chain, 1) == pytest.approx(2.0)
    assert hitting_time_classical(two_chain, 1) == pytest.approx(2.0)


@pytest.mark.parametrize("n", [5, 8])
def test_hitting_time_methods_agree(lazy_cycle, random_reversible, n):
    for chain in (lazy_cycle(n), random_reversible(n)):
        for g in range(n):
            assert hitting_time_spectral(chain, g) == pytest.approx(hitting_time_classical(chain, g), rel=1e-9)


def test_cycle_hitting_time(lazy_cycle):
    chain = lazy_cycle(8)
    assert hitting_time_spectral(chain, 0) == pytest.approx(24.0)
    assert max_hitting_time(chain) == pytest.approx(24.0)


def test_interpolated_hitting_time_two_chain(two_chain):
    for s in (0.0, 0.25, 0.5, 0.9):
        assert interpolated_hitting_time(two_chain, 1, s) == pytest.approx(2.0 / (2.0 - s) ** 2)
    with pytest.raises(SOutOfRange):
        interpolated_hitting_time(two_chain, 1, 1.0)


def test_stationary_amplitudes_are_top_eigenvector(random_reversible):
    chain = random_reversible(6, seed=5)
    Pprime = absorbing(chain, 4)
    for s in (0.0, 0.3, 0.8):
        top = interpolate(chain, Pprime, s).spectral.eigenvectors[:, 0]
        assert_allclose(top, stationary_amplitudes(chain, 4, s), atol=1e-9)


def test_angle_conversions():
    pi_g = 0.05
    assert theta_of_s(pi_g, 1.0) == pytest.approx(math.pi / 2)
    assert math.sin(theta_of_s(pi_g, 0.0)) ** 2 == pytest.approx(pi_g)
    for s in (0.1, 0.5, 0.97):
        assert s_of_theta(pi_g, theta_of_s(pi_g, s)) == pytest.approx(s)
    assert math.isnan(alternate_angle(0.3))
    assert alternate_angle(1.0) == pytest.approx(math.pi / 2)


def test_equal_angle_schedule_values():
    schedule = schedule_equal_angle(0.01, 4)
    assert schedule.anchor == "pi_bar"
    assert schedule.s[0] == pytest.approx(0.904322, abs=1e-6)
    assert schedule.s[-1] == pytest.approx(0.998934, abs=1e-6)
    assert list(schedule.s) == sorted(schedule.s)
    assert_allclose(np.diff(schedule.theta), math.pi / 10)


def test_equal_angle_schedule_feasibility():
    assert max_equal_angle_steps(1 / 8) == 3
    assert max_equal_angle_steps(1 / 16) == 5
    schedule_equal_angle(1 / 8, 3)
    with pytest.raises(ROutOfRange):
        schedule_equal_angle(1 / 8, 4)


def test_stationary_schedule_spans_to_marked():
    pi_g = 1 / 8
    schedule = schedule_stationary(pi_g, 5)
    assert schedule.anchor == "pi"
    assert schedule.theta[0] == pytest.approx(math.asin(math.sqrt(pi_g)))
    assert all(0.0 < s < 1.0 for s in schedule.s)
    assert schedule.theta[-1] < math.pi / 2


def test_schedule_from_meta_chain():
    single = schedule_from_Q([0.7], [[1.0]], 0, 4, pi_g=0.1)
    assert single.s == (0.7,) * 4
    assert single.source == "single"
    assert len(single.theta) == 5

    S = [0.0, 0.5, 0.75]
    Q = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]
    seq = schedule_from_Q(S, Q, 0, 4, seed=7)
    assert seq.s == (0.0, 0.5, 0.75, 0.75)
    assert seq.source == "sequential"

    uniform = np.full((3, 3), 1 / 3)
    first = schedule_from_Q(S, uniform, 1, 10, seed=11)
    assert first.source == "uniform"
    assert first.s == schedule_from_Q(S, uniform, 1, 10, seed=11).s

    with pytest.raises(NonStochasticQ):
        schedule_from_Q(S, [[0.5, 0.0, 0.0]] * 3, 0, 3)
    with pytest.raises(SOutOfRange):
        schedule_from_Q([1.5], [[1.0]], 0, 2)


def test_ambainis_parameters():
    assert ambainis_parameters(8.0) == (0.0, 0.5, 0.75, 0.875)


def test_adiabatic_sequence_on_cycle(lazy_cycle):
    sequence = adiabatic_sequence(lazy_cycle(16), 0, 0.99)
    assert sequence.r == 11
    assert len(sequence.overlaps) == 11
    assert np.all(sequence.overlaps >= 0.99)
    assert sequence.steps[0].s == pytest.approx(1.0)
    assert sequence.steps[-1].s == 0.0
    with pytest.raises(QOutOfRange):
        adiabatic_sequence(lazy_cycle(16), 0, 1.0)


def test_graph_walk_on_complete_graph():
    chain = graph_walk(nx.complete_graph(3))
    assert_allclose(chain.P[0], [0.5, 0.25, 0.25])


def test_interpolated_hitting_time_grows_to_hitting_time(lazy_cycle):
    chain = lazy_cycle(7)
    ht = hitting_time_spectral(chain, 3)
    values = [interpolated_hitting_time(chain, 3, s) for s in (0.0, 0.5, 0.9, 0.999999)]
    assert all(v <= ht + 1e-9 for v in values)
    assert values == sorted(values)
    assert values[-1] == pytest.approx(ht, rel=1e-4)


def test_adiabatic_sequence_needs_lazy_chain():
    cycle = validate(nx.to_numpy_array(nx.cycle_graph(5)) / 2.0)
    assert not cycle.is_lazy
    with pytest.raises(BadSpec):
        adiabatic_sequence(cycle, 0, 0.9)
