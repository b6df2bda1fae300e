"""
Phase Estimation Tests
Explicit circuit, projected filter and ancilla sizing
"""

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from interp_walks.errors import AncillaTooLarge, BadSpec, DimensionMismatch
from interp_walks.markov import absorbing, interpolate
from interp_walks.qpe import (
    QpeConfig,
    filter_factors,
    gamma1,
    inverse_qft,
    phase_sum,
    u_qee_explicit,
    u_qee_explicit_projected,
    u_qee_filter,
    walsh_hadamard,
)
from interp_walks.walkspace import CallCounter, WalkOperator, embed, walk_eigensystem


def test_gamma1_and_tau():
    value = gamma1(11, 24.0, 0.01)
    assert value == pytest.approx(11 * math.pi * math.sqrt(24.0) / (math.sqrt(2.0) * 0.01))
    assert 11900 < value < 12000
    assert QpeConfig.from_gamma(value).tau == 14
    assert QpeConfig.from_gamma(0.5).tau == 1
    with pytest.raises(BadSpec):
        QpeConfig(3, 20.0)
    with pytest.raises(BadSpec):
        QpeConfig.from_gamma(4.0, mode="approximate")


def test_phase_sum_limits():
    assert phase_sum(0.0, 5)[0] == pytest.approx(1.0)
    # phi = 2 pi m / N makes the sum vanish
    assert abs(phase_sum(2 * math.pi / 8, 3)[0]) < 1e-14
    phi = np.array([0.3, 1.1])
    direct = np.exp(1j * np.outer(phi, np.arange(16))).mean(axis=1)
    assert_allclose(phase_sum(phi, 4), direct, atol=1e-14)


def test_ancilla_transforms_are_unitary():
    rng = np.random.default_rng(0)
    state = rng.standard_normal((2, 2, 8)) + 1j * rng.standard_normal((2, 2, 8))
    for out in (walsh_hadamard(state), inverse_qft(state)):
        assert np.linalg.norm(out) == pytest.approx(np.linalg.norm(state))
    assert_allclose(walsh_hadamard(walsh_hadamard(state)), state, atol=1e-12)


def test_exact_phase_lands_on_one_register_value(two_chain):
    """phi = pi/2 with 4 ancilla values: Psi+ goes to |1>, Psi- to |3>."""
    pair = walk_eigensystem(two_chain).pairs[0]
    op = WalkOperator(two_chain)
    for vector, expected in ((pair.plus, 1), (pair.minus, 3)):
        state = np.zeros((2, 2, 4), dtype=complex)
        state[:, :, 0] = vector
        out = u_qee_explicit(op, 2, state)
        register = np.sum(np.abs(out) ** 2, axis=(0, 1))
        assert register[expected] == pytest.approx(1.0)


def test_stationary_state_passes_unchanged(random_reversible):
    chain = random_reversible(5)
    psi = np.sqrt(chain.pi)
    out = u_qee_explicit_projected(WalkOperator(chain), 3, psi)
    assert_allclose(out, psi, atol=1e-12)


@pytest.mark.parametrize("tau", [1, 3, 5])
def test_filter_matches_explicit_circuit(random_reversible, tau):
    chain = random_reversible(5, seed=2)
    step = interpolate(chain, absorbing(chain, 3), 0.6)
    psi = np.random.default_rng(tau).standard_normal(5)
    psi /= np.linalg.norm(psi)
    explicit = u_qee_explicit_projected(WalkOperator(step), tau, psi)
    filtered, lost = u_qee_filter(step.spectral, tau, psi)
    assert_allclose(explicit, filtered, atol=1e-10)
    assert lost == pytest.approx(math.sqrt(1.0 - np.linalg.norm(filtered) ** 2), abs=1e-9)


def test_filter_factors_are_real_part(lazy_cycle):
    data = lazy_cycle(6).spectral
    factors = filter_factors(data, 4)
    assert factors[0] == pytest.approx(1.0)
    assert_allclose(factors, np.real(phase_sum(data.phases, 4)))
    assert np.all(np.abs(factors) <= 1.0 + 1e-12)


def test_explicit_call_count(two_chain):
    counter = CallCounter()
    op = WalkOperator(two_chain, counter=counter)
    u_qee_explicit(op, 4, embed(np.array([1.0, 0.0]), (16,)))
    assert counter.value == 15


def test_shape_and_budget_checks(two_chain):
    op = WalkOperator(two_chain)
    with pytest.raises(DimensionMismatch):
        u_qee_explicit(op, 2, np.zeros((2, 2, 8)))
    with pytest.raises(AncillaTooLarge):
        u_qee_explicit_projected(op, 6, np.array([1.0, 0.0]), budget=100)
