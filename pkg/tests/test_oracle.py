"""
Oracle Tests
Repeated squaring, Monte Carlo hitting times and dense materialization
"""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from interp_walks.errors import BadSpec, DimensionCap
from interp_walks.markov import absorbing, discriminant, hitting_time_classical, interpolate, spectrum
from interp_walks.oracle import (
    dt_apply,
    dt_reference,
    materialize,
    materialize_qee,
    materialize_qff,
    materialize_r0,
    materialize_walk,
    mc_hitting,
    unitarity_residual,
    unitary_reference,
)
from interp_walks.qff import QffConfig, u_qff_filter
from interp_walks.walkspace import walk_eigensystem


def test_dt_apply_small_powers(two_chain):
    D = discriminant(two_chain)
    psi = np.array([1.0, 0.0])
    assert_allclose(dt_apply(D, 0, psi), psi)
    assert_allclose(dt_apply(D, 1, psi), D @ psi)
    assert_allclose(dt_apply(D, 8, psi), [0.5, 0.5], atol=1e-12)
    assert dt_reference(D, 3, psi).method == "repeated-squaring"


def test_dt_apply_matches_eigenbasis(random_reversible):
    chain = random_reversible(6, seed=3)
    D = discriminant(chain)
    data = spectrum(D)
    psi = np.random.default_rng(0).standard_normal(6)
    for t in (5, 13, 64):
        assert_allclose(dt_apply(D, t, psi), data.operator(data.eigenvalues ** t) @ psi, atol=1e-12)


def test_fast_forward_filter_is_close_to_power(random_reversible):
    chain = random_reversible(5, seed=7)
    step = interpolate(chain, absorbing(chain, 0), 0.5)
    D = discriminant(step)
    psi = np.sqrt(chain.pi)
    for t in (20, 60):
        config = QffConfig.build(t, 0.01)
        gap = np.linalg.norm(u_qff_filter(step.spectral, config, psi) - dt_apply(D, t, psi))
        assert gap <= config.error_bound + 1e-12


def test_mc_hitting_two_chain(two_chain):
    mean, stderr = mc_hitting(two_chain, {1}, 100_000, seed=0)
    assert abs(mean - 2.0) <= 4 * stderr
    assert stderr < 0.01


def test_mc_hitting_cycle_agrees_with_linear_solve(lazy_cycle):
    chain = lazy_cycle(8)
    mean, stderr = mc_hitting(chain, 0, 20_000, seed=5, jobs=2)
    assert abs(mean - hitting_time_classical(chain, 0)) <= 4 * stderr


def test_mc_hitting_is_deterministic(lazy_cycle):
    chain = lazy_cycle(5)
    first = mc_hitting(chain, 2, 5000, seed=9, batch=1000)
    second = mc_hitting(chain, 2, 5000, seed=9, batch=1000, jobs=3)
    assert first == second


def test_mc_hitting_rejects_marked_start(two_chain):
    with pytest.raises(BadSpec):
        mc_hitting(two_chain, 1, 10, start=1)
    with pytest.raises(BadSpec):
        mc_hitting(two_chain, 1, 0)


def test_walk_materialization(two_chain):
    W = materialize_walk(two_chain)
    assert W.shape == (4, 4)
    assert unitarity_residual(W) < 1e-11
    assert unitary_reference(W).residual < 1e-11


def test_reflection_pattern():
    R = materialize_r0(3)
    expected = np.tile([1.0, -1.0, -1.0], 3)
    assert_allclose(R, np.diag(expected))


def test_phase_estimation_columns(two_chain):
    """Columns of U_qee send Psi+ |0> to Psi+ |1> for phi = pi/2."""
    U = materialize_qee(two_chain, 2)
    assert U.shape == (16, 16)
    assert unitarity_residual(U) < 1e-10
    pair = walk_eigensystem(two_chain).pairs[0]
    state = np.zeros((2, 2, 4), dtype=complex)
    state[:, :, 0] = pair.plus
    expected = np.zeros((2, 2, 4), dtype=complex)
    expected[:, :, 1] = pair.plus
    assert_allclose(U @ state.ravel(), expected.ravel(), atol=1e-10)


def test_fast_forward_materialization(random_reversible):
    chain = random_reversible(3)
    config = QffConfig.build(6, 0.1)
    U = materialize_qff(chain, config)
    assert unitarity_residual(U) < 1e-10
    assert_allclose(materialize_qff(chain, config, adjoint=True), U.conj().T, atol=1e-10)


def test_materialize_cap():
    with pytest.raises(DimensionCap):
        materialize(lambda psi: psi, (10, 10), cap=50)
