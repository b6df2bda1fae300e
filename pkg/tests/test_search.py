"""
Search Driver Tests
Phase-estimation and fast-forwarding search, qsampling and success curves
"""

import logging
import math

import networkx as nx
import numpy as np
import pytest

from interp_walks.errors import BadSpec, ScheduleInfeasible
from interp_walks.markov import (
    absorbing,
    ambainis_parameters,
    hitting_time_spectral,
    interpolate,
    schedule_from_Q,
    schedule_equal_angle,
    unmarked_amplitudes,
    validate,
)
from interp_walks.search import (
    CURVE_COLUMNS,
    alg1_search,
    alg2_search,
    baseline_curve,
    bound,
    qsample,
    resolve_schedule,
    success_curve,
)
from interp_walks.walkspace import WalkOperator, embed


def test_bound_values():
    assert bound(10, 0.0) == pytest.approx(0.79844, abs=1e-5)
    assert bound(11, 0.0) == pytest.approx(0.81367, abs=1e-5)
    assert bound(11, 0.01) == pytest.approx(0.7957, abs=1e-4)
    assert bound(1, 0.9) == 0.0
    assert all(bound(r + 1, 0.0) > bound(r, 0.0) for r in range(1, 20))


def test_schedule_resolution(caplog):
    assert resolve_schedule(1 / 8, 3, "equal-angle").kind == "equal-angle"
    with pytest.raises(ScheduleInfeasible):
        resolve_schedule(1 / 8, 4, "equal-angle")
    with caplog.at_level(logging.WARNING):
        fallback = resolve_schedule(1 / 8, 4, "auto")
    assert fallback.kind == "stationary"
    assert "using stationary schedule" in caplog.text
    given = schedule_equal_angle(0.01, 2)
    assert resolve_schedule(0.01, 2, given) is given
    with pytest.raises(BadSpec):
        resolve_schedule(0.1, 2, "linear")


def test_drivers_need_lazy_chains():
    cycle = validate(nx.to_numpy_array(nx.cycle_graph(5)) / 2.0)
    with pytest.raises(BadSpec):
        alg1_search(cycle, 0, 1, 0.1)


def test_alg1_filter_meets_bound(lazy_cycle):
    report = alg1_search(lazy_cycle(8), 0, 3, 0.05, schedule="equal-angle")
    assert report.schedule.kind == "equal-angle"
    assert report.p_initial_hit == pytest.approx(1 / 8)
    assert report.p_succ >= report.bound
    assert report.tau == 10
    assert report.controlled_w_calls == 3 * (2 ** 10 - 1)
    assert report.nominal_calls == 3 * math.ceil(report.gamma)
    assert len(report.steps) == 3
    assert all(step.leak <= 0.05 / 3 + 1e-12 for step in report.steps)


def test_alg1_explicit_matches_filter(lazy_cycle):
    chain = lazy_cycle(8)
    filtered = alg1_search(chain, 0, 2, 0.1, mode="filter", schedule="equal-angle")
    explicit = alg1_search(chain, 0, 2, 0.1, mode="explicit", schedule="equal-angle")
    assert explicit.p_succ == pytest.approx(filtered.p_succ, abs=1e-9)
    assert explicit.controlled_w_calls == filtered.controlled_w_calls
    for a, b in zip(explicit.steps, filtered.steps):
        assert a.discarded == pytest.approx(b.discarded, abs=1e-8)


def test_alg1_literal_keeps_garbage(lazy_cycle):
    chain = lazy_cycle(6)
    explicit = alg1_search(chain, 2, 1, 0.1, mode="explicit", schedule="equal-angle")
    literal = alg1_search(chain, 2, 1, 0.1, mode="explicit-literal", schedule="equal-angle")
    assert literal.p_conditional >= explicit.p_conditional - 1e-12
    assert literal.p_conditional <= 1.0 + 1e-12


def test_alg1_stationary_anchor(random_reversible):
    chain = random_reversible(6, seed=2)
    report = alg1_search(chain, 1, 3, 0.05, schedule="stationary")
    assert report.schedule.anchor == "pi"
    assert report.p_initial_hit == 0.0
    assert report.p_succ >= report.bound


def test_alg1_max_hitting_time_source(lazy_cycle):
    chain = lazy_cycle(6)
    measured = alg1_search(chain, 0, 2, 0.1)
    worst = alg1_search(chain, 0, 2, 0.1, ht_source="max")
    assert worst.ht >= measured.ht - 1e-9
    with pytest.raises(BadSpec):
        alg1_search(chain, 0, 2, 0.1, ht_source="guess")


def test_alg2_step_parameters(two_chain):
    report = alg2_search(two_chain, 1, 2, 0.05, mode="filter", schedule="stationary")
    assert [step.t for step in report.steps] == [14, 17]
    assert report.tau == 4
    assert report.controlled_w_calls == 2 * 2 * (2 ** 4 - 1)
    assert report.p_succ >= report.bound


def test_alg2_explicit_tracking_modes(two_chain):
    full = alg2_search(two_chain, 1, 2, 0.05, schedule="stationary", track="all")
    live = alg2_search(two_chain, 1, 2, 0.05, schedule="stationary", track="live")
    assert full.tracking == "all" and live.tracking == "live"
    assert full.p_conditional == pytest.approx(live.p_conditional, abs=1e-12)
    assert full.p_unconditioned is not None and live.p_unconditioned is None
    assert full.p_unconditioned >= full.p_conditional - 1e-12
    assert full.p_succ >= full.bound
    assert full.controlled_w_calls == 2 * 2 * (2 ** full.tau - 1)


def test_alg2_uses_smaller_ancilla(lazy_cycle):
    chain = lazy_cycle(8)
    qpe_run = alg1_search(chain, 0, 3, 0.01, schedule="equal-angle")
    qff_run = alg2_search(chain, 0, 3, 0.01, mode="filter", schedule="equal-angle")
    assert qff_run.tau < qpe_run.tau
    assert qff_run.p_succ >= qff_run.bound


def test_qsample_filter_tracks_ideal_overlap(lazy_cycle):
    chain = lazy_cycle(8)
    r, epsilon = 2, 0.05
    _state, report = qsample(chain, 0, r, epsilon, mode="filter")
    start = math.asin(math.sqrt(1 / 8))
    ideal = math.cos((math.pi / 2 - start) / (r + 1)) ** (r + 1)
    assert abs(math.sqrt(report.fidelity) - ideal) <= epsilon
    assert [step.i for step in report.steps] == [2, 1]


def test_qsample_explicit(lazy_cycle):
    chain = lazy_cycle(8)
    r, epsilon = 2, 0.05
    state, report = qsample(chain, 0, r, epsilon)
    start = math.asin(math.sqrt(1 / 8))
    ideal = math.cos((math.pi / 2 - start) / (r + 1)) ** (r + 1)
    assert report.fidelity >= (ideal - epsilon) ** 2
    assert report.fidelity <= report.accepted_probability + 1e-12
    assert report.accepted_probability <= 1.0 + 1e-12
    assert state.amplitudes.shape == (8, 8, 2 ** report.tau, 2)


def test_curve_truncates_equal_angle_schedule(lazy_cycle, caplog):
    with caplog.at_level(logging.WARNING):
        curve = success_curve(lazy_cycle(8), 0, 4, 0.05, schedule="equal-angle")
    assert [row["r"] for row in curve.rows] == [1, 2, 3]
    assert curve.truncated_at == 4
    assert curve.note
    assert len(curve.baseline) == 4
    assert list(curve.to_frame().columns) == CURVE_COLUMNS


def test_curve_parallel_rows_match(random_reversible):
    chain = random_reversible(5, seed=1)
    serial = success_curve(chain, 0, 4, 0.05, schedule="stationary")
    parallel = success_curve(chain, 0, 4, 0.05, schedule="stationary", jobs=3)
    assert [row["r"] for row in parallel.rows] == [1, 2, 3, 4]
    for a, b in zip(serial.rows, parallel.rows):
        assert a["p_succ"] == pytest.approx(b["p_succ"], abs=1e-12)
    assert all(row["bound"] == pytest.approx(bound(row["r"], 0.05)) for row in serial.rows)
    assert all(row["p_succ"] >= row["bound"] for row in serial.rows)


@pytest.mark.slow
def test_curve_on_sixteen_cycle(lazy_cycle):
    curve = success_curve(lazy_cycle(16), 0, 12, 0.01, jobs=4)
    frame = curve.to_frame()
    assert len(frame) == 12
    assert (frame["p_succ"] >= frame["bound"]).all()
    assert frame["controlled_w_calls"].is_monotonic_increasing


def test_alg2_explicit_close_to_filter(two_chain):
    epsilon = 0.05
    explicit = alg2_search(two_chain, 1, 2, epsilon, schedule="stationary")
    filtered = alg2_search(two_chain, 1, 2, epsilon, mode="filter", schedule="stationary")
    gap = abs(math.sqrt(explicit.p_conditional) - math.sqrt(filtered.p_conditional))
    assert gap <= 2 * epsilon


def test_alg1_on_sampled_doubling_schedule(lazy_cycle):
    chain = lazy_cycle(8)
    ht = hitting_time_spectral(chain, 0)
    S = ambainis_parameters(ht)
    Q = np.full((len(S), len(S)), 1.0 / len(S))
    schedule = schedule_from_Q(S, Q, 0, 3, seed=4, pi_g=1 / 8)
    report = alg1_search(chain, 0, 3, 0.05, schedule=schedule)
    assert report.schedule is schedule
    assert report.schedule.source == "uniform"
    assert len(report.steps) == 3
    assert 0.0 <= report.p_succ <= 1.0 + 1e-12


def test_alg1_rejects_epsilon_before_running(lazy_cycle):
    chain = lazy_cycle(6)
    for epsilon in (0.0, 1.0, 2.5):
        with pytest.raises(BadSpec):
            alg1_search(chain, 0, 2, epsilon)
    with pytest.raises(BadSpec):
        success_curve(chain, 0, 3, 1.0)


def test_baseline_walks_without_projection(lazy_cycle):
    """Baseline rows are W(s*)^(r T) applied to |pi-bar>|0-bar>."""
    chain = lazy_cycle(6)
    rows = baseline_curve(chain, 0, 4, 0.05)
    pi_g = 1 / 6
    s_fixed = (1 - 2 * pi_g) / (1 - pi_g)
    span = math.ceil(math.sqrt(hitting_time_spectral(chain, 0)))
    W = WalkOperator(interpolate(chain, absorbing(chain, 0), s_fixed)).matrix()
    start = embed(unmarked_amplitudes(chain, 0)).reshape(-1)
    for row in rows:
        assert row["s"] == pytest.approx(s_fixed)
        assert row["walk_steps"] == row["r"] * span
        psi = np.linalg.matrix_power(W, row["walk_steps"]) @ start
        hit = np.sum(np.abs(psi.reshape(6, 6)[0]) ** 2)
        assert row["p_succ"] == pytest.approx(pi_g + (1 - pi_g) * hit, abs=1e-10)
        assert row["bound"] == pytest.approx(bound(row["r"], 0.05))
