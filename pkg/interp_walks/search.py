"""
Search Drivers: interpolated-walk search, qsampling and success curves

alg1_search chains projected phase-estimation steps along an interpolation
schedule; alg2_search chains five-register fast-forwarding steps; qsample
runs the fast-forwarding chain backwards from the marked vertex toward the
stationary state. success_curve sweeps r and records the analytic bound
next to every measured success probability.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .errors import BadSpec, ROutOfRange, ScheduleInfeasible
from .logger_config import SUCCESS_MESSAGES, WARNING_MESSAGES
from .markov import (
    InterpolationSchedule,
    MarkovChain,
    SpectralData,
    absorbing,
    angle_state,
    hitting_time_spectral,
    interpolate,
    marked_set,
    max_hitting_time,
    max_equal_angle_steps,
    require_reversible,
    schedule_equal_angle,
    schedule_stationary,
    theta_of_s,
    unmarked_amplitudes,
)
from .qff import FlagState, QffConfig, filter_values, u_qff_filter, u_qfs_step
from .qpe import (
    MEMORY_BUDGET,
    QpeConfig,
    check_budget,
    filter_factors,
    gamma1,
    u_qee_explicit,
    u_qee_explicit_projected,
    u_qee_filter,
)
from .walkspace import CallCounter, RegisterLayout, WalkOperator, WalkState, embed

logger = logging.getLogger(__name__)

SCHEDULES = ("auto", "equal-angle", "stationary")
TRACKING = ("auto", "all", "live")
FLAG_TRACK_BUDGET = 2 ** 22

ScheduleChoice = Union[str, InterpolationSchedule]


def bound(r: int, epsilon: float) -> float:
    """(cos^(r+1)(pi / (2 (r + 1))) - epsilon)^2, clamped at zero."""
    if r < 1:
        raise BadSpec(f"r must be at least 1, got {r}")
    if not 0.0 <= epsilon < 1.0:
        raise BadSpec(f"epsilon={epsilon} outside [0, 1)")
    overlap = math.cos(math.pi / (2 * (r + 1))) ** (r + 1)
    return max(overlap - epsilon, 0.0) ** 2


@dataclass
class StepRecord:
    """Diagnostics of one interpolation step."""
    i: int
    s: float
    theta: float
    gap: float
    tau: int
    leak: float
    discarded: float
    controlled_w_calls: int
    t: Optional[int] = None
    gamma: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "i": self.i,
            "s": float(self.s),
            "theta": float(self.theta),
            "gap": float(self.gap),
            "t": self.t,
            "gamma": self.gamma,
            "tau": self.tau,
            "leak": float(self.leak),
            "discarded": float(self.discarded),
            "controlled_w_calls": int(self.controlled_w_calls),
        }


@dataclass
class RunReport:
    """Outcome of a search run with its per-step diagnostics."""
    algorithm: str
    mode: str
    schedule: InterpolationSchedule
    marked: int
    pi_g: float
    r: int
    epsilon: float
    ht: float
    tau: int
    gamma: float
    p_initial_hit: float
    p_conditional: float
    p_succ: float
    bound: float
    controlled_w_calls: int
    nominal_calls: int
    steps: List[StepRecord] = field(default_factory=list)
    p_unconditioned: Optional[float] = None
    tracking: Optional[str] = None

    @property
    def total_leak(self) -> float:
        return float(sum(step.leak for step in self.steps))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": self.algorithm,
            "mode": self.mode,
            "schedule": self.schedule.to_dict(),
            "marked": self.marked,
            "pi_g": float(self.pi_g),
            "r": self.r,
            "epsilon": self.epsilon,
            "ht": float(self.ht),
            "tau": self.tau,
            "gamma": float(self.gamma),
            "p_initial_hit": float(self.p_initial_hit),
            "p_conditional": float(self.p_conditional),
            "p_succ": float(self.p_succ),
            "p_unconditioned": None if self.p_unconditioned is None else float(self.p_unconditioned),
            "bound": float(self.bound),
            "controlled_w_calls": int(self.controlled_w_calls),
            "nominal_calls": int(self.nominal_calls),
            "total_leak": self.total_leak,
            "tracking": self.tracking,
            "steps": [step.to_dict() for step in self.steps],
        }


# Shared plumbing

def _instance(chain: MarkovChain, g: int) -> Tuple[int, float]:
    require_reversible(chain)
    if not chain.is_lazy:
        raise BadSpec("quantum-walk drivers need a lazy chain; apply markov.lazy first")
    vertex = marked_set(g, chain.n)[0]
    return vertex, float(chain.pi[vertex])


def _check_epsilon(epsilon: float) -> None:
    if not 0.0 < epsilon < 1.0:
        raise BadSpec(f"epsilon={epsilon} outside (0, 1)")


def resolve_schedule(pi_g: float, r: int, schedule: ScheduleChoice = "auto") -> InterpolationSchedule:
    """Pick the interpolation schedule for a run."""
    if isinstance(schedule, InterpolationSchedule):
        return schedule
    if schedule not in SCHEDULES:
        raise BadSpec(f"unknown schedule '{schedule}'")
    if schedule == "stationary":
        return schedule_stationary(pi_g, r)
    try:
        return schedule_equal_angle(pi_g, r)
    except ROutOfRange as exc:
        if schedule == "equal-angle":
            raise ScheduleInfeasible(exc.message, **exc.details) from exc
        logger.warning(WARNING_MESSAGES['schedule_fallback'].format(r, exc.details.get("max_r")))
        return schedule_stationary(pi_g, r)


def _angles(schedule: InterpolationSchedule, pi_g: float) -> List[float]:
    start = 0.0 if schedule.anchor == "pi_bar" else math.asin(math.sqrt(pi_g))
    return [start] + [theta_of_s(pi_g, s) for s in schedule.s]


def _initial_vector(chain: MarkovChain, g: int, schedule: InterpolationSchedule) -> np.ndarray:
    if schedule.anchor == "pi_bar":
        return unmarked_amplitudes(chain, g)
    return np.sqrt(chain.pi)


def _step_chains(chain: MarkovChain, g: int, schedule: InterpolationSchedule) -> List[MarkovChain]:
    absorbed = absorbing(chain, g)
    return [interpolate(chain, absorbed, s) for s in schedule.s]


def _ideal_leak(data: SpectralData, factors: np.ndarray, incoming: np.ndarray) -> float:
    """Norm of the surviving k >= 1 part of the ideal incoming state."""
    coefficients = data.coefficients(incoming)
    return float(np.linalg.norm(factors[1:] * coefficients[1:]))


def _lost(before: np.ndarray, after: np.ndarray) -> float:
    return math.sqrt(max(float(np.vdot(before, before).real - np.vdot(after, after).real), 0.0))


def _success(schedule: InterpolationSchedule, pi_g: float, conditional: float) -> Tuple[float, float]:
    initial = pi_g if schedule.anchor == "pi_bar" else 0.0
    return initial, initial + (1.0 - initial) * conditional


# Phase-estimation search

def alg1_search(
    chain: MarkovChain,
    g: int,
    r: int,
    epsilon: float,
    mode: str = "filter",
    schedule: ScheduleChoice = "auto",
    ht_source: str = "measured",
    completion: str = "householder",
    budget: int = MEMORY_BUDGET,
) -> RunReport:
    """Interpolated search with projected phase estimation at every step."""
    _check_epsilon(epsilon)
    vertex, pi_g = _instance(chain, g)
    if ht_source == "measured":
        ht = hitting_time_spectral(chain, vertex)
    elif ht_source == "max":
        ht = max_hitting_time(chain)
    else:
        raise BadSpec(f"unknown hitting-time source '{ht_source}'")

    config = QpeConfig.from_gamma(gamma1(r, ht, epsilon), mode)
    plan = resolve_schedule(pi_g, r, schedule)
    tau, size = config.tau, config.size
    if mode != "filter":
        check_budget((chain.n, chain.n, size), budget)

    angles = _angles(plan, pi_g)
    counter = CallCounter()
    psi = _initial_vector(chain, vertex, plan).astype(complex)
    literal = embed(psi, (size,)) if mode == "explicit-literal" else None
    steps = []

    for i, (s, step_chain) in enumerate(zip(plan.s, _step_chains(chain, vertex, plan)), start=1):
        data = step_chain.spectral
        factors = filter_factors(data, tau)
        leak = _ideal_leak(data, factors, angle_state(chain, vertex, angles[i - 1]))
        before = counter.value

        if mode == "filter":
            psi, discarded = u_qee_filter(data, tau, psi)
            counter.add(size - 1)
        elif mode == "explicit":
            operator = WalkOperator(step_chain, completion, counter=counter)
            out = u_qee_explicit_projected(operator, tau, psi, budget)
            discarded = _lost(psi, out)
            psi = out
        else:
            operator = WalkOperator(step_chain, completion, counter=counter)
            literal = u_qee_explicit(operator, tau, literal, budget)
            discarded = 0.0

        steps.append(StepRecord(i, s, angles[i], data.gap, tau, leak, discarded, counter.value - before))

    if literal is not None:
        conditional = float(np.sum(np.abs(literal[vertex]) ** 2))
    else:
        conditional = float(abs(psi[vertex]) ** 2)
    initial, p_succ = _success(plan, pi_g, conditional)

    report = RunReport(
        algorithm="alg1",
        mode=mode,
        schedule=plan,
        marked=vertex,
        pi_g=pi_g,
        r=r,
        epsilon=epsilon,
        ht=ht,
        tau=tau,
        gamma=config.gamma1,
        p_initial_hit=initial,
        p_conditional=conditional,
        p_succ=p_succ,
        bound=bound(r, epsilon),
        controlled_w_calls=counter.value,
        nominal_calls=r * math.ceil(config.gamma1),
        steps=steps,
    )
    logger.info(SUCCESS_MESSAGES['run_complete'].format("alg1", p_succ, report.bound, counter.value))
    return report


# Fast-forwarding search

@dataclass
class _QffPlan:
    schedule: InterpolationSchedule
    chains: List[MarkovChain]
    configs: List[QffConfig]
    nominal_calls: int

    @property
    def tau(self) -> int:
        return self.configs[0].tau


def _qff_plan(chain: MarkovChain, g: int, pi_g: float, r: int, epsilon: float,
              schedule: ScheduleChoice) -> _QffPlan:
    _check_epsilon(epsilon)
    plan = resolve_schedule(pi_g, r, schedule)
    chains = _step_chains(chain, g, plan)
    per_step = epsilon / (2 * plan.r)
    steps_t = [
        max(1, math.ceil(math.log(2 * plan.r / epsilon) * 2.0 / c.spectral.gap))
        for c in chains
    ]
    base = [QffConfig.build(t, per_step) for t in steps_t]
    tau = max(c.tau for c in base)
    configs = [QffConfig.build(t, per_step, tau=tau) for t in steps_t]
    return _QffPlan(plan, chains, configs, sum(c.gamma for c in base))


def _tracking(track: str, r: int, block: int, budget: int) -> str:
    if track not in TRACKING:
        raise BadSpec(f"unknown flag tracking '{track}'")
    dense = (2 ** r) * block
    if track == "auto":
        if dense <= FLAG_TRACK_BUDGET:
            return "all"
        logger.warning(WARNING_MESSAGES['live_tracking'].format(dense))
        return "live"
    if track == "all":
        check_budget((dense,), budget)
    return track


def _block_size(n: int, tau: int) -> int:
    return n * n * (2 ** tau) * 2


def alg2_search(
    chain: MarkovChain,
    g: int,
    r: int,
    epsilon: float,
    mode: str = "explicit",
    schedule: ScheduleChoice = "auto",
    track: str = "auto",
    completion: str = "householder",
    budget: int = MEMORY_BUDGET,
) -> RunReport:
    """Interpolated search with five-register fast-forwarding steps."""
    if mode not in ("explicit", "filter"):
        raise BadSpec(f"unknown fast-forwarding mode '{mode}'")
    vertex, pi_g = _instance(chain, g)
    plan = _qff_plan(chain, vertex, pi_g, r, epsilon, schedule)
    tau, n = plan.tau, chain.n
    angles = _angles(plan.schedule, pi_g)
    counter = CallCounter()
    psi = _initial_vector(chain, vertex, plan.schedule).astype(complex)
    steps = []

    tracking = None
    state = None
    if mode == "explicit":
        check_budget((_block_size(n, tau),), budget)
        tracking = _tracking(track, r, _block_size(n, tau), budget)
        state = FlagState.prepare(n, tau, r, psi)

    for i, (s, step_chain, config) in enumerate(zip(plan.schedule.s, plan.chains, plan.configs), start=1):
        data = step_chain.spectral
        factors = filter_values(config, data.phases)
        leak = _ideal_leak(data, factors, angle_state(chain, vertex, angles[i - 1]))
        before = counter.value

        if mode == "filter":
            out = u_qff_filter(data, config, psi)
            discarded = _lost(psi, out)
            psi = out
            counter.add(2 * (config.size - 1))
        else:
            live_in, live_out = (1 << (i - 1)) - 1, (1 << i) - 1
            keep = None if tracking == "all" else (lambda mask, live=live_out: mask == live)
            norm_in = _block_norm(state, live_in)
            operator = WalkOperator(step_chain, completion, counter=counter)
            state = u_qfs_step(operator, config, i, state, keep)
            discarded = math.sqrt(max(norm_in ** 2 - _block_norm(state, live_out) ** 2, 0.0))

        steps.append(StepRecord(i, s, angles[i], data.gap, tau, leak, discarded,
                                counter.value - before, t=config.t, gamma=config.gamma))

    unconditioned = None
    if mode == "filter":
        conditional = float(abs(psi[vertex]) ** 2)
    else:
        conditional = state.vertex_probability(vertex, mask=(1 << r) - 1)
    initial, p_succ = _success(plan.schedule, pi_g, conditional)
    if tracking == "all":
        unconditioned = initial + (1.0 - initial) * state.vertex_probability(vertex)

    report = RunReport(
        algorithm="alg2",
        mode=mode,
        schedule=plan.schedule,
        marked=vertex,
        pi_g=pi_g,
        r=r,
        epsilon=epsilon,
        ht=hitting_time_spectral(chain, vertex),
        tau=tau,
        gamma=float(max(c.gamma for c in plan.configs)),
        p_initial_hit=initial,
        p_conditional=conditional,
        p_succ=p_succ,
        bound=bound(r, epsilon),
        controlled_w_calls=counter.value,
        nominal_calls=plan.nominal_calls,
        steps=steps,
        p_unconditioned=unconditioned,
        tracking=tracking,
    )
    logger.info(SUCCESS_MESSAGES['run_complete'].format("alg2", p_succ, report.bound, counter.value))
    return report


def _block_norm(state: FlagState, mask: int) -> float:
    block = state.blocks.get(mask)
    return 0.0 if block is None else float(np.linalg.norm(block))


# Qsampling

@dataclass
class QsampleReport:
    """Fidelity of the reversed fast-forwarding chain with |pi>."""
    marked: int
    r: int
    epsilon: float
    mode: str
    schedule: InterpolationSchedule
    tau: int
    fidelity: float
    accepted_probability: float
    controlled_w_calls: int
    nominal_calls: int
    steps: List[StepRecord] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "algorithm": "qsample",
            "marked": self.marked,
            "r": self.r,
            "epsilon": self.epsilon,
            "mode": self.mode,
            "schedule": self.schedule.to_dict(),
            "tau": self.tau,
            "fidelity": float(self.fidelity),
            "accepted_probability": float(self.accepted_probability),
            "controlled_w_calls": int(self.controlled_w_calls),
            "nominal_calls": int(self.nominal_calls),
            "steps": [step.to_dict() for step in self.steps],
        }


def qsample(
    chain: MarkovChain,
    g: int,
    r: int,
    epsilon: float,
    mode: str = "explicit",
    schedule: ScheduleChoice = "stationary",
    completion: str = "householder",
    budget: int = MEMORY_BUDGET,
) -> Tuple[WalkState, QsampleReport]:
    """Run the fast-forwarding step chain backwards from |g> toward |pi>."""
    if mode not in ("explicit", "filter"):
        raise BadSpec(f"unknown fast-forwarding mode '{mode}'")
    vertex, pi_g = _instance(chain, g)
    plan = _qff_plan(chain, vertex, pi_g, r, epsilon, schedule)
    tau, n = plan.tau, chain.n
    angles = _angles(plan.schedule, pi_g)
    target = np.sqrt(chain.pi)
    counter = CallCounter()
    start = np.zeros(n, dtype=complex)
    start[vertex] = 1.0
    steps = []

    if mode == "filter":
        psi = start
        for i in range(r, 0, -1):
            data, config = plan.chains[i - 1].spectral, plan.configs[i - 1]
            out = u_qff_filter(data, config, psi)
            steps.append(StepRecord(i, plan.schedule.s[i - 1], angles[i], data.gap, tau, 0.0,
                                    _lost(psi, out), 2 * (config.size - 1), t=config.t, gamma=config.gamma))
            counter.add(2 * (config.size - 1))
            psi = out
        fidelity = float(abs(np.vdot(target, psi)) ** 2)
        accepted = float(np.vdot(psi, psi).real)
        state = WalkState(RegisterLayout.walk(n), embed(psi))
    else:
        check_budget((_block_size(n, tau),), budget)
        flags = FlagState.prepare(n, tau, r, start, flags=(1 << r) - 1)
        for i in range(r, 0, -1):
            live_in, live_out = (1 << i) - 1, (1 << (i - 1)) - 1
            norm_in = _block_norm(flags, live_in)
            operator = WalkOperator(plan.chains[i - 1], completion, counter=counter)
            before = counter.value
            flags = u_qfs_step(operator, plan.configs[i - 1], i, flags,
                               keep=lambda mask, live=live_out: mask == live)
            config = plan.configs[i - 1]
            steps.append(StepRecord(
                i, plan.schedule.s[i - 1], angles[i], plan.chains[i - 1].spectral.gap, tau, 0.0,
                math.sqrt(max(norm_in ** 2 - _block_norm(flags, live_out) ** 2, 0.0)),
                counter.value - before, t=config.t, gamma=config.gamma,
            ))
        block = flags.blocks.get(0, np.zeros(flags.block_shape, dtype=complex))
        projected = np.tensordot(target, block, axes=([0], [0]))
        fidelity = float(np.sum(np.abs(projected) ** 2))
        accepted = float(np.vdot(block, block).real)
        layout = RegisterLayout(flags.block_shape, ("R1", "R2", "R3", "R4"))
        state = WalkState(layout, block)

    report = QsampleReport(
        marked=vertex,
        r=r,
        epsilon=epsilon,
        mode=mode,
        schedule=plan.schedule,
        tau=tau,
        fidelity=fidelity,
        accepted_probability=accepted,
        controlled_w_calls=counter.value,
        nominal_calls=plan.nominal_calls,
        steps=steps,
    )
    logger.info(SUCCESS_MESSAGES['qsample_complete'].format(fidelity, accepted))
    return state, report


# Success curves

CURVE_COLUMNS = ["r", "p_succ", "bound", "controlled_w_calls", "total_leak", "mode"]
BASELINE_COLUMNS = ["r", "s", "walk_steps", "p_succ", "bound"]


@dataclass
class CurveResult:
    rows: List[Dict[str, Any]]
    baseline: List[Dict[str, Any]]
    truncated_at: Optional[int] = None
    note: Optional[str] = None

    @property
    def soft_monotone(self) -> bool:
        """Measured p_succ non-decreasing within 1e-6."""
        values = [row["p_succ"] for row in self.rows]
        return all(b >= a - 1e-6 for a, b in zip(values, values[1:]))

    @property
    def baseline_non_monotone(self) -> bool:
        values = [row["p_succ"] for row in self.baseline]
        return any(values[j] > values[k] for j in range(len(values)) for k in range(j + 1, len(values)))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=CURVE_COLUMNS)

    def baseline_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.baseline, columns=BASELINE_COLUMNS)


def baseline_curve(chain: MarkovChain, g: int, r_max: int, epsilon: float) -> List[Dict[str, Any]]:
    """Single-parameter walk at sin^2(theta) = 1/2, never projected.

    Row r applies W(s*)^(r T) to |pi-bar>|0-bar> with T = ceil(sqrt(HT)),
    so the marked-vertex probability keeps rotating past its peak.
    """
    vertex, pi_g = _instance(chain, g)
    s_fixed = max(0.0, (1.0 - 2.0 * pi_g) / (1.0 - pi_g))
    operator = WalkOperator(interpolate(chain, absorbing(chain, vertex), s_fixed))
    span = max(1, math.ceil(math.sqrt(hitting_time_spectral(chain, vertex))))
    psi = embed(unmarked_amplitudes(chain, vertex)).astype(complex)
    rows = []
    for r in range(1, r_max + 1):
        psi = operator.apply_W_power(span, psi)
        hit = float(np.sum(np.abs(psi[vertex]) ** 2))
        rows.append({
            "r": r,
            "s": s_fixed,
            "walk_steps": r * span,
            "p_succ": pi_g + (1.0 - pi_g) * hit,
            "bound": bound(r, epsilon),
        })
    return rows


def success_curve(
    chain: MarkovChain,
    g: int,
    r_max: int,
    epsilon: float,
    algorithm: str = "alg1",
    mode: Optional[str] = None,
    schedule: ScheduleChoice = "auto",
    jobs: int = 1,
) -> CurveResult:
    """Success probability and bound for r = 1..r_max, plus the fixed-parameter baseline."""
    if algorithm not in ("alg1", "alg2"):
        raise BadSpec(f"unknown curve algorithm '{algorithm}'")
    if r_max < 1:
        raise BadSpec(f"r_max must be at least 1, got {r_max}")
    _check_epsilon(epsilon)
    vertex, pi_g = _instance(chain, g)
    mode = mode or "filter"

    last, truncated_at, note = r_max, None, None
    if schedule == "equal-angle" and r_max > max_equal_angle_steps(pi_g):
        last = max_equal_angle_steps(pi_g)
        truncated_at = last + 1
        note = f"equal-angle schedule infeasible from r={truncated_at} (pi_g={pi_g:.6g})"
        logger.warning(WARNING_MESSAGES['curve_truncated'].format(truncated_at, note))

    def run_row(r: int) -> Dict[str, Any]:
        if algorithm == "alg1":
            report = alg1_search(chain, vertex, r, epsilon, mode=mode, schedule=schedule)
        else:
            report = alg2_search(chain, vertex, r, epsilon, mode=mode, schedule=schedule)
        return {
            "r": r,
            "p_succ": report.p_succ,
            "bound": report.bound,
            "controlled_w_calls": report.controlled_w_calls,
            "total_leak": report.total_leak,
            "mode": report.mode,
        }

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        rows = sorted(pool.map(run_row, range(1, last + 1)), key=lambda row: row["r"])

    result = CurveResult(rows, baseline_curve(chain, vertex, r_max, epsilon), truncated_at, note)
    logger.info(SUCCESS_MESSAGES['curve_complete'].format(len(rows), truncated_at))
    return result
