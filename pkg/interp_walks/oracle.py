"""
Brute-force references for cross-checking the walk kernels.

Nothing here reuses the eigendecompositions or closed forms of the main
paths: D^t comes from repeated squaring, hitting times from simulated
walks, and operators are materialized one basis column at a time.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import BadSpec, DimensionCap
from .markov import MarkovChain, Marked, marked_set, validate
from .qff import QffConfig, u_qff_explicit
from .qpe import u_qee_explicit
from .walkspace import MATERIALIZE_CAP, WalkOperator, as_operator

logger = logging.getLogger(__name__)

MC_BATCH = 4096
MAX_WALK_STEPS = 10 ** 7


@dataclass(frozen=True)
class OracleResult:
    value: Any
    method: str
    residual: Optional[float] = None


def dt_apply(D: np.ndarray, t: int, psi: np.ndarray) -> np.ndarray:
    """D^t psi by repeated squaring."""
    if t < 0:
        raise BadSpec(f"t must be non-negative, got {t}")
    base = np.asarray(D, dtype=float)
    out = np.array(psi, dtype=complex if np.iscomplexobj(psi) else float)
    while t:
        if t & 1:
            out = base @ out
        t >>= 1
        if t:
            base = base @ base
    return out


def dt_reference(D: np.ndarray, t: int, psi: np.ndarray) -> OracleResult:
    return OracleResult(dt_apply(D, t, psi), "repeated-squaring")


# Monte Carlo hitting times

def _start_distribution(chain: MarkovChain, marked: Tuple[int, ...]) -> np.ndarray:
    weights = chain.pi.copy()
    weights[list(marked)] = 0.0
    return weights / weights.sum()


def _walk_batch(cumulative: np.ndarray, absorbing: np.ndarray, starts: np.ndarray,
                rng: np.random.Generator) -> np.ndarray:
    """Steps until each walker first enters the marked set."""
    position = starts.copy()
    steps = np.zeros(position.size, dtype=np.int64)
    active = ~absorbing[position]
    for _ in range(MAX_WALK_STEPS):
        if not active.any():
            return steps
        idx = np.flatnonzero(active)
        u = rng.random(idx.size)
        nxt = (cumulative[position[idx]] < u[:, None]).sum(axis=1)
        position[idx] = np.minimum(nxt, cumulative.shape[1] - 1)
        steps[idx] += 1
        active[idx] = ~absorbing[position[idx]]
    raise BadSpec(f"walkers not absorbed after {MAX_WALK_STEPS} steps")


def mc_hitting(
    chain: Union[MarkovChain, np.ndarray],
    M: Marked,
    trials: int,
    seed: int = 0,
    start: Optional[int] = None,
    jobs: int = 1,
    batch: int = MC_BATCH,
) -> Tuple[float, float]:
    """Mean and standard error of the hitting time of M from pi-bar."""
    if trials < 1:
        raise BadSpec(f"trials must be at least 1, got {trials}")
    if not isinstance(chain, MarkovChain):
        chain = validate(chain)
    marked = marked_set(M, chain.n)
    if start is not None and start in marked:
        raise BadSpec(f"walk cannot start inside the marked set (vertex {start})")

    absorbing = np.zeros(chain.n, dtype=bool)
    absorbing[list(marked)] = True
    cumulative = np.cumsum(chain.P, axis=1)
    weights = None if start is not None else _start_distribution(chain, marked)

    sizes = [batch] * (trials // batch) + ([trials % batch] if trials % batch else [])
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(job: Tuple[int, np.random.SeedSequence]) -> np.ndarray:
        size, stream = job
        rng = np.random.Generator(np.random.Philox(stream))
        if weights is None:
            starts = np.full(size, start, dtype=np.int64)
        else:
            starts = rng.choice(chain.n, size=size, p=weights)
        return _walk_batch(cumulative, absorbing, starts, rng)

    with ThreadPoolExecutor(max_workers=max(1, jobs)) as pool:
        samples = np.concatenate(list(pool.map(run, zip(sizes, streams))))

    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / math.sqrt(trials)) if trials > 1 else float("inf")
    logger.debug(f"Monte Carlo hitting time over {trials} walks: {mean:.4f} +- {stderr:.4f}")
    return mean, stderr


# Materialization

def materialize(apply: Callable[[np.ndarray], np.ndarray], shape: Sequence[int],
                cap: int = MATERIALIZE_CAP) -> np.ndarray:
    """Dense matrix of a linear map on arrays of ``shape``, one basis column at a time."""
    shape = tuple(int(d) for d in shape)
    dim = int(np.prod(shape, dtype=np.int64))
    if dim > cap:
        raise DimensionCap(f"dimension {dim} exceeds the cap of {cap}", dimension=dim, cap=cap)
    matrix = np.empty((dim, dim), dtype=complex)
    basis = np.zeros(dim, dtype=complex)
    for col in range(dim):
        basis[col] = 1.0
        matrix[:, col] = np.asarray(apply(basis.reshape(shape))).reshape(dim)
        basis[col] = 0.0
    return matrix


def unitarity_residual(matrix: np.ndarray) -> float:
    """max |U^dagger U - I|."""
    return float(np.max(np.abs(matrix.conj().T @ matrix - np.eye(matrix.shape[0]))))


def materialize_walk(operator) -> np.ndarray:
    op = as_operator(operator)
    return materialize(op.apply_W, (op.n, op.n))


def materialize_r0(n: int) -> np.ndarray:
    return materialize(WalkOperator.apply_R0, (n, n))


def materialize_qee(operator, tau: int) -> np.ndarray:
    op = as_operator(operator)
    return materialize(lambda psi: u_qee_explicit(op, tau, psi), (op.n, op.n, 2 ** tau))


def materialize_qff(operator, config: QffConfig, adjoint: bool = False) -> np.ndarray:
    op = as_operator(operator)
    return materialize(
        lambda psi: u_qff_explicit(op, config, psi, adjoint=adjoint),
        (op.n, op.n, config.size),
    )


def unitary_reference(matrix: np.ndarray) -> OracleResult:
    return OracleResult(matrix, "columns", unitarity_residual(matrix))
