"""
Quantum Fast-Forwarding: U_qff and the five-register step operator U_qfs

U_qff = V_q^T W_ctrl V_q prepares sqrt(p_l) amplitudes on the ancilla, runs
the controlled W^l ladder and unprepares. Its |0-bar 0^tau> block is
sum_l p_l T_l(D), the binomial mixture approximating D^t.

U_qfs acts on R1..R5 = system, coin, ancilla, one qubit, flags. Blocks are
arrays of shape (n, n, 2^tau, 2) and the flag register is kept either as a
sparse map from bit pattern to block or as a dense trailing axis.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Dict, Optional, Union

import numpy as np
from scipy import stats

from .errors import BadSpec, DimensionMismatch, StepIndexOutOfRange
from .logger_config import WARNING_MESSAGES
from .markov import SpectralData
from .qpe import MEMORY_BUDGET, check_budget, controlled_ladder
from .walkspace import RegisterLayout, WalkOperator, as_operator, householder_completion

logger = logging.getLogger(__name__)


def pl_distribution(t: int) -> np.ndarray:
    """p_l = Pr[|X_t| = l] for a t-step +-1 walk, l = 0..t."""
    if t < 0:
        raise BadSpec(f"t must be non-negative, got {t}")
    l = np.arange(t + 1)
    p = np.zeros(t + 1)
    parity = (t + l) % 2 == 0
    weights = stats.binom.pmf((t + l[parity]) // 2, t, 0.5)
    p[parity] = np.where(l[parity] > 0, 2.0, 1.0) * weights
    return p


def hoeffding_radius(t: int, epsilon: float) -> int:
    """Smallest Gamma with 2 exp(-Gamma^2 / 2t) <= epsilon / 2."""
    if t == 0:
        return 1
    return max(1, math.ceil(math.sqrt(2.0 * t * math.log(4.0 / epsilon))))


@dataclass(frozen=True, eq=False)
class QffConfig:
    """Truncated, renormalized binomial weights on a 2^tau ancilla."""
    t: int
    epsilon: float
    gamma: int
    tau: int
    pl: np.ndarray
    tail: float

    @property
    def size(self) -> int:
        return 2 ** self.tau

    @property
    def error_bound(self) -> float:
        """Guaranteed || sum_l pl_l T_l(D) - D^t || bound."""
        return 2.0 * self.tail

    @cached_property
    def preparation(self) -> np.ndarray:
        """V_q with V_q|0> = sum_l sqrt(pl_l)|l>."""
        return householder_completion(np.sqrt(self.pl))

    @classmethod
    def build(cls, t: int, epsilon: float, gamma: Optional[int] = None,
              tau: Optional[int] = None) -> "QffConfig":
        if t < 0:
            raise BadSpec(f"t must be non-negative, got {t}")
        if not 0.0 < epsilon < 1.0:
            raise BadSpec(f"epsilon={epsilon} outside (0, 1)")
        radius = hoeffding_radius(t, epsilon) if gamma is None else int(gamma)
        if radius > t + 1:
            if gamma is not None:
                logger.warning(WARNING_MESSAGES['gamma_shrunk'].format(radius, t + 1))
            radius = t + 1
        needed = math.ceil(math.log2(radius)) if radius > 1 else 0
        if tau is None:
            tau = needed
        elif tau < needed:
            raise BadSpec(f"tau={tau} cannot hold Gamma={radius}")

        size = 2 ** tau
        p = pl_distribution(t)
        kept = p[:min(size, t + 1)]
        tail = float(p[size:].sum())
        pl = np.zeros(size)
        pl[:kept.size] = kept / kept.sum()
        return cls(t, epsilon, radius, tau, pl, tail)


def filter_values(config: QffConfig, phi) -> np.ndarray:
    """f(phi) = sum_l pl_l cos(l phi)."""
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    return np.cos(np.outer(phi, np.arange(config.size))) @ config.pl


def u_qff_filter(spectrum: SpectralData, config: QffConfig, vector: np.ndarray) -> np.ndarray:
    """Closed form of the |0-bar 0^tau> block of U_qff."""
    return spectrum.scale(filter_values(config, spectrum.phases), vector)


def _on_ancilla(matrix: np.ndarray, state: np.ndarray) -> np.ndarray:
    return np.moveaxis(np.tensordot(matrix, state, axes=([1], [2])), 0, 2)


def u_qff_explicit(operator, config: QffConfig, state: np.ndarray, adjoint: bool = False,
                   budget: int = MEMORY_BUDGET) -> np.ndarray:
    """U_qff (or its adjoint) on a state with the ancilla on axis 2."""
    op = as_operator(operator)
    psi = np.asarray(state)
    if psi.ndim < 3 or psi.shape[:2] != (op.n, op.n) or psi.shape[2] != config.size:
        raise DimensionMismatch(f"state shape {psi.shape} for n={op.n}, tau={config.tau}")
    check_budget(psi.shape, budget)
    prep = config.preparation
    out = _on_ancilla(prep, psi.astype(complex))
    out = controlled_ladder(op, out, adjoint=adjoint)
    return _on_ancilla(prep.T, out)


# Five-register step

class FlagState:
    """R1..R4 blocks keyed by the R5 flag bit pattern."""

    def __init__(self, layout: RegisterLayout, blocks: Optional[Dict[int, np.ndarray]] = None):
        if len(layout.dims) != 5:
            raise DimensionMismatch("flag states need the five-register layout")
        self.layout = layout
        self.blocks: Dict[int, np.ndarray] = dict(blocks or {})

    @property
    def block_shape(self):
        return self.layout.dims[:4]

    @property
    def r(self) -> int:
        return self.layout.dims[4].bit_length() - 1

    @classmethod
    def prepare(cls, n: int, tau: int, r: int, system_vector: np.ndarray, flags: int = 0) -> "FlagState":
        """|sigma>|0-bar>|0^tau>|0>|flags>."""
        layout = RegisterLayout.qfs(n, tau, r)
        block = np.zeros(layout.dims[:4], dtype=complex)
        block[:, 0, 0, 0] = system_vector
        return cls(layout, {flags: block})

    def norm(self) -> float:
        return math.sqrt(sum(float(np.vdot(b, b).real) for b in self.blocks.values()))

    def vertex_probability(self, vertex: int, mask: Optional[int] = None) -> float:
        """Probability of R1 = vertex, restricted to one flag pattern if given."""
        if mask is not None:
            block = self.blocks.get(mask)
            return 0.0 if block is None else float(np.sum(np.abs(block[vertex]) ** 2))
        return sum(float(np.sum(np.abs(b[vertex]) ** 2)) for b in self.blocks.values())

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.layout.dims, dtype=complex)
        for mask, block in self.blocks.items():
            dense[..., mask] = block
        return dense

    @classmethod
    def from_dense(cls, layout: RegisterLayout, dense: np.ndarray, tol: float = 0.0) -> "FlagState":
        blocks = {
            mask: dense[..., mask].copy()
            for mask in range(dense.shape[-1])
            if np.max(np.abs(dense[..., mask]), initial=0.0) > tol
        }
        return cls(layout, blocks)


def _coin_flag(block: np.ndarray) -> np.ndarray:
    """R4 ^= [R2 != 0-bar]; equal to ccX_{2,4} followed by X_4."""
    out = block.copy()
    out[:, 1:, :, 0] = block[:, 1:, :, 1]
    out[:, 1:, :, 1] = block[:, 1:, :, 0]
    return out


def _forward(op: WalkOperator, config: QffConfig, stacked: np.ndarray) -> np.ndarray:
    return u_qff_explicit(op, config, _coin_flag(stacked))


def _backward(op: WalkOperator, config: QffConfig, stacked: np.ndarray) -> np.ndarray:
    return _coin_flag(u_qff_explicit(op, config, stacked, adjoint=True))


def _check_step(i: int, r: int) -> int:
    if not 1 <= i <= r:
        raise StepIndexOutOfRange(f"step index {i} outside 1..{r}", i=i, r=r)
    return 1 << (i - 1)


def u_qfs_step(
    operator,
    config: QffConfig,
    i: int,
    state: Union[FlagState, np.ndarray],
    keep: Optional[Callable[[int], bool]] = None,
) -> Union[FlagState, np.ndarray]:
    """G^dagger ccX_{234,gamma_i} G with G = (U_qff (x) I) X_4 ccX_{2,4}.

    Dense states carry the flag register as their last axis. For sparse
    states, ``keep`` drops flag patterns that no longer matter.
    """
    op = as_operator(operator)
    if isinstance(state, FlagState):
        return _sparse_step(op, config, i, state, keep)

    dense = np.asarray(state)
    if dense.ndim != 5 or dense.shape[:4] != (op.n, op.n, config.size, 2):
        raise DimensionMismatch(f"dense state shape {dense.shape} for n={op.n}, tau={config.tau}")
    r = dense.shape[4].bit_length() - 1
    bit = _check_step(i, r)
    x = _forward(op, config, dense)
    masks = np.arange(dense.shape[4])
    x[:, 0, 0, 0, :] = x[:, 0, 0, 0, masks ^ bit]
    return _backward(op, config, x)


def _sparse_step(op: WalkOperator, config: QffConfig, i: int, state: FlagState,
                 keep: Optional[Callable[[int], bool]]) -> FlagState:
    if state.block_shape != (op.n, op.n, config.size, 2):
        raise DimensionMismatch(f"block shape {state.block_shape} for n={op.n}, tau={config.tau}")
    bit = _check_step(i, state.r)
    if not state.blocks:
        return FlagState(state.layout)

    masks = sorted(state.blocks)
    x = _forward(op, config, np.stack([state.blocks[m] for m in masks], axis=-1))
    captured = x[:, 0, 0, 0, :].copy()
    x[:, 0, 0, 0, :] = 0.0

    moved: Dict[int, np.ndarray] = {}
    for b, mask in enumerate(masks):
        moved[mask] = moved.get(mask, 0) + x[..., b]
        target = np.zeros(state.block_shape, dtype=complex)
        target[:, 0, 0, 0] = captured[:, b]
        moved[mask ^ bit] = moved.get(mask ^ bit, 0) + target
    if keep is not None:
        moved = {m: block for m, block in moved.items() if keep(m)}
    if not moved:
        return FlagState(state.layout)

    masks = sorted(moved)
    y = _backward(op, config, np.stack([moved[m] for m in masks], axis=-1))
    return FlagState(state.layout, {m: y[..., b] for b, m in enumerate(masks)})
