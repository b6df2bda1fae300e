"""
Phase Estimation over a walk operator

U_qee comes in two interchangeable forms. The explicit circuit acts on a
state array whose ancilla register sits on axis 2: Walsh-Hadamard on the
ancilla, the controlled W^(2^j) ladder, then the inverse Fourier transform.
The projected filter is its closed form on the walk space: projecting coin
and ancilla back onto |0-bar 0^tau> scales eigencomponent k of D(s) by the
real part of the geometric phase sum.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy import linalg

from .errors import AncillaTooLarge, BadSpec, DimensionMismatch
from .markov import SpectralData
from .walkspace import WalkOperator, as_operator, embed

logger = logging.getLogger(__name__)

MEMORY_BUDGET = 2 ** 27
DENSE_QFT_CAP = 4096
MODES = ("filter", "explicit", "explicit-literal")


@dataclass(frozen=True)
class QpeConfig:
    """Ancilla size for U_qee: tau = ceil(log2(gamma1))."""
    tau: int
    gamma1: float
    mode: str = "filter"

    def __post_init__(self):
        if self.tau < 1:
            raise BadSpec(f"tau must be at least 1, got {self.tau}")
        if 2 ** self.tau < self.gamma1 * (1 - 1e-12):
            raise BadSpec(f"2^tau={2 ** self.tau} below gamma1={self.gamma1}")
        if self.mode not in MODES:
            raise BadSpec(f"unknown phase-estimation mode '{self.mode}'")

    @property
    def size(self) -> int:
        return 2 ** self.tau

    @classmethod
    def from_gamma(cls, gamma1: float, mode: str = "filter") -> "QpeConfig":
        tau = max(1, math.ceil(math.log2(gamma1))) if gamma1 > 1 else 1
        return cls(tau, gamma1, mode)


def gamma1(r: int, ht: float, epsilon: float) -> float:
    """Gamma_1 = r pi sqrt(HT) / (sqrt(2) epsilon)."""
    if epsilon <= 0:
        raise BadSpec(f"epsilon must be positive, got {epsilon}")
    return r * math.pi * math.sqrt(ht) / (math.sqrt(2.0) * epsilon)


def phase_sum(phi, tau: int) -> np.ndarray:
    """(1/2^tau) sum_l exp(i phi l), the ancilla amplitude left at |0^tau>."""
    size = 2 ** tau
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    half = np.sin(phi / 2.0)
    out = np.ones(phi.shape, dtype=complex)
    regular = np.abs(half) > 1e-15
    p = phi[regular]
    out[regular] = np.exp(0.5j * p * (size - 1)) * np.sin(size * p / 2.0) / (size * half[regular])
    return out


def check_budget(shape: Tuple[int, ...], budget: int = MEMORY_BUDGET) -> None:
    total = int(np.prod(shape, dtype=np.int64))
    if total > budget:
        raise AncillaTooLarge(
            f"state of {total} amplitudes exceeds the budget of {budget}",
            amplitudes=total,
            budget=budget,
        )


def _bit_view(state: np.ndarray, j: int) -> np.ndarray:
    """View of a C-contiguous state splitting axis 2 as (high, bit j, low)."""
    n1, n2, size = state.shape[:3]
    low = 2 ** j
    return state.reshape((n1, n2, size // (2 * low), 2, low) + state.shape[3:])


def _ancilla_qubits(state: np.ndarray) -> int:
    size = state.shape[2]
    tau = size.bit_length() - 1
    if 2 ** tau != size:
        raise DimensionMismatch(f"ancilla dimension {size} is not a power of two")
    return tau


def walsh_hadamard(state: np.ndarray) -> np.ndarray:
    """H on every ancilla qubit."""
    out = np.array(state, dtype=complex, order="C")
    for j in range(_ancilla_qubits(out)):
        view = _bit_view(out, j)
        zero = view[:, :, :, 0].copy()
        one = view[:, :, :, 1].copy()
        view[:, :, :, 0] = (zero + one) / math.sqrt(2.0)
        view[:, :, :, 1] = (zero - one) / math.sqrt(2.0)
    return out


def controlled_ladder(operator: WalkOperator, state: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """sum_a W^a (x) |a><a| via controlled W^(2^j) on ancilla bit j."""
    out = np.array(state, dtype=complex, order="C")
    for j in range(_ancilla_qubits(out)):
        view = _bit_view(out, j)
        view[:, :, :, 1] = operator.apply_W_power(2 ** j, view[:, :, :, 1], adjoint=adjoint)
    return out


def inverse_qft(state: np.ndarray) -> np.ndarray:
    """|a> -> 2^(-tau/2) sum_m exp(-2 pi i a m / 2^tau) |m> on axis 2."""
    size = state.shape[2]
    if size <= DENSE_QFT_CAP:
        transform = linalg.dft(size, scale="sqrtn")
        return np.moveaxis(np.tensordot(transform, state, axes=([1], [2])), 0, 2)
    return np.fft.fft(state, axis=2, norm="ortho")


def u_qee_explicit(operator, tau: int, state: np.ndarray, budget: int = MEMORY_BUDGET) -> np.ndarray:
    """Phase estimation circuit; adds 2^tau - 1 controlled-W calls."""
    op = as_operator(operator)
    psi = np.asarray(state)
    if psi.ndim < 3 or psi.shape[:2] != (op.n, op.n) or psi.shape[2] != 2 ** tau:
        raise DimensionMismatch(f"state shape {psi.shape} for n={op.n}, tau={tau}")
    check_budget(psi.shape, budget)
    out = walsh_hadamard(psi)
    out = controlled_ladder(op, out)
    return inverse_qft(out)


def u_qee_explicit_projected(operator, tau: int, vector: np.ndarray,
                             budget: int = MEMORY_BUDGET) -> np.ndarray:
    """<0-bar 0^tau| U_qee |vector, 0-bar, 0^tau> through the explicit circuit."""
    op = as_operator(operator)
    check_budget((op.n, op.n, 2 ** tau), budget)
    out = u_qee_explicit(op, tau, embed(vector, (2 ** tau,)), budget)
    return out[:, 0, 0]


def filter_factors(spectrum: SpectralData, tau: int) -> np.ndarray:
    return np.real(phase_sum(spectrum.phases, tau))


def u_qee_filter(spectrum: SpectralData, tau: int, vector: np.ndarray) -> Tuple[np.ndarray, float]:
    """Closed-form projected U_qee; returns the filtered vector and the norm lost."""
    out = spectrum.scale(filter_factors(spectrum, tau), vector)
    lost = float(np.vdot(vector, vector).real - np.vdot(out, out).real)
    return out, math.sqrt(max(lost, 0.0))
