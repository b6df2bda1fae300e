"""
Walk Space: register layouts, states and the Szegedy walk operator

State arrays keep the system register on axis 0 and the coin register on
axis 1; any ancilla or flag registers follow as trailing axes and are left
untouched by the walk factors. The coin state |0-bar> is coin index 0.
"""

import logging
import math
import threading
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy import linalg

from .errors import (
    BadSpec,
    DegenerateEigenvalue,
    DimensionCap,
    DimensionMismatch,
    NumericalBreakdown,
)
from .markov import MarkovChain, SpectralData, validate

logger = logging.getLogger(__name__)

MATERIALIZE_CAP = 4096
DEGENERATE_TOL = 1e-12
BREAKDOWN_TOL = 1e-8
COMPLETIONS = ("householder", "gram-schmidt")


@dataclass(frozen=True)
class RegisterLayout:
    """Ordered register dimensions with their labels."""
    dims: Tuple[int, ...]
    names: Tuple[str, ...]

    def __post_init__(self):
        if len(self.dims) != len(self.names):
            raise DimensionMismatch("every register needs a name")
        if any(d < 1 for d in self.dims):
            raise DimensionMismatch(f"register dimensions must be positive: {self.dims}")

    @property
    def total(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64))

    def flatten(self, index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(index), self.dims))

    def unflatten(self, flat: int) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.dims))

    @classmethod
    def walk(cls, n: int) -> "RegisterLayout":
        return cls((n, n), ("R1", "R2"))

    @classmethod
    def qpe(cls, n: int, tau: int) -> "RegisterLayout":
        return cls((n, n, 2 ** tau), ("R1", "R2", "R3"))

    @classmethod
    def qfs(cls, n: int, tau: int, r: int) -> "RegisterLayout":
        return cls((n, n, 2 ** tau, 2, 2 ** r), ("R1", "R2", "R3", "R4", "R5"))


@dataclass
class WalkState:
    """Complex amplitudes over a register layout."""
    layout: RegisterLayout
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if amplitudes.size != self.layout.total:
            raise DimensionMismatch(
                f"{amplitudes.size} amplitudes for a layout of size {self.layout.total}"
            )
        self.amplitudes = amplitudes.reshape(self.layout.dims)

    @classmethod
    def prepare(cls, layout: RegisterLayout, system_vector: np.ndarray) -> "WalkState":
        """|sigma>|0-bar>|0...0>."""
        vector = np.asarray(system_vector, dtype=complex)
        if vector.shape != (layout.dims[0],):
            raise DimensionMismatch(f"system vector of shape {vector.shape} for n={layout.dims[0]}")
        amplitudes = np.zeros(layout.dims, dtype=complex)
        amplitudes[(slice(None),) + (0,) * (len(layout.dims) - 1)] = vector
        return cls(layout, amplitudes)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def vertex_probability(self, vertex: int) -> float:
        return float(np.sum(np.abs(self.amplitudes[vertex]) ** 2))


class CallCounter:
    """Thread-safe count of (controlled) walk applications."""

    def __init__(self):
        self._value = 0
        self._lock = threading.Lock()

    def add(self, count: int) -> None:
        with self._lock:
            self._value += int(count)

    @property
    def value(self) -> int:
        return self._value


def embed(system_vector: np.ndarray, trailing: Tuple[int, ...] = ()) -> np.ndarray:
    """Place a system vector at coin |0-bar> and all-zero trailing registers."""
    vector = np.asarray(system_vector)
    n = vector.shape[0]
    state = np.zeros((n, n) + tuple(trailing), dtype=complex)
    state[(slice(None), 0) + (0,) * len(trailing)] = vector
    return state


def householder_completion(column: np.ndarray) -> np.ndarray:
    """Real orthogonal matrix whose first column is the unit vector ``column``."""
    size = column.size
    u = -np.asarray(column, dtype=float)
    u[0] += 1.0
    norm2 = float(u @ u)
    if norm2 < 1e-28:
        return np.eye(size)
    return np.eye(size) - 2.0 * np.outer(u, u) / norm2


def gram_schmidt_completion(column: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Orthonormalize ``column`` followed by seeded random vectors."""
    size = column.size
    basis = np.column_stack([column, rng.standard_normal((size, size - 1))])
    q, _ = linalg.qr(basis)
    if q[:, 0] @ column < 0:
        q[:, 0] = -q[:, 0]
    return q


class WalkOperator:
    """Szegedy walk W = V^T S V R_0 of a chain, applied factor by factor."""

    def __init__(
        self,
        chain: Union[MarkovChain, np.ndarray],
        completion: str = "householder",
        seed: int = 0,
        counter: Optional[CallCounter] = None,
    ):
        if not isinstance(chain, MarkovChain):
            chain = validate(chain)
        if completion not in COMPLETIONS:
            raise BadSpec(f"unknown completion '{completion}'")
        self.chain = chain
        self.n = chain.n
        self.completion = completion
        self.counter = counter if counter is not None else CallCounter()

        rows = np.sqrt(chain.P)
        rows = rows / np.linalg.norm(rows, axis=1, keepdims=True)
        if completion == "householder":
            blocks = [householder_completion(row) for row in rows]
        else:
            rng = np.random.default_rng(seed)
            blocks = [gram_schmidt_completion(row, rng) for row in rows]
        self.blocks = np.stack(blocks)  # blocks[x][y, c]
        self.edges = ((chain.P + chain.P.T) > 0) | np.eye(self.n, dtype=bool)

        self._lock = threading.RLock()
        self._matrix: Optional[np.ndarray] = None
        self._squares: List[np.ndarray] = []

    @property
    def spectral(self) -> SpectralData:
        return self.chain.spectral

    @property
    def dimension(self) -> int:
        return self.n * self.n

    def _check(self, psi: np.ndarray) -> None:
        if psi.shape[:2] != (self.n, self.n):
            raise DimensionMismatch(f"state leading shape {psi.shape[:2]} for n={self.n}")

    # Factors

    def apply_V(self, psi: np.ndarray, forward: bool = True) -> np.ndarray:
        self._check(psi)
        if forward:
            return np.einsum("xyc,xc...->xy...", self.blocks, psi)
        return np.einsum("xyc,xy...->xc...", self.blocks, psi)

    def apply_S(self, psi: np.ndarray) -> np.ndarray:
        self._check(psi)
        out = psi.copy()
        out[self.edges] = np.swapaxes(psi, 0, 1)[self.edges]
        return out

    @staticmethod
    def apply_R0(psi: np.ndarray) -> np.ndarray:
        out = -psi
        out[:, 0] = psi[:, 0]
        return out

    def transfer(self, psi: np.ndarray) -> np.ndarray:
        """V^T S V, the reflection pairing |v_k>|0-bar> with its partner."""
        return self.apply_V(self.apply_S(self.apply_V(psi)), forward=False)

    def _step(self, psi: np.ndarray, adjoint: bool = False) -> np.ndarray:
        if adjoint:
            return self.apply_R0(self.transfer(psi))
        return self.transfer(self.apply_R0(psi))

    # Walk and powers

    def apply_W(self, psi: np.ndarray, adjoint: bool = False) -> np.ndarray:
        self._check(psi)
        self.counter.add(1)
        return self._step(psi, adjoint)

    def matrix(self) -> np.ndarray:
        """Dense W on the n^2-dimensional walk register."""
        with self._lock:
            if self._matrix is None:
                if self.dimension > MATERIALIZE_CAP:
                    raise DimensionCap(
                        f"walk dimension {self.dimension} exceeds {MATERIALIZE_CAP}",
                        dimension=self.dimension,
                    )
                basis = np.eye(self.dimension).reshape(self.n, self.n, self.dimension)
                self._matrix = np.real(self._step(basis)).reshape(self.dimension, self.dimension)
            return self._matrix

    def _power_of_two(self, j: int) -> np.ndarray:
        with self._lock:
            if not self._squares:
                self._squares.append(self.matrix())
            while len(self._squares) <= j:
                last = self._squares[-1]
                self._squares.append(last @ last)
            return self._squares[j]

    def power_matrix(self, l: int) -> np.ndarray:
        """W^l by binary decomposition over cached squares."""
        result = np.eye(self.dimension)
        bit = 0
        while l:
            if l & 1:
                result = result @ self._power_of_two(bit)
            l >>= 1
            bit += 1
        return result

    def apply_W_power(self, l: int, psi: np.ndarray, adjoint: bool = False) -> np.ndarray:
        """W^l (or its adjoint); counts l walk calls."""
        self._check(psi)
        if l < 0:
            raise BadSpec(f"walk power must be non-negative, got {l}")
        self.counter.add(l)
        if l == 0:
            return psi.copy()
        if self.dimension <= MATERIALIZE_CAP:
            power = self.power_matrix(l)
            if adjoint:
                power = power.T
            flat = psi.reshape(self.dimension, -1)
            return (power @ flat).reshape(psi.shape)
        out = psi
        for _ in range(l):
            out = self._step(out, adjoint)
        return out


@dataclass(frozen=True)
class WalkEigenpair:
    """Invariant plane B_k spanned by |v_k>|0-bar> and its partner."""
    phi: float
    vector: np.ndarray
    partner: np.ndarray
    plus: np.ndarray
    minus: np.ndarray


@dataclass(frozen=True)
class WalkEigensystem:
    psi0: np.ndarray
    pairs: Tuple[WalkEigenpair, ...]

    def basis(self) -> np.ndarray:
        """Orthonormal real basis of the walk space as columns."""
        columns = [self.psi0.ravel()]
        for pair in self.pairs:
            columns.append(pair.vector.ravel())
            columns.append(pair.partner.ravel())
        return np.column_stack(columns)

    def phases(self) -> np.ndarray:
        values = [0.0]
        for pair in self.pairs:
            values.extend([pair.phi, -pair.phi])
        return np.array(values)


def as_operator(chain_or_operator: Union[MarkovChain, WalkOperator, np.ndarray]) -> WalkOperator:
    if isinstance(chain_or_operator, WalkOperator):
        return chain_or_operator
    return WalkOperator(chain_or_operator)


def walk_eigensystem(chain_or_operator) -> WalkEigensystem:
    """Eigenvectors of W on the walk space, built from the spectrum of D."""
    operator = as_operator(chain_or_operator)
    data = operator.spectral
    psi0 = np.real(embed(data.eigenvectors[:, 0]))
    pairs = []
    for k in range(1, operator.n):
        lam = float(data.eigenvalues[k])
        if lam > 1.0 - DEGENERATE_TOL:
            raise DegenerateEigenvalue(f"eigenvalue {k} equals 1", k=k)
        vector = np.real(embed(data.eigenvectors[:, k]))
        residual = operator.transfer(vector) - lam * vector
        mu = float(np.linalg.norm(residual))
        if mu < BREAKDOWN_TOL:
            raise NumericalBreakdown(f"partner of eigenvector {k} has norm {mu:.3e}", k=k)
        partner = residual / mu
        phi = math.acos(min(1.0, max(-1.0, lam)))
        plus = (vector - 1j * partner) / math.sqrt(2.0)
        minus = (vector + 1j * partner) / math.sqrt(2.0)
        pairs.append(WalkEigenpair(phi, vector, partner, plus, minus))
    return WalkEigensystem(psi0, tuple(pairs))


# State-level entry points

StateLike = Union[WalkState, np.ndarray]


def _unwrap(state: StateLike) -> Tuple[np.ndarray, Optional[RegisterLayout]]:
    if isinstance(state, WalkState):
        return state.amplitudes, state.layout
    return np.asarray(state), None


def _wrap(amplitudes: np.ndarray, layout: Optional[RegisterLayout]) -> StateLike:
    if layout is None:
        return amplitudes
    return WalkState(layout, amplitudes)


def apply_V(P, state: StateLike, forward: bool = True) -> StateLike:
    psi, layout = _unwrap(state)
    return _wrap(as_operator(P).apply_V(psi, forward), layout)


def apply_S(P, state: StateLike) -> StateLike:
    psi, layout = _unwrap(state)
    return _wrap(as_operator(P).apply_S(psi), layout)


def apply_R0(state: StateLike) -> StateLike:
    psi, layout = _unwrap(state)
    return _wrap(WalkOperator.apply_R0(psi), layout)


def apply_W(P_s, state: StateLike) -> StateLike:
    psi, layout = _unwrap(state)
    return _wrap(as_operator(P_s).apply_W(psi), layout)


def apply_W_power(P_s, l: int, state: StateLike) -> StateLike:
    psi, layout = _unwrap(state)
    return _wrap(as_operator(P_s).apply_W_power(l, psi), layout)
