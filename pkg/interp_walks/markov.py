"""
Markov Layer: classical chains, spectra, hitting times and schedules

This module builds and validates row-stochastic chains, their discriminant
matrices, absorbing and interpolated variants, spectral and linear-solve
hitting times, the interpolation schedules consumed by the search drivers,
and the slowly varying chain sequence used for adiabatic state preparation.
"""

import logging
import math
import threading
import warnings
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, Optional, Sequence, Tuple, Union

import networkx as nx
import numpy as np
from scipy import linalg

from .errors import (
    AllMarked,
    BadSpec,
    DegenerateUnmarkedBlock,
    DimensionMismatch,
    EmptyMarkedSet,
    NonStochastic,
    NonStochasticQ,
    NotErgodic,
    NotReversible,
    QOutOfRange,
    ROutOfRange,
    SOutOfRange,
    SingularSystem,
)
from .logger_config import SUCCESS_MESSAGES

logger = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-9
ENTRY_TOL = 1e-12
REVERSIBLE_TOL = 1e-10
UNMARKED_TOL = 1e-12
LAZY_TOL = 1e-12

Marked = Union[int, Iterable[int]]


@dataclass(frozen=True)
class SpectralData:
    """Eigen-decomposition of a symmetric matrix, sorted by eigenvalue descending."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def gap(self) -> float:
        """Eigenvalue gap 1 - lambda_1."""
        if len(self.eigenvalues) < 2:
            return 1.0
        return float(1.0 - self.eigenvalues[1])

    @property
    def phases(self) -> np.ndarray:
        """Walk eigenphases arccos(lambda_k)."""
        return np.arccos(np.clip(self.eigenvalues, -1.0, 1.0))

    def coefficients(self, vector: np.ndarray) -> np.ndarray:
        return self.eigenvectors.T @ vector

    def scale(self, factors: np.ndarray, vector: np.ndarray) -> np.ndarray:
        """Multiply eigencomponent k of ``vector`` by ``factors[k]``."""
        return self.eigenvectors @ (factors * self.coefficients(vector))

    def operator(self, factors: np.ndarray) -> np.ndarray:
        return (self.eigenvectors * factors) @ self.eigenvectors.T

    def reconstruct(self) -> np.ndarray:
        return self.operator(self.eigenvalues)


@dataclass(frozen=True, eq=False)
class MarkovChain:
    """Row-stochastic transition matrix with a lazily cached stationary distribution."""
    P: np.ndarray
    ergodic: bool
    reversible: bool
    _cache: Dict[str, Any] = field(default_factory=dict, repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def __post_init__(self):
        matrix = np.array(self.P, dtype=float)
        matrix.setflags(write=False)
        object.__setattr__(self, "P", matrix)

    @property
    def n(self) -> int:
        return self.P.shape[0]

    @property
    def pi(self) -> np.ndarray:
        """Stationary distribution, solved once and cached."""
        with self._lock:
            if "pi" not in self._cache:
                if not self.ergodic:
                    raise NotErgodic("stationary distribution requested for a non-ergodic chain")
                self._cache["pi"] = _solve_stationary(self.P)
            return self._cache["pi"]

    @property
    def spectral(self) -> SpectralData:
        """Spectrum of the discriminant matrix, computed once and cached."""
        with self._lock:
            if "spectral" not in self._cache:
                self._cache["spectral"] = spectrum(discriminant(self.P))
            return self._cache["spectral"]

    @property
    def is_lazy(self) -> bool:
        """All discriminant eigenvalues are non-negative."""
        return bool(self.spectral.eigenvalues[-1] >= -LAZY_TOL)

    def detailed_balance_residual(self) -> float:
        flow = self.pi[:, None] * self.P
        return float(np.max(np.abs(flow - flow.T)))


def _solve_stationary(P: np.ndarray) -> np.ndarray:
    n = P.shape[0]
    system = P.T - np.eye(n)
    system[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = linalg.solve(system, rhs)
    except linalg.LinAlgError as exc:
        raise SingularSystem(f"stationary system is singular: {exc}") from exc
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def _is_structurally_ergodic(P: np.ndarray) -> bool:
    graph = nx.from_numpy_array((P > 0).astype(int), create_using=nx.DiGraph)
    return nx.is_strongly_connected(graph) and nx.is_aperiodic(graph)


def _build(P: np.ndarray, pi: Optional[np.ndarray] = None) -> MarkovChain:
    ergodic = _is_structurally_ergodic(P)
    reversible = False
    if ergodic:
        if pi is None:
            pi = _solve_stationary(P)
        flow = pi[:, None] * P
        reversible = bool(np.max(np.abs(flow - flow.T)) < REVERSIBLE_TOL)
    chain = MarkovChain(P, ergodic, reversible)
    if pi is not None and ergodic:
        chain._cache["pi"] = np.asarray(pi, dtype=float)
    return chain


def _checked_matrix(P) -> np.ndarray:
    matrix = np.asarray(P, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
        raise DimensionMismatch(f"transition matrix must be square, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise BadSpec("transition matrix has non-finite entries")
    if np.any(matrix < -ENTRY_TOL) or np.any(matrix > 1.0 + ENTRY_TOL):
        raise NonStochastic("transition probabilities must lie in [0, 1]")
    deviation = np.max(np.abs(matrix.sum(axis=1) - 1.0))
    if deviation > ROW_SUM_TOL:
        raise NonStochastic(f"row sums deviate from 1 by {deviation:.3e}", deviation=float(deviation))
    return np.clip(matrix, 0.0, 1.0)


def _as_matrix(P) -> np.ndarray:
    if isinstance(P, MarkovChain):
        return P.P
    return np.asarray(P, dtype=float)


def _as_chain(P) -> MarkovChain:
    if isinstance(P, MarkovChain):
        return P
    return validate(P)


def validate(P, require_reversible: bool = False) -> MarkovChain:
    """Check a raw matrix and return an ergodic chain with its stationary distribution."""
    matrix = _checked_matrix(P)
    chain = _build(matrix)
    if not chain.ergodic:
        raise NotErgodic("chain is not irreducible and aperiodic")
    if require_reversible and not chain.reversible:
        raise NotReversible(
            "detailed balance fails",
            residual=chain.detailed_balance_residual(),
        )
    logger.debug(SUCCESS_MESSAGES['chain_validated'].format(chain.n, chain.ergodic, chain.reversible))
    return chain


def lazy(P) -> MarkovChain:
    """Lazy version (P + I) / 2, sharing the stationary distribution."""
    if isinstance(P, MarkovChain):
        matrix, pi = P.P, (P.pi if P.ergodic else None)
    else:
        matrix, pi = _checked_matrix(P), None
    lazy_matrix = (matrix + np.eye(matrix.shape[0])) / 2.0
    return _build(lazy_matrix, pi)


def discriminant(P) -> np.ndarray:
    """D(P) with entries sqrt(p_xy * p_yx)."""
    matrix = _as_matrix(P)
    return np.sqrt(matrix * matrix.T)


def spectrum(D: np.ndarray) -> SpectralData:
    """Sorted eigenpairs of a symmetric matrix with deterministic signs."""
    values, vectors = linalg.eigh(np.asarray(D, dtype=float))
    order = np.argsort(-values, kind="stable")
    values = values[order]
    vectors = vectors[:, order]
    for k in range(vectors.shape[1]):
        column = vectors[:, k]
        leading = np.flatnonzero(np.abs(column) > 1e-12)
        if leading.size and column[leading[0]] < 0:
            vectors[:, k] = -column
    return SpectralData(values, vectors)


def marked_set(marked: Marked, n: int) -> Tuple[int, ...]:
    """Normalize a marked vertex or collection to a sorted tuple."""
    if isinstance(marked, (int, np.integer)):
        vertices = (int(marked),)
    else:
        vertices = tuple(sorted({int(v) for v in marked}))
    if not vertices:
        raise EmptyMarkedSet("marked set is empty")
    if any(v < 0 or v >= n for v in vertices):
        raise BadSpec(f"marked vertices {vertices} outside 0..{n - 1}")
    if len(vertices) == n:
        raise AllMarked("every vertex is marked")
    return vertices


def absorbing(P, marked: Marked) -> MarkovChain:
    """Replace marked rows by unit self-loops."""
    matrix = np.array(_as_matrix(P), dtype=float)
    for vertex in marked_set(marked, matrix.shape[0]):
        matrix[vertex, :] = 0.0
        matrix[vertex, vertex] = 1.0
    return _build(matrix)


def interpolate(P, Pprime, s: float) -> MarkovChain:
    """P(s) = (1 - s) P + s P'."""
    if not 0.0 <= s <= 1.0:
        raise SOutOfRange(f"s={s} outside [0, 1]", s=s)
    first, second = _as_matrix(P), _as_matrix(Pprime)
    if first.shape != second.shape:
        raise DimensionMismatch(f"shapes {first.shape} and {second.shape} differ")
    if s == 0.0:
        return P if isinstance(P, MarkovChain) else _build(first)
    return _build((1.0 - s) * first + s * second)


def gap(chain: MarkovChain) -> float:
    """Eigenvalue gap of the discriminant of an ergodic chain."""
    if not chain.ergodic:
        raise NotErgodic("gap requested for a non-ergodic chain")
    return chain.spectral.gap


def require_reversible(chain: MarkovChain) -> None:
    if not chain.ergodic:
        raise NotErgodic("a reversible ergodic chain is required")
    if not chain.reversible:
        raise NotReversible("a reversible chain is required", residual=chain.detailed_balance_residual())


def unmarked_amplitudes(chain: MarkovChain, marked: Marked) -> np.ndarray:
    """|pi-bar>: square-root amplitudes of pi restricted to unmarked vertices."""
    vertices = marked_set(marked, chain.n)
    weights = np.array(chain.pi, dtype=float)
    weights[list(vertices)] = 0.0
    return np.sqrt(weights / weights.sum())


def hitting_time_spectral(P, marked: Marked) -> float:
    """HT(P, M) from the unmarked block of D(P')."""
    chain = _as_chain(P)
    require_reversible(chain)
    vertices = marked_set(marked, chain.n)
    unmarked = np.setdiff1d(np.arange(chain.n), vertices)
    block = discriminant(absorbing(chain, vertices))[np.ix_(unmarked, unmarked)]
    values, vectors = linalg.eigh(block)
    if np.any(values > 1.0 - UNMARKED_TOL):
        raise DegenerateUnmarkedBlock(
            "unmarked block has an eigenvalue at 1",
            eigenvalue=float(values.max()),
        )
    pibar = unmarked_amplitudes(chain, vertices)[unmarked]
    overlaps = vectors.T @ pibar
    return float(np.sum(overlaps ** 2 / (1.0 - values)))


def hitting_time_classical(P, marked: Marked) -> float:
    """HT(P, M) by solving (I - P_UU) h = 1 on the unmarked block."""
    chain = _as_chain(P)
    vertices = marked_set(marked, chain.n)
    unmarked = np.setdiff1d(np.arange(chain.n), vertices)
    system = np.eye(len(unmarked)) - chain.P[np.ix_(unmarked, unmarked)]
    with warnings.catch_warnings():
        warnings.simplefilter("error", linalg.LinAlgWarning)
        try:
            h = linalg.solve(system, np.ones(len(unmarked)))
        except (linalg.LinAlgError, linalg.LinAlgWarning) as exc:
            raise SingularSystem(f"hitting-time system is singular: {exc}") from exc
    weights = chain.pi[unmarked]
    return float(weights @ h / weights.sum())


def max_hitting_time(P) -> float:
    """Largest single-marked hitting time over all vertices."""
    chain = _as_chain(P)
    return max(hitting_time_spectral(chain, g) for g in range(chain.n))


def interpolated_hitting_time(P, marked: Marked, s: float) -> float:
    """HT(s) = sum_{k>=1} |<v_k(s)|pi-bar>|^2 / (1 - lambda_k(s))."""
    chain = _as_chain(P)
    vertices = marked_set(marked, chain.n)
    if len(vertices) != 1:
        raise BadSpec("interpolated hitting time needs a single marked vertex")
    if not 0.0 <= s < 1.0:
        raise SOutOfRange(f"s={s} outside [0, 1)", s=s)
    require_reversible(chain)
    data = interpolate(chain, absorbing(chain, vertices), s).spectral
    overlaps = data.eigenvectors[:, 1:].T @ unmarked_amplitudes(chain, vertices)
    return float(np.sum(overlaps ** 2 / (1.0 - data.eigenvalues[1:])))


def stationary_power(chain: MarkovChain, tol: float = 1e-13, max_iter: int = 200000) -> np.ndarray:
    """Stationary distribution by power iteration (cross-check only)."""
    if not chain.ergodic:
        raise NotErgodic("power iteration needs an ergodic chain")
    x = np.full(chain.n, 1.0 / chain.n)
    for _ in range(max_iter):
        nxt = x @ chain.P
        if np.abs(nxt - x).sum() < tol:
            return nxt / nxt.sum()
        x = nxt
    return x / x.sum()


# Angles and stationary amplitudes along the interpolation

def theta_of_s(pi_g: float, s: float) -> float:
    """Angle with sin^2(theta) = pi_g / (1 - s (1 - pi_g))."""
    return math.asin(math.sqrt(pi_g / (1.0 - s * (1.0 - pi_g))))


def s_of_theta(pi_g: float, theta: float) -> float:
    """Inverse of theta_of_s."""
    return (1.0 - pi_g / math.sin(theta) ** 2) / (1.0 - pi_g)


def alternate_angle(s: float) -> float:
    """Diagnostic angle with cos(theta) = sqrt((1 - s) / s); NaN below s = 1/2."""
    if s < 0.5:
        return float("nan")
    return math.acos(math.sqrt((1.0 - s) / s))


def angle_state(chain: MarkovChain, g: int, theta: float) -> np.ndarray:
    """cos(theta)|pi-bar> + sin(theta)|g>."""
    vector = math.cos(theta) * unmarked_amplitudes(chain, g)
    vector[g] = math.sin(theta)
    return vector


def stationary_amplitudes(chain: MarkovChain, g: int, s: float) -> np.ndarray:
    """|v0(s)>, the square-root stationary amplitudes of P(s)."""
    if not 0.0 <= s <= 1.0:
        raise SOutOfRange(f"s={s} outside [0, 1]", s=s)
    return angle_state(chain, g, theta_of_s(float(chain.pi[g]), s))


# Schedules

@dataclass(frozen=True)
class InterpolationSchedule:
    """Interpolation parameters s_1..s_r with their angles theta_0..theta_r."""
    r: int
    s: Tuple[float, ...]
    theta: Tuple[float, ...]
    source: str  # sequential | single | uniform | custom
    kind: str = "equal-angle"  # equal-angle | stationary | from-q
    seed: Optional[int] = None

    @property
    def anchor(self) -> str:
        """Starting state: pi_bar after a failed marked check, or pi itself."""
        return "pi_bar" if self.kind == "equal-angle" else "pi"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "r": self.r,
            "s": [float(v) for v in self.s],
            "theta": [float(v) for v in self.theta],
            "source": self.source,
            "kind": self.kind,
            "anchor": self.anchor,
            "seed": self.seed,
        }


def _check_pi_g(pi_g: float) -> None:
    if not 0.0 < pi_g < 1.0:
        raise BadSpec(f"pi_g={pi_g} outside (0, 1)")


def max_equal_angle_steps(pi_g: float) -> int:
    """Largest r whose equal-angle schedule keeps s_1 >= 0."""
    _check_pi_g(pi_g)
    ratio = math.pi / (2.0 * math.asin(math.sqrt(pi_g)))
    return int(math.floor(ratio + 1e-9)) - 1


def _clip_unit(value: float) -> float:
    if -1e-12 < value < 0.0:
        return 0.0
    if 1.0 < value < 1.0 + 1e-12:
        return 1.0
    return value


def schedule_equal_angle(pi_g: float, r: int) -> InterpolationSchedule:
    """Equal angle steps theta_i = i pi / (2 (r + 1)) starting from pi-bar."""
    maximum = max_equal_angle_steps(pi_g)
    if r < 1 or r > maximum:
        raise ROutOfRange(
            f"r={r} outside 1..{maximum} for pi_g={pi_g}",
            r=r,
            max_r=maximum,
        )
    step = math.pi / (2 * (r + 1))
    theta = tuple(i * step for i in range(r + 1))
    s = tuple(_clip_unit(s_of_theta(pi_g, t)) for t in theta[1:])
    logger.info(SUCCESS_MESSAGES['schedule_built'].format("equal-angle", r, "pi_bar"))
    return InterpolationSchedule(r, s, theta, "sequential", "equal-angle")


def schedule_stationary(pi_g: float, r: int) -> InterpolationSchedule:
    """Equal angle steps from the stationary angle arcsin(sqrt(pi_g)) to pi/2."""
    _check_pi_g(pi_g)
    if r < 1:
        raise ROutOfRange(f"r={r} must be at least 1", r=r)
    start = math.asin(math.sqrt(pi_g))
    step = (math.pi / 2 - start) / (r + 1)
    theta = tuple(start + i * step for i in range(r + 1))
    s = tuple(_clip_unit(s_of_theta(pi_g, t)) for t in theta[1:])
    logger.info(SUCCESS_MESSAGES['schedule_built'].format("stationary", r, "pi"))
    return InterpolationSchedule(r, s, theta, "sequential", "stationary")


def _classify_meta_chain(Q: np.ndarray) -> str:
    m = Q.shape[0]
    if m == 1:
        return "single"
    successor = np.eye(m, k=1)
    successor[-1, -1] = 1.0
    if np.allclose(Q, successor):
        return "sequential"
    if np.allclose(Q, 1.0 / m):
        return "uniform"
    return "custom"


def schedule_from_Q(
    S: Sequence[float],
    Q,
    start: int,
    L: int,
    seed: Optional[int] = None,
    pi_g: Optional[float] = None,
) -> InterpolationSchedule:
    """Walk the meta-chain Q over parameter set S for L steps from index ``start``."""
    values = np.asarray(S, dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise BadSpec("parameter set must be a non-empty sequence")
    if np.any(values < 0.0) or np.any(values > 1.0):
        raise SOutOfRange("parameter set leaves [0, 1]")
    meta = np.asarray(Q, dtype=float)
    if meta.shape != (values.size, values.size):
        raise DimensionMismatch(f"Q has shape {meta.shape}, expected {(values.size, values.size)}")
    if np.any(meta < -ENTRY_TOL) or np.any(np.abs(meta.sum(axis=1) - 1.0) > ROW_SUM_TOL):
        raise NonStochasticQ("Q is not row-stochastic")
    if not 0 <= start < values.size:
        raise BadSpec(f"start index {start} outside 0..{values.size - 1}")
    if L < 1:
        raise BadSpec("schedule length must be at least 1")

    rows = np.clip(meta, 0.0, None)
    rows = rows / rows.sum(axis=1, keepdims=True)
    rng = np.random.default_rng(seed)
    indices = [start]
    for _ in range(L - 1):
        indices.append(int(rng.choice(values.size, p=rows[indices[-1]])))

    s = tuple(float(values[i]) for i in indices)
    theta: Tuple[float, ...] = ()
    if pi_g is not None:
        _check_pi_g(pi_g)
        theta = (theta_of_s(pi_g, 0.0),) + tuple(theta_of_s(pi_g, v) for v in s)
    return InterpolationSchedule(L, s, theta, _classify_meta_chain(meta), "from-q", seed)


def ambainis_parameters(ht: float) -> Tuple[float, ...]:
    """Doubling parameter set {1 - 1/k : k = 1, 2, 4, ...} up to the hitting time."""
    top = max(1, math.ceil(math.log2(max(ht, 1.0))))
    return tuple(1.0 - 1.0 / 2 ** j for j in range(top + 1))


# Adiabatic chain sequence

@dataclass(frozen=True)
class AdiabaticStep:
    s: float
    theta: float
    chain: MarkovChain
    amplitudes: np.ndarray


@dataclass(frozen=True)
class AdiabaticSequence:
    """Chains ordered from the absorbing end toward P."""
    q: float
    r: int
    delta: float
    steps: Tuple[AdiabaticStep, ...]

    @property
    def overlaps(self) -> np.ndarray:
        return np.array([
            float(a.amplitudes @ b.amplitudes)
            for a, b in zip(self.steps[:-1], self.steps[1:])
        ])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "q": self.q,
            "r": self.r,
            "delta": self.delta,
            "s": [step.s for step in self.steps],
            "theta": [step.theta for step in self.steps],
            "overlaps": [float(v) for v in self.overlaps],
        }


def adiabatic_sequence(P, g: int, q: float) -> AdiabaticSequence:
    """Chains whose consecutive stationary amplitudes overlap by at least q."""
    if not 0.0 < q < 1.0:
        raise QOutOfRange(f"q={q} outside (0, 1)", q=q)
    chain = _as_chain(P)
    require_reversible(chain)
    if not chain.is_lazy:
        raise BadSpec("adiabatic sequence needs a lazy chain; apply lazy first")
    vertex = marked_set(g, chain.n)[0]
    pi_g = float(chain.pi[vertex])

    r = max(1, math.ceil(math.pi / (2.0 * math.acos(q)) - 1.0))
    delta = math.pi / (2 * (r + 1))
    start = math.asin(math.sqrt(pi_g))
    absorbed = absorbing(chain, vertex)

    angles = []
    j = 0
    while math.pi / 2 - j * delta > start + 1e-12:
        angles.append(math.pi / 2 - j * delta)
        j += 1

    steps = []
    for theta in angles:
        s = _clip_unit(s_of_theta(pi_g, theta))
        steps.append(AdiabaticStep(s, theta, interpolate(chain, absorbed, s), angle_state(chain, vertex, theta)))
    steps.append(AdiabaticStep(0.0, start, chain, angle_state(chain, vertex, start)))

    logger.info(SUCCESS_MESSAGES['adiabatic_built'].format(r, len(steps)))
    return AdiabaticSequence(q, r, delta, tuple(steps))


# Chain constructions used by the generators

def graph_walk(graph: nx.Graph) -> MarkovChain:
    """Lazy simple random walk on an undirected graph."""
    nodes = sorted(graph.nodes)
    adjacency = nx.to_numpy_array(graph, nodelist=nodes, weight=None)
    np.fill_diagonal(adjacency, 0.0)
    degree = adjacency.sum(axis=1)
    if np.any(degree == 0):
        raise BadSpec("graph has isolated vertices")
    return lazy(adjacency / degree[:, None])


def metropolis(weights, target) -> MarkovChain:
    """Metropolis chain for ``target`` from symmetric proposal weights."""
    W = np.array(weights, dtype=float)
    pi = np.asarray(target, dtype=float)
    if W.ndim != 2 or W.shape[0] != W.shape[1] or W.shape[0] != pi.size:
        raise DimensionMismatch("weights and target sizes disagree")
    if not np.allclose(W, W.T) or np.any(W < 0):
        raise BadSpec("proposal weights must be symmetric and non-negative")
    if np.any(pi <= 0):
        raise BadSpec("target distribution must be positive")
    pi = pi / pi.sum()
    np.fill_diagonal(W, 0.0)
    proposal = W / W.sum(axis=1).max()
    P = proposal * np.minimum(1.0, pi[None, :] / pi[:, None])
    np.fill_diagonal(P, 0.0)
    P[np.diag_indices_from(P)] = 1.0 - P.sum(axis=1)
    return _build(P, pi)
