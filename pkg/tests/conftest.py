"""
Shared fixtures for the walk simulator tests
Small reversible chains with known spectra and hitting times
"""

import sys
from pathlib import Path

import networkx as nx
import numpy as np
import pytest

# Add the repository root to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from interp_walks.markov import graph_walk, lazy, metropolis, validate


@pytest.fixture
def two_chain():
    """Lazy walk on two vertices: every row is (1/2, 1/2)."""
    return validate(np.full((2, 2), 0.5))


@pytest.fixture
def lazy_cycle():
    def build(n: int):
        return graph_walk(nx.cycle_graph(n))
    return build


@pytest.fixture
def random_reversible():
    """Lazy Metropolis chain with seeded weights and a non-uniform target."""
    def build(n: int, seed: int = 1):
        rng = np.random.default_rng(seed)
        weights = np.triu(rng.uniform(0.5, 1.5, size=(n, n)), k=1)
        target = rng.uniform(1.0, 2.0, size=n)
        return lazy(metropolis(weights + weights.T, target))
    return build
