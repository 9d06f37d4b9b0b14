import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from cortexkit.network import BrainGraph


def graph_from_edges(n: int, edges: list[tuple[int, int]],
                     weights: dict | None = None) -> BrainGraph:
    a = np.zeros((n, n))
    for i, j in edges:
        w = 1.0 if weights is None else weights[(i, j)]
        a[i, j] = a[j, i] = w
    return BrainGraph(a, weighted=weights is not None)


@pytest.fixture
def k5():
    return graph_from_edges(5, [(i, j) for i in range(5) for j in range(i + 1, 5)])


@pytest.fixture
def star5():
    """Hub node 0 with four leaves."""
    return graph_from_edges(5, [(0, i) for i in range(1, 5)])


@pytest.fixture
def path3():
    return graph_from_edges(3, [(0, 1), (1, 2)])


@pytest.fixture
def path4():
    return graph_from_edges(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def bowtie():
    """Two triangles sharing node 2."""
    return graph_from_edges(5, [(0, 1), (0, 2), (1, 2), (2, 3), (2, 4), (3, 4)])
