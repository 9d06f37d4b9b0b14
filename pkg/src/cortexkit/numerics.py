"""Deterministic numerical substrate.

Dense matrices are plain float64 ``numpy.ndarray`` objects (row-major);
the helpers here add the validation and calling conventions the rest of
the package relies on: descending-order symmetric eigendecomposition,
SVD, FFT for arbitrary lengths, and all-pairs shortest paths with
shortest-path counting.
"""

from __future__ import annotations

import heapq

import numpy as np

from .errors import DimensionError

__all__ = [
    "as_matrix",
    "check_square",
    "sym_eig",
    "svd",
    "fft",
    "ifft",
    "shortest_paths",
]

_SYM_TOL = 1e-10


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    m = np.asarray(values, dtype=float)
    if m.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got ndim={m.ndim}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite entries")
    return m


def check_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = as_matrix(m, name)
    if m.shape[0] != m.shape[1]:
        raise DimensionError(f"{name} must be square, got {m.shape}")
    return m


def sym_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix.

    Returns (eigenvalues descending, eigenvectors as columns). The input
    must be symmetric within 1e-10; asymmetry raises DimensionError.
    """
    m = check_square(m)
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > _SYM_TOL * scale:
        raise DimensionError("matrix is not symmetric")
    vals, vecs = np.linalg.eigh(m)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD with singular values in descending order.

    Returns (U, s, V) such that U @ diag(s) @ V.T reconstructs the input.
    """
    m = as_matrix(m)
    u, s, vt = np.linalg.svd(m, full_matrices=False)
    return u, s, vt.T


def fft(x) -> np.ndarray:
    """Forward DFT for any length >= 1 (mixed-radix / Bluestein)."""
    x = np.asarray(x)
    if x.size == 0:
        raise DimensionError("fft input is empty")
    return np.fft.fft(x)


def ifft(x) -> np.ndarray:
    """Inverse DFT (round trip with fft within 1e-9)."""
    x = np.asarray(x)
    if x.size == 0:
        raise DimensionError("ifft input is empty")
    return np.fft.ifft(x)


def shortest_paths(adj, weighted: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """All-pairs shortest paths over a non-negative adjacency matrix.

    Unweighted mode runs BFS over the nonzero support: distances are hop
    counts and path_counts[h, j] is the number of distinct shortest h->j
    paths. Weighted mode converts each weight w > 0 to a length 1/w and
    runs Dijkstra; path counts are then accumulated on exact length ties
    only. Unreachable pairs get +inf; the diagonal is 0.
    """
    adj = check_square(adj, "adjacency")
    if np.any(adj < 0):
        raise ValueError("adjacency entries must be non-negative")
    n = adj.shape[0]
    neighbors = [np.flatnonzero(adj[i] != 0) for i in range(n)]

    dist = np.full((n, n), np.inf)
    counts = np.zeros((n, n))
    if weighted:
        for s in range(n):
            d, c = _dijkstra_counts(adj, neighbors, s)
            dist[s], counts[s] = d, c
    else:
        for s in range(n):
            d, c = _bfs_counts(neighbors, n, s)
            dist[s], counts[s] = d, c
    return dist, counts


def _bfs_counts(neighbors, n: int, source: int) -> tuple[np.ndarray, np.ndarray]:
    dist = np.full(n, np.inf)
    sigma = np.zeros(n)
    dist[source] = 0.0
    sigma[source] = 1.0
    frontier = [source]
    while frontier:
        nxt = []
        for v in frontier:
            dv = dist[v]
            for w in neighbors[v]:
                if np.isinf(dist[w]):
                    dist[w] = dv + 1
                    nxt.append(int(w))
                if dist[w] == dv + 1:
                    sigma[w] += sigma[v]
        frontier = nxt
    return dist, sigma


def _dijkstra_counts(adj, neighbors, source: int) -> tuple[np.ndarray, np.ndarray]:
    n = adj.shape[0]
    dist = np.full(n, np.inf)
    sigma = np.zeros(n)
    dist[source] = 0.0
    sigma[source] = 1.0
    done = np.zeros(n, dtype=bool)
    heap = [(0.0, source)]
    while heap:
        dv, v = heapq.heappop(heap)
        if done[v] or dv > dist[v]:
            continue
        done[v] = True
        for w in neighbors[v]:
            cand = dv + 1.0 / adj[v, w]
            if cand < dist[w]:
                dist[w] = cand
                sigma[w] = sigma[v]
                heapq.heappush(heap, (cand, int(w)))
            elif cand == dist[w]:
                sigma[w] += sigma[v]
    return dist, sigma
