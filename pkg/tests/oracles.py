"""Independent brute-force oracles used by the test suite.

Everything here is deliberately naive — O(n^2) DFTs, exhaustive path and
partition enumeration, triple-loop triangle censuses, finite differences
— so the implementations under test are checked against a different
route, not against themselves.
"""

from __future__ import annotations

import numpy as np


def naive_dft(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=complex)
    n = len(x)
    k = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * k * m / n)) for m in range(n)])


def all_simple_paths(support: np.ndarray, src: int, dst: int) -> list[list[int]]:
    """Every simple src->dst path on a 0/1 support matrix."""
    n = support.shape[0]
    paths = []

    def walk(node, seen, path):
        if node == dst:
            paths.append(path[:])
            return
        for nxt in range(n):
            if support[node, nxt] and nxt not in seen:
                seen.add(nxt)
                path.append(nxt)
                walk(nxt, seen, path)
                path.pop()
                seen.remove(nxt)

    walk(src, {src}, [src])
    return paths


def brute_shortest(support: np.ndarray, src: int, dst: int) -> tuple[float, int, list[list[int]]]:
    """(distance, #shortest paths, the shortest paths) via enumeration."""
    if src == dst:
        return 0.0, 1, [[src]]
    paths = all_simple_paths(support, src, dst)
    if not paths:
        return np.inf, 0, []
    best = min(len(p) - 1 for p in paths)
    shortest = [p for p in paths if len(p) - 1 == best]
    return float(best), len(shortest), shortest


def brute_dist_counts(support: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = support.shape[0]
    dist = np.zeros((n, n))
    counts = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            d, c, _ = brute_shortest(support, i, j)
            dist[i, j] = d
            counts[i, j] = c
    return dist, counts


def brute_betweenness(support: np.ndarray) -> np.ndarray:
    n = support.shape[0]
    bc = np.zeros(n)
    for i in range(n):
        for h in range(n):
            for j in range(n):
                if h == j or h == i or j == i:
                    continue
                _, total, paths = brute_shortest(support, h, j)
                if total == 0:
                    continue
                through = sum(1 for p in paths if i in p[1:-1])
                bc[i] += through / total
    return bc / ((n - 1) * (n - 2))


def brute_local_efficiency(support: np.ndarray) -> np.ndarray:
    n = support.shape[0]
    out = np.zeros(n)
    for i in range(n):
        nbrs = [v for v in range(n) if support[i, v]]
        k = len(nbrs)
        if k < 2:
            continue
        sub = support[np.ix_(nbrs, nbrs)]
        total = 0.0
        for a in range(k):
            for b in range(k):
                if a == b:
                    continue
                d, _, _ = brute_shortest(sub, a, b)
                if np.isfinite(d) and d > 0:
                    total += 1.0 / d
        out[i] = total / (k * (k - 1))
    return out


def triangle_counts(support: np.ndarray) -> np.ndarray:
    n = support.shape[0]
    t = np.zeros(n)
    for i in range(n):
        for j in range(n):
            for h in range(n):
                t[i] += support[i, j] * support[i, h] * support[j, h]
    return t / 2.0


def set_partitions(items: list[int]):
    """All set partitions (Bell-number enumeration)."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1 :]
        yield [[first]] + part


def partition_quality(a: np.ndarray, blocks: list[list[int]]) -> float:
    """Direct double-sum evaluation of partition quality (incl. i == j terms)."""
    two_l = a.sum()
    k = a.sum(axis=1)
    n = a.shape[0]
    label = np.zeros(n, dtype=int)
    for c, block in enumerate(blocks):
        for v in block:
            label[v] = c
    total = 0.0
    for i in range(n):
        for j in range(n):
            if label[i] == label[j]:
                total += a[i, j] - k[i] * k[j] / two_l
    return total / two_l


def best_partition_quality(a: np.ndarray) -> float:
    return max(partition_quality(a, blocks) for blocks in set_partitions(list(range(a.shape[0]))))


def brute_assortativity(support: np.ndarray) -> float:
    n = support.shape[0]
    deg = support.sum(axis=1)
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if support[i, j]]
    l = len(edges)
    s_prod = sum(deg[i] * deg[j] for i, j in edges) / l
    s_mean = sum((deg[i] + deg[j]) / 2 for i, j in edges) / l
    s_sq = sum((deg[i] ** 2 + deg[j] ** 2) / 2 for i, j in edges) / l
    return (s_prod - s_mean**2) / (s_sq - s_mean**2)


def central_diff_grad(f, x: np.ndarray, h: float = 1e-6) -> np.ndarray:
    """Central finite-difference gradient of a scalar function."""
    g = np.zeros_like(x, dtype=float)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2 * h)
    return g


def rel_err(a: np.ndarray, b: np.ndarray) -> float:
    denom = max(float(np.linalg.norm(b)), 1e-12)
    return float(np.linalg.norm(np.asarray(a) - np.asarray(b)) / denom)


def spearman_pair_no_ties(x: np.ndarray, y: np.ndarray) -> float:
    """1 - 6 sum(d^2) / (T (T^2-1)) with plain ranks (tie-free inputs only)."""
    rx = np.argsort(np.argsort(x)) + 1
    ry = np.argsort(np.argsort(y)) + 1
    d = rx - ry
    t = len(x)
    return 1 - 6 * float(d @ d) / (t * (t**2 - 1))


def pearson_pair(x: np.ndarray, y: np.ndarray) -> float:
    xc = x - x.mean()
    yc = y - y.mean()
    return float((xc @ yc) / np.sqrt((xc @ xc) * (yc @ yc)))


def partial_corr_three(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> float:
    """Pairwise partial-correlation formula for exactly one control series."""
    rxy = pearson_pair(x, y)
    rxz = pearson_pair(x, z)
    ryz = pearson_pair(y, z)
    return (rxy - rxz * ryz) / np.sqrt((1 - rxz**2) * (1 - ryz**2))
