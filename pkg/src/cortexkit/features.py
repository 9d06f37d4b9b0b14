"""Node- and graph-level network measures.

Six per-node measures (degree, strength, local efficiency, betweenness,
eigenvector centrality, clustering coefficient) and six whole-graph
measures (density, modularity, characteristic path length, global
efficiency, assortativity, transitivity), plus greedy modularity
community detection.

Path- and triangle-based measures operate on the binarized support;
strength, eigenvector centrality, and modularity use the weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, UndefinedError
from .network import BrainGraph
from .numerics import shortest_paths

__all__ = [
    "NodeFeatureTable",
    "GraphFeatureSet",
    "node_degree",
    "node_strength",
    "local_efficiency",
    "betweenness",
    "eigenvector_centrality",
    "clustering_coeff",
    "density",
    "modularity",
    "char_path_length",
    "global_efficiency",
    "assortativity",
    "transitivity",
    "node_feature_table",
    "graph_feature_set",
    "connected_components",
]

NODE_FEATURES = (
    "degree",
    "strength",
    "local_efficiency",
    "betweenness",
    "eigenvector_centrality",
    "clustering_coeff",
)
GRAPH_FEATURES = (
    "density",
    "modularity",
    "char_path_length",
    "global_efficiency",
    "assortativity",
    "transitivity",
)


@dataclass
class NodeFeatureTable:
    degree: np.ndarray
    strength: np.ndarray
    local_efficiency: np.ndarray
    betweenness: np.ndarray
    eigenvector_centrality: np.ndarray
    clustering_coeff: np.ndarray

    def as_columns(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in NODE_FEATURES}


@dataclass
class GraphFeatureSet:
    density: float
    modularity: float
    char_path_length: float
    global_efficiency: float
    assortativity: float
    transitivity: float
    community_assignment: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    def as_values(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in GRAPH_FEATURES}


def connected_components(support: np.ndarray) -> list[list[int]]:
    """Components of a 0/1 symmetric support matrix, ordered by smallest member."""
    n = support.shape[0]
    seen = np.zeros(n, dtype=bool)
    comps = []
    for s in range(n):
        if seen[s]:
            continue
        comp = [s]
        seen[s] = True
        frontier = [s]
        while frontier:
            nxt = []
            for v in frontier:
                for w in np.flatnonzero(support[v]):
                    if not seen[w]:
                        seen[w] = True
                        comp.append(int(w))
                        nxt.append(int(w))
            frontier = nxt
        comps.append(sorted(comp))
    return comps


def node_degree(g: BrainGraph) -> np.ndarray:
    """Number of nonzero connections per node."""
    return g.binary_support().sum(axis=1)


def node_strength(g: BrainGraph) -> np.ndarray:
    """Sum of connection weights per node (equals degree on binary graphs)."""
    return g.adjacency.sum(axis=1)


def local_efficiency(g: BrainGraph) -> np.ndarray:
    """Inverse shortest-path efficiency within each node's neighborhood.

    For node i, shortest paths are confined to the subgraph induced on
    its neighbors; nodes with fewer than 2 neighbors get 0.
    """
    support = g.binary_support()
    n = g.n_nodes
    out = np.zeros(n)
    for i in range(n):
        nbrs = np.flatnonzero(support[i])
        k = nbrs.size
        if k < 2:
            continue
        sub = support[np.ix_(nbrs, nbrs)]
        dist, _ = shortest_paths(sub, weighted=False)
        reachable = np.isfinite(dist) & (dist > 0)
        out[i] = (1.0 / dist[reachable]).sum() / (k * (k - 1))
    return out


def betweenness(g: BrainGraph) -> np.ndarray:
    """Fraction of shortest paths passing through each node.

    Brandes accumulation over the binary support, normalized by
    (N-1)(N-2) ordered source/target pairs; disconnected pairs
    contribute nothing.
    """
    n = g.n_nodes
    if n < 3:
        raise ValueError("betweenness needs at least 3 nodes")
    support = g.binary_support()
    neighbors = [np.flatnonzero(support[i]) for i in range(n)]
    bc = np.zeros(n)
    for s in range(n):
        # single-source shortest paths with predecessor lists
        dist = np.full(n, np.inf)
        sigma = np.zeros(n)
        preds: list[list[int]] = [[] for _ in range(n)]
        dist[s] = 0.0
        sigma[s] = 1.0
        stack: list[int] = []
        frontier = [s]
        while frontier:
            nxt = []
            for v in frontier:
                stack.append(v)
                for w in neighbors[v]:
                    if np.isinf(dist[w]):
                        dist[w] = dist[v] + 1
                        nxt.append(int(w))
                    if dist[w] == dist[v] + 1:
                        sigma[w] += sigma[v]
                        preds[w].append(v)
            frontier = nxt
        delta = np.zeros(n)
        for w in reversed(stack):
            for v in preds[w]:
                delta[v] += sigma[v] / sigma[w] * (1 + delta[w])
            if w != s:
                bc[w] += delta[w]
    return bc / ((n - 1) * (n - 2))


def eigenvector_centrality(
    g: BrainGraph, tol: float = 1e-10, max_iters: int = 100000
) -> np.ndarray:
    """Leading eigenvector of |A|: unit L2 norm, non-negative entries.

    Power iteration runs on the dominant connected component (largest
    spectral radius; ties broken by smallest node index), with a
    positive diagonal shift so bipartite supports cannot oscillate.
    Nodes outside that component get 0 and meta["ec_disconnected"] is
    set on the graph.
    """
    a = np.abs(g.adjacency)
    support = (a != 0).astype(float)
    comps = connected_components(support)
    best = None
    for comp in comps:
        idx = np.array(comp)
        sub = a[np.ix_(idx, idx)]
        if idx.size == 1:
            lam, vec, its = 0.0, np.ones(1), 0
        else:
            lam, vec, its = _power_iteration(sub, tol, max_iters)
        if best is None or lam > best[0]:
            best = (lam, idx, vec)
    lam, idx, vec = best
    out = np.zeros(g.n_nodes)
    out[idx] = vec
    out /= np.linalg.norm(out)
    resid = np.linalg.norm(a @ out - lam * out)
    if resid >= max(tol, 1e-12) * max(1.0, lam):
        raise ConvergenceError(f"eigenvector residual {resid:.2e} above tolerance")
    if len(comps) > 1:
        g.meta["ec_disconnected"] = True
    return out


def _power_iteration(a: np.ndarray, tol: float, max_iters: int):
    # shift keeps the dominant eigenvalue of the nonneg matrix unique
    shift = a.sum(axis=1).max() / 2 + 1e-12
    m = a + shift * np.eye(a.shape[0])
    x = np.ones(a.shape[0]) / np.sqrt(a.shape[0])
    for it in range(1, max_iters + 1):
        y = m @ x
        y /= np.linalg.norm(y)
        if np.linalg.norm(y - x) < tol / 10:
            x = y
            lam = float(x @ a @ x)
            return lam, x, it
        x = y
    raise ConvergenceError(f"power iteration did not converge in {max_iters} iterations")


def clustering_coeff(g: BrainGraph) -> np.ndarray:
    """Per-node triangle density 2*t_i / (k_i (k_i - 1)) on the binary support."""
    support = g.binary_support()
    k = support.sum(axis=1)
    t = np.diag(support @ support @ support) / 2.0
    denom = k * (k - 1)
    return np.where(denom > 0, 2 * t / np.where(denom > 0, denom, 1.0), 0.0)


def density(g: BrainGraph) -> float:
    """Existing connections over possible connections, 2l / (N(N-1))."""
    n = g.n_nodes
    l = g.binary_support().sum() / 2
    return float(2 * l / (n * (n - 1)))


def modularity(g: BrainGraph) -> tuple[float, np.ndarray]:
    """Greedy agglomerative community detection and its partition quality.

    Merges the community pair with the largest quality gain until no
    merge helps, scanning pairs in index order so the result is
    deterministic. Returns (M, assignment); M is always the direct
    evaluation of the partition, not an incrementally updated value.
    """
    a = g.adjacency
    two_l = float(a.sum())
    if two_l <= 0:
        raise ValueError("modularity needs positive total edge weight")
    n = g.n_nodes
    between = a.copy()
    strength = a.sum(axis=1)
    members: list[list[int] | None] = [[i] for i in range(n)]
    active = list(range(n))
    while len(active) > 1:
        best_gain = 1e-12
        best_pair = None
        for ai, i in enumerate(active):
            for j in active[ai + 1 :]:
                gain = 2 * (between[i, j] - strength[i] * strength[j] / two_l) / two_l
                if gain > best_gain:
                    best_gain = gain
                    best_pair = (i, j)
        if best_pair is None:
            break
        i, j = best_pair
        between[i, :] += between[j, :]
        between[:, i] += between[:, j]
        strength[i] += strength[j]
        members[i] = members[i] + members[j]  # type: ignore[operator]
        members[j] = None
        active.remove(j)
    assignment = np.zeros(n, dtype=int)
    for c, i in enumerate(active):
        assignment[members[i]] = c  # type: ignore[index]
    return modularity_of_partition(g, assignment), assignment


def modularity_of_partition(g: BrainGraph, assignment: np.ndarray) -> float:
    """Direct partition-quality evaluation against the strength null model."""
    a = g.adjacency
    two_l = float(a.sum())
    if two_l <= 0:
        raise ValueError("modularity needs positive total edge weight")
    k = a.sum(axis=1)
    same = assignment[:, None] == assignment[None, :]
    return float(((a - np.outer(k, k) / two_l) * same).sum() / two_l)


def char_path_length(g: BrainGraph) -> float:
    """Mean shortest-path length over reachable ordered node pairs."""
    dist, _ = shortest_paths(g.binary_support(), weighted=False)
    off = ~np.eye(g.n_nodes, dtype=bool)
    finite = np.isfinite(dist) & off
    if not finite.any():
        raise UndefinedError("no reachable node pairs")
    return float(dist[finite].mean())


def is_connected(g: BrainGraph) -> bool:
    return len(connected_components(g.binary_support())) == 1


def global_efficiency(g: BrainGraph) -> float:
    """Mean inverse shortest-path length; disconnected pairs contribute 0."""
    dist, _ = shortest_paths(g.binary_support(), weighted=False)
    n = g.n_nodes
    off = ~np.eye(n, dtype=bool)
    inv = np.zeros_like(dist)
    reach = np.isfinite(dist) & off
    inv[reach] = 1.0 / dist[reach]
    return float(inv[off].sum() / (n * (n - 1)))


def assortativity(g: BrainGraph) -> float:
    """Degree correlation across connected node pairs."""
    edges = g.edge_list()
    if len(edges) == 0:
        raise UndefinedError("assortativity needs at least one edge")
    deg = node_degree(g)
    ki = deg[edges[:, 0]]
    kj = deg[edges[:, 1]]
    l = len(edges)
    prod = (ki * kj).sum() / l
    mean = ((ki + kj) / 2).sum() / l
    sq = ((ki**2 + kj**2) / 2).sum() / l
    denom = sq - mean**2
    if denom == 0:
        raise UndefinedError("assortativity undefined: endpoint degrees have zero variance")
    return float((prod - mean**2) / denom)


def transitivity(g: BrainGraph) -> float:
    """Triangle closure ratio: sum(2 t_i) / sum(k_i (k_i - 1))."""
    support = g.binary_support()
    k = support.sum(axis=1)
    t = np.diag(support @ support @ support) / 2.0
    denom = (k * (k - 1)).sum()
    if denom == 0:
        return 0.0
    return float(2 * t.sum() / denom)


def node_feature_table(g: BrainGraph) -> NodeFeatureTable:
    return NodeFeatureTable(
        degree=node_degree(g),
        strength=node_strength(g),
        local_efficiency=local_efficiency(g),
        betweenness=betweenness(g),
        eigenvector_centrality=eigenvector_centrality(g),
        clustering_coeff=clustering_coeff(g),
    )


def graph_feature_set(g: BrainGraph) -> GraphFeatureSet:
    """All six graph measures; undefined ones become NaN with a flag."""
    flags: dict = {}
    try:
        cpl = char_path_length(g)
    except UndefinedError:
        cpl = float("nan")
        flags["char_path_length"] = "undefined"
    if not is_connected(g):
        flags["disconnected"] = True
    try:
        ac = assortativity(g)
    except UndefinedError as exc:
        ac = float("nan")
        flags["assortativity"] = str(exc)
    m, assignment = modularity(g)
    return GraphFeatureSet(
        density=density(g),
        modularity=m,
        char_path_length=cpl,
        global_efficiency=global_efficiency(g),
        assortativity=ac,
        transitivity=transitivity(g),
        community_assignment=assignment,
        flags=flags,
    )
