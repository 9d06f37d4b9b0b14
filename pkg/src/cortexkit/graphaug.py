"""Brain-graph augmentation under seeded randomness.

Six perturbations of a BrainGraph: uniform node dropping, hub-preserving
node dropping (drop probability inversely proportional to degree), edge
perturbation at constant edge count, weight-dependent edge removal,
random-walk subgraph cropping, and node-attribute masking. Every op takes
an owned SeededRng stream and is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegreeError, MissingFeaturesError
from .network import BrainGraph
from .rng import SeededRng

__all__ = [
    "GraphAugmentSpec",
    "node_drop",
    "hub_preserving_drop",
    "edge_perturb",
    "weight_dep_edge_removal",
    "subgraph_crop",
    "attr_mask",
    "apply_graph_augment",
    "sample_without_replacement",
]

GRAPH_AUGMENT_METHODS = (
    "node_drop",
    "hub_preserving_drop",
    "edge_perturb",
    "weight_dep_edge_removal",
    "subgraph_crop",
    "attr_mask",
)


@dataclass
class GraphAugmentSpec:
    method: str
    ratio: float
    rng_stream: str = "graph-augment"

    def __post_init__(self):
        if self.method not in GRAPH_AUGMENT_METHODS:
            raise ValueError(f"unknown graph augmentation {self.method!r}")
        if not 0 < self.ratio < 1:
            raise ValueError(f"ratio must be in (0,1), got {self.ratio}")


def sample_without_replacement(rng: SeededRng, probs: np.ndarray, k: int) -> list[int]:
    """Draw k distinct indices, renormalizing the distribution after each draw."""
    probs = np.asarray(probs, dtype=float).copy()
    if k > np.count_nonzero(probs):
        raise ValueError("cannot draw more items than have positive probability")
    chosen: list[int] = []
    for _ in range(k):
        p = probs / probs.sum()
        idx = int(rng.gen.choice(len(p), p=p))
        chosen.append(idx)
        probs[idx] = 0.0
    return chosen


def _keep_subgraph(g: BrainGraph, keep: np.ndarray, **meta_updates) -> BrainGraph:
    keep = np.sort(keep)
    return BrainGraph(
        g.adjacency[np.ix_(keep, keep)],
        node_features=None if g.node_features is None else g.node_features[keep],
        weighted=g.weighted,
        labels=None if g.labels is None else [g.labels[i] for i in keep],
        meta=dict(g.meta, **meta_updates),
    )


def node_drop(g: BrainGraph, o: float, rng: SeededRng) -> BrainGraph:
    """Remove floor(N*o) uniformly chosen nodes with their incident edges."""
    if not 0 < o < 1:
        raise ValueError(f"drop ratio must be in (0,1), got {o}")
    n = g.n_nodes
    k = int(np.floor(n * o))
    if n - k < 2:
        raise ValueError(f"dropping {k} of {n} nodes would leave fewer than 2")
    dropped = rng.gen.choice(n, size=k, replace=False)
    keep = np.setdiff1d(np.arange(n), dropped)
    return _keep_subgraph(g, keep, dropped_nodes=int(k))


def hub_preserving_drop(g: BrainGraph, c: float, rng: SeededRng) -> BrainGraph:
    """Drop floor(N*c) nodes with probability inversely proportional to degree.

    High-degree hubs are the least likely to go. Degree is the binary
    degree on the current support; an isolated node makes 1/d undefined.
    """
    if not 0 < c < 1:
        raise ValueError(f"drop ratio must be in (0,1), got {c}")
    n = g.n_nodes
    degrees = g.binary_support().sum(axis=1)
    if np.any(degrees == 0):
        raise DegreeError(f"node {int(np.argmin(degrees))} is isolated; 1/degree undefined")
    k = int(np.floor(n * c))
    if n - k < 2:
        raise ValueError(f"dropping {k} of {n} nodes would leave fewer than 2")
    probs = (1.0 / degrees) / (1.0 / degrees).sum()
    dropped = sample_without_replacement(rng, probs, k)
    keep = np.setdiff1d(np.arange(n), dropped)
    return _keep_subgraph(g, keep, dropped_nodes=int(k))


def edge_perturb(g: BrainGraph, e: float, rng: SeededRng) -> BrainGraph:
    """Swap floor(|E|*e) uniformly chosen edges for absent ones.

    Total edge count is conserved exactly. Added edges take the mean
    weight of the original graph's edges (1 for binary graphs).
    """
    if not 0 < e < 1:
        raise ValueError(f"perturb ratio must be in (0,1), got {e}")
    n = g.n_nodes
    iu, ju = np.triu_indices(n, k=1)
    present = np.flatnonzero(g.adjacency[iu, ju] != 0)
    absent = np.flatnonzero(g.adjacency[iu, ju] == 0)
    if present.size == 0 or absent.size == 0:
        raise ValueError("edge perturbation needs at least one edge and one absent slot")
    m = int(np.floor(present.size * e))
    if m == 0:
        return BrainGraph(g.adjacency.copy(), node_features=g.node_features,
                          weighted=g.weighted, labels=g.labels, meta=dict(g.meta))
    if m > absent.size:
        raise ValueError(f"need {m} absent slots to add edges, only {absent.size} exist")
    mean_w = 1.0 if not g.weighted else float(g.adjacency[iu, ju][present].mean())
    removed = rng.gen.choice(present, size=m, replace=False)
    added = rng.gen.choice(absent, size=m, replace=False)
    a = g.adjacency.copy()
    a[iu[removed], ju[removed]] = 0.0
    a[ju[removed], iu[removed]] = 0.0
    a[iu[added], ju[added]] = mean_w
    a[ju[added], iu[added]] = mean_w
    return BrainGraph(a, node_features=g.node_features, weighted=g.weighted,
                      labels=g.labels, meta=dict(g.meta, perturbed_edges=m))


def weight_dep_edge_removal(g: BrainGraph, ratio: float, rng: SeededRng) -> BrainGraph:
    """Remove floor(|E|*ratio) edges, weak connections first.

    Removal probability is proportional to 1/|a_ij|, so the strongest
    connections are the most likely to survive.
    """
    if not 0 < ratio < 1:
        raise ValueError(f"removal ratio must be in (0,1), got {ratio}")
    n = g.n_nodes
    iu, ju = np.triu_indices(n, k=1)
    vals = g.adjacency[iu, ju]
    present = np.flatnonzero(vals != 0)
    if present.size == 0:
        raise ValueError("graph has no edges to remove")
    weights = np.abs(vals[present])
    if np.any(weights == 0):
        raise ValueError("zero-weight edge present; 1/|a| undefined")
    m = int(np.floor(present.size * ratio))
    a = g.adjacency.copy()
    if m > 0:
        probs = (1.0 / weights) / (1.0 / weights).sum()
        removed = present[sample_without_replacement(rng, probs, m)]
        a[iu[removed], ju[removed]] = 0.0
        a[ju[removed], iu[removed]] = 0.0
    return BrainGraph(a, node_features=g.node_features, weighted=g.weighted,
                      labels=g.labels, meta=dict(g.meta, removed_edges=m))


def subgraph_crop(g: BrainGraph, keep_fraction: float, rng: SeededRng) -> BrainGraph:
    """Induced subgraph on ceil(N*keep_fraction) nodes collected by a random walk.

    The walk starts at a uniformly chosen seed, steps to a uniform
    neighbor, and restarts at the seed on dead ends. If the seed's
    component is smaller than the target, the whole component is
    returned and meta["truncated"] is set.
    """
    if not 0 < keep_fraction <= 1:
        raise ValueError(f"keep fraction must be in (0,1], got {keep_fraction}")
    n = g.n_nodes
    target = int(np.ceil(n * keep_fraction))
    support = g.binary_support()
    neighbors = [np.flatnonzero(support[i]) for i in range(n)]
    seed = int(rng.gen.integers(0, n))

    component = {seed}
    frontier = [seed]
    while frontier:
        nxt = []
        for v in frontier:
            for w in neighbors[v]:
                if int(w) not in component:
                    component.add(int(w))
                    nxt.append(int(w))
        frontier = nxt

    truncated = len(component) < target
    target = min(target, len(component))
    visited = {seed}
    current = seed
    while len(visited) < target:
        nbrs = neighbors[current]
        if nbrs.size == 0:
            current = seed
            continue
        current = int(nbrs[rng.gen.integers(0, nbrs.size)])
        visited.add(current)
    keep = np.array(sorted(visited))
    if keep.size < 2:
        raise ValueError("cropped subgraph would have fewer than 2 nodes")
    return _keep_subgraph(g, keep, truncated=truncated)


def attr_mask(g: BrainGraph, mask_fraction: float, rng: SeededRng) -> BrainGraph:
    """Zero the feature rows of floor(N*mask_fraction) uniformly chosen nodes."""
    if not 0 < mask_fraction < 1:
        raise ValueError(f"mask fraction must be in (0,1), got {mask_fraction}")
    if g.node_features is None:
        raise MissingFeaturesError("graph carries no node features to mask")
    n = g.n_nodes
    k = int(np.floor(n * mask_fraction))
    h = g.node_features.copy()
    if k > 0:
        masked = rng.gen.choice(n, size=k, replace=False)
        h[masked] = 0.0
    return BrainGraph(g.adjacency.copy(), node_features=h, weighted=g.weighted,
                      labels=g.labels, meta=dict(g.meta, masked_nodes=int(k)))


def apply_graph_augment(g: BrainGraph, spec: GraphAugmentSpec, rng: SeededRng) -> BrainGraph:
    op = {
        "node_drop": node_drop,
        "hub_preserving_drop": hub_preserving_drop,
        "edge_perturb": edge_perturb,
        "weight_dep_edge_removal": weight_dep_edge_removal,
        "subgraph_crop": subgraph_crop,
        "attr_mask": attr_mask,
    }[spec.method]
    return op(g, spec.ratio, rng)
