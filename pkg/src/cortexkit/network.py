"""Functional brain-network construction.

Seven estimators build a weighted graph from a regional time series:
Pearson, mutual information, partial correlation, Spearman, high-order
correlation-of-correlations, and the sparse / low-rank self-representation
solvers. Sparsification (top-K% retention, optional binarization) lives
here too. Every estimator returns a symmetric, zero-diagonal BrainGraph.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSeriesError, DimensionError, SingularityError
from .timeseries import TimeSeries

__all__ = [
    "BrainGraph",
    "ConstructSpec",
    "pearson",
    "mutual_info",
    "partial_corr",
    "spearman",
    "hofc",
    "sparse_rep",
    "lowrank_rep",
    "sparsify",
    "construct",
    "midranks",
]

CONSTRUCT_METHODS = (
    "pearson",
    "mutual_info",
    "partial_corr",
    "spearman",
    "hofc",
    "sparse_rep",
    "lowrank_rep",
)

DEFAULT_SPARSITY_PERCENT = 30.0


@dataclass
class BrainGraph:
    """Weighted functional connectivity graph.

    adjacency is N x N, symmetric, zero-diagonal; node_features (N x D)
    and node labels are optional. `meta` carries solver diagnostics and
    augmentation flags without affecting graph identity.
    """

    adjacency: np.ndarray
    node_features: np.ndarray | None = None
    weighted: bool = True
    labels: list[str] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        a = np.asarray(self.adjacency, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"adjacency must be square, got {a.shape}")
        if a.shape[0] < 2:
            raise ValueError("graph needs at least 2 nodes")
        if not np.all(np.isfinite(a)):
            raise ValueError("adjacency contains non-finite entries")
        if np.abs(a - a.T).max() > 1e-12:
            raise ValueError("adjacency must be symmetric")
        if np.abs(np.diag(a)).max() != 0.0:
            raise ValueError("adjacency diagonal must be zero")
        if not self.weighted:
            vals = np.unique(a)
            if not np.all(np.isin(vals, (0.0, 1.0))):
                raise ValueError("binary graph entries must be 0 or 1")
        self.adjacency = a
        if self.node_features is not None:
            h = np.asarray(self.node_features, dtype=float)
            if h.shape[0] != a.shape[0]:
                raise DimensionError("node_features rows must match node count")
            self.node_features = h
        if self.labels is not None and len(self.labels) != a.shape[0]:
            raise DimensionError("labels length must match node count")

    @property
    def n_nodes(self) -> int:
        return self.adjacency.shape[0]

    def binary_support(self) -> np.ndarray:
        """0/1 matrix marking nonzero connections."""
        return (self.adjacency != 0).astype(float)

    def edge_list(self) -> np.ndarray:
        """Upper-triangle (i, j) pairs of nonzero connections, i < j."""
        iu, ju = np.triu_indices(self.n_nodes, k=1)
        mask = self.adjacency[iu, ju] != 0
        return np.stack([iu[mask], ju[mask]], axis=1)


@dataclass
class ConstructSpec:
    """Estimator choice plus solver/sparsification parameters."""

    method: str = "pearson"
    lam: float = 0.1
    n_bins: int | None = None
    ridge: float | None = None
    solver_tol: float = 1e-6
    solver_max_iters: int = 5000
    sparsify_percent: float | None = DEFAULT_SPARSITY_PERCENT
    binarize: bool = False
    by_magnitude: bool = False

    def __post_init__(self):
        if self.method not in CONSTRUCT_METHODS:
            raise ValueError(f"unknown construction method {self.method!r}")
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if self.solver_tol <= 0:
            raise ValueError("solver_tol must be > 0")
        if self.sparsify_percent is not None and not 0 < self.sparsify_percent <= 100:
            raise ValueError("sparsify percent must be in (0, 100]")


def _zero_variance_regions(x: np.ndarray) -> np.ndarray:
    return np.flatnonzero(x.std(axis=0) == 0)


def _corrcoef(x: np.ndarray) -> np.ndarray:
    """Correlation matrix of columns; caller guarantees nonzero stds."""
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc
    sd = np.sqrt(np.diag(cov))
    r = cov / np.outer(sd, sd)
    return np.clip(r, -1.0, 1.0)


def _finish(a: np.ndarray, **meta) -> BrainGraph:
    a = (a + a.T) / 2
    np.fill_diagonal(a, 0.0)
    return BrainGraph(a, meta=meta)


def pearson(ts: TimeSeries) -> BrainGraph:
    """Linear correlation between every pair of regions."""
    bad = _zero_variance_regions(ts.values)
    if bad.size:
        raise DegenerateSeriesError(int(bad[0]))
    return _finish(_corrcoef(ts.values))


def midranks(x: np.ndarray) -> np.ndarray:
    """Ranks 1..T with ties sharing their average (mid) rank."""
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x))
    sx = x[order]
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and sx[j + 1] == sx[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2 + 1
        i = j + 1
    return ranks


def spearman(ts: TimeSeries) -> BrainGraph:
    """Monotonic association: Pearson correlation of mid-rank transforms."""
    if ts.n_timepoints < 3:
        raise ValueError("spearman needs at least 3 timepoints")
    bad = _zero_variance_regions(ts.values)
    if bad.size:
        raise DegenerateSeriesError(int(bad[0]))
    ranks = np.column_stack([midranks(ts.values[:, j]) for j in range(ts.n_regions)])
    return _finish(_corrcoef(ranks))


def mutual_info(ts: TimeSeries, n_bins: int | None = None) -> BrainGraph:
    """Histogram plug-in mutual information (equal-width bins, natural log).

    Defaults to ceil(sqrt(T)) bins per region.
    """
    t = ts.n_timepoints
    if n_bins is None:
        n_bins = int(np.ceil(np.sqrt(t)))
    if n_bins < 2:
        raise ValueError("mutual information needs at least 2 bins")
    if t < n_bins:
        raise ValueError(f"need T >= n_bins, got T={t}, n_bins={n_bins}")
    n = ts.n_regions
    # Per-region bin index; a constant region collapses into a single bin.
    idx = np.zeros((t, n), dtype=int)
    for j in range(n):
        col = ts.values[:, j]
        lo, hi = col.min(), col.max()
        if hi == lo:
            continue
        raw = np.floor((col - lo) / (hi - lo) * n_bins).astype(int)
        idx[:, j] = np.minimum(raw, n_bins - 1)
    a = np.zeros((n, n))
    marg = [np.bincount(idx[:, j], minlength=n_bins) / t for j in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            joint = np.zeros((n_bins, n_bins))
            np.add.at(joint, (idx[:, i], idx[:, j]), 1.0)
            joint /= t
            outer = np.outer(marg[i], marg[j])
            nz = joint > 0
            a[i, j] = a[j, i] = float(np.sum(joint[nz] * np.log(joint[nz] / outer[nz])))
    np.fill_diagonal(a, 0.0)
    return BrainGraph(np.maximum(a, 0.0))


def partial_corr(ts: TimeSeries, ridge: float | None = None) -> BrainGraph:
    """Pairwise correlation with all remaining regions regressed out.

    Computed from the (optionally ridge-regularized) precision matrix as
    -prec_ij / sqrt(prec_ii * prec_jj). ridge=None uses the default
    1e-6 * trace(cov) / N; pass ridge=0 to demand exact invertibility.
    """
    if ts.n_regions < 3:
        raise DimensionError("partial correlation needs at least 3 regions")
    bad = _zero_variance_regions(ts.values)
    if bad.size:
        raise DegenerateSeriesError(int(bad[0]))
    xc = ts.values - ts.values.mean(axis=0)
    cov = xc.T @ xc / (ts.n_timepoints - 1)
    if ridge is None:
        ridge = 1e-6 * np.trace(cov) / ts.n_regions
    sigma = cov + ridge * np.eye(ts.n_regions)
    try:
        np.linalg.cholesky(sigma)
        prec = np.linalg.inv(sigma)
    except np.linalg.LinAlgError as exc:
        raise SingularityError(
            "covariance is singular; pass a positive ridge to regularize"
        ) from exc
    d = np.sqrt(np.diag(prec))
    a = -prec / np.outer(d, d)
    return _finish(np.clip(a, -1.0, 1.0))


def hofc(ts: TimeSeries) -> BrainGraph:
    """Correlation between connectivity profiles (rows of the Pearson matrix).

    Row pairs are correlated over the other regions only: columns i and j
    are excluded so the trivial self-correlation entries cannot inflate
    the estimate.
    """
    if ts.n_regions < 3:
        raise DimensionError("high-order connectivity needs at least 3 regions")
    p = pearson(ts).adjacency
    np.fill_diagonal(p, 1.0)
    n = p.shape[0]
    a = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            keep = np.ones(n, dtype=bool)
            keep[[i, j]] = False
            ri, rj = p[i, keep], p[j, keep]
            ri = ri - ri.mean()
            rj = rj - rj.mean()
            denom = np.sqrt((ri @ ri) * (rj @ rj))
            if denom == 0:
                raise DegenerateSeriesError(
                    i if ri @ ri == 0 else j, "constant connectivity profile"
                )
            a[i, j] = a[j, i] = float(np.clip(ri @ rj / denom, -1.0, 1.0))
    return _finish(a)


def _soft(x: np.ndarray, thresh: float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - thresh, 0.0)


def _prox_l1_offdiag(w: np.ndarray, thresh: float) -> np.ndarray:
    out = _soft(w, thresh)
    np.fill_diagonal(out, 0.0)
    return out


def _penalty_l1(w: np.ndarray) -> float:
    return float(np.abs(w).sum())


def _prox_nuclear(w: np.ndarray, thresh: float) -> np.ndarray:
    u, s, vt = np.linalg.svd(w, full_matrices=False)
    return (u * np.maximum(s - thresh, 0.0)) @ vt


def _penalty_nuclear(w: np.ndarray) -> float:
    return float(np.linalg.svd(w, compute_uv=False).sum())


def _self_representation(
    x: np.ndarray,
    lam: float,
    tol: float,
    max_iters: int,
    prox,
    penalty,
) -> tuple[np.ndarray, list[float], bool, int]:
    """Proximal gradient on |X - XW|_F^2 + lam * penalty(W).

    The data-term gradient is 2(G W - G) with G = X^T X, so the step
    1/(2*lmax(G)) sits exactly at the descent-lemma bound and the stated
    objective decreases monotonically.
    """
    g = x.T @ x
    n = g.shape[0]
    w = np.zeros((n, n))
    lmax = float(np.linalg.eigvalsh(g).max())

    def objective(w_):
        return float(np.sum((x - x @ w_) ** 2) + lam * penalty(w_))

    trace = [objective(w)]
    if lmax == 0.0:  # x is identically zero; W = 0 is already optimal
        return w, trace, True, 0
    converged = False
    iters = 0
    for iters in range(1, max_iters + 1):
        grad = (g @ w - g) / lmax
        w = prox(w - grad, lam / (2 * lmax))
        trace.append(objective(w))
        if abs(trace[-2] - trace[-1]) <= tol * max(1.0, abs(trace[-2])):
            converged = True
            break
    return w, trace, converged, iters


def sparse_rep(
    ts: TimeSeries, lam: float, tol: float = 1e-6, max_iters: int = 5000
) -> BrainGraph:
    """L1-penalized self-representation network via ISTA.

    Solves min |X - XW|^2 + lam*|W|_1 with diag(W) fixed at zero; the
    returned adjacency is (W + W^T)/2. Solver diagnostics (objective
    trace, convergence flag, raw W) ride along in meta; hitting max_iters
    sets meta["warning"] instead of raising.
    """
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    w, trace, converged, iters = _self_representation(
        ts.values, lam, tol, max_iters, _prox_l1_offdiag, _penalty_l1
    )
    meta = {"solver": "ista", "converged": converged, "iterations": iters,
            "objective_trace": trace, "W": w}
    if not converged:
        meta["warning"] = f"no convergence within {max_iters} iterations"
    return _finish(w, **meta)


def lowrank_rep(
    ts: TimeSeries, lam: float, tol: float = 1e-6, max_iters: int = 5000
) -> BrainGraph:
    """Nuclear-norm-penalized self-representation via singular-value thresholding."""
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    w, trace, converged, iters = _self_representation(
        ts.values, lam, tol, max_iters, _prox_nuclear, _penalty_nuclear
    )
    meta = {"solver": "svt", "converged": converged, "iterations": iters,
            "objective_trace": trace, "W": w}
    if not converged:
        meta["warning"] = f"no convergence within {max_iters} iterations"
    return _finish(w, **meta)


def sparsify(
    g: BrainGraph,
    top_percent: float = DEFAULT_SPARSITY_PERCENT,
    binarize: bool = False,
    by_magnitude: bool = False,
) -> BrainGraph:
    """Retain the top K% of connections, zeroing the rest.

    The keep count is ceil(K% of the N(N-1)/2 upper-triangle slots),
    ranked over the existing (nonzero) connections by signed value —
    or by |value| with by_magnitude — with deterministic (value desc,
    row, col) tie-breaking. Reapplying at the same K is a no-op.
    """
    if not 0 < top_percent <= 100:
        raise ValueError(f"top_percent must be in (0, 100], got {top_percent}")
    n = g.n_nodes
    iu, ju = np.triu_indices(n, k=1)
    vals = g.adjacency[iu, ju]
    nonzero = np.flatnonzero(vals != 0)
    n_slots = len(vals)
    keep_count = min(int(np.ceil(top_percent / 100.0 * n_slots)), nonzero.size)
    key = np.abs(vals[nonzero]) if by_magnitude else vals[nonzero]
    # lexsort: last key is primary; negate for descending value, then row, col.
    order = np.lexsort((ju[nonzero], iu[nonzero], -key))
    kept = nonzero[order[:keep_count]]
    a = np.zeros_like(g.adjacency)
    kept_vals = np.ones(len(kept)) if binarize else vals[kept]
    a[iu[kept], ju[kept]] = kept_vals
    a[ju[kept], iu[kept]] = kept_vals
    return BrainGraph(
        a,
        node_features=None if g.node_features is None else g.node_features.copy(),
        weighted=not binarize,
        labels=None if g.labels is None else list(g.labels),
        meta=dict(g.meta, sparsified=top_percent, binarized=binarize),
    )


def construct(ts: TimeSeries, spec: ConstructSpec) -> BrainGraph:
    """Build a network per spec: estimator, then optional sparsification."""
    if spec.method == "pearson":
        g = pearson(ts)
    elif spec.method == "mutual_info":
        g = mutual_info(ts, spec.n_bins)
    elif spec.method == "partial_corr":
        g = partial_corr(ts, spec.ridge)
    elif spec.method == "spearman":
        g = spearman(ts)
    elif spec.method == "hofc":
        g = hofc(ts)
    elif spec.method == "sparse_rep":
        g = sparse_rep(ts, spec.lam, spec.solver_tol, spec.solver_max_iters)
    else:
        g = lowrank_rep(ts, spec.lam, spec.solver_tol, spec.solver_max_iters)
    if spec.sparsify_percent is not None:
        g = sparsify(g, spec.sparsify_percent, spec.binarize, spec.by_magnitude)
    return g
