"""Multi-site federated learning simulator.

A minimal hand-differentiated model zoo (linear softmax classifier and a
one-hidden-layer tanh MLP) is trained across site shards in synchronous
rounds under one of five strategies — FedAvg, FedProx, MOON, LGFedAvg,
pFedMe — plus the Single (per-site isolated) and Mix (pooled) baselines.
Contrastive pretraining of the encoder uses the negative-cosine loss with
an explicit stop-gradient on the representations.

Stream discipline: per-(fold, site) training uses epoch-indexed streams
derived from the same root that the ML cross-validation driver uses, so
single-site federation and centralized training are bit-identical.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DimensionError
from .ml import (
    MODEL_REGISTRY,
    EvalReport,
    LabeledDataset,
    Standardizer,
    TrainedModel,
    aggregate_reports,
    evaluate,
    partition_stratified_kfold,
)
from .network import pearson
from .rng import SeededRng
from .state import ModelState
from .timeseries import TimeSeries, pretrain_pair

__all__ = [
    "SiteShard",
    "FedConfig",
    "FedTrace",
    "init_model",
    "mlp_forward_backward",
    "model_predict",
    "simsiam_loss",
    "pretrain",
    "local_update",
    "aggregate",
    "proximal_inner_solve",
    "pfedme_local",
    "run_federation",
    "make_synthetic_sites",
]

STRATEGIES = ("fedavg", "fedprox", "moon", "lgfedavg", "pfedme", "single", "mix")
HEAD_SPANS = ("head_w", "head_b")


@dataclass
class SiteShard:
    site_id: str
    dataset: LabeledDataset
    local_epochs: int = 1
    lr: float = 0.1
    batch: int = 16

    def __post_init__(self):
        if self.dataset.n_samples == 0:
            raise ValueError(f"site {self.site_id} has an empty dataset")
        if self.lr <= 0:
            raise ValueError("learning rate must be > 0")


@dataclass
class FedConfig:
    strategy: str = "fedavg"
    rounds: int = 10
    mu: float = 0.0
    moon_weight: float = 1.0
    moon_temp: float = 0.5
    seed: int = 0
    arch: str = "mlp1"
    hidden: int = 8
    n_classes: int = 2
    pfedme_inner_iters: int = 5
    pfedme_inner_lr: float = 0.2
    init_state: ModelState | None = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.mu < 0 or self.moon_weight < 0 or self.moon_temp <= 0:
            raise ConfigError("mu/moon_weight must be >= 0 and moon_temp > 0")
        if self.arch not in ("linear", "mlp1"):
            raise ConfigError(f"unknown arch {self.arch!r}")


@dataclass
class FedTrace:
    """Per-round, per-site losses and cumulative communicated bytes."""

    sites: list[str]
    rounds: int
    losses: dict[str, list[float]] = field(default_factory=dict)
    bytes_cumulative: dict[str, list[int]] = field(default_factory=dict)
    global_snapshots: list[np.ndarray] = field(default_factory=list)

    def record(self, site: str, loss: float, bytes_out: int):
        self.losses.setdefault(site, []).append(loss)
        prev = self.bytes_cumulative.setdefault(site, [])
        prev.append((prev[-1] if prev else 0) + bytes_out)

    def rows(self) -> list[tuple[int, str, float, int]]:
        out = []
        for r in range(self.rounds):
            for site in self.sites:
                out.append((r, site, self.losses[site][r], self.bytes_cumulative[site][r]))
        return out


# ---------------------------------------------------------------------------
# model zoo: linear softmax and one-hidden-layer tanh MLP, hand gradients

def init_model(arch: str, in_dim: int, hidden: int, n_classes: int,
               rng: SeededRng) -> ModelState:
    """Fresh ModelState with scaled-normal weights and zero biases."""
    g = rng.gen
    if arch == "linear":
        w = g.normal(0.0, 1.0 / np.sqrt(in_dim), size=(in_dim, n_classes))
        params = np.concatenate([w.ravel(), np.zeros(n_classes)])
        layer_map = {"head_w": (0, w.size), "head_b": (w.size, w.size + n_classes)}
        return ModelState(params, layer_map,
                          {"kind": "linear", "in_dim": in_dim, "n_classes": n_classes})
    if arch != "mlp1":
        raise ConfigError(f"unknown arch {arch!r}")
    w1 = g.normal(0.0, 1.0 / np.sqrt(in_dim), size=(in_dim, hidden))
    w2 = g.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, n_classes))
    sizes = [w1.size, hidden, w2.size, n_classes]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    params = np.concatenate([w1.ravel(), np.zeros(hidden), w2.ravel(), np.zeros(n_classes)])
    layer_map = {
        "encoder_w": (int(offsets[0]), int(offsets[1])),
        "encoder_b": (int(offsets[1]), int(offsets[2])),
        "head_w": (int(offsets[2]), int(offsets[3])),
        "head_b": (int(offsets[3]), int(offsets[4])),
    }
    return ModelState(params, layer_map,
                      {"kind": "mlp1", "in_dim": in_dim, "hidden": hidden,
                       "n_classes": n_classes})


def _views(state: ModelState) -> dict[str, np.ndarray]:
    arch = state.arch
    out: dict[str, np.ndarray] = {}
    if arch["kind"] == "mlp1":
        out["w1"] = state.span("encoder_w").reshape(arch["in_dim"], arch["hidden"])
        out["b1"] = state.span("encoder_b")
        out["w2"] = state.span("head_w").reshape(arch["hidden"], arch["n_classes"])
    else:
        out["w2"] = state.span("head_w").reshape(arch["in_dim"], arch["n_classes"])
    out["b2"] = state.span("head_b")
    return out


def encode(state: ModelState, x: np.ndarray) -> np.ndarray:
    """Representation z: tanh hidden layer for mlp1, the input itself for linear."""
    x = np.atleast_2d(x)
    if state.arch["kind"] == "linear":
        return x
    v = _views(state)
    return np.tanh(x @ v["w1"] + v["b1"])


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def model_predict(state: ModelState, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(argmax class, class-1 probability) for a batch."""
    v = _views(state)
    z = encode(state, x)
    probs = _softmax(z @ v["w2"] + v["b2"])
    return probs.argmax(axis=1), probs[:, 1]


def mlp_forward_backward(state: ModelState, x: np.ndarray, y: np.ndarray,
                         rep_hook=None) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-entropy loss, full parameter gradient, and the representation z.

    rep_hook(x_batch, z) may add a differentiable term on the
    representation: it returns (extra_loss, dloss/dz), which is chained
    through the encoder. Gradients are exact (hand-derived) and match
    central finite differences.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=int)
    arch = state.arch
    if x.shape[1] != arch["in_dim"]:
        raise DimensionError(f"expected {arch['in_dim']} input dims, got {x.shape[1]}")
    if y.shape[0] != x.shape[0]:
        raise DimensionError("batch features and labels disagree")
    v = _views(state)
    n = x.shape[0]
    z = encode(state, x)
    logits = z @ v["w2"] + v["b2"]
    probs = _softmax(logits)
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + 1e-300)))
    dlogits = probs.copy()
    dlogits[np.arange(n), y] -= 1.0
    dlogits /= n
    gw2 = z.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    dz = dlogits @ v["w2"].T
    if rep_hook is not None:
        extra_loss, dz_extra = rep_hook(x, z)
        loss += float(extra_loss)
        dz = dz + dz_extra
    grad = np.zeros_like(state.params)
    if arch["kind"] == "mlp1":
        dpre = dz * (1.0 - z**2)
        gw1 = x.T @ dpre
        gb1 = dpre.sum(axis=0)
        s = state.layer_map
        grad[s["encoder_w"][0] : s["encoder_w"][1]] = gw1.ravel()
        grad[s["encoder_b"][0] : s["encoder_b"][1]] = gb1
    s = state.layer_map
    grad[s["head_w"][0] : s["head_w"][1]] = gw2.ravel()
    grad[s["head_b"][0] : s["head_b"][1]] = gb2
    return loss, grad, z


# ---------------------------------------------------------------------------
# contrastive pretraining (negative cosine with stop-gradient)

def _neg_cosine_and_grad(a: np.ndarray, b: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean of -cos(a_i, b_i) over rows, with gradient w.r.t. b only."""
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    if np.any(na == 0) or np.any(nb == 0):
        raise ValueError("cosine similarity undefined for zero vectors")
    dots = np.sum(a * b, axis=1)
    cos = dots / (na * nb)
    n = a.shape[0]
    db = (-a / (na * nb)[:, None] + (cos / nb**2)[:, None] * b) / n
    return float(-cos.mean()), db


def simsiam_loss(z1, z2, p1, p2):
    """Symmetric negative cosine similarity with stop-gradient on z1, z2.

    loss = Phi(stopgrad(z1), p2) + Phi(stopgrad(z2), p1). Returns
    (loss, dz1, dz2, dp1, dp2); the z gradients are identically zero.
    Accepts single vectors or row-stacked batches (batch terms are
    averaged, keeping the loss inside [-2, 2]).
    """
    z1 = np.atleast_2d(np.asarray(z1, dtype=float))
    z2 = np.atleast_2d(np.asarray(z2, dtype=float))
    p1 = np.atleast_2d(np.asarray(p1, dtype=float))
    p2 = np.atleast_2d(np.asarray(p2, dtype=float))
    l_a, dp2 = _neg_cosine_and_grad(z1, p2)
    l_b, dp1 = _neg_cosine_and_grad(z2, p1)
    loss = l_a + l_b
    return loss, np.zeros_like(z1), np.zeros_like(z2), dp1, dp2


def _init_predictor(hidden: int, rng: SeededRng) -> ModelState:
    g = rng.gen
    w1 = g.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, hidden))
    w2 = g.normal(0.0, 1.0 / np.sqrt(hidden), size=(hidden, hidden))
    params = np.concatenate([w1.ravel(), np.zeros(hidden), w2.ravel(), np.zeros(hidden)])
    sizes = [w1.size, hidden, w2.size, hidden]
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    layer_map = {
        "pred1_w": (int(offsets[0]), int(offsets[1])),
        "pred1_b": (int(offsets[1]), int(offsets[2])),
        "pred2_w": (int(offsets[2]), int(offsets[3])),
        "pred2_b": (int(offsets[3]), int(offsets[4])),
    }
    return ModelState(params, layer_map, {"kind": "predictor", "hidden": hidden})


def _predictor_forward(pred: ModelState, z: np.ndarray):
    h = pred.arch["hidden"]
    w1 = pred.span("pred1_w").reshape(h, h)
    b1 = pred.span("pred1_b")
    w2 = pred.span("pred2_w").reshape(h, h)
    b2 = pred.span("pred2_b")
    h1 = np.tanh(z @ w1 + b1)
    return h1 @ w2 + b2, h1


def _predictor_backward(pred: ModelState, z: np.ndarray, h1: np.ndarray,
                        dp: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    h = pred.arch["hidden"]
    w1 = pred.span("pred1_w").reshape(h, h)
    w2 = pred.span("pred2_w").reshape(h, h)
    gw2 = h1.T @ dp
    gb2 = dp.sum(axis=0)
    dh1 = dp @ w2.T
    dpre = dh1 * (1.0 - h1**2)
    gw1 = z.T @ dpre
    gb1 = dpre.sum(axis=0)
    dz = dpre @ w1.T
    grad = np.concatenate([gw1.ravel(), gb1, gw2.ravel(), gb2])
    return grad, dz


def _encoder_backward(state: ModelState, x: np.ndarray, z: np.ndarray,
                      dz: np.ndarray) -> np.ndarray:
    """Gradient on encoder spans only (head untouched)."""
    grad = np.zeros_like(state.params)
    if state.arch["kind"] != "mlp1":
        return grad
    dpre = dz * (1.0 - z**2)
    s = state.layer_map
    grad[s["encoder_w"][0] : s["encoder_w"][1]] = (x.T @ dpre).ravel()
    grad[s["encoder_b"][0] : s["encoder_b"][1]] = dpre.sum(axis=0)
    return grad


def _fc_features(ts: TimeSeries) -> np.ndarray:
    """Upper-triangle Pearson connectivity vector of one series."""
    a = pearson(ts).adjacency
    iu, ju = np.triu_indices(a.shape[0], k=1)
    return a[iu, ju]


def pretrain(corpus: list[TimeSeries], epochs: int = 100, seed: int = 0,
             hidden: int = 8, lr: float = 0.1, n_classes: int = 2) -> ModelState:
    """Self-supervised encoder pretraining on overlapping signal segments.

    Each subject yields two views (first/last 90% of the signal), mapped
    to connectivity features; the encoder and a two-layer predictor are
    optimized with the stop-gradient negative-cosine loss by full-batch
    gradient descent. Returns an mlp1 ModelState whose encoder spans are
    pretrained (head left at initialization); the per-epoch loss trace is
    in arch["pretrain_loss_trace"].
    """
    if not corpus:
        raise ValueError("pretraining corpus is empty")
    views1 = np.stack([_fc_features(pretrain_pair(ts)[0]) for ts in corpus])
    views2 = np.stack([_fc_features(pretrain_pair(ts)[1]) for ts in corpus])
    root = SeededRng(seed, "pretrain")
    enc = init_model("mlp1", views1.shape[1], hidden, n_classes, root.stream("encoder"))
    pred = _init_predictor(hidden, root.stream("predictor"))
    trace = []
    for _ in range(epochs):
        z1 = encode(enc, views1)
        z2 = encode(enc, views2)
        p1, h1a = _predictor_forward(pred, z1)
        p2, h1b = _predictor_forward(pred, z2)
        loss, _, _, dp1, dp2 = simsiam_loss(z1, z2, p1, p2)
        trace.append(loss)
        gpred1, dz1 = _predictor_backward(pred, z1, h1a, dp1)
        gpred2, dz2 = _predictor_backward(pred, z2, h1b, dp2)
        genc = _encoder_backward(enc, views1, z1, dz1) + _encoder_backward(enc, views2, z2, dz2)
        enc = ModelState(enc.params - lr * genc, enc.layer_map, enc.arch)
        pred = ModelState(pred.params - lr * (gpred1 + gpred2), pred.layer_map, pred.arch)
    enc.arch = dict(enc.arch, pretrain_loss_trace=trace)
    return enc


# ---------------------------------------------------------------------------
# strategy losses and local training

def _moon_hook(global_state: ModelState, prev_state: ModelState,
               weight: float, temp: float):
    """Representation-contrast term: pull toward the global model's view of
    the same batch, push away from the previous round's local view."""

    def hook(x_batch: np.ndarray, z: np.ndarray):
        zg = encode(global_state, x_batch)
        zp = encode(prev_state, x_batch)
        nz = np.linalg.norm(z, axis=1)
        ng = np.linalg.norm(zg, axis=1)
        npv = np.linalg.norm(zp, axis=1)
        if np.any(nz == 0) or np.any(ng == 0) or np.any(npv == 0):
            raise ValueError("zero-norm representation in contrast term")
        cos_g = np.sum(z * zg, axis=1) / (nz * ng)
        cos_p = np.sum(z * zp, axis=1) / (nz * npv)
        margin = (cos_p - cos_g) / temp
        loss = weight * float(np.mean(np.logaddexp(0.0, margin)))
        s = 1.0 / (1.0 + np.exp(-margin))
        dcos_g = zg / (nz * ng)[:, None] - (cos_g / nz**2)[:, None] * z
        dcos_p = zp / (nz * npv)[:, None] - (cos_p / nz**2)[:, None] * z
        dz = weight * (s / temp)[:, None] * (dcos_p - dcos_g) / z.shape[0]
        return loss, dz

    return hook


def _prox_pull(anchor: np.ndarray, mu: float):
    def extra(params: np.ndarray):
        diff = params - anchor
        return mu / 2 * float(diff @ diff), mu * diff

    return extra


def _sgd_epochs(state: ModelState, x: np.ndarray, y: np.ndarray, epochs: int,
                lr: float, batch: int, rng_fold: SeededRng, epoch_offset: int,
                rep_hook=None, grad_extra=None) -> tuple[ModelState, float]:
    """Deterministic-shuffle minibatch SGD; streams are keyed by absolute
    epoch index so round-split and straight-through schedules coincide."""
    params = state.params.copy()
    n = x.shape[0]
    losses = []
    for e in range(epochs):
        erng = rng_fold.stream(f"epoch{epoch_offset + e}")
        perm = erng.gen.permutation(n)
        for lo in range(0, n, batch):
            idx = perm[lo : lo + batch]
            work = ModelState(params, state.layer_map, state.arch)
            loss, grad, _ = mlp_forward_backward(work, x[idx], y[idx], rep_hook)
            if grad_extra is not None:
                extra_loss, extra_grad = grad_extra(params)
                loss += extra_loss
                grad = grad + extra_grad
            params = params - lr * grad
            losses.append(loss)
    return ModelState(params, state.layer_map, state.arch), float(np.mean(losses))


def local_update(site: SiteShard, global_state: ModelState, config: FedConfig,
                 round_idx: int, rng_fold: SeededRng,
                 site_ctx: dict) -> tuple[ModelState, int, float]:
    """One round of strategy-specific local training.

    Returns (new local state, bytes communicated upstream, mean batch
    loss). FedAvg/FedProx/MOON copy the global model and ship the full
    vector back; LGFedAvg keeps its encoder local and ships only the head
    spans; pFedMe is handled by pfedme_local.
    """
    if site.dataset.features.shape[1] != global_state.arch["in_dim"]:
        raise DimensionError("site feature dimension does not match the model")
    x, y = site.dataset.features, site.dataset.targets
    offset = round_idx * site.local_epochs
    full_bytes = 8 * global_state.params.size
    strategy = config.strategy

    if strategy in ("fedavg", "single", "mix"):
        new, loss = _sgd_epochs(global_state, x, y, site.local_epochs, site.lr,
                                site.batch, rng_fold, offset)
        return new, full_bytes if strategy == "fedavg" else 0, loss

    if strategy == "fedprox":
        extra = _prox_pull(global_state.params.copy(), config.mu) if config.mu > 0 else None
        new, loss = _sgd_epochs(global_state, x, y, site.local_epochs, site.lr,
                                site.batch, rng_fold, offset, grad_extra=extra)
        return new, full_bytes, loss

    if strategy == "moon":
        prev = site_ctx.get("prev_state") or global_state
        hook = None
        if config.moon_weight > 0:
            hook = _moon_hook(global_state, prev, config.moon_weight, config.moon_temp)
        new, loss = _sgd_epochs(global_state, x, y, site.local_epochs, site.lr,
                                site.batch, rng_fold, offset, rep_hook=hook)
        site_ctx["prev_state"] = new.copy()
        return new, full_bytes, loss

    if strategy == "lgfedavg":
        local = site_ctx.get("local_state") or global_state.copy()
        merged = local.copy()
        for name in HEAD_SPANS:
            lo, hi = merged.layer_map[name]
            merged.params[lo:hi] = global_state.params[lo:hi]
        new, loss = _sgd_epochs(merged, x, y, site.local_epochs, site.lr,
                                site.batch, rng_fold, offset)
        site_ctx["local_state"] = new.copy()
        head_bytes = 8 * new.span_size(HEAD_SPANS)
        return new, head_bytes, loss

    raise ConfigError(f"local_update does not handle strategy {strategy!r}")


def aggregate(strategy: str, site_states: list[ModelState], sizes: list[int],
              global_state: ModelState) -> ModelState:
    """Combine site updates into the next global state.

    Full-vector sample-size-weighted mean for FedAvg/FedProx/MOON/pFedMe;
    LGFedAvg averages only the head spans and leaves the rest of the
    global vector as-is (encoders stay site-local).
    """
    if not site_states:
        raise ValueError("cannot aggregate an empty site list")
    weights = np.asarray(sizes, dtype=float)
    weights /= weights.sum()
    if strategy == "lgfedavg":
        new = global_state.copy()
        for name in HEAD_SPANS:
            lo, hi = new.layer_map[name]
            new.params[lo:hi] = sum(
                w * s.params[lo:hi] for w, s in zip(weights, site_states)
            )
        return new
    params = sum(w * s.params for w, s in zip(weights, site_states))
    return ModelState(params, dict(global_state.layer_map), dict(global_state.arch))


def proximal_inner_solve(grad_fn, anchor: np.ndarray, mu: float, iters: int,
                         lr: float) -> np.ndarray:
    """Gradient descent on f(theta) + (mu/2)|theta - anchor|^2."""
    theta = anchor.copy()
    for _ in range(iters):
        theta = theta - lr * (grad_fn(theta) + mu * (theta - anchor))
    return theta


def pfedme_local(site: SiteShard, global_state: ModelState, mu: float,
                 inner_iters: int, inner_lr: float, round_idx: int,
                 rng_fold: SeededRng) -> tuple[ModelState, ModelState, int, float]:
    """Moreau-envelope personalization step.

    Each outer step solves the batch proximal problem for the
    personalized theta, then nudges the site's outer iterate toward it:
    w <- w - lr * mu * (w - theta). Returns (personalized theta state,
    outer w state, bytes, mean batch loss).
    """
    if mu <= 0:
        raise ValueError("pFedMe needs mu > 0")
    x, y = site.dataset.features, site.dataset.targets
    w = global_state.params.copy()
    theta = w.copy()
    n = x.shape[0]
    losses = []
    offset = round_idx * site.local_epochs
    for e in range(site.local_epochs):
        erng = rng_fold.stream(f"epoch{offset + e}")
        perm = erng.gen.permutation(n)
        for lo in range(0, n, site.batch):
            idx = perm[lo : lo + site.batch]
            xb, yb = x[idx], y[idx]

            def grad_fn(p):
                work = ModelState(p, global_state.layer_map, global_state.arch)
                _, grad, _ = mlp_forward_backward(work, xb, yb)
                return grad

            theta = proximal_inner_solve(grad_fn, w, mu, inner_iters, inner_lr)
            work = ModelState(theta, global_state.layer_map, global_state.arch)
            loss, _, _ = mlp_forward_backward(work, xb, yb)
            losses.append(loss)
            w = w - site.lr * mu * (w - theta)
    theta_state = ModelState(theta, dict(global_state.layer_map), dict(global_state.arch))
    w_state = ModelState(w, dict(global_state.layer_map), dict(global_state.arch))
    return theta_state, w_state, 8 * w.size, float(np.mean(losses))

# ---------------------------------------------------------------------------
# federation orchestration

def _eval_states_for(strategy: str, global_state: ModelState,
                     site_ctx: dict[str, dict], sites: list[SiteShard]) -> dict[str, ModelState]:
    out = {}
    for shard in sites:
        ctx = site_ctx[shard.site_id]
        if strategy == "lgfedavg":
            out[shard.site_id] = ctx["local_state"]
        elif strategy == "pfedme":
            out[shard.site_id] = ctx["theta"]
        elif strategy in ("single", "mix"):
            out[shard.site_id] = ctx["local_state"]
        else:
            out[shard.site_id] = global_state
    return out


def run_federation(config: FedConfig, shards: list[SiteShard],
                   k_folds: int = 5) -> dict:
    """Train and evaluate a federation under k-fold CV split per site.

    Each fold: every site's data is split (train/val), standardized on
    its own training part, then `rounds` synchronous rounds of
    local_update + aggregate run with full participation. Single trains
    each site in isolation on the same schedule (zero bytes); Mix pools
    all sites into one shard. Per-site reports aggregate fold metrics;
    the average report concatenates the sites' predictions per fold
    before evaluating.
    """
    if not shards:
        raise ConfigError("federation needs at least one shard")
    ids = [s.site_id for s in shards]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate site ids in shards")
    dims = {s.dataset.features.shape[1] for s in shards}
    if len(dims) != 1:
        raise ConfigError(f"sites disagree on feature dimension: {sorted(dims)}")
    in_dim = dims.pop()
    for s in shards:
        if s.dataset.n_samples < k_folds:
            raise ConfigError(f"site {s.site_id} has fewer samples than folds")

    root = SeededRng(config.seed, "ml")
    site_splits = {
        s.site_id: partition_stratified_kfold(s.dataset.targets, k_folds,
                                              root.stream("kfold"))
        for s in shards
    }
    trace = FedTrace(sites=ids if config.strategy != "mix" else ["mix"],
                     rounds=config.rounds)
    fold_loss: dict[str, list[list[float]]] = {}
    fold_bytes: dict[str, list[list[int]]] = {}
    site_fold_reports: dict[str, list[EvalReport]] = {s: [] for s in ids}
    avg_fold_reports: list[EvalReport] = []
    final_states: dict[str, ModelState] = {}

    for fold in range(k_folds):
        rng_fold = root.stream(f"fold{fold}")
        train_shards: list[SiteShard] = []
        val_parts: dict[str, tuple[np.ndarray, np.ndarray]] = {}
        scalers: dict[str, Standardizer] = {}
        for shard in shards:
            tr_idx, va_idx = site_splits[shard.site_id][fold]
            x_tr = shard.dataset.features[tr_idx]
            y_tr = shard.dataset.targets[tr_idx]
            scaler = Standardizer(x_tr)
            scalers[shard.site_id] = scaler
            train_shards.append(
                SiteShard(shard.site_id,
                          LabeledDataset(scaler.transform(x_tr), y_tr, "classification"),
                          shard.local_epochs, shard.lr, shard.batch)
            )
            val_parts[shard.site_id] = (
                scaler.transform(shard.dataset.features[va_idx]),
                shard.dataset.targets[va_idx],
            )
        if config.strategy == "mix":
            pooled_x = np.vstack([t.dataset.features for t in train_shards])
            pooled_y = np.concatenate([t.dataset.targets for t in train_shards])
            proto = train_shards[0]
            active = [SiteShard("mix", LabeledDataset(pooled_x, pooled_y, "classification"),
                                proto.local_epochs, proto.lr, proto.batch)]
        else:
            active = train_shards

        if config.init_state is not None:
            global_state = config.init_state.copy()
        else:
            global_state = init_model(config.arch, in_dim, config.hidden,
                                      config.n_classes, rng_fold.stream("init"))
        site_ctx: dict[str, dict] = {s.site_id: {} for s in active}
        for ctx in site_ctx.values():
            ctx["local_state"] = global_state.copy()

        for r in range(config.rounds):
            states, sizes = [], []
            for shard in active:
                ctx = site_ctx[shard.site_id]
                if config.strategy == "pfedme":
                    mu = config.mu if config.mu > 0 else 2.0
                    theta, w_state, bytes_out, loss = pfedme_local(
                        shard, global_state, mu,
                        config.pfedme_inner_iters, config.pfedme_inner_lr, r, rng_fold)
                    ctx["theta"] = theta
                    new = w_state
                elif config.strategy in ("single", "mix"):
                    new, bytes_out, loss = local_update(
                        shard, ctx["local_state"], config, r, rng_fold, ctx)
                    ctx["local_state"] = new
                else:
                    new, bytes_out, loss = local_update(
                        shard, global_state, config, r, rng_fold, ctx)
                states.append(new)
                sizes.append(shard.dataset.n_samples)
                fold_loss.setdefault(shard.site_id, [[] for _ in range(config.rounds)])
                fold_bytes.setdefault(shard.site_id, [[] for _ in range(config.rounds)])
                fold_loss[shard.site_id][r].append(loss)
                fold_bytes[shard.site_id][r].append(bytes_out)
            if config.strategy not in ("single", "mix"):
                global_state = aggregate(config.strategy, states, sizes, global_state)
            if fold == 0:
                trace.global_snapshots.append(global_state.params.copy())

        if config.strategy == "mix":
            eval_states = {sid: site_ctx["mix"]["local_state"] for sid in ids}
        else:
            eval_states = _eval_states_for(config.strategy, global_state, site_ctx,
                                           active)
        concat_true, concat_pred, concat_score = [], [], []
        for shard in shards:
            x_va, y_va = val_parts[shard.site_id]
            pred, score = model_predict(eval_states[shard.site_id], x_va)
            site_fold_reports[shard.site_id].append(
                evaluate(y_va, score, pred, "classification"))
            concat_true.extend(y_va.tolist())
            concat_pred.extend(pred.tolist())
            concat_score.extend(score.tolist())
        avg_fold_reports.append(
            evaluate(np.array(concat_true), np.array(concat_score),
                     np.array(concat_pred), "classification"))
        if fold == k_folds - 1:
            final_states = dict(eval_states)
            final_states["__global__"] = global_state

    for site in trace.sites:
        for r in range(config.rounds):
            trace.record(site, float(np.mean(fold_loss[site][r])),
                         int(np.sum(fold_bytes[site][r])))

    return {
        "trace": trace,
        "site_reports": {
            sid: {"fold_reports": site_fold_reports[sid],
                  "summary": aggregate_reports(site_fold_reports[sid])}
            for sid in ids
        },
        "average": {"fold_reports": avg_fold_reports,
                    "summary": aggregate_reports(avg_fold_reports)},
        "final_states": final_states,
    }


# ---------------------------------------------------------------------------
# synthetic multi-site benchmark and model registration

def make_synthetic_sites(seed: int, n_sites: int = 3, n_per_site: int = 40,
                         dim: int = 12, class_sep: float = 1.6,
                         site_shift: float = 1.2, local_epochs: int = 1,
                         lr: float = 0.1, batch: int = 8) -> list[SiteShard]:
    """Heterogeneous Gaussian two-class shards with per-site mean offsets.

    The class signal lives on one fixed direction; each site adds its own
    nuisance offset in the orthogonal complement, so pooling or
    federating adds sample size without flipping the decision boundary.
    """
    rng = SeededRng(seed, "synthetic-sites")
    u = np.zeros(dim)
    u[0] = 1.0
    shards = []
    for s in range(n_sites):
        g = rng.stream(f"site{s}").gen
        offset = np.zeros(dim)
        if dim > 1:
            direction = g.standard_normal(dim - 1)
            offset[1:] = site_shift * direction / np.linalg.norm(direction)
        half = n_per_site // 2
        y = np.array([0] * half + [1] * (n_per_site - half))
        x = g.standard_normal((n_per_site, dim)) + offset
        x += np.where(y[:, None] == 1, class_sep / 2, -class_sep / 2) * u
        perm = g.permutation(n_per_site)
        shards.append(
            SiteShard(f"site{s}", LabeledDataset(x[perm], y[perm], "classification"),
                      local_epochs=local_epochs, lr=lr, batch=batch)
        )
    return shards


def _train_mlp(x, y, spec: dict, rng: SeededRng) -> TrainedModel:
    """Centralized trainer for the registry; mirrors the federation's
    epoch-stream schedule so a single-site federation reproduces it."""
    rounds = spec.get("rounds", 1)
    epochs = spec.get("local_epochs", spec.get("epochs", 30))
    lr = spec.get("lr", 0.1)
    batch = spec.get("batch", 16)
    hidden = spec.get("hidden", 8)
    arch = spec.get("arch", "mlp1")
    n_classes = int(np.max(y)) + 1
    state = init_model(arch, x.shape[1], hidden, n_classes, rng.stream("init"))
    shard = SiteShard("local", LabeledDataset(x, y, "classification"),
                      local_epochs=epochs, lr=lr, batch=batch)
    cfg = FedConfig(strategy="single", rounds=rounds, arch=arch, hidden=hidden,
                    n_classes=n_classes)
    ctx: dict = {}
    for r in range(rounds):
        state, _, _ = local_update(shard, state, cfg, r, rng, ctx)

    def predict(q):
        return model_predict(state, q)

    return TrainedModel(predict, state)


MODEL_REGISTRY["mlp"] = _train_mlp
