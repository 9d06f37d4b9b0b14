"""Classical ML pipeline: PCA, classifiers, data partitions, metrics.

The cross-validation driver standardizes and fits PCA inside each
training fold (no leakage into validation), trains a registered model,
and aggregates fold metrics as mean +/- std. Additional model trainers
(e.g. the federated simulator's MLP) can register themselves in
MODEL_REGISTRY.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DimensionError, UndefinedError
from .network import midranks
from .numerics import sym_eig
from .rng import SeededRng
from .state import ModelState

__all__ = [
    "LabeledDataset",
    "EvalReport",
    "PCAModel",
    "pca_fit_transform",
    "knn_predict",
    "linear_svm_train",
    "svm_objective",
    "logistic_train",
    "logistic_loss_grad",
    "partition_kfold",
    "partition_random",
    "evaluate",
    "Standardizer",
    "TrainedModel",
    "MODEL_REGISTRY",
    "cross_validate",
    "aggregate_reports",
    "format_mean_std",
]


@dataclass
class LabeledDataset:
    """Feature matrix + targets (+ optional per-sample site labels)."""

    features: np.ndarray
    targets: np.ndarray
    task: str = "classification"
    site_ids: list[str] | None = None

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.targets = np.asarray(self.targets)
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task {self.task!r}")
        if self.features.shape[0] != self.targets.shape[0]:
            raise DimensionError("feature rows must match target length")
        if self.task == "classification":
            labels = np.unique(self.targets.astype(int))
            if not np.array_equal(labels, np.arange(labels.size)):
                raise ValueError("class labels must be contiguous integers from 0")
            self.targets = self.targets.astype(int)
        else:
            self.targets = self.targets.astype(float)
        if self.site_ids is not None and len(self.site_ids) != len(self.targets):
            raise DimensionError("site_ids length must match sample count")

    @property
    def n_samples(self) -> int:
        return self.features.shape[0]

    def subset(self, idx: np.ndarray) -> "LabeledDataset":
        sites = None if self.site_ids is None else [self.site_ids[i] for i in idx]
        ds = LabeledDataset.__new__(LabeledDataset)
        ds.features = self.features[idx]
        ds.targets = self.targets[idx]
        ds.task = self.task
        ds.site_ids = sites
        return ds


@dataclass
class EvalReport:
    """Metric bundle for one evaluation pass."""

    task: str
    auc: float | None = None
    accuracy: float | None = None
    balanced_accuracy: float | None = None
    f1: float | None = None
    sensitivity: float | None = None
    specificity: float | None = None
    precision: float | None = None
    mae: float | None = None
    mse: float | None = None
    ccc: float | None = None
    confusion: list[list[int]] | None = None
    roc_points: list[tuple[float, float]] | None = None
    n_samples: int = 0

    def to_dict(self) -> dict:
        out = {"task": self.task, "n_samples": self.n_samples}
        names = ("auc", "accuracy", "balanced_accuracy", "f1", "sensitivity",
                 "specificity", "precision", "mae", "mse", "ccc")
        for name in names:
            value = getattr(self, name)
            if value is not None:
                out[name] = value
        if self.confusion is not None:
            out["confusion"] = self.confusion
        if self.roc_points is not None:
            out["roc_points"] = [list(p) for p in self.roc_points]
        return out


CLASSIFICATION_METRICS = ("auc", "accuracy", "balanced_accuracy", "f1",
                          "sensitivity", "specificity", "precision")
REGRESSION_METRICS = ("mae", "mse", "ccc")


# ---------------------------------------------------------------------------
# dimension reduction

class PCAModel:
    """Principal components of the training data, deterministic sign."""

    def __init__(self, mean: np.ndarray, components: np.ndarray, explained: np.ndarray):
        self.mean = mean
        self.components = components  # d x k
        self.explained_variance_ratio = explained

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(x) - self.mean) @ self.components


def pca_fit(x: np.ndarray, k: int) -> PCAModel:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n, d = x.shape
    if not 1 <= k <= min(n, d):
        raise DimensionError(f"k={k} out of range for {n} samples x {d} dims")
    mean = x.mean(axis=0)
    xc = x - mean
    cov = xc.T @ xc / max(n - 1, 1)
    vals, vecs = sym_eig(cov)
    vals = np.maximum(vals, 0.0)
    total = vals.sum()
    explained = vals[:k] / total if total > 0 else np.zeros(k)
    comps = vecs[:, :k]
    # sign convention: largest-magnitude coordinate of each component positive
    for j in range(k):
        pivot = np.argmax(np.abs(comps[:, j]))
        if comps[pivot, j] < 0:
            comps[:, j] = -comps[:, j]
    return PCAModel(mean, comps, explained)


def pca_fit_transform(ds: LabeledDataset, k: int):
    """Project onto the top-k variance directions.

    Returns (reduced dataset, components, explained variance ratios).
    """
    model = pca_fit(ds.features, k)
    reduced = LabeledDataset(model.transform(ds.features), ds.targets, ds.task, ds.site_ids)
    return reduced, model.components, model.explained_variance_ratio


# ---------------------------------------------------------------------------
# models

def knn_predict(train: LabeledDataset, test_features: np.ndarray, k: int,
                task: str | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Euclidean k-nearest-neighbor prediction.

    Classification returns (majority label, positive-class vote fraction);
    distance ties resolve toward the lower training index and vote ties
    toward the smaller class. Regression returns the neighbor mean twice.
    """
    if train.n_samples == 0:
        raise ValueError("empty training set")
    if not 1 <= k <= train.n_samples:
        raise ValueError(f"k={k} out of range for {train.n_samples} training samples")
    task = task or train.task
    test_features = np.atleast_2d(np.asarray(test_features, dtype=float))
    d2 = ((test_features[:, None, :] - train.features[None, :, :]) ** 2).sum(axis=2)
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    if task == "regression":
        pred = train.targets[order].mean(axis=1)
        return pred, pred
    n_classes = int(train.targets.max()) + 1
    preds = np.empty(test_features.shape[0], dtype=int)
    scores = np.empty(test_features.shape[0])
    for i, nbrs in enumerate(order):
        votes = np.bincount(train.targets[nbrs], minlength=n_classes)
        preds[i] = int(np.argmax(votes))  # argmax takes the smallest index on ties
        scores[i] = votes[1] / k if n_classes > 1 else 0.0
    return preds, scores


def _svm_unpack(state: ModelState) -> tuple[np.ndarray, float]:
    return state.span("weights"), float(state.span("bias")[0])


def svm_objective(state: ModelState, x: np.ndarray, y_signed: np.ndarray, c: float) -> float:
    w, b = _svm_unpack(state)
    margins = y_signed * (x @ w + b)
    lam = 1.0 / (c * len(y_signed))
    return float(lam / 2 * (w @ w) + np.maximum(0.0, 1.0 - margins).mean())


def linear_svm_train(ds: LabeledDataset, c: float = 1.0, epochs: int = 60,
                     rng: SeededRng | None = None) -> ModelState:
    """Max-margin linear classifier via deterministic-shuffle subgradient SGD.

    Minimizes lam/2 |w|^2 + mean hinge with lam = 1/(C n); the returned
    state is the running average of the iterates, which makes the
    per-epoch objective trace (stored in arch["objective_trace"]) settle
    monotonically. Bias is unregularized.
    """
    if ds.task != "classification":
        raise ValueError("linear SVM is a classifier")
    classes = np.unique(ds.targets)
    if classes.size < 2:
        raise ValueError("training data has a single class")
    if classes.size > 2:
        raise ValueError("linear SVM here is binary only")
    rng = rng or SeededRng(0, "svm")
    x = ds.features
    y = 2.0 * ds.targets - 1.0
    n, d = x.shape
    lam = 1.0 / (c * n)
    w = np.zeros(d)
    b = 0.0
    w_avg = np.zeros(d)
    b_avg = 0.0
    t = 0
    trace = []
    for _ in range(epochs):
        for i in rng.gen.permutation(n):
            t += 1
            eta = 1.0 / (lam * (t + n))
            margin = y[i] * (x[i] @ w + b)
            w *= 1.0 - eta * lam
            if margin < 1.0:
                w += eta / n * y[i] * x[i]
                b += eta / n * y[i]
            w_avg += (w - w_avg) / t
            b_avg += (b - b_avg) / t
        state = _svm_state(w_avg, b_avg)
        trace.append(svm_objective(state, x, y, c))
    state = _svm_state(w_avg, b_avg)
    state.arch["objective_trace"] = trace
    return state


def _svm_state(w: np.ndarray, b: float) -> ModelState:
    params = np.concatenate([w, [b]])
    return ModelState(params, {"weights": (0, len(w)), "bias": (len(w), len(w) + 1)},
                      {"kind": "svm_linear", "in_dim": len(w)})


def svm_decision(state: ModelState, x: np.ndarray) -> np.ndarray:
    w, b = _svm_unpack(state)
    return np.atleast_2d(x) @ w + b


def logistic_loss_grad(params: np.ndarray, x: np.ndarray, y: np.ndarray,
                       l2: float) -> tuple[float, np.ndarray]:
    """Mean cross-entropy + (l2/2)|w|^2 (bias unpenalized) and its gradient."""
    w, b = params[:-1], params[-1]
    z = x @ w + b
    # stable log(1 + exp(-|z|)) formulation
    loss = float(np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z)))))
    loss += l2 / 2 * float(w @ w)
    p = 1.0 / (1.0 + np.exp(-z))
    gw = x.T @ (p - y) / len(y) + l2 * w
    gb = float(np.mean(p - y))
    return loss, np.concatenate([gw, [gb]])


def logistic_train(ds: LabeledDataset, l2: float = 1e-3, epochs: int = 500,
                   lr: float = 0.5) -> ModelState:
    """L2-regularized logistic regression by full-batch gradient descent."""
    classes = np.unique(ds.targets)
    if classes.size < 2:
        raise ValueError("training data has a single class")
    if classes.size > 2:
        raise ValueError("logistic regression here is binary only")
    x = ds.features
    y = ds.targets.astype(float)
    params = np.zeros(x.shape[1] + 1)
    for _ in range(epochs):
        _, grad = logistic_loss_grad(params, x, y, l2)
        params = params - lr * grad
    d = x.shape[1]
    return ModelState(params, {"weights": (0, d), "bias": (d, d + 1)},
                      {"kind": "logistic", "in_dim": d})


def logistic_decision(state: ModelState, x: np.ndarray) -> np.ndarray:
    z = np.atleast_2d(x) @ state.span("weights") + state.span("bias")[0]
    return 1.0 / (1.0 + np.exp(-z))


# ---------------------------------------------------------------------------
# data partitions

def partition_kfold(n_samples: int, k: int, rng: SeededRng) -> list[tuple[np.ndarray, np.ndarray]]:
    """K disjoint covering folds with sizes differing by at most one."""
    if not 2 <= k <= n_samples:
        raise ValueError(f"K={k} out of range for {n_samples} samples")
    perm = rng.gen.permutation(n_samples)
    folds = np.array_split(perm, k)
    splits = []
    for i, val in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        splits.append((np.sort(train), np.sort(val)))
    return splits


def partition_stratified_kfold(targets, k: int,
                               rng: SeededRng) -> list[tuple[np.ndarray, np.ndarray]]:
    """K folds assembled class by class.

    Keeps every validation fold label-mixed whenever each class has at
    least k members, so per-fold AUC stays defined on small datasets.
    """
    targets = np.asarray(targets)
    n = len(targets)
    if not 2 <= k <= n:
        raise ValueError(f"K={k} out of range for {n} samples")
    fold_members: list[list[int]] = [[] for _ in range(k)]
    for label in np.unique(targets):
        idx = np.flatnonzero(targets == label)
        perm = idx[rng.gen.permutation(len(idx))]
        for i, chunk in enumerate(np.array_split(perm, k)):
            fold_members[i].extend(int(v) for v in chunk)
    everything = set(range(n))
    splits = []
    for members in fold_members:
        val = np.sort(np.array(members, dtype=int))
        train = np.sort(np.array(sorted(everything - set(members)), dtype=int))
        splits.append((train, val))
    return splits


def partition_random(n_samples: int, train_percent: float,
                     rng: SeededRng) -> tuple[np.ndarray, np.ndarray]:
    """Single random split: floor(n * R / 100) training samples, rest validation."""
    n_train = int(np.floor(n_samples * train_percent / 100.0))
    if n_train < 1 or n_train >= n_samples:
        raise ValueError(
            f"train percent {train_percent} leaves an empty train or validation set"
        )
    perm = rng.gen.permutation(n_samples)
    return np.sort(perm[:n_train]), np.sort(perm[n_train:])


# ---------------------------------------------------------------------------
# evaluation

def _auc_midrank(y_true: np.ndarray, y_score: np.ndarray) -> float:
    pos = y_true == 1
    n_pos = int(pos.sum())
    n_neg = len(y_true) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedError("AUC needs both classes present")
    ranks = midranks(np.asarray(y_score, dtype=float))
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def _roc_points(y_true: np.ndarray, y_score: np.ndarray) -> list[tuple[float, float]]:
    pos = y_true == 1
    n_pos = int(pos.sum())
    n_neg = len(y_true) - n_pos
    pts = [(0.0, 0.0)]
    for t in np.unique(y_score)[::-1]:
        pred = y_score >= t
        tp = int((pred & pos).sum())
        fp = int((pred & ~pos).sum())
        pts.append((fp / n_neg, tp / n_pos))
    if pts[-1] != (1.0, 1.0):
        pts.append((1.0, 1.0))
    return pts


def evaluate(y_true, y_score=None, y_pred=None, task: str = "classification") -> EvalReport:
    """Compute the metric bundle for one set of predictions.

    Classification needs scores (for AUC/ROC) and hard predictions;
    regression needs only predictions. AUC uses the rank statistic with
    mid-rank tie handling.
    """
    y_true = np.asarray(y_true)
    if task == "regression":
        y_pred = np.asarray(y_pred, dtype=float)
        err = y_pred - y_true
        mx, my = float(y_true.mean()), float(y_pred.mean())
        vx = float(np.mean((y_true - mx) ** 2))
        vy = float(np.mean((y_pred - my) ** 2))
        cov = float(np.mean((y_true - mx) * (y_pred - my)))
        denom = vx + vy + (mx - my) ** 2
        ccc = 1.0 if denom == 0 else 2 * cov / denom
        return EvalReport(task="regression", mae=float(np.abs(err).mean()),
                          mse=float(np.mean(err**2)), ccc=float(ccc),
                          n_samples=len(y_true))
    y_true = y_true.astype(int)
    y_pred = np.asarray(y_pred).astype(int)
    y_score = np.asarray(y_score, dtype=float)
    if np.unique(y_true).size < 2:
        raise UndefinedError("evaluation needs both classes in y_true")
    tp = int(((y_pred == 1) & (y_true == 1)).sum())
    tn = int(((y_pred == 0) & (y_true == 0)).sum())
    fp = int(((y_pred == 1) & (y_true == 0)).sum())
    fn = int(((y_pred == 0) & (y_true == 1)).sum())
    sens = tp / (tp + fn)
    spec = tn / (tn + fp)
    prec = tp / (tp + fp) if tp + fp > 0 else 0.0
    f1 = 2 * prec * sens / (prec + sens) if prec + sens > 0 else 0.0
    return EvalReport(
        task="classification",
        auc=_auc_midrank(y_true, y_score),
        accuracy=(tp + tn) / len(y_true),
        balanced_accuracy=(sens + spec) / 2,
        f1=f1,
        sensitivity=sens,
        specificity=spec,
        precision=prec,
        confusion=[[tn, fp], [fn, tp]],
        roc_points=_roc_points(y_true, y_score),
        n_samples=len(y_true),
    )


# ---------------------------------------------------------------------------
# cross-validation driver

class Standardizer:
    """Per-feature train-fold mean/std scaling (std 0 maps to 1)."""

    def __init__(self, x: np.ndarray):
        self.mean = x.mean(axis=0)
        std = x.std(axis=0)
        self.std = np.where(std > 0, std, 1.0)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(x) - self.mean) / self.std


@dataclass
class TrainedModel:
    predict: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]]
    state: ModelState | None = None


def _train_svm(x, y, spec: dict, rng: SeededRng) -> TrainedModel:
    ds = LabeledDataset(x, y, "classification")
    state = linear_svm_train(ds, spec.get("C", 1.0), spec.get("epochs", 60), rng)

    def predict(q):
        score = svm_decision(state, q)
        return (score > 0).astype(int), score

    return TrainedModel(predict, state)


def _train_logistic(x, y, spec: dict, rng: SeededRng) -> TrainedModel:
    ds = LabeledDataset(x, y, "classification")
    state = logistic_train(ds, spec.get("l2", 1e-3), spec.get("epochs", 500),
                           spec.get("lr", 0.5))

    def predict(q):
        score = logistic_decision(state, q)
        return (score > 0.5).astype(int), score

    return TrainedModel(predict, state)


def _train_knn(x, y, spec: dict, rng: SeededRng) -> TrainedModel:
    task = spec.get("task", "classification")
    ds = LabeledDataset(x, y, task)
    k = spec.get("k_neighbors", 5)

    def predict(q):
        return knn_predict(ds, q, k, task)

    return TrainedModel(predict)


MODEL_REGISTRY: dict[str, Callable] = {
    "svm": _train_svm,
    "logistic": _train_logistic,
    "knn": _train_knn,
}


def cross_validate(ds: LabeledDataset, model: str, spec: dict | None = None,
                   k_folds: int = 5, pca_dims: int | None = None,
                   seed: int = 0) -> dict:
    """K-fold evaluation with in-fold standardization and PCA.

    Returns per-fold reports, mean +/- std aggregation, and the
    concatenated out-of-fold predictions.
    """
    if model not in MODEL_REGISTRY:
        raise ValueError(f"unknown model {model!r}; registered: {sorted(MODEL_REGISTRY)}")
    spec = dict(spec or {})
    spec.setdefault("task", ds.task)
    root = SeededRng(seed, "ml")
    if ds.task == "classification":
        splits = partition_stratified_kfold(ds.targets, k_folds, root.stream("kfold"))
    else:
        splits = partition_kfold(ds.n_samples, k_folds, root.stream("kfold"))
    fold_reports = []
    oof = {"index": [], "y_true": [], "y_pred": [], "y_score": []}
    for fold, (train_idx, val_idx) in enumerate(splits):
        x_train, y_train = ds.features[train_idx], ds.targets[train_idx]
        x_val, y_val = ds.features[val_idx], ds.targets[val_idx]
        scaler = Standardizer(x_train)
        x_train = scaler.transform(x_train)
        x_val = scaler.transform(x_val)
        if pca_dims:
            k = min(pca_dims, min(x_train.shape))
            pca = pca_fit(x_train, k)
            x_train = pca.transform(x_train)
            x_val = pca.transform(x_val)
        trained = MODEL_REGISTRY[model](x_train, y_train, spec, root.stream(f"fold{fold}"))
        y_pred, y_score = trained.predict(x_val)
        fold_reports.append(evaluate(y_val, y_score, y_pred, ds.task))
        oof["index"].extend(int(i) for i in val_idx)
        oof["y_true"].extend(np.asarray(y_val).tolist())
        oof["y_pred"].extend(np.asarray(y_pred).tolist())
        oof["y_score"].extend(np.asarray(y_score, dtype=float).tolist())
    return {
        "fold_reports": fold_reports,
        "summary": aggregate_reports(fold_reports),
        "out_of_fold": oof,
    }


def aggregate_reports(reports: list[EvalReport]) -> dict[str, dict[str, float]]:
    """Mean and (population) std of each metric across folds."""
    metrics = CLASSIFICATION_METRICS if reports[0].task == "classification" else REGRESSION_METRICS
    out = {}
    for name in metrics:
        vals = np.array([getattr(r, name) for r in reports], dtype=float)
        out[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    return out


def format_mean_std(mean: float, std: float, percent: bool = True) -> str:
    """Render a metric the way result tables do, e.g. '79.00±8.60'."""
    scale = 100.0 if percent else 1.0
    return f"{mean * scale:.2f}±{std * scale:.2f}"
