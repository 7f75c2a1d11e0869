"""Desk-scale downstream classifier: multinomial logistic regression over
hashed n-gram features, trained by seeded mini-batch gradient descent.

The training contract: up to ``max_epochs`` epochs with mini-batches of
``batch_size``, early stopping once validation macro-F1 fails to improve
for ``patience`` consecutive epochs, inputs normalized (lowercase, no
punctuation) and balanced per label. The returned parameters are the ones
from the best validation epoch. Everything is a pure function of
(data, config, seed); training is single-threaded so the mini-batch order
is part of the determinism contract.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import sparse

from ._hash import derive_seed
from .corpus import Dataset, DatasetError, LabelSet, Sample
from .textfeat import hash_features, sample_tokens

# below this width the design matrix is densified; small dense matmuls beat
# scipy's sparse overhead and the results are identical either way
_DENSE_LIMIT = 8192


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 50
    batch_size: int = 16
    patience: int = 5
    learning_rate: float = 1e-3
    n_buckets: int = 2**15
    validation_fraction: float = 0.1
    rng_seed: int = 0
    l2_penalty: float = 1e-4

    def __post_init__(self):
        if self.max_epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("max_epochs, batch_size, patience must be positive")
        if self.patience > self.max_epochs:
            raise ValueError("patience must not exceed max_epochs")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.n_buckets < 2:
            raise ValueError("n_buckets must be >= 2")
        if not 0.0 < self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must be in (0,1)")
        if self.l2_penalty < 0:
            raise ValueError("l2_penalty must be nonnegative")

    def content_hash(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode("utf-8")
        return hashlib.sha256(payload).hexdigest()


@dataclass(frozen=True, eq=False)
class TrainedModel:
    weights: np.ndarray  # [n_labels, n_buckets]
    bias: np.ndarray  # [n_labels]
    label_order: LabelSet
    train_history: tuple[float, ...]  # per-epoch validation macro-F1
    config_hash: str = ""


@dataclass(frozen=True)
class EvalResult:
    macro_f1: float
    per_label_f1: dict[str, float]
    confusion: np.ndarray  # [gold, predicted] counts

    def __post_init__(self):
        if not math.isfinite(self.macro_f1):
            raise ValueError("non-finite macro F1")


def featurize(samples: tuple[Sample, ...] | list[Sample], n_buckets: int):
    """Hashed unigram+bigram design matrix (CSR) for a list of samples."""
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for s in samples:
        feats = hash_features(sample_tokens(s), n_buckets)
        for bucket in sorted(feats):
            indices.append(bucket)
            data.append(feats[bucket])
        indptr.append(len(indices))
    X = sparse.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr, dtype=np.int64)),
        shape=(len(samples), n_buckets),
    )
    if n_buckets <= _DENSE_LIMIT:
        return X.toarray()
    return X


def label_indices(samples, label_set: LabelSet) -> np.ndarray:
    lookup = {label: i for i, label in enumerate(label_set.labels)}
    return np.asarray([lookup[s.label] for s in samples], dtype=np.int64)


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def _scores(X, W: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.asarray(X @ W.T) + b


def loss_value(W: np.ndarray, b: np.ndarray, X, y: np.ndarray, l2_penalty: float) -> float:
    """Mean cross-entropy plus (l2/2)*||W||^2; the bias is not penalized."""
    scores = _scores(X, W, b)
    shifted = scores - scores.max(axis=1, keepdims=True)
    log_probs = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    nll = -log_probs[np.arange(len(y)), y].mean()
    return float(nll + 0.5 * l2_penalty * float((W * W).sum()))


def loss_gradient(W, b, X, y, l2_penalty):
    """Analytic gradient of :func:`loss_value` w.r.t. (W, b)."""
    n = len(y)
    probs = _softmax(_scores(X, W, b))
    probs[np.arange(n), y] -= 1.0
    probs /= n
    # X.T @ probs keeps the same code path for dense and CSR matrices
    grad_W = np.asarray(X.T @ probs).T + l2_penalty * W
    grad_b = probs.sum(axis=0)
    return grad_W, grad_b


def train(train_data: Dataset, config: TrainConfig) -> TrainedModel:
    """Train on a balanced dataset; see the module docstring for the contract."""
    counts = train_data.label_counts()
    if len(set(counts.values())) != 1:
        raise DatasetError(f"training data not balanced per label: {counts}")
    if len(train_data.label_set.labels) < 2:
        raise DatasetError("training needs at least 2 labels")
    X = featurize(train_data.samples, config.n_buckets)
    y = label_indices(train_data.samples, train_data.label_set)
    return train_on_features(X, y, train_data.label_set, config)


def train_on_features(X, y: np.ndarray, label_set: LabelSet, config: TrainConfig) -> TrainedModel:
    """Training core over a prebuilt design matrix (shared by the round-robin
    driver, which featurizes each dataset once and reuses the matrix)."""
    n, n_buckets = X.shape
    n_labels = len(label_set.labels)
    rng = np.random.default_rng(config.rng_seed & 0xFFFFFFFFFFFFFFFF)

    train_idx, val_idx = _validation_split(y, n_labels, config.validation_fraction, rng)
    X_train, y_train = X[train_idx], y[train_idx]
    X_val, y_val = X[val_idx], y[val_idx]

    W = np.zeros((n_labels, n_buckets))
    b = np.zeros(n_labels)
    best = (-1.0, W.copy(), b.copy())
    history: list[float] = []
    stale = 0
    for _ in range(config.max_epochs):
        order = rng.permutation(len(y_train))
        for start in range(0, len(order), config.batch_size):
            batch = order[start : start + config.batch_size]
            grad_W, grad_b = loss_gradient(W, b, X_train[batch], y_train[batch], config.l2_penalty)
            W -= config.learning_rate * grad_W
            b -= config.learning_rate * grad_b
        val_pred = predict_indices(W, b, X_val)
        val_f1 = macro_f1_indices(y_val, val_pred, n_labels)[0]
        history.append(val_f1)
        if val_f1 > best[0]:
            best = (val_f1, W.copy(), b.copy())
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    return TrainedModel(
        weights=best[1],
        bias=best[2],
        label_order=label_set,
        train_history=tuple(history),
        config_hash=config.content_hash(),
    )


def _validation_split(y, n_labels, fraction, rng):
    val: list[int] = []
    for li in range(n_labels):
        positions = np.flatnonzero(y == li)
        if len(positions) < 2:
            raise DatasetError(
                f"label index {li} has {len(positions)} sample(s); "
                "validation split needs at least 2 per label"
            )
        n_val = max(1, round(fraction * len(positions)))
        if len(positions) - n_val < 1:
            n_val = len(positions) - 1
        chosen = rng.choice(len(positions), size=n_val, replace=False)
        val.extend(int(positions[i]) for i in chosen)
    val_set = set(val)
    train_idx = np.asarray([i for i in range(len(y)) if i not in val_set], dtype=np.int64)
    val_idx = np.asarray(sorted(val_set), dtype=np.int64)
    return train_idx, val_idx


def predict_indices(W: np.ndarray, b: np.ndarray, X) -> np.ndarray:
    """Argmax of the affine scores; ties resolve to the lowest label index."""
    return np.argmax(_scores(X, W, b), axis=1)


def predict(model: TrainedModel, samples) -> list[str]:
    """Predicted label per sample, ties broken by label-order position."""
    X = featurize(samples, model.weights.shape[1])
    idx = predict_indices(model.weights, model.bias, X)
    return [model.label_order.labels[int(i)] for i in idx]


def macro_f1_indices(gold: np.ndarray, predicted: np.ndarray, n_labels: int):
    """Macro-F1 core on label indices; returns (macro, per_label, confusion)."""
    confusion = np.zeros((n_labels, n_labels), dtype=np.int64)
    np.add.at(confusion, (gold, predicted), 1)
    per_label = np.zeros(n_labels)
    for li in range(n_labels):
        tp = confusion[li, li]
        fp = confusion[:, li].sum() - tp
        fn = confusion[li, :].sum() - tp
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        per_label[li] = (
            2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        )
    return float(per_label.mean()), per_label, confusion


def macro_f1(gold: list[str], predicted: list[str], label_set: LabelSet) -> EvalResult:
    """Per-label F1 with the 0/0 -> 0 convention; macro is the unweighted
    mean over the label set."""
    if len(gold) != len(predicted):
        raise ValueError(f"length mismatch: {len(gold)} gold vs {len(predicted)} predicted")
    if not gold:
        raise ValueError("empty evaluation")
    lookup = {label: i for i, label in enumerate(label_set.labels)}
    try:
        gold_idx = np.asarray([lookup[g] for g in gold], dtype=np.int64)
        pred_idx = np.asarray([lookup[p] for p in predicted], dtype=np.int64)
    except KeyError as exc:
        raise ValueError(f"label {exc.args[0]!r} not in label set") from exc
    macro, per_label, confusion = macro_f1_indices(gold_idx, pred_idx, len(label_set.labels))
    return EvalResult(
        macro_f1=macro,
        per_label_f1={label: float(per_label[i]) for i, label in enumerate(label_set.labels)},
        confusion=confusion,
    )


def gradient_check(
    config: TrainConfig, probe: Dataset, n_coords: int = 12, step: float = 1e-5
) -> float:
    """Max relative deviation between the analytic loss gradient and central
    finite differences over randomly probed coordinates (weights and biases)."""
    if len(probe.samples) > 20:
        raise ValueError("probe dataset must have at most 20 samples")
    X = featurize(probe.samples, config.n_buckets)
    y = label_indices(probe.samples, probe.label_set)
    n_labels = len(probe.label_set.labels)
    rng = np.random.default_rng(derive_seed(config.rng_seed, "gradient-check"))
    W = rng.normal(0.0, 0.1, size=(n_labels, config.n_buckets))
    b = rng.normal(0.0, 0.1, size=n_labels)
    grad_W, grad_b = loss_gradient(W, b, X, y, config.l2_penalty)

    # probe nonzero feature columns so the compared gradients are nontrivial
    active = sorted({int(c) for c in np.flatnonzero(np.asarray(np.abs(X).sum(axis=0)).ravel())})
    coords: list[tuple[str, int, int]] = []
    for _ in range(max(n_coords - n_labels, 1)):
        li = int(rng.integers(n_labels))
        col = active[int(rng.integers(len(active)))] if active else int(rng.integers(config.n_buckets))
        coords.append(("W", li, col))
    for li in range(n_labels):
        coords.append(("b", li, 0))

    worst = 0.0
    for kind, li, col in coords:
        if kind == "W":
            analytic = grad_W[li, col]
            plus, minus = W.copy(), W.copy()
            plus[li, col] += step
            minus[li, col] -= step
            numeric = (
                loss_value(plus, b, X, y, config.l2_penalty)
                - loss_value(minus, b, X, y, config.l2_penalty)
            ) / (2 * step)
        else:
            analytic = grad_b[li]
            plus, minus = b.copy(), b.copy()
            plus[li] += step
            minus[li] -= step
            numeric = (
                loss_value(W, plus, X, y, config.l2_penalty)
                - loss_value(W, minus, X, y, config.l2_penalty)
            ) / (2 * step)
        denom = max(abs(analytic), abs(numeric), 1e-12)
        worst = max(worst, abs(analytic - numeric) / denom)
    return worst


def save_model(model: TrainedModel, path) -> None:
    """Bit-exact model dump (weights, bias, label order, config hash)."""
    np.savez(
        path,
        weights=model.weights,
        bias=model.bias,
        labels=np.asarray(model.label_order.labels, dtype=object),
        history=np.asarray(model.train_history),
        config_hash=np.asarray(model.config_hash),
    )


def load_model(path) -> TrainedModel:
    blob = np.load(path, allow_pickle=True)
    return TrainedModel(
        weights=blob["weights"],
        bias=blob["bias"],
        label_order=LabelSet(tuple(str(x) for x in blob["labels"])),
        train_history=tuple(float(x) for x in blob["history"]),
        config_hash=str(blob["config_hash"]),
    )
