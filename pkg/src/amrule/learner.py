"""Per-iteration weak model: a 2-hidden-layer MLP trained with cross-entropy.

Everything runs in float64 numpy.  Training uses adaptive moment estimation
with decoupled weight decay, mini-batches, and early stopping on validation
loss; the best-validation parameter snapshot is returned.  Class index 0
maps to label +1 and index 1 to label -1 throughout the project.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .featurize import PairEncoding, Standardizer

DEFAULT_LR_GRID = (2e-4, 1e-4, 5e-5)


class DegenerateDataError(ValueError):
    """Training data contains a single class."""


class DivergenceError(RuntimeError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int):
        super().__init__(f"non-finite loss at epoch {epoch}")
        self.epoch = epoch


class ShapeError(ValueError):
    """Input dimension does not match the model."""


def label_to_class(label: int) -> int:
    return 0 if label == 1 else 1


def class_to_label(cls: int) -> int:
    return 1 if cls == 0 else -1


@dataclass
class TrainConfig:
    """Optimizer hyperparameters for one weak model.

    ``patience`` enables early stopping on validation loss and restores the
    best-validation snapshot.  It is off by default: the boosting loop needs
    every weak model fit near convergence so its unweighted training error
    stays small, which keeps the per-iteration ensemble coefficients
    commensurate; an early-stopped model's residual error is dominated by
    weak-label noise, which collapses the coefficients of every model after
    the first (see the boosting module notes).
    """

    learning_rate: float = DEFAULT_LR_GRID[0]
    weight_decay: float = 1e-4
    epochs: int = 100
    batch_size: int = 64
    seed: int = 0
    hidden: tuple[int, int] = (64, 32)
    patience: int | None = None

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class MLPModel:
    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    standardizer: Standardizer = field(default_factory=Standardizer)

    @property
    def dim(self) -> int:
        return self.layer_sizes[0]

    def _check(self, X: np.ndarray) -> None:
        if X.ndim != 2 or X.shape[1] != self.dim:
            raise ShapeError(f"expected input dim {self.dim}, got {X.shape}")

    def forward(self, X: np.ndarray) -> np.ndarray:
        """Softmax probabilities, shape (n, 2).  X holds raw encodings."""
        self._check(X)
        return _forward(self.weights, self.biases, self.standardizer.transform(X))[-1]

    def predict_labels(self, X: np.ndarray) -> np.ndarray:
        probs = self.forward(X)
        return np.where(np.argmax(probs, axis=1) == 0, 1, -1)

    def to_dict(self) -> dict:
        def b64(a: np.ndarray) -> str:
            return base64.b64encode(np.ascontiguousarray(a, dtype="<f8").tobytes()).decode()
        return {
            "layer_sizes": self.layer_sizes,
            "weights": [{"shape": list(w.shape), "data": b64(w)} for w in self.weights],
            "biases": [{"shape": list(b.shape), "data": b64(b)} for b in self.biases],
            "standardizer": self.standardizer.to_dict(),
        }

    @staticmethod
    def from_dict(d: dict) -> "MLPModel":
        def arr(spec: dict) -> np.ndarray:
            flat = np.frombuffer(base64.b64decode(spec["data"]), dtype="<f8")
            return flat.reshape(spec["shape"]).astype(np.float64)
        return MLPModel(
            layer_sizes=list(d["layer_sizes"]),
            weights=[arr(s) for s in d["weights"]],
            biases=[arr(s) for s in d["biases"]],
            standardizer=Standardizer.from_dict(d.get("standardizer", {})),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, sort_keys=True)

    @staticmethod
    def load(path: str | Path) -> "MLPModel":
        with open(path, encoding="utf-8") as fh:
            return MLPModel.from_dict(json.load(fh))


def predict(model: MLPModel, encoding: PairEncoding | np.ndarray) -> tuple[int, float]:
    """Label in {+1, -1} and the winning softmax probability."""
    vec = encoding.values if isinstance(encoding, PairEncoding) else np.asarray(encoding)
    probs = model.forward(vec.reshape(1, -1))[0]
    cls = int(np.argmax(probs))
    return class_to_label(cls), float(probs[cls])


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _forward(weights, biases, X):
    """Returns [A0, Z1, A1, Z2, A2, probs] with ReLU hiddens, softmax out."""
    a = X
    cache = [a]
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = a @ W + b
        cache.append(z)
        if i < len(weights) - 1:
            a = np.maximum(z, 0.0)
            cache.append(a)
    z_out = cache[-1]
    shifted = z_out - z_out.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    probs = exp / exp.sum(axis=1, keepdims=True)
    cache.append(probs)
    return cache


def cross_entropy_loss(weights, biases, X, y_cls) -> float:
    """Mean cross-entropy of the network on standardized inputs."""
    z = X
    for i, (W, b) in enumerate(zip(weights, biases)):
        z = z @ W + b
        if i < len(weights) - 1:
            z = np.maximum(z, 0.0)
    zmax = z.max(axis=1, keepdims=True)
    logsumexp = zmax[:, 0] + np.log(np.exp(z - zmax).sum(axis=1))
    picked = z[np.arange(len(y_cls)), y_cls]
    return float(np.mean(logsumexp - picked))


def loss_gradients(weights, biases, X, y_cls):
    """Analytic gradients of the mean cross-entropy wrt every parameter."""
    cache = _forward(weights, biases, X)
    probs = cache[-1]
    n = X.shape[0]
    delta = probs.copy()
    delta[np.arange(n), y_cls] -= 1.0
    delta /= n
    grads_w = [None] * len(weights)
    grads_b = [None] * len(biases)
    # activations preceding each layer: A0, A1, A2 sit at cache[0], [2], [4]
    for i in range(len(weights) - 1, -1, -1):
        a_prev = cache[2 * i]
        grads_w[i] = a_prev.T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            z_prev = cache[2 * i - 1]
            delta = (delta @ weights[i].T) * (z_prev > 0.0)
    return grads_w, grads_b


def init_params(layer_sizes: Sequence[int], rng: np.random.Generator):
    """Uniform fan-in initialization; biases start at zero."""
    weights, biases = [], []
    for d_in, d_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(d_in)
        weights.append(rng.uniform(-bound, bound, size=(d_in, d_out)))
        biases.append(np.zeros(d_out))
    return weights, biases


class _AdamW:
    """Adaptive moments with decoupled weight decay (decay on matrices only)."""

    def __init__(self, params, lr, weight_decay, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr = lr
        self.wd = weight_decay
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads, decay_mask):
        self.t += 1
        b1c = 1.0 - self.beta1 ** self.t
        b2c = 1.0 - self.beta2 ** self.t
        for i, (p, g) in enumerate(zip(params, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * (g * g)
            mhat = self.m[i] / b1c
            vhat = self.v[i] / b2c
            p -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
            if decay_mask[i]:
                p -= self.lr * self.wd * p


def fit_mlp(
    X: np.ndarray,
    y: np.ndarray,
    config: TrainConfig,
    X_val: np.ndarray | None = None,
    y_val: np.ndarray | None = None,
    standardizer: Standardizer | None = None,
) -> MLPModel:
    """Train on raw encodings with labels in {+1, -1}."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise DegenerateDataError(f"training data has a single class {classes}")
    std = standardizer if standardizer is not None else Standardizer()
    Xs = std.transform(X)
    y_cls = np.array([label_to_class(int(v)) for v in y])

    rng = np.random.default_rng(config.seed)
    if X_val is None:
        # carve a deterministic 10% validation slice when the caller gives none
        n = len(Xs)
        if n >= 20:
            order = rng.permutation(n)
            n_val = max(1, n // 10)
            val_idx, tr_idx = order[:n_val], order[n_val:]
            if len(np.unique(y_cls[tr_idx])) < 2:
                tr_idx = np.arange(n)
                val_idx = np.arange(n)
            Xv, yv = Xs[val_idx], y_cls[val_idx]
            Xs, y_cls = Xs[tr_idx], y_cls[tr_idx]
        else:
            Xv, yv = Xs, y_cls
    else:
        Xv = std.transform(np.asarray(X_val, dtype=np.float64))
        yv = np.array([label_to_class(int(v)) for v in np.asarray(y_val)])

    layer_sizes = [X.shape[1], *config.hidden, 2]
    weights, biases = init_params(layer_sizes, rng)
    params = weights + biases
    decay_mask = [True] * len(weights) + [False] * len(biases)
    opt = _AdamW(params, config.learning_rate, config.weight_decay)

    best_val = np.inf
    best_snapshot = None
    stale = 0
    n = len(Xs)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            gw, gb = loss_gradients(weights, biases, Xs[idx], y_cls[idx])
            opt.step(params, gw + gb, decay_mask)
        val_loss = cross_entropy_loss(weights, biases, Xv, yv)
        if not np.isfinite(val_loss):
            raise DivergenceError(epoch)
        if config.patience is not None:
            if val_loss < best_val - 1e-12:
                best_val = val_loss
                best_snapshot = ([w.copy() for w in weights], [b.copy() for b in biases])
                stale = 0
            else:
                stale += 1
                if stale > config.patience:
                    break
    if best_snapshot is not None:
        weights, biases = best_snapshot
    return MLPModel(layer_sizes=layer_sizes, weights=weights, biases=biases, standardizer=std)


def train_weak_model(
    dataset: Sequence[tuple[PairEncoding, int]],
    config: TrainConfig,
    validation: Sequence[tuple[PairEncoding, int]] | None = None,
    standardizer: Standardizer | None = None,
) -> MLPModel:
    """Train the weak model on (encoding, label) pairs."""
    if not dataset:
        raise DegenerateDataError("empty training dataset")
    X = np.stack([enc.values for enc, _ in dataset])
    y = np.array([label for _, label in dataset])
    if validation is not None and len(validation):
        Xv = np.stack([enc.values for enc, _ in validation])
        yv = np.array([label for _, label in validation])
    else:
        Xv = yv = None
    return fit_mlp(X, y, config, Xv, yv, standardizer)


def accuracy(model: MLPModel, X: np.ndarray, y: np.ndarray) -> float:
    return float(np.mean(model.predict_labels(X) == np.asarray(y)))
