"""Instance weights, weighted error, model coefficients, and the ensemble.

Weights live on the original weakly labeled dataset only: misclassified
instances are multiplied by e^alpha after each iteration, correct ones are
untouched, and no renormalization happens because the weighted error divides
by the weight total.  The final predictor is the sign of the
coefficient-weighted vote of the per-iteration models.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

EPS = 1e-8  # error clip bound; keeps the coefficient finite at err in {0, 1}


class EmptyDatasetError(ValueError):
    pass


class WeightOverflowError(RuntimeError):
    def __init__(self, index: int):
        super().__init__(f"weight update overflowed at instance {index}")
        self.index = index


@dataclass
class IterationRecord:
    iteration: int
    err: float        # clipped to [EPS, 1 - EPS]
    err_raw: float
    alpha: float
    n_candidates: int = 0
    n_accepted: int = 0
    n_minted: int = 0
    dataset_size: int = 0
    metrics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "err": self.err,
            "err_raw": self.err_raw,
            "alpha": self.alpha,
            "n_candidates": self.n_candidates,
            "n_accepted": self.n_accepted,
            "n_minted": self.n_minted,
            "dataset_size": self.dataset_size,
            "metrics": self.metrics,
        }


@dataclass
class BoostState:
    weights: np.ndarray
    iteration: int = 0
    records: list[IterationRecord] = field(default_factory=list)


@dataclass
class EnsembleModel:
    """Weighted vote over the per-iteration weak models."""

    members: list[tuple[object, float]] = field(default_factory=list)  # (model, alpha)

    def append(self, model, alpha: float) -> None:
        if not math.isfinite(alpha):
            raise ValueError(f"alpha must be finite, got {alpha}")
        self.members.append((model, alpha))

    def __len__(self) -> int:
        return len(self.members)


def init_weights(n: int) -> np.ndarray:
    """Uniform weights 1/n over the weakly labeled dataset."""
    if n < 1:
        raise EmptyDatasetError("cannot initialize weights for an empty dataset")
    return np.full(n, 1.0 / n, dtype=np.float64)


def weighted_error(weights: np.ndarray, predictions: np.ndarray,
                   labels: np.ndarray) -> tuple[float, float]:
    """Weight-normalized misclassification rate; returns (clipped, raw)."""
    weights = np.asarray(weights, dtype=np.float64)
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if not (len(weights) == len(predictions) == len(labels)):
        raise ValueError(
            f"length mismatch: {len(weights)}, {len(predictions)}, {len(labels)}")
    wrong = predictions != labels
    raw = float(np.sum(weights[wrong]) / np.sum(weights))
    return float(min(max(raw, EPS), 1.0 - EPS)), raw


def model_coefficient(err: float) -> float:
    """alpha = ln((1 - err) / err); positive iff err < 0.5."""
    return math.log((1.0 - err) / err)


def update_weights(weights: np.ndarray, predictions: np.ndarray,
                   labels: np.ndarray, alpha: float) -> np.ndarray:
    """Multiply misclassified instance weights by e^alpha."""
    weights = np.asarray(weights, dtype=np.float64)
    wrong = np.asarray(predictions) != np.asarray(labels)
    updated = np.where(wrong, weights * math.exp(alpha), weights)
    bad = np.flatnonzero(~np.isfinite(updated))
    if bad.size:
        raise WeightOverflowError(int(bad[0]))
    return updated


def select_large_error(weights: np.ndarray, n: int) -> list[int]:
    """Indices of the n largest weights; ties break by ascending index."""
    weights = np.asarray(weights, dtype=np.float64)
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > len(weights):
        warnings.warn(f"n={n} exceeds {len(weights)} instances; selecting all",
                      stacklevel=2)
        n = len(weights)
    order = np.lexsort((np.arange(len(weights)), -weights))
    return [int(i) for i in order[:n]]


def ensemble_predict(ensemble: EnsembleModel, encoding) -> int:
    """Sign of the alpha-weighted vote; an exact zero vote resolves to +1."""
    if not ensemble.members:
        raise ValueError("ensemble is empty")
    vec = np.asarray(getattr(encoding, "values", encoding)).reshape(1, -1)
    total = 0.0
    for model, alpha in ensemble.members:
        total += alpha * int(model.predict_labels(vec)[0])
    return 1 if total >= 0.0 else -1


def ensemble_predict_matrix(ensemble: EnsembleModel, X: np.ndarray) -> np.ndarray:
    """Vectorized ensemble vote over a matrix of encodings."""
    if not ensemble.members:
        raise ValueError("ensemble is empty")
    total = np.zeros(len(X), dtype=np.float64)
    for model, alpha in ensemble.members:
        total += alpha * model.predict_labels(X)
    return np.where(total >= 0.0, 1, -1)
