"""Linear probes: multinomial logistic regression on a subset of neurons.

Features are standardized per neuron (statistics from the training set) and
the model is fit by plain full-batch gradient descent from a seeded random
start, so a given seed and input always produce the same parameters.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .data import as_labels
from .errors import DataError, ShapeError


@dataclass(frozen=True)
class ProbeConfig:
    learning_rate: float = 0.1
    epochs: int = 500
    l2: float = 1e-4
    seed: int = 0


@dataclass(frozen=True, eq=False)
class ProbeModel:
    weights: np.ndarray  # C x d
    bias: np.ndarray  # C
    classes: tuple
    neurons: tuple[int, ...] | None
    mean: np.ndarray
    scale: np.ndarray
    config: ProbeConfig = field(default_factory=ProbeConfig)

    def _features(self, features) -> np.ndarray:
        x = np.asarray(features.data if hasattr(features, "data") else features, dtype=np.float64)
        if x.ndim != 2:
            raise ShapeError(f"features must be 2-D, got shape {x.shape}")
        if self.neurons is not None:
            if x.shape[1] != len(self.neurons):
                x = _restrict(x, self.neurons)
        if x.shape[1] != self.weights.shape[1]:
            raise ShapeError(f"probe expects {self.weights.shape[1]} features, got {x.shape[1]}")
        return (x - self.mean) / self.scale

    def logits(self, features) -> np.ndarray:
        return self._features(features) @ self.weights.T + self.bias

    def predict(self, features) -> np.ndarray:
        idx = np.argmax(self.logits(features), axis=1)
        return np.asarray(self.classes, dtype=object)[idx]

    def to_json(self) -> dict:
        return {
            "classes": list(self.classes),
            "neurons": None if self.neurons is None else list(self.neurons),
            "weights": self.weights,
            "bias": self.bias,
            "mean": self.mean,
            "scale": self.scale,
            "hyperparameters": asdict(self.config),
        }


@dataclass(frozen=True)
class ProbeEvaluation:
    overall: float
    per_class: dict
    n: int

    def as_dict(self) -> dict:
        return {"overall": self.overall, "per_class": {str(k): v for k, v in self.per_class.items()}, "n": self.n}


def _restrict(x: np.ndarray, neurons: Sequence[int]) -> np.ndarray:
    neurons = list(neurons)
    if neurons and (min(neurons) < 0 or max(neurons) >= x.shape[1]):
        raise ShapeError(f"neuron index out of range for d={x.shape[1]}")
    return x[:, neurons]


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_probe(features, classes, hp: ProbeConfig | None = None, *, neurons: Sequence[int] | None = None) -> ProbeModel:
    """Fit a softmax-regression probe.

    ``features`` is either already restricted to the selected neurons, or the
    full layer together with ``neurons``.
    """
    hp = hp or ProbeConfig()
    x = np.asarray(features.data if hasattr(features, "data") else features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"features must be 2-D, got shape {x.shape}")
    if neurons is not None:
        x = _restrict(x, neurons)
    if x.shape[1] < 1:
        raise ShapeError("probe needs at least one feature")
    labels = as_labels(classes)
    labels.check_length(x.shape[0], "class labels")
    cats = labels.categories
    if len(cats) < 2:
        raise DataError("probe needs at least 2 classes")
    y = labels.array()
    onehot = np.zeros((x.shape[0], len(cats)))
    for c_i, c in enumerate(cats):
        hits = y == c
        if hits.sum() < 2:
            raise DataError(f"class {c!r} has fewer than 2 points")
        onehot[hits, c_i] = 1.0

    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    xs = (x - mean) / scale
    n, d = xs.shape

    rng = np.random.default_rng(hp.seed)
    w = rng.normal(0.0, 0.01, size=(len(cats), d))
    b = np.zeros(len(cats))
    for _ in range(hp.epochs):
        err = _softmax(xs @ w.T + b) - onehot
        w -= hp.learning_rate * (err.T @ xs / n + hp.l2 * w)
        b -= hp.learning_rate * err.mean(axis=0)
    if not (np.isfinite(w).all() and np.isfinite(b).all()):
        raise DataError("probe training diverged; lower the learning rate")
    return ProbeModel(w, b, tuple(cats), None if neurons is None else tuple(int(j) for j in neurons), mean, scale, hp)


def evaluate_probe(model: ProbeModel, features, classes) -> ProbeEvaluation:
    """Overall and per-class accuracy (per class = recall on that class)."""
    labels = as_labels(classes)
    x = np.asarray(features.data if hasattr(features, "data") else features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != len(labels):
        raise ShapeError(f"{x.shape[0] if x.ndim else 0} feature rows for {len(labels)} labels")
    pred = model.predict(x)
    truth = labels.array().astype(object)
    hit = pred == truth
    per_class = {c: float(hit[truth == c].mean()) for c in labels.categories}
    return ProbeEvaluation(float(hit.mean()), per_class, int(hit.size))


__all__ = ["ProbeConfig", "ProbeModel", "ProbeEvaluation", "train_probe", "evaluate_probe"]
