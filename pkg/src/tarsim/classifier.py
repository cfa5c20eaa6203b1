"""Sparse binary logistic regression with a deterministic full-batch optimizer.

The objective is mean logistic loss plus an L2 penalty on the weights (the
intercept is not penalized):

    J(w, b) = (1/n) sum_i log(1 + exp(-y_i (x_i . w + b))) + (lam/2) ||w||^2

Training runs plain gradient descent with Armijo backtracking, stopping when
the gradient infinity-norm drops below a tolerance or the epoch budget runs
out.  Everything is deterministic given identical inputs, which the
experiment layer relies on for reproducible replicates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

__all__ = [
    "Model",
    "TrainConfig",
    "clip_open_unit",
    "fit_matrix",
    "loss_and_gradient",
    "predict_proba",
    "rank",
    "train",
]

_PROB_LO = np.nextafter(0.0, 1.0)
_PROB_HI = np.nextafter(1.0, 0.0)

# Armijo sufficient-decrease constant and the smallest step worth trying.
_ARMIJO_C = 1e-4
_MIN_STEP = 1e-20


@dataclass(frozen=True)
class TrainConfig:
    """Optimizer settings.  ``step_size=None`` means backtracking line search."""

    l2_lambda: float = 1e-4
    max_epochs: int = 200
    grad_tolerance: float = 1e-6
    step_size: float | None = None

    def __post_init__(self) -> None:
        if not (math.isfinite(self.l2_lambda) and self.l2_lambda >= 0.0):
            raise ValueError(f"l2_lambda must be finite and >= 0, got {self.l2_lambda}")
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if not (math.isfinite(self.grad_tolerance) and self.grad_tolerance > 0.0):
            raise ValueError(f"grad_tolerance must be positive, got {self.grad_tolerance}")
        if self.step_size is not None and not (
            math.isfinite(self.step_size) and self.step_size > 0.0
        ):
            raise ValueError(f"step_size must be positive when given, got {self.step_size}")


DEFAULT_TRAIN = TrainConfig()


@dataclass
class Model:
    """Sparse linear weights plus intercept.  The empty model scores 0.5."""

    weights: dict[int, float] = field(default_factory=dict)
    intercept: float = 0.0

    def score(self, features: Mapping[int, float]) -> float:
        weights = self.weights
        total = self.intercept
        for term_id, value in features.items():
            w = weights.get(term_id)
            if w is not None:
                total += w * value
        return total

    def dense_weights(self, n_features: int) -> np.ndarray:
        """Weights as a dense vector of the given width; OOV ids are dropped."""
        dense = np.zeros(n_features)
        for term_id, w in self.weights.items():
            if 0 <= term_id < n_features:
                dense[term_id] = w
        return dense

    def to_json(self) -> str:
        return json.dumps(
            {"intercept": self.intercept, "weights": {str(t): w for t, w in sorted(self.weights.items())}}
        )


def clip_open_unit(p):
    """Clamp probabilities into the open interval (0, 1) after float underflow."""
    return np.clip(p, _PROB_LO, _PROB_HI)


def predict_proba(model: Model, features: Mapping[int, float]) -> float:
    """Sigmoid of the linear score; always strictly inside (0, 1)."""
    return float(clip_open_unit(expit(model.score(features))))


def rank(
    model: Model,
    candidates: Sequence[int],
    features: Mapping[int, Mapping[int, float]],
) -> list[int]:
    """Candidates ordered by descending score, ties broken by ascending doc_id.

    Sorting uses the raw linear score rather than the probability so that the
    order survives sigmoid saturation at extreme scores.
    """
    ids = np.asarray(candidates, dtype=np.int64)
    if ids.size == 0:
        return []
    scores = np.empty(ids.size)
    for i, doc_id in enumerate(ids):
        scores[i] = model.score(features[int(doc_id)])
    order = np.lexsort((ids, -scores))
    return [int(d) for d in ids[order]]


def _objective(X, y, w, b, lam):
    margins = -y * (X @ w + b)
    return float(np.logaddexp(0.0, margins).mean() + 0.5 * lam * (w @ w))


def fit_matrix(
    X: sp.csr_matrix,
    y: np.ndarray,
    config: TrainConfig = DEFAULT_TRAIN,
    init_w: np.ndarray | None = None,
    init_b: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Minimize the regularized logistic objective over matrix-form data.

    ``y`` must hold +1/-1 labels.  Returns the weight vector and intercept.
    The gradient is checked before each update, so a returned point that
    stopped early carries its own optimality certificate.
    """
    n, d = X.shape
    y = np.asarray(y, dtype=np.float64)
    w = np.zeros(d) if init_w is None else np.array(init_w, dtype=np.float64)
    b = float(init_b)
    lam = config.l2_lambda
    step = 1.0

    for _ in range(config.max_epochs):
        margins = -y * (X @ w + b)
        residual = -y * expit(margins)
        grad_w = X.T @ residual / n + lam * w
        grad_b = float(residual.mean())
        if max(np.abs(grad_w).max(initial=0.0), abs(grad_b)) <= config.grad_tolerance:
            break

        if config.step_size is not None:
            w = w - config.step_size * grad_w
            b = b - config.step_size * grad_b
            continue

        loss = float(np.logaddexp(0.0, margins).mean() + 0.5 * lam * (w @ w))
        grad_sq = float(grad_w @ grad_w) + grad_b * grad_b
        t = 2.0 * step
        while True:
            w_try = w - t * grad_w
            b_try = b - t * grad_b
            if _objective(X, y, w_try, b_try, lam) <= loss - _ARMIJO_C * t * grad_sq:
                break
            t *= 0.5
            if t < _MIN_STEP:
                return w, b
        w, b, step = w_try, b_try, t
    return w, b


def train(
    examples: Sequence[tuple[Mapping[int, float], int]],
    config: TrainConfig = DEFAULT_TRAIN,
    init: Model | None = None,
) -> Model:
    """Fit a model on (feature map, +1/-1 label) pairs.

    Raises ValueError when the labels are all one class: a degenerate
    separator would push the intercept to infinity.
    """
    if not examples:
        raise ValueError("cannot train on an empty example list")
    labels = [label for _, label in examples]
    if any(label not in (1, -1) for label in labels):
        raise ValueError("labels must be +1 or -1")
    n_pos = sum(1 for label in labels if label == 1)
    if n_pos == 0 or n_pos == len(labels):
        raise ValueError("degenerate training set: need at least one positive and one negative")

    feature_ids: set[int] = set()
    for features, _ in examples:
        feature_ids.update(features)
    if init is not None:
        feature_ids.update(init.weights)
    columns = sorted(feature_ids)
    col_of = {term_id: j for j, term_id in enumerate(columns)}

    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for features, _ in examples:
        for term_id in sorted(features):
            indices.append(col_of[term_id])
            data.append(features[term_id])
        indptr.append(len(indices))
    X = sp.csr_matrix(
        (np.asarray(data), np.asarray(indices, dtype=np.int64), np.asarray(indptr)),
        shape=(len(examples), len(columns)),
    )
    y = np.asarray(labels, dtype=np.float64)

    init_w = None
    init_b = 0.0
    if init is not None:
        init_w = np.zeros(len(columns))
        for term_id, weight in init.weights.items():
            init_w[col_of[term_id]] = weight
        init_b = init.intercept

    w, b = fit_matrix(X, y, config, init_w, init_b)
    weights = {columns[j]: float(w[j]) for j in range(len(columns)) if w[j] != 0.0}
    return Model(weights, float(b))


def loss_and_gradient(
    model: Model,
    examples: Sequence[tuple[Mapping[int, float], int]],
    l2_lambda: float,
) -> tuple[float, dict[int, float], float]:
    """Objective value and exact gradient at ``model``, in sparse dict form.

    This is a straightforward per-example implementation kept separate from
    the matrix path so the two can be checked against each other.
    """
    n = len(examples)
    if n == 0:
        raise ValueError("need at least one example")
    loss = 0.0
    grad_w: dict[int, float] = {}
    grad_b = 0.0
    for features, label in examples:
        margin = -label * model.score(features)
        loss += float(np.logaddexp(0.0, margin))
        residual = -label * float(expit(margin))
        for term_id, value in features.items():
            grad_w[term_id] = grad_w.get(term_id, 0.0) + residual * value
        grad_b += residual
    loss /= n
    grad_b /= n
    for term_id in grad_w:
        grad_w[term_id] /= n
    # the L2 term touches every model weight, supported by examples or not
    for term_id, weight in model.weights.items():
        loss += 0.5 * l2_lambda * weight * weight
        grad_w[term_id] = grad_w.get(term_id, 0.0) + l2_lambda * weight
    return loss, grad_w, grad_b
