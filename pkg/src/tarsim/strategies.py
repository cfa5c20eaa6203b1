"""Batch selection for the review loop: random, uncertainty, or relevance.

Random sampling draws uniformly without replacement.  Uncertainty sampling
takes the documents whose predicted probability sits closest to 0.5.
Relevance feedback takes the top-ranked documents outright.  The latter two
are pure functions of the model and pool; only random selection consumes
randomness.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np

from .classifier import Model, predict_proba, rank

__all__ = [
    "STRATEGIES",
    "select_batch",
    "select_random",
    "select_relevance",
    "select_uncertainty",
]

STRATEGIES = ("random", "uncertainty", "relevance")


def _pool_array(pool: Iterable[int]) -> np.ndarray:
    ids = np.asarray(sorted(pool), dtype=np.int64)
    if ids.size == 0:
        raise ValueError("pool exhausted")
    return ids


def select_random(pool: Iterable[int], k: int, rng: np.random.Generator) -> list[int]:
    """Uniform draw of min(k, |pool|) ids without replacement.

    The pool is sorted before drawing so the result depends only on the rng
    state and the pool's contents, not its iteration order.
    """
    if k < 1:
        raise ValueError(f"batch size must be >= 1, got {k}")
    ids = _pool_array(pool)
    take = min(k, ids.size)
    chosen = rng.choice(ids, size=take, replace=False)
    return [int(d) for d in chosen]


def select_uncertainty(
    model: Model,
    pool: Iterable[int],
    k: int,
    features: Mapping[int, Mapping[int, float]],
) -> list[int]:
    """The min(k, |pool|) docs with probability closest to 0.5, ties by id."""
    if k < 1:
        raise ValueError(f"batch size must be >= 1, got {k}")
    ids = _pool_array(pool)
    distances = np.empty(ids.size)
    for i, doc_id in enumerate(ids):
        distances[i] = abs(predict_proba(model, features[int(doc_id)]) - 0.5)
    order = np.lexsort((ids, distances))
    return [int(d) for d in ids[order[: min(k, ids.size)]]]


def select_relevance(
    model: Model,
    pool: Iterable[int],
    k: int,
    features: Mapping[int, Mapping[int, float]],
) -> list[int]:
    """The top min(k, |pool|) documents of the model ranking."""
    if k < 1:
        raise ValueError(f"batch size must be >= 1, got {k}")
    ids = _pool_array(pool)
    return rank(model, ids, features)[: min(k, ids.size)]


def select_batch(
    kind: str,
    model: Model | None,
    pool: Iterable[int],
    k: int,
    features: Mapping[int, Mapping[int, float]],
    rng: np.random.Generator | None = None,
) -> list[int]:
    """Dispatch on strategy name; ``model`` and ``rng`` are needed as per kind."""
    if kind == "random":
        if rng is None:
            raise ValueError("random selection needs an rng")
        return select_random(pool, k, rng)
    if kind == "uncertainty":
        if model is None:
            raise ValueError("uncertainty selection needs a model")
        return select_uncertainty(model, pool, k, features)
    if kind == "relevance":
        if model is None:
            raise ValueError("relevance selection needs a model")
        return select_relevance(model, pool, k, features)
    raise ValueError(f"unknown strategy {kind!r}; expected one of {STRATEGIES}")
