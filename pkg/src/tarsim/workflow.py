"""One complete review run: seed pair, then batch loop with per-round costing.

Round 0 reviews one random positive and one random negative (the seed pair).
Every later round selects a batch with the current model, looks up ground
truth, retrains on everything reviewed so far, and prices the run: review
cost of the training documents plus the cost of an ideal second-phase pass
down the fresh model's ranking until the recall target is met.

Runs are deterministic functions of (dataset, topic, config).  The replicate
seed is split once into a seed-pair stream and a random-strategy stream, so
runs that differ only in strategy draw identical seed pairs and stay paired.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import expit

from .classifier import DEFAULT_TRAIN, TrainConfig, clip_open_unit, fit_matrix
from .corpus import Dataset, Topic
from .cost import CostStructure, UNIFORM_COSTS, _penalty_from_flags, required_positives
from .strategies import STRATEGIES, select_random

__all__ = [
    "IterationRecord",
    "RunResult",
    "WorkflowConfig",
    "batch_precision",
    "make_seed_set",
    "run_tar",
]


@dataclass(frozen=True)
class WorkflowConfig:
    strategy: str
    replicate_seed: int
    batch_size: int = 100
    iterations: int = 80
    recall_target: float = 0.8
    cost_structure: CostStructure = UNIFORM_COSTS
    train_config: TrainConfig = DEFAULT_TRAIN
    warm_start: bool = False

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if not (0.0 < self.recall_target <= 1.0):
            raise ValueError(f"recall_target must be in (0, 1], got {self.recall_target}")
        if self.replicate_seed < 0:
            raise ValueError(f"replicate_seed must be >= 0, got {self.replicate_seed}")


@dataclass(frozen=True)
class IterationRecord:
    """State at the end of one review round (round 0 is the seed pair)."""

    iteration: int
    batch: tuple[int, ...]
    batch_positive_count: int
    reviewed: int
    positives_found: int
    recall_on_reviewed: float
    batch_precision: float
    penalty_depth: int
    penalty_cost: float
    total_cost: float


@dataclass(frozen=True)
class RunResult:
    topic_name: str
    config: WorkflowConfig
    records: tuple[IterationRecord, ...]
    truncated: bool
    final_model: dict
    seed: int


def batch_precision(labels: Sequence[bool]) -> float:
    if len(labels) == 0:
        raise ValueError("batch_precision needs a non-empty batch")
    return sum(bool(v) for v in labels) / len(labels)


def make_seed_set(dataset: Dataset, topic: Topic, rng: np.random.Generator) -> list[int]:
    """Draw the seed pair: one uniform positive, then one uniform negative."""
    if not topic.usable:
        raise ValueError(
            f"topic unusable: {topic.name!r} has {len(topic.positives)} positives "
            f"out of {topic.n_docs} documents"
        )
    y = dataset.label_array(topic.name)
    pos_ids = np.sort(dataset.doc_ids[y])
    neg_ids = np.sort(dataset.doc_ids[~y])
    return [int(rng.choice(pos_ids)), int(rng.choice(neg_ids))]


def _select_rows(
    config: WorkflowConfig,
    pool_rows: np.ndarray,
    pool_scores: np.ndarray,
    doc_ids: np.ndarray,
    row_of: dict[int, int],
    rng: np.random.Generator,
) -> np.ndarray:
    """Pick batch rows from the pool using the scores of the previous model."""
    k = min(config.batch_size, pool_rows.size)
    pool_ids = doc_ids[pool_rows]
    if config.strategy == "random":
        chosen = select_random(pool_ids.tolist(), k, rng)
        return np.asarray([row_of[d] for d in chosen], dtype=np.int64)
    if config.strategy == "uncertainty":
        distance = np.abs(clip_open_unit(expit(pool_scores)) - 0.5)
        order = np.lexsort((pool_ids, distance))
    else:  # relevance
        order = np.lexsort((pool_ids, -pool_scores))
    return pool_rows[order[:k]]


def run_tar(dataset: Dataset, topic: Topic | str, config: WorkflowConfig) -> RunResult:
    """Execute one run and return its per-round trace.

    The trace has ``iterations + 1`` records unless the pool runs dry first,
    in which case the result is truncated and flagged.
    """
    if isinstance(topic, str):
        topic = dataset.topic(topic)
    y = dataset.label_array(topic.name)
    X = dataset.feature_matrix()
    doc_ids = dataset.doc_ids
    costs = config.cost_structure
    total_pos = int(np.count_nonzero(y))
    if not topic.usable:
        raise ValueError(f"topic unusable: {topic.name!r}")
    need_total = required_positives(total_pos, config.recall_target)

    root = np.random.SeedSequence(config.replicate_seed)
    seed_stream, strategy_stream = root.spawn(2)
    seed_rng = np.random.default_rng(seed_stream)
    strategy_rng = np.random.default_rng(strategy_stream)

    reviewed = np.zeros(len(dataset), dtype=bool)
    cum_reviewed = 0
    cum_pos = 0
    w: np.ndarray | None = None
    b = 0.0
    pool_rows = np.empty(0, dtype=np.int64)
    pool_scores = np.empty(0)
    records: list[IterationRecord] = []
    truncated = False

    seed_pair = make_seed_set(dataset, topic, seed_rng)
    batch_rows = np.asarray([dataset.row_of[d] for d in seed_pair], dtype=np.int64)

    for iteration in range(config.iterations + 1):
        if iteration > 0:
            if pool_rows.size == 0:
                truncated = True
                break
            batch_rows = _select_rows(
                config, pool_rows, pool_scores, doc_ids, dataset.row_of, strategy_rng
            )

        batch_flags = y[batch_rows]
        reviewed[batch_rows] = True
        cum_reviewed += batch_rows.size
        cum_pos += int(np.count_nonzero(batch_flags))

        train_rows = np.flatnonzero(reviewed)
        y_train = np.where(y[train_rows], 1.0, -1.0)
        init_w = w if (config.warm_start and w is not None) else None
        init_b = b if (config.warm_start and w is not None) else 0.0
        w, b = fit_matrix(X[train_rows], y_train, config.train_config, init_w, init_b)

        pool_rows = np.flatnonzero(~reviewed)
        if pool_rows.size:
            pool_scores = X[pool_rows] @ w + b
            ranked = pool_rows[np.lexsort((doc_ids[pool_rows], -pool_scores))]
        else:
            pool_scores = np.empty(0)
            ranked = pool_rows
        penalty_cost, penalty_depth = _penalty_from_flags(
            y[ranked], need_total - cum_pos, costs
        )
        reviewed_cost = costs.c_train_pos * cum_pos + costs.c_train_neg * (
            cum_reviewed - cum_pos
        )
        records.append(
            IterationRecord(
                iteration=iteration,
                batch=tuple(int(d) for d in doc_ids[batch_rows]),
                batch_positive_count=int(np.count_nonzero(batch_flags)),
                reviewed=cum_reviewed,
                positives_found=cum_pos,
                recall_on_reviewed=cum_pos / total_pos,
                batch_precision=batch_precision(batch_flags.tolist()),
                penalty_depth=penalty_depth,
                penalty_cost=penalty_cost,
                total_cost=reviewed_cost + penalty_cost,
            )
        )

    assert w is not None
    final_model = {
        "intercept": float(b),
        "n_nonzero_weights": int(np.count_nonzero(w)),
        "weight_norm": float(math.sqrt(float(w @ w))),
    }
    return RunResult(
        topic_name=topic.name,
        config=config,
        records=tuple(records),
        truncated=truncated,
        final_model=final_model,
        seed=config.replicate_seed,
    )
