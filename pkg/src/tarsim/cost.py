"""Review-cost accounting for one-phase review runs.

Total cost at any point of a run is the cost of everything reviewed so far,
plus a penalty: the cost of an ideal second-phase review that walks the
current ranking of unreviewed documents just deep enough to lift recall to
the target. With the default uniform cost structure every cost is a document
count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Iterable, Mapping, Sequence

import numpy as np


class InconsistentStateError(RuntimeError):
    """Bookkeeping handed to the cost model cannot be satisfied."""


@dataclass(frozen=True)
class CostStructure:
    """Per-document review cost, split by phase and label polarity."""

    c_train_pos: float = 1.0
    c_train_neg: float = 1.0
    c_phase2_pos: float = 1.0
    c_phase2_neg: float = 1.0

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value) or value < 0:
                raise ValueError(f"{f.name} must be finite and non-negative, got {value!r}")


UNIFORM_COSTS = CostStructure()


@dataclass(frozen=True)
class CostPoint:
    """Cost of one run snapshot: review spend so far plus the ideal top-up."""

    reviewed_cost: float
    penalty_cost: float
    total: float
    penalty_depth: int
    recall_achieved: float


def required_positives(total_pos: int, target: float) -> int:
    """Minimum positives that must be found so that recall >= target."""
    if total_pos < 1:
        raise ValueError(f"total_pos must be >= 1, got {total_pos}")
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target must be in (0, 1], got {target}")
    return math.ceil(target * total_pos)


def _penalty_from_flags(flags: np.ndarray, needed: int, costs: CostStructure) -> tuple[float, int]:
    """Walk ranked positive/negative flags until `needed` positives are seen."""
    if needed <= 0:
        return 0.0, 0
    cumulative = np.cumsum(flags, dtype=np.int64)
    if flags.size == 0 or cumulative[-1] < needed:
        available = 0 if flags.size == 0 else int(cumulative[-1])
        raise InconsistentStateError(
            f"inconsistent state: ranking holds {available} positives but {needed} are needed"
        )
    depth = int(np.searchsorted(cumulative, needed)) + 1
    negatives = depth - needed
    return costs.c_phase2_pos * needed + costs.c_phase2_neg * negatives, depth


def phase2_penalty(
    ranking: Sequence[int],
    labels: Mapping[int, bool],
    found_pos: int,
    total_pos: int,
    target: float,
    costs: CostStructure = UNIFORM_COSTS,
) -> tuple[float, int]:
    """Cost and depth of an ideal second-phase review over `ranking`.

    Returns (0.0, 0) when the recall target is already met; otherwise walks
    the ranking top-down until enough additional positives have been seen.
    """
    needed = required_positives(total_pos, target) - found_pos
    flags = np.fromiter((bool(labels[d]) for d in ranking), dtype=bool, count=len(ranking))
    return _penalty_from_flags(flags, needed, costs)


def total_cost(
    reviewed_labels: Iterable[bool],
    penalty_cost: float,
    costs: CostStructure = UNIFORM_COSTS,
    *,
    penalty_depth: int = 0,
    total_pos: int | None = None,
) -> CostPoint:
    """Combine first-phase review spend with an already-computed penalty."""
    n_pos = 0
    n_reviewed = 0
    for label in reviewed_labels:
        n_reviewed += 1
        if label:
            n_pos += 1
    reviewed_cost = costs.c_train_pos * n_pos + costs.c_train_neg * (n_reviewed - n_pos)
    recall = n_pos / total_pos if total_pos else float("nan")
    return CostPoint(
        reviewed_cost=reviewed_cost,
        penalty_cost=penalty_cost,
        total=reviewed_cost + penalty_cost,
        penalty_depth=penalty_depth,
        recall_achieved=recall,
    )


def manual_review_baseline(n_docs: int, target: float) -> int:
    """Cost of reviewing a random `target` fraction of the collection."""
    if n_docs < 1:
        raise ValueError(f"n_docs must be >= 1, got {n_docs}")
    if not 0.0 < target <= 1.0:
        raise ValueError(f"target must be in (0, 1], got {target}")
    return math.ceil(target * n_docs)
