"""Replicated experiment orchestration and summary statistics.

A plan fans runs out over (topic, strategy, schedule, replicate).  Replicate
seeds derive from (base_seed, topic, replicate) only, so every strategy and
batch schedule sees the same seed pair and comparisons stay paired.

The long per-iteration table (``runs.csv``) is the single source of truth:
summaries and heatmap vectors are always recomputed from those rows, whether
they arrive fresh from runs or are parsed back from disk.  Row ordering is
canonical and floats are written with ``repr``, so reruns and the
write-then-read path are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np
from scipy.stats import t as t_dist

from .classifier import DEFAULT_TRAIN, TrainConfig
from .corpus import Dataset, LoadError
from .cost import CostStructure, UNIFORM_COSTS
from .strategies import STRATEGIES
from .workflow import RunResult, WorkflowConfig, run_tar

__all__ = [
    "ExperimentPlan",
    "ExperimentResult",
    "RunRow",
    "SummaryRow",
    "derive_seed",
    "heatmap_matrix",
    "mean_ci",
    "paired_t_bonferroni",
    "read_runs_csv",
    "relative_reduction",
    "run_plan",
    "summarize",
    "welch_t_test",
    "write_heatmap_csv",
    "write_runs_csv",
    "write_summary_csv",
]

RUNS_COLUMNS = (
    "dataset",
    "topic",
    "strategy",
    "batch_size",
    "replicate",
    "iteration",
    "reviewed",
    "batch_pos",
    "batch_precision",
    "recall_reviewed",
    "penalty_depth",
    "total_cost",
)

SUMMARY_COLUMNS = (
    "dataset",
    "strategy",
    "batch_size",
    "n_train_checkpoint",
    "mean_cost",
    "ci_low",
    "ci_high",
    "rel_reduction_pct",
    "t_stat",
    "p_raw",
    "significant",
    "welch_t",
    "welch_p",
)

BASELINE_STRATEGY = "random"


class RunRow(NamedTuple):
    dataset: str
    topic: str
    strategy: str
    batch_size: int
    replicate: int
    iteration: int
    reviewed: int
    batch_pos: int
    batch_precision: float
    recall_reviewed: float
    penalty_depth: int
    total_cost: float


class SummaryRow(NamedTuple):
    dataset: str
    strategy: str
    batch_size: int
    n_train_checkpoint: int
    mean_cost: float
    ci_low: float | None
    ci_high: float | None
    rel_reduction_pct: float | None
    t_stat: float | None
    p_raw: float | None
    significant: bool | None
    welch_t: float | None
    welch_p: float | None


@dataclass(frozen=True)
class ExperimentPlan:
    """What to run: strategies x (batch size, iteration budget) x replicates."""

    strategies: tuple[str, ...] = STRATEGIES
    schedules: tuple[tuple[int, int], ...] = ((100, 80), (200, 40))
    topics: tuple[str, ...] | None = None
    n_replicates: int = 20
    recall_target: float = 0.8
    base_seed: int = 0
    cost_structure: CostStructure = UNIFORM_COSTS
    train_config: TrainConfig = DEFAULT_TRAIN
    warm_start: bool = False

    def __post_init__(self) -> None:
        if not self.strategies:
            raise ValueError("plan needs at least one strategy")
        for strategy in self.strategies:
            if strategy not in STRATEGIES:
                raise ValueError(f"unknown strategy {strategy!r}; expected one of {STRATEGIES}")
        if len(set(self.strategies)) != len(self.strategies):
            raise ValueError("duplicate strategies in plan")
        if not self.schedules:
            raise ValueError("plan needs at least one (batch_size, iterations) schedule")
        for batch, iters in self.schedules:
            if batch < 1 or iters < 1:
                raise ValueError(f"bad schedule ({batch}, {iters}); both must be >= 1")
        if len({batch for batch, _ in self.schedules}) != len(self.schedules):
            raise ValueError("batch sizes in schedules must be distinct")
        if self.n_replicates < 1:
            raise ValueError(f"n_replicates must be >= 1, got {self.n_replicates}")
        if not (0.0 < self.recall_target <= 1.0):
            raise ValueError(f"recall_target must be in (0, 1], got {self.recall_target}")
        if self.base_seed < 0:
            raise ValueError(f"base_seed must be >= 0, got {self.base_seed}")


@dataclass(frozen=True)
class ExperimentResult:
    dataset_name: str
    rows: tuple[RunRow, ...]
    skipped_topics: tuple[str, ...]
    n_runs: int


def derive_seed(base_seed: int, topic_name: str, replicate: int) -> int:
    """Replicate seed shared by all strategies and schedules for pairing."""
    digest = hashlib.sha256(topic_name.encode("utf-8")).digest()
    topic_key = int.from_bytes(digest[:8], "big")
    sequence = np.random.SeedSequence([base_seed, topic_key, replicate])
    return int(sequence.generate_state(1, np.uint64)[0])


def _rows_from_result(dataset_name: str, result: RunResult, replicate: int) -> list[RunRow]:
    config = result.config
    return [
        RunRow(
            dataset=dataset_name,
            topic=result.topic_name,
            strategy=config.strategy,
            batch_size=config.batch_size,
            replicate=replicate,
            iteration=record.iteration,
            reviewed=record.reviewed,
            batch_pos=record.batch_positive_count,
            batch_precision=record.batch_precision,
            recall_reviewed=record.recall_on_reviewed,
            penalty_depth=record.penalty_depth,
            total_cost=record.total_cost,
        )
        for record in result.records
    ]


_WORKER_DATASET: Dataset | None = None


def _init_worker(dataset: Dataset) -> None:
    global _WORKER_DATASET
    _WORKER_DATASET = dataset


def _run_task(task) -> list[RunRow]:
    topic_name, replicate, config = task
    assert _WORKER_DATASET is not None
    result = run_tar(_WORKER_DATASET, topic_name, config)
    return _rows_from_result(_WORKER_DATASET.name, result, replicate)


def _plan_tasks(dataset: Dataset, plan: ExperimentPlan) -> tuple[list, list[str]]:
    if plan.topics is None:
        wanted = dataset.topic_names()
    else:
        wanted = list(plan.topics)
        for name in wanted:
            dataset.topic(name)  # raises KeyError on unknown topics
    usable, skipped = [], []
    for name in wanted:
        (usable if dataset.topic(name).usable else skipped).append(name)

    tasks = []
    for topic_name in usable:
        for replicate in range(plan.n_replicates):
            seed = derive_seed(plan.base_seed, topic_name, replicate)
            for strategy in plan.strategies:
                for batch_size, iterations in plan.schedules:
                    config = WorkflowConfig(
                        strategy=strategy,
                        replicate_seed=seed,
                        batch_size=batch_size,
                        iterations=iterations,
                        recall_target=plan.recall_target,
                        cost_structure=plan.cost_structure,
                        train_config=plan.train_config,
                        warm_start=plan.warm_start,
                    )
                    tasks.append((topic_name, replicate, config))
    return tasks, skipped


def run_plan(
    dataset: Dataset,
    plan: ExperimentPlan,
    jobs: int = 1,
    progress: bool = False,
) -> ExperimentResult:
    """Execute every run in the plan and return canonically ordered rows.

    Unusable topics (no positives or no negatives) are skipped with a warning
    on stderr.  Output is independent of ``jobs``.
    """
    tasks, skipped = _plan_tasks(dataset, plan)
    for name in skipped:
        print(f"warning: skipping unusable topic {name!r}", file=sys.stderr)

    rows: list[RunRow] = []
    done = 0
    if jobs <= 1:
        _init_worker(dataset)
        for task in tasks:
            rows.extend(_run_task(task))
            done += 1
            if progress:
                print(f"completed {done}/{len(tasks)} runs", file=sys.stderr)
    else:
        with ProcessPoolExecutor(
            max_workers=jobs, initializer=_init_worker, initargs=(dataset,)
        ) as pool:
            for chunk in pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs))):
                rows.extend(chunk)
                done += 1
                if progress:
                    print(f"completed {done}/{len(tasks)} runs", file=sys.stderr)

    rows.sort(key=lambda r: (r.dataset, r.topic, r.strategy, r.batch_size, r.replicate, r.iteration))
    return ExperimentResult(
        dataset_name=dataset.name,
        rows=tuple(rows),
        skipped_topics=tuple(skipped),
        n_runs=len(tasks),
    )


# ---------------------------------------------------------------------------
# statistics
# ---------------------------------------------------------------------------


def mean_ci(costs: Sequence[float], confidence: float = 0.99) -> tuple[float, float, float]:
    """Student-t confidence interval for the mean; needs at least 2 values."""
    n = len(costs)
    if n < 2:
        raise ValueError(f"confidence interval needs n >= 2, got {n}")
    if not (0.0 < confidence < 1.0):
        raise ValueError(f"confidence must be in (0, 1), got {confidence}")
    values = np.asarray(costs, dtype=np.float64)
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    critical = float(t_dist.ppf(0.5 + confidence / 2.0, n - 1))
    half = critical * sd / np.sqrt(n)
    return mean, mean - half, mean + half


def paired_t_bonferroni(
    a: Sequence[float],
    b: Sequence[float],
    n_tests: int,
) -> tuple[float, float, bool]:
    """One-sample t on paired differences a - b with Bonferroni threshold.

    Significance means raw two-sided p <= 0.01 / n_tests.
    """
    if len(a) != len(b):
        raise ValueError(f"paired samples differ in length: {len(a)} vs {len(b)}")
    if len(a) < 2:
        raise ValueError(f"paired test needs n >= 2, got {len(a)}")
    if n_tests < 1:
        raise ValueError(f"n_tests must be >= 1, got {n_tests}")
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    n = diff.size
    sd = float(diff.std(ddof=1))
    mean = float(diff.mean())
    if sd == 0.0:
        if mean == 0.0:
            t_stat, p_raw = 0.0, 1.0
        else:
            t_stat = float("inf") if mean > 0 else float("-inf")
            p_raw = 0.0
    else:
        t_stat = mean / (sd / np.sqrt(n))
        p_raw = 2.0 * float(t_dist.sf(abs(t_stat), n - 1))
    return t_stat, p_raw, p_raw <= 0.01 / n_tests


def welch_t_test(a: Sequence[float], b: Sequence[float]) -> tuple[float, float]:
    """Unpaired two-sample t with unequal variances (Welch-Satterthwaite df)."""
    x = np.asarray(a, dtype=np.float64)
    y = np.asarray(b, dtype=np.float64)
    if x.size < 2 or y.size < 2:
        raise ValueError("welch test needs n >= 2 in both samples")
    vx = float(x.var(ddof=1)) / x.size
    vy = float(y.var(ddof=1)) / y.size
    if vx + vy == 0.0:
        if x.mean() == y.mean():
            return 0.0, 1.0
        return (float("inf") if x.mean() > y.mean() else float("-inf")), 0.0
    t_stat = float((x.mean() - y.mean()) / np.sqrt(vx + vy))
    df = (vx + vy) ** 2 / (
        vx**2 / (x.size - 1) + vy**2 / (y.size - 1)
    )
    p = 2.0 * float(t_dist.sf(abs(t_stat), df))
    return t_stat, p


def relative_reduction(candidate_mean: float, baseline_mean: float) -> float:
    """Percent cost reduction vs the baseline; negative when worse."""
    if baseline_mean <= 0.0:
        raise ValueError(f"baseline mean must be positive, got {baseline_mean}")
    return 100.0 * (baseline_mean - candidate_mean) / baseline_mean


# ---------------------------------------------------------------------------
# summaries derived from the long table
# ---------------------------------------------------------------------------


def summarize(
    rows: Iterable[RunRow],
    checkpoints: Sequence[int] | None = None,
) -> list[SummaryRow]:
    """Per-(dataset, strategy, batch, n_train) summary with paired baseline tests.

    ``checkpoints`` restricts the training-set sizes summarized (default: all
    present).  Costs pool over (topic, replicate); the paired baseline is the
    random strategy at the matched cell.  Cells without a usable baseline get
    empty comparison fields.  The Bonferroni test count is the number of
    non-baseline cells with a usable pairing.
    """
    wanted = set(checkpoints) if checkpoints is not None else None
    cells: dict[tuple[str, int, int, str], dict[tuple[str, int], float]] = {}
    for row in rows:
        if wanted is not None and row.reviewed not in wanted:
            continue
        key = (row.dataset, row.batch_size, row.reviewed, row.strategy)
        cells.setdefault(key, {})[(row.topic, row.replicate)] = row.total_cost

    def paired_costs(key):
        dataset, batch, n_train, strategy = key
        baseline_cell = cells.get((dataset, batch, n_train, BASELINE_STRATEGY))
        if strategy == BASELINE_STRATEGY or baseline_cell is None:
            return None
        common = sorted(cells[key].keys() & baseline_cell.keys())
        if len(common) < 2:
            return None
        return (
            [cells[key][pair] for pair in common],
            [baseline_cell[pair] for pair in common],
        )

    n_tests = sum(1 for key in cells if paired_costs(key) is not None)

    out: list[SummaryRow] = []
    for key in sorted(cells):
        dataset, batch, n_train, strategy = key
        costs = [cells[key][pair] for pair in sorted(cells[key])]
        mean = float(np.mean(costs))
        if len(costs) >= 2:
            _, ci_low, ci_high = mean_ci(costs)
        else:
            ci_low = ci_high = None
        rel = t_stat = p_raw = significant = w_t = w_p = None
        paired = paired_costs(key)
        if paired is not None:
            candidate, baseline = paired
            rel = relative_reduction(float(np.mean(candidate)), float(np.mean(baseline)))
            t_stat, p_raw, significant = paired_t_bonferroni(candidate, baseline, n_tests)
            w_t, w_p = welch_t_test(candidate, baseline)
        out.append(
            SummaryRow(
                dataset=dataset,
                strategy=strategy,
                batch_size=batch,
                n_train_checkpoint=n_train,
                mean_cost=mean,
                ci_low=ci_low,
                ci_high=ci_high,
                rel_reduction_pct=rel,
                t_stat=t_stat,
                p_raw=p_raw,
                significant=significant,
                welch_t=w_t,
                welch_p=w_p,
            )
        )
    out.sort(key=lambda s: (s.dataset, s.strategy, s.batch_size, s.n_train_checkpoint))
    return out


def heatmap_matrix(
    rows: Iterable[RunRow],
    recall_target: float | None = None,
) -> list[float]:
    """Mean batch precision per iteration for one (topic, strategy, batch) group.

    With ``recall_target`` set, the vector is cut at the first iteration whose
    mean training-set recall reaches the target (that iteration excluded).
    """
    by_iteration: dict[int, list[float]] = {}
    recall_by_iteration: dict[int, list[float]] = {}
    keys = set()
    for row in rows:
        keys.add((row.dataset, row.topic, row.strategy, row.batch_size))
        by_iteration.setdefault(row.iteration, []).append(row.batch_precision)
        recall_by_iteration.setdefault(row.iteration, []).append(row.recall_reviewed)
    if not by_iteration:
        raise ValueError("no rows to aggregate")
    if len(keys) != 1:
        raise ValueError(f"rows span {len(keys)} groups; pass one (topic, strategy, batch) group")
    iterations = sorted(by_iteration)
    counts = {len(v) for v in by_iteration.values()}
    if iterations != list(range(len(iterations))) or len(counts) != 1:
        raise ValueError("replicates disagree on iteration coverage")
    means = [float(np.mean(by_iteration[i])) for i in iterations]
    if recall_target is not None:
        cut = len(means)
        for i in iterations:
            if float(np.mean(recall_by_iteration[i])) >= recall_target:
                cut = i
                break
        means = means[:cut]
    return means


# ---------------------------------------------------------------------------
# CSV I/O (LF endings, repr-formatted floats, canonical order)
# ---------------------------------------------------------------------------


def _format(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_runs_csv(rows: Iterable[RunRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(RUNS_COLUMNS)
        for row in rows:
            writer.writerow([_format(v) for v in row])


def write_summary_csv(rows: Iterable[SummaryRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_format(v) for v in row])


def write_heatmap_csv(means: Sequence[float], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(("iteration", "mean_precision"))
        for iteration, value in enumerate(means):
            writer.writerow((str(iteration), repr(float(value))))


def read_runs_csv(path: str | Path) -> list[RunRow]:
    rows: list[RunRow] = []
    with open(path, encoding="utf-8", newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = next(reader)
        except StopIteration:
            raise LoadError(f"{path}: empty file") from None
        if tuple(header) != RUNS_COLUMNS:
            raise LoadError(f"{path}: unexpected header {header!r}")
        for line_no, record in enumerate(reader, start=2):
            if len(record) != len(RUNS_COLUMNS):
                raise LoadError(f"{path}: line {line_no}: expected {len(RUNS_COLUMNS)} fields")
            try:
                rows.append(
                    RunRow(
                        dataset=record[0],
                        topic=record[1],
                        strategy=record[2],
                        batch_size=int(record[3]),
                        replicate=int(record[4]),
                        iteration=int(record[5]),
                        reviewed=int(record[6]),
                        batch_pos=int(record[7]),
                        batch_precision=float(record[8]),
                        recall_reviewed=float(record[9]),
                        penalty_depth=int(record[10]),
                        total_cost=float(record[11]),
                    )
                )
            except ValueError as exc:
                raise LoadError(f"{path}: line {line_no}: {exc}") from None
    return rows
