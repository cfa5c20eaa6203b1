"""Simulated technology-assisted review over labeled moderation corpora."""

from .classifier import DEFAULT_TRAIN, Model, TrainConfig, predict_proba, rank, train
from .corpus import Dataset, Document, LoadError, Topic, load_dataset, tokenize
from .cost import (
    UNIFORM_COSTS,
    CostStructure,
    InconsistentStateError,
    manual_review_baseline,
    phase2_penalty,
    total_cost,
)
from .experiment import ExperimentPlan, ExperimentResult, derive_seed, run_plan, summarize
from .strategies import STRATEGIES, select_batch
from .workflow import IterationRecord, RunResult, WorkflowConfig, make_seed_set, run_tar

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_TRAIN",
    "Model",
    "TrainConfig",
    "predict_proba",
    "rank",
    "train",
    "Dataset",
    "Document",
    "LoadError",
    "Topic",
    "load_dataset",
    "tokenize",
    "UNIFORM_COSTS",
    "CostStructure",
    "InconsistentStateError",
    "manual_review_baseline",
    "phase2_penalty",
    "total_cost",
    "ExperimentPlan",
    "ExperimentResult",
    "derive_seed",
    "run_plan",
    "summarize",
    "STRATEGIES",
    "select_batch",
    "IterationRecord",
    "RunResult",
    "WorkflowConfig",
    "make_seed_set",
    "run_tar",
    "__version__",
]
