"""Command-line interface: convert corpora, run experiment plans, redo stats.

Exit codes: 0 success, 1 bad flags, 2 unreadable or schema-invalid data,
3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import subprocess
import sys
from pathlib import Path

from .corpus import LoadError, convert_askfm, convert_wikipedia, load_dataset
from .cost import InconsistentStateError, manual_review_baseline
from .experiment import (
    ExperimentPlan,
    read_runs_csv,
    run_plan,
    summarize,
    heatmap_matrix,
    write_heatmap_csv,
    write_runs_csv,
    write_summary_csv,
)
from .strategies import STRATEGIES

_FORMATS = ("canonical-jsonl", "wikipedia-attack", "askfm")


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on usage errors; the contract here is 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def _git_describe() -> str:
    try:
        proc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=10,
        )
    except (OSError, subprocess.TimeoutExpired):
        return "unknown"
    if proc.returncode != 0:
        return "unknown"
    return proc.stdout.strip() or "unknown"


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", name)


def build_parser() -> _Parser:
    parser = _Parser(prog="tarsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    convert = sub.add_parser("convert", help="convert a public corpus to canonical JSONL")
    convert.add_argument("source", choices=("wikipedia", "askfm"))
    convert.add_argument("input", help="input directory (wikipedia) or CSV file/directory (askfm)")
    convert.add_argument("output", help="output JSONL path")
    convert.set_defaults(func=_cmd_convert)

    run = sub.add_parser("run", help="run a replicated experiment plan")
    run.add_argument("--dataset", required=True, help="corpus path")
    run.add_argument("--format", default="canonical-jsonl", choices=_FORMATS)
    run.add_argument("--topics", nargs="+", default=None, help="topic filter (default: all)")
    run.add_argument(
        "--strategy", nargs="+", default=list(STRATEGIES), choices=STRATEGIES,
        help="strategies to run (default: all three)",
    )
    run.add_argument("--batch-size", nargs="+", type=int, default=[100, 200])
    run.add_argument(
        "--iterations", nargs="+", type=int, default=[80, 40],
        help="iteration budget per batch size, zipped with --batch-size",
    )
    run.add_argument("--replicates", type=int, default=20)
    run.add_argument("--recall-target", type=float, default=0.8)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", required=True, help="output directory")
    run.add_argument("--jobs", type=int, default=os.cpu_count() or 1)
    run.add_argument(
        "--checkpoints", nargs="+", type=int, default=None,
        help="restrict summary.csv to these training-set sizes",
    )
    run.add_argument(
        "--heatmap-cutoff", action="store_true",
        help="cut heatmaps where mean training recall reaches the target",
    )
    run.add_argument("--quiet", action="store_true", help="suppress progress counters")
    run.set_defaults(func=_cmd_run)

    stats = sub.add_parser("stats", help="recompute summary.csv from a runs.csv")
    stats.add_argument("runs_csv", help="path to runs.csv")
    stats.add_argument("--out", default=None, help="output directory (default: alongside input)")
    stats.add_argument("--checkpoints", nargs="+", type=int, default=None)
    stats.set_defaults(func=_cmd_stats)

    return parser


def _cmd_convert(args) -> int:
    if args.source == "wikipedia":
        count = convert_wikipedia(args.input, args.output)
    else:
        count = convert_askfm(args.input, args.output)
    print(f"wrote {count} documents to {args.output}")
    return 0


def _write_heatmaps(rows, out_dir: Path, multi_batch: bool, cutoff_target: float | None) -> list[str]:
    groups: dict[tuple[str, str, int], list] = {}
    for row in rows:
        groups.setdefault((row.topic, row.strategy, row.batch_size), []).append(row)
    written = []
    for (topic, strategy, batch_size), group in sorted(groups.items()):
        means = heatmap_matrix(group, recall_target=cutoff_target)
        name = f"heatmap_{_sanitize(topic)}_{strategy}"
        if multi_batch:
            name += f"_b{batch_size}"
        path = out_dir / f"{name}.csv"
        write_heatmap_csv(means, path)
        written.append(path.name)
    return written


def _fail_flags(message: str) -> None:
    print(f"tarsim: error: {message}", file=sys.stderr)
    raise SystemExit(1)


def _cmd_run(args) -> int:
    if len(args.batch_size) != len(args.iterations):
        _fail_flags("--batch-size and --iterations must have the same length")
    if args.replicates < 1:
        _fail_flags("--replicates must be >= 1")
    if args.jobs < 1:
        _fail_flags("--jobs must be >= 1")

    dataset = load_dataset(args.dataset, args.format)
    try:
        plan = ExperimentPlan(
            strategies=tuple(dict.fromkeys(args.strategy)),
            schedules=tuple(zip(args.batch_size, args.iterations)),
            topics=tuple(args.topics) if args.topics else None,
            n_replicates=args.replicates,
            recall_target=args.recall_target,
            base_seed=args.seed,
        )
    except ValueError as exc:
        _fail_flags(str(exc))

    result = run_plan(dataset, plan, jobs=args.jobs, progress=not args.quiet)

    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_runs_csv(result.rows, out_dir / "runs.csv")
    write_summary_csv(summarize(result.rows, args.checkpoints), out_dir / "summary.csv")
    heatmaps = _write_heatmaps(
        result.rows,
        out_dir,
        multi_batch=len(plan.schedules) > 1,
        cutoff_target=plan.recall_target if args.heatmap_cutoff else None,
    )

    run_topics = [t for t in (plan.topics or dataset.topic_names()) if t not in result.skipped_topics]
    metadata = {
        "command": "run",
        "dataset_path": str(args.dataset),
        "dataset_name": dataset.name,
        "format": args.format,
        "n_documents": len(dataset),
        "topics": run_topics,
        "skipped_topics": list(result.skipped_topics),
        "strategies": list(plan.strategies),
        "batch_sizes": [b for b, _ in plan.schedules],
        "iterations": [i for _, i in plan.schedules],
        "replicates": plan.n_replicates,
        "recall_target": plan.recall_target,
        "seed": plan.base_seed,
        "checkpoints": args.checkpoints,
        "heatmap_cutoff": bool(args.heatmap_cutoff),
        "manual_review_baseline": manual_review_baseline(len(dataset), plan.recall_target),
        "feature_weighting": "1+ln(tf)",
        "lowercase": True,
        "heatmap_files": heatmaps,
        "git_describe": _git_describe(),
    }
    with open(out_dir / "metadata.json", "w", encoding="utf-8", newline="\n") as handle:
        json.dump(metadata, handle, indent=2, sort_keys=True)
        handle.write("\n")

    if not args.quiet:
        print(f"wrote {len(result.rows)} rows to {out_dir / 'runs.csv'}", file=sys.stderr)
    return 0


def _cmd_stats(args) -> int:
    rows = read_runs_csv(args.runs_csv)
    out_dir = Path(args.out) if args.out else Path(args.runs_csv).resolve().parent
    out_dir.mkdir(parents=True, exist_ok=True)
    write_summary_csv(summarize(rows, args.checkpoints), out_dir / "summary.csv")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except InconsistentStateError as exc:
        print(f"tarsim: internal error: {exc}", file=sys.stderr)
        return 3
    except LoadError as exc:
        print(f"tarsim: data error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"tarsim: data error: {exc}", file=sys.stderr)
        return 2
    except KeyError as exc:
        print(f"tarsim: data error: {exc.args[0] if exc.args else exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"tarsim: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
