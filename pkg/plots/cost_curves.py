#!/usr/bin/env python3
"""Mean total-cost curves per strategy from a runs CSV.

Reads the long-format runs CSV produced by the simulator, draws one line per
strategy with a shaded confidence band, and adds a horizontal manual-review
baseline.  Next to the figure it writes a JSON sidecar holding exactly the
numbers that were plotted, so tests can check figures without image diffing.

The baseline value comes from --baseline, or failing that from the
`manual_review_baseline` field of a metadata.json sitting next to the CSV.
"""

import argparse
import csv
import json
import math
import statistics
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from scipy.stats import t as t_dist  # noqa: E402

REQUIRED_COLUMNS = ("topic", "strategy", "batch_size", "replicate", "iteration", "total_cost")
BASELINE_LABEL = "Manual Review"


def fail(message: str) -> None:
    print(f"cost_curves: error: {message}", file=sys.stderr)
    raise SystemExit(2)


def read_rows(path: Path) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.DictReader(handle)
            header = reader.fieldnames or []
            missing = [c for c in REQUIRED_COLUMNS if c not in header]
            if missing:
                fail(f"{path} is missing columns: {', '.join(missing)}")
            return list(reader)
    except OSError as exc:
        fail(str(exc))


def resolve_baseline(args, runs_path: Path) -> float:
    if args.baseline is not None:
        return args.baseline
    metadata_path = runs_path.parent / "metadata.json"
    if metadata_path.is_file():
        try:
            metadata = json.loads(metadata_path.read_text(encoding="utf-8"))
        except ValueError as exc:
            fail(f"could not parse {metadata_path}: {exc}")
        value = metadata.get("manual_review_baseline")
        if isinstance(value, (int, float)):
            return float(value)
        fail(f"{metadata_path} has no usable manual_review_baseline field")
    fail("no --baseline given and no metadata.json found next to the runs CSV")


def curve_stats(costs_by_iteration: dict[int, list[float]], confidence: float):
    """Per-iteration mean and CI; the band is omitted unless every point has n >= 2."""
    iterations = sorted(costs_by_iteration)
    means = []
    counts = []
    half_widths = []
    for iteration in iterations:
        costs = costs_by_iteration[iteration]
        n = len(costs)
        counts.append(n)
        means.append(sum(costs) / n)
        if n >= 2:
            crit = float(t_dist.ppf(0.5 + confidence / 2.0, n - 1))
            half_widths.append(crit * statistics.stdev(costs) / math.sqrt(n))
        else:
            half_widths.append(None)
    if any(h is None for h in half_widths):
        return iterations, means, counts, None, None
    ci_low = [m - h for m, h in zip(means, half_widths)]
    ci_high = [m + h for m, h in zip(means, half_widths)]
    return iterations, means, counts, ci_low, ci_high


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--runs", required=True, help="runs CSV path")
    parser.add_argument("--topic", required=True, help="topic to plot")
    parser.add_argument("--strategy", nargs="+", default=None, help="strategies to include (default: all)")
    parser.add_argument("--batch-size", type=int, default=None,
                        help="needed when the CSV holds more than one batch size")
    parser.add_argument("--baseline", type=float, default=None, help="manual-review baseline cost")
    parser.add_argument("--confidence", type=float, default=0.99)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)

    runs_path = Path(args.runs)
    rows = [r for r in read_rows(runs_path) if r["topic"] == args.topic]
    if not rows:
        fail(f"no rows for topic {args.topic!r} in {runs_path}")

    batch_sizes = sorted({int(r["batch_size"]) for r in rows})
    if args.batch_size is None:
        if len(batch_sizes) > 1:
            fail(f"CSV holds batch sizes {batch_sizes}; pick one with --batch-size")
        batch_size = batch_sizes[0]
    else:
        if args.batch_size not in batch_sizes:
            fail(f"batch size {args.batch_size} not in CSV (has {batch_sizes})")
        batch_size = args.batch_size
    rows = [r for r in rows if int(r["batch_size"]) == batch_size]

    present = sorted({r["strategy"] for r in rows})
    strategies = args.strategy if args.strategy else present
    unknown = [s for s in strategies if s not in present]
    if unknown:
        fail(f"strategies {unknown} not in CSV (has {present})")

    baseline = resolve_baseline(args, runs_path)

    grouped: dict[str, dict[int, list[float]]] = {s: {} for s in strategies}
    for row in rows:
        strategy = row["strategy"]
        if strategy in grouped:
            grouped[strategy].setdefault(int(row["iteration"]), []).append(float(row["total_cost"]))

    fig, ax = plt.subplots(figsize=(7, 4.5))
    curves = []
    for strategy in strategies:
        iterations, means, counts, ci_low, ci_high = curve_stats(grouped[strategy], args.confidence)
        (line,) = ax.plot(iterations, means, marker="o", markersize=3, label=strategy)
        if ci_low is not None:
            ax.fill_between(iterations, ci_low, ci_high, color=line.get_color(), alpha=0.2, linewidth=0)
        curves.append(
            {
                "strategy": strategy,
                "iterations": iterations,
                "n_replicates": counts,
                "mean_cost": means,
                "ci_low": ci_low,
                "ci_high": ci_high,
            }
        )
    ax.axhline(baseline, color="black", linestyle="--", linewidth=1.2, label=BASELINE_LABEL)
    ax.set_xlabel("iteration")
    ax.set_ylabel("mean total cost")
    ax.set_title(f"{args.topic} (batch {batch_size})")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=args.dpi)
    plt.close(fig)

    sidecar = {
        "figure": "cost_curves",
        "source": str(runs_path),
        "topic": args.topic,
        "batch_size": batch_size,
        "confidence": args.confidence,
        "baseline": {"label": BASELINE_LABEL, "value": baseline},
        "curves": curves,
    }
    sidecar_path = out_path.with_suffix(".json")
    with open(sidecar_path, "w", encoding="utf-8") as handle:
        json.dump(sidecar, handle, indent=2)
        handle.write("\n")
    print(f"wrote {out_path} and {sidecar_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
