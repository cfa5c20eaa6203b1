#!/usr/bin/env python3
"""Batch-precision heatmap from one or more heatmap CSVs.

Each input CSV holds the per-iteration mean batch precision for one
topic/strategy pair and becomes one row of the figure.  Viridis is used, so
lighter cells mean higher precision.  A JSON sidecar next to the image echoes
the plotted numbers exactly as parsed from the CSVs.
"""

import argparse
import csv
import json
import re
import sys
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

EXPECTED_HEADER = ["iteration", "mean_precision"]
_BATCH_SUFFIX = re.compile(r"_b\d+$")
_NAME = re.compile(r"^heatmap_(?P<topic>.+)_(?P<strategy>[^_]+)$")


def fail(message: str) -> None:
    print(f"heatmap: error: {message}", file=sys.stderr)
    raise SystemExit(2)


def parse_name(path: Path) -> tuple[str | None, str]:
    """(topic, row label) from a heatmap_<topic>_<strategy>[_b<n>].csv name.

    The batch suffix is peeled off first; the last remaining underscore
    segment is the strategy, so topics may themselves contain underscores.
    """
    stem = _BATCH_SUFFIX.sub("", path.stem)
    match = _NAME.match(stem)
    if not match:
        return None, path.stem
    return match.group("topic"), match.group("strategy")


def read_heatmap(path: Path) -> list[float]:
    try:
        with open(path, newline="", encoding="utf-8") as handle:
            reader = csv.reader(handle)
            try:
                header = next(reader)
            except StopIteration:
                fail(f"{path} is empty")
            if header != EXPECTED_HEADER:
                fail(f"{path} has header {header}; expected {EXPECTED_HEADER}")
            values = []
            for line_no, row in enumerate(reader, start=2):
                if len(row) != 2:
                    fail(f"{path} line {line_no}: expected 2 fields, got {len(row)}")
                try:
                    iteration = int(row[0])
                    value = float(row[1])
                except ValueError:
                    fail(f"{path} line {line_no}: could not parse {row!r}")
                if iteration != line_no - 2:
                    fail(f"{path} line {line_no}: iterations must run 0,1,2,... without gaps")
                values.append(value)
    except OSError as exc:
        fail(str(exc))
    if not values:
        fail(f"{path} holds no data rows")
    return values


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--heatmap", nargs="+", required=True, help="heatmap CSV path(s), one per row")
    parser.add_argument("--cutoff", type=int, default=None, help="render only the first N iterations")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--dpi", type=int, default=150)
    args = parser.parse_args(argv)
    if args.cutoff is not None and args.cutoff < 1:
        fail("--cutoff must be >= 1")

    entries = []
    for raw in args.heatmap:
        path = Path(raw)
        values = read_heatmap(path)
        if args.cutoff is not None:
            values = values[: args.cutoff]
        topic, label = parse_name(path)
        entries.append(
            {
                "file": path.name,
                "topic": topic,
                "label": label,
                "iterations": list(range(len(values))),
                "mean_precision": values,
            }
        )

    width = max(len(e["mean_precision"]) for e in entries)
    matrix = np.full((len(entries), width), np.nan)
    for i, entry in enumerate(entries):
        matrix[i, : len(entry["mean_precision"])] = entry["mean_precision"]

    fig, ax = plt.subplots(figsize=(max(6, 0.22 * width), 1.0 + 0.6 * len(entries)))
    image = ax.imshow(
        np.ma.masked_invalid(matrix),
        cmap="viridis",
        vmin=0.0,
        vmax=1.0,
        aspect="auto",
        interpolation="nearest",
    )
    ax.set_yticks(range(len(entries)), [e["label"] for e in entries])
    ax.set_xlabel("iteration")
    topics = sorted({e["topic"] for e in entries if e["topic"]})
    if topics:
        ax.set_title(", ".join(topics))
    fig.colorbar(image, ax=ax, label="mean batch precision")
    fig.tight_layout()

    out_path = Path(args.out)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=args.dpi)
    plt.close(fig)

    sidecar = {
        "figure": "precision_heatmap",
        "cutoff": args.cutoff,
        "rows": entries,
    }
    sidecar_path = out_path.with_suffix(".json")
    with open(sidecar_path, "w", encoding="utf-8") as handle:
        json.dump(sidecar, handle, indent=2)
        handle.write("\n")
    print(f"wrote {out_path} and {sidecar_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
