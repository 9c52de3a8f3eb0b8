#!/usr/bin/env python3
"""Render plots from run directories produced by the espark CLI.

Inputs are the CSV/JSON artifacts documented in docs/formats.md; this
script never recomputes results, it only draws them.
"""

import argparse
import csv
import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def plot_scores(run_dir: Path, out_dir: Path) -> None:
    scores = run_dir / "scores.csv"
    if not scores.exists():
        return
    xs, ys = [], []
    with scores.open() as f:
        for row in csv.DictReader(f):
            xs.append(int(row["checkpoint"]))
            ys.append(float(row["score"]))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, marker="o", markersize=3)
    ax.set_xlabel("checkpoint")
    ax.set_ylabel("held-out episode profit")
    ax.set_title(run_dir.name)
    fig.tight_layout()
    fig.savefig(out_dir / f"{run_dir.name}_scores.png", dpi=150)
    plt.close(fig)


def plot_report(run_dir: Path, out_dir: Path) -> None:
    report_path = run_dir / "report.json"
    if not report_path.exists():
        return
    report = json.loads(report_path.read_text())
    iterations = [it["iteration"] for it in report["iterations"]]
    best = [it["best_score"] for it in report["iterations"]]
    recorded = report["recorded_best_series"]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(iterations, best, marker="o", label="iteration best")
    ax.step(iterations, recorded, where="post", label="recorded best")
    ax.set_xlabel("iteration")
    ax.set_ylabel("checkpoint score")
    ax.set_title(f"{report['scenario']} (seed {report['seed']})")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / f"{run_dir.name}_evolution.png", dpi=150)
    plt.close(fig)


def plot_baselines(run_dir: Path, out_dir: Path) -> None:
    table = run_dir / "comparison.csv"
    if not table.exists():
        return
    methods, profits = [], []
    with table.open() as f:
        for row in csv.DictReader(f):
            methods.append(row["method"])
            profits.append(float(row["profit"]))
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.barh(methods, profits)
    ax.set_xlabel("held-out episode profit")
    ax.set_title(run_dir.name)
    fig.tight_layout()
    fig.savefig(out_dir / f"{run_dir.name}_comparison.png", dpi=150)
    plt.close(fig)

    heatmap = run_dir / "action_heatmap.csv"
    if not heatmap.exists():
        return
    rows = []
    with heatmap.open() as f:
        reader = csv.reader(f)
        header = next(reader)
        for row in reader:
            rows.append(row)
    if not rows:
        return
    labels = [f"{r[0]} e{r[1]}" for r in rows]
    counts = [[int(v) for v in r[2:]] for r in rows]
    totals = [max(1, sum(r)) for r in counts]
    freq = [[v / t for v in r] for r, t in zip(counts, totals)]
    fig, ax = plt.subplots(figsize=(7, 0.5 * len(rows) + 2))
    im = ax.imshow(freq, aspect="auto", cmap="viridis")
    ax.set_yticks(range(len(labels)), labels)
    ax.set_xticks(range(len(header) - 2), [h.removeprefix("action_") for h in header[2:]])
    ax.set_xlabel("action index")
    fig.colorbar(im, label="selection frequency")
    fig.tight_layout()
    fig.savefig(out_dir / f"{run_dir.name}_heatmap.png", dpi=150)
    plt.close(fig)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("runs", nargs="+", type=Path, help="run directories")
    parser.add_argument("--out", type=Path, default=Path("plots"))
    args = parser.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    for run_dir in args.runs:
        plot_scores(run_dir, args.out)
        plot_report(run_dir, args.out)
        plot_baselines(run_dir, args.out)
    print(f"plots written to {args.out}")


if __name__ == "__main__":
    main()
