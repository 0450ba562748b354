"""Matplotlib figures rendered next to the CSV outputs."""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from fairts.trainer import read_learning_curve  # noqa: E402

FIGSIZE = (9, 3.6)


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_learning_curve(curve_csv, out_png) -> Path:
    curve = read_learning_curve(curve_csv)
    it = [s.iteration for s in curve]
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=FIGSIZE)
    ax1.plot(it, [s.avg_slowdown for s in curve], color="C0")
    ax1.set_xlabel("iteration")
    ax1.set_ylabel("average task slowdown")
    ax2.plot(it, [s.ds_variance for s in curve], color="C1")
    ax2.set_xlabel("iteration")
    ax2.set_ylabel("dominant share variance")
    return _save(fig, out_png)


def plot_comparison(runs_csv, out_png) -> Path:
    """Bar chart (mean with standard-error bars) from a per-run compare file."""
    data = defaultdict(lambda: ([], []))
    with open(runs_csv, encoding="utf-8", newline="") as fh:
        for row in csv.DictReader(fh):
            data[row["scheduler"]][0].append(float(row["avg_slowdown"]))
            data[row["scheduler"]][1].append(float(row["ds_variance"]))
    names = list(data)
    fig, axes = plt.subplots(1, 2, figsize=FIGSIZE)
    for ax, k, label in zip(axes, (0, 1), ("average task slowdown", "dominant share variance")):
        vals = [np.asarray(data[n][k]) for n in names]
        means = [v.mean() for v in vals]
        errs = [v.std(ddof=1) / np.sqrt(len(v)) if len(v) > 1 else 0.0 for v in vals]
        ax.bar(names, means, yerr=errs, color=[f"C{i}" for i in range(len(names))], capsize=4)
        ax.set_ylabel(label)
    return _save(fig, out_png)


def plot_sweep(summary_csv, out_png) -> Path:
    with open(summary_csv, encoding="utf-8", newline="") as fh:
        rows = list(csv.DictReader(fh))
    axis = rows[0]["axis"] if rows else "value"
    labels = [r["value"] for r in rows]
    fig, axes = plt.subplots(1, 2, figsize=FIGSIZE)
    for ax, key, label in zip(axes, ("avg_slowdown", "ds_variance"),
                              ("average task slowdown", "dominant share variance")):
        ax.bar(labels, [float(r[key]) for r in rows],
               yerr=[float(r[key + "_stderr"]) for r in rows], capsize=4, color="C2")
        ax.set_xlabel("beta" if axis == "beta" else "Taskslots n")
        ax.set_ylabel(label)
    return _save(fig, out_png)
