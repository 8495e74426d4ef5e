"""Render figures from nichepop harness CSV files.

This package is deliberately decoupled from the simulation engine: it reads
only the persisted CSV artifacts (their schemas are documented in the main
package README) and writes image files. Inputs are never modified.

Four figure kinds:

- ``si-bars``      condition means of the specialization index with error
                   bars, from ``trials.csv``
- ``lambda-sweep`` specialization vs niche-bonus curves (one per environment
                   in the file) with the zero-bonus region shaded, from
                   ``sweep.csv``
- ``heatmap``      condition x metric summary grid, from ``trials.csv``
- ``trajectories`` per-agent niche-affinity components over time for one
                   trial, from ``iterations.csv``
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import pandas as pd

TRIALS_REQUIRED = (
    "condition",
    "lambda",
    "seed",
    "mean_si",
    "effective_si",
    "coverage",
    "msi_mean",
    "distinct_niches",
)
SWEEP_REQUIRED = ("environment", "lambda", "mean_si", "std_si")
ITERATIONS_REQUIRED = ("condition", "lambda", "seed", "t", "regime", "winner")

HEATMAP_METRICS = ("mean_si", "effective_si", "coverage", "msi_mean")


class SchemaError(ValueError):
    """Input file does not carry the expected columns or rows."""


class PlotKind(str, enum.Enum):
    SI_BARS = "si-bars"
    LAMBDA_SWEEP = "lambda-sweep"
    HEATMAP = "heatmap"
    TRAJECTORIES = "trajectories"


@dataclass(frozen=True)
class PlotSpec:
    kind: PlotKind
    input_path: Path
    output_path: Path
    title: str | None = None
    condition: str | None = None  # trajectories: which condition to trace
    seed: int | None = None  # trajectories: which trial to trace


def _load(path: Path, required: tuple[str, ...]) -> pd.DataFrame:
    if not Path(path).exists():
        raise SchemaError(f"input file not found: {path}")
    frame = pd.read_csv(path)
    missing = [c for c in required if c not in frame.columns]
    if missing:
        raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
    if frame.empty:
        raise SchemaError(f"{path}: no data rows")
    return frame


def _si_bars(spec: PlotSpec) -> plt.Figure:
    frame = _load(spec.input_path, TRIALS_REQUIRED)
    grouped = frame.groupby("condition", sort=False)["mean_si"].agg(["mean", "std", "count"])
    grouped["std"] = grouped["std"].fillna(0.0)
    stderr = grouped["std"] / np.sqrt(grouped["count"])
    fig, ax = plt.subplots(figsize=(max(6, 1.2 * len(grouped)), 4.5))
    ax.bar(
        grouped.index,
        grouped["mean"],
        yerr=stderr,
        capsize=4,
        color="tab:blue",
        edgecolor="black",
        linewidth=0.5,
    )
    ax.set_ylabel("specialization index (mean over agents)")
    ax.set_xlabel("condition")
    ax.set_ylim(0, 1)
    ax.set_title(spec.title or "Specialization by condition")
    ax.tick_params(axis="x", rotation=30)
    fig.tight_layout()
    return fig


def _lambda_sweep(spec: PlotSpec) -> plt.Figure:
    frame = _load(spec.input_path, SWEEP_REQUIRED)
    fig, ax = plt.subplots(figsize=(6.5, 4.5))
    for env, group in frame.groupby("environment", sort=False):
        group = group.sort_values("lambda")
        ax.plot(group["lambda"], group["mean_si"], marker="o", label=str(env))
        ax.fill_between(
            group["lambda"],
            group["mean_si"] - group["std_si"],
            group["mean_si"] + group["std_si"],
            alpha=0.15,
        )
    # highlight the zero-bonus region: specialization that survives here
    # comes from competition alone
    span = max(frame["lambda"].max(), 0.1) * 0.04
    ax.axvspan(-span, span, color="tab:green", alpha=0.25, zorder=0)
    ax.annotate(
        "no bonus:\ncompetition only",
        xy=(0.0, ax.get_ylim()[1] * 0.05),
        xytext=(6, 6),
        textcoords="offset points",
        fontsize=8,
        color="darkgreen",
    )
    ax.set_xlabel("niche bonus")
    ax.set_ylabel("specialization index")
    ax.set_ylim(0, 1)
    ax.set_title(spec.title or "Niche-bonus ablation")
    ax.legend()
    fig.tight_layout()
    return fig


def _heatmap(spec: PlotSpec) -> plt.Figure:
    frame = _load(spec.input_path, TRIALS_REQUIRED)
    grouped = frame.groupby("condition", sort=False)[list(HEATMAP_METRICS)].mean()
    data = grouped.to_numpy()
    fig, ax = plt.subplots(figsize=(7, max(3, 0.5 * len(grouped) + 1.5)))
    image = ax.imshow(data, cmap="Greens", vmin=0, aspect="auto")
    ax.set_xticks(range(len(HEATMAP_METRICS)), HEATMAP_METRICS)
    ax.set_yticks(range(len(grouped)), grouped.index)
    for i in range(data.shape[0]):
        for j in range(data.shape[1]):
            ax.text(
                j, i, f"{data[i, j]:.2f}", ha="center", va="center",
                color="black", fontsize=8,
            )
    fig.colorbar(image, ax=ax, shrink=0.85)
    ax.set_title(spec.title or "Metric summary by condition")
    fig.tight_layout()
    return fig


def _trajectories(spec: PlotSpec) -> plt.Figure:
    frame = _load(spec.input_path, ITERATIONS_REQUIRED)
    alpha_cols = [c for c in frame.columns if re.fullmatch(r"alpha_\d+_\d+", c)]
    if not alpha_cols:
        raise SchemaError(f"{spec.input_path}: missing column(s) alpha_<agent>_<regime>")

    condition = spec.condition or frame["condition"].iloc[0]
    trial = frame[frame["condition"] == condition]
    if trial.empty:
        raise SchemaError(f"{spec.input_path}: no rows for condition {condition!r}")
    seed = spec.seed if spec.seed is not None else int(trial["seed"].iloc[0])
    trial = trial[trial["seed"] == seed]
    if trial.empty:
        raise SchemaError(f"{spec.input_path}: no rows for seed {seed}")

    agents = sorted({int(c.split("_")[1]) for c in alpha_cols})
    regimes = sorted({int(c.split("_")[2]) for c in alpha_cols})
    ncols = min(4, len(agents))
    nrows = int(np.ceil(len(agents) / ncols))
    fig, axes = plt.subplots(
        nrows, ncols, figsize=(3.2 * ncols, 2.6 * nrows),
        sharex=True, sharey=True, squeeze=False,
    )
    for idx, agent in enumerate(agents):
        ax = axes[idx // ncols][idx % ncols]
        for r in regimes:
            ax.plot(trial["t"], trial[f"alpha_{agent}_{r}"], label=f"regime {r}", linewidth=1)
        ax.set_title(f"agent {agent}", fontsize=9)
        ax.set_ylim(0, 1)
    for idx in range(len(agents), nrows * ncols):
        axes[idx // ncols][idx % ncols].axis("off")
    axes[0][0].legend(fontsize=7)
    fig.supxlabel("iteration")
    fig.supylabel("niche affinity")
    fig.suptitle(spec.title or f"Affinity trajectories ({condition}, seed {seed})")
    fig.tight_layout()
    return fig


_BUILDERS = {
    PlotKind.SI_BARS: _si_bars,
    PlotKind.LAMBDA_SWEEP: _lambda_sweep,
    PlotKind.HEATMAP: _heatmap,
    PlotKind.TRAJECTORIES: _trajectories,
}


def build_figure(spec: PlotSpec) -> plt.Figure:
    """Build the figure for a spec without writing anything."""
    return _BUILDERS[PlotKind(spec.kind)](spec)


def render(spec: PlotSpec) -> Path:
    """Render a figure to ``spec.output_path``.

    Validation errors are raised before any file is written, so a failed
    render leaves no artifact behind.
    """
    fig = build_figure(spec)
    out = Path(spec.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        fig.savefig(out, dpi=150)
    finally:
        plt.close(fig)
    return out
