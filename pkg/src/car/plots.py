"""Figure rendering for the report paths.

Each report-producing command writes its delimited output and, unless told
not to, a PNG next to it with the same stem.  Rendering uses the Agg backend
so runs are headless and byte-reproducible.
"""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from car.costing import CostTable  # noqa: E402
from car.evaluation import EvalRunResult  # noqa: E402

logger = logging.getLogger(__name__)


def figure_path_for(delimited_output: str | Path) -> Path:
    return Path(delimited_output).with_suffix(".png")


def _save(fig, path: str | Path) -> None:
    fig.savefig(path, dpi=150)
    plt.close(fig)
    logger.info("wrote figure %s", path)


def plot_sweep(rows: Sequence, param_name: str, path: str | Path) -> None:
    """Mean planted quality and cluster coverage against the swept budget."""
    params = [row.param for row in rows]
    quality = [row.mean_quality for row in rows]
    coverage = [row.coverage for row in rows]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(params, quality, marker="o", color="tab:blue", label="mean quality")
    ax.set_xlabel(param_name)
    ax.set_ylabel("mean selected quality", color="tab:blue")
    ax.tick_params(axis="y", labelcolor="tab:blue")

    twin = ax.twinx()
    twin.plot(params, coverage, marker="s", color="tab:orange", label="coverage")
    twin.set_ylabel("cluster coverage", color="tab:orange")
    twin.set_ylim(-0.05, 1.05)
    twin.tick_params(axis="y", labelcolor="tab:orange")

    ax.set_title(f"selection sweep over {param_name}")
    fig.tight_layout()
    _save(fig, path)


def plot_selection(
    all_scores: Sequence[float],
    selected_scores: Sequence[float],
    per_cluster_counts: Sequence[int],
    path: str | Path,
) -> None:
    """Score distribution of the subset against the corpus, and how many
    pairs each cluster contributed."""
    fig, (left, right) = plt.subplots(1, 2, figsize=(9.0, 4.0))
    left.hist(all_scores, bins=40, alpha=0.5, label="corpus", color="tab:gray")
    left.hist(selected_scores, bins=40, alpha=0.7, label="selected", color="tab:blue")
    left.set_xlabel("score")
    left.set_ylabel("pairs")
    left.legend()
    left.set_title("score distribution")

    right.bar(range(len(per_cluster_counts)), per_cluster_counts, color="tab:blue")
    right.set_xlabel("cluster id")
    right.set_ylabel("selected pairs")
    right.set_title("per-cluster contribution")
    fig.tight_layout()
    _save(fig, path)


def plot_eval(result: EvalRunResult, path: str | Path) -> None:
    """Outcome counts plus the three aggregate metrics."""
    report = result.report
    fig, (left, right) = plt.subplots(1, 2, figsize=(8.0, 4.0))
    left.bar(
        ["win", "tie", "lose", "skipped"],
        [report.n_win, report.n_tie, report.n_lose, result.n_skipped],
        color=["tab:green", "tab:gray", "tab:red", "tab:brown"],
    )
    left.set_ylabel("samples")
    left.set_title("match outcomes")

    bars = right.bar(
        ["WS", "WR", "QS"],
        [report.ws, report.wr, report.qs],
        color="tab:blue",
    )
    right.bar_label(bars, fmt="%.3f")
    right.axhline(1.0, color="tab:gray", linestyle="--", linewidth=1)
    right.set_title("aggregate metrics")
    fig.tight_layout()
    _save(fig, path)


def plot_cost(table: CostTable, path: str | Path) -> None:
    names = [name for name, _ in table.rows()]
    values = [value for _, value in table.rows()]
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    bars = ax.bar(names, values, color=["tab:blue", "tab:orange", "tab:gray"])
    ax.bar_label(bars, fmt="$%.2f")
    ax.set_ylabel("cost ($)")
    ax.set_title("estimated cost")
    fig.tight_layout()
    _save(fig, path)


def plot_rescue(rows: Sequence[dict], path: str | Path) -> None:
    """Per-cluster selected counts, quality-only versus cluster-supplemented."""
    clusters = [row["cluster_id"] for row in rows]
    width = 0.4
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.bar(
        [c - width / 2 for c in clusters],
        [row["quality_only_count"] for row in rows],
        width=width,
        label="quality only (n2=0)",
        color="tab:red",
    )
    ax.bar(
        [c + width / 2 for c in clusters],
        [row["car_count"] for row in rows],
        width=width,
        label="with cluster supplement",
        color="tab:blue",
    )
    ax.set_xlabel("cluster id")
    ax.set_ylabel("selected pairs")
    ax.set_xticks(clusters)
    ax.legend()
    ax.set_title("cluster coverage rescue")
    fig.tight_layout()
    _save(fig, path)
