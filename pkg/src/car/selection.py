"""Subset selection: global top-n1 by score, union the top-n2 of every
cluster, deduplicate.

One total order (score descending, id ascending) drives both the global and
the per-cluster rankings, so the result is deterministic and clusters smaller
than n2 simply contribute all their members.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from car.cluster import ClusterAssignment
from car.errors import FormatError, ValidationError

logger = logging.getLogger(__name__)


@dataclass
class SelectionConfig:
    n1: int = 1000
    n2: int = 1

    def __post_init__(self) -> None:
        if self.n1 < 0 or self.n2 < 0:
            raise ValidationError(f"n1 and n2 must be non-negative, got {self}")


@dataclass
class SelectionResult:
    selected_ids: list[int]            # sorted ascending
    from_global: set[int]
    from_cluster: dict[int, list[int]]  # cluster id -> ids picked from it
    overlap_count: int

    def source_of(self, pair_id: int) -> str:
        """'global', 'cluster', or 'both' for a selected id."""
        in_global = pair_id in self.from_global
        in_cluster = any(pair_id in ids for ids in self.from_cluster.values())
        if in_global and in_cluster:
            return "both"
        if in_global:
            return "global"
        if in_cluster:
            return "cluster"
        raise ValidationError(f"pair id {pair_id} was not selected")


@dataclass
class SelectionReport:
    subset_size: int
    corpus_size: int
    percent_of_corpus: float
    cluster_coverage: float   # fraction of clusters contributing >= 1 pair
    mean_selected_score: float
    min_selected_score: float


def rank_by_score(scores: Sequence[tuple[int, float]]) -> list[int]:
    """Ids ordered by score descending, ties broken by ascending id."""
    for pair_id, score in scores:
        if not np.isfinite(score):
            raise ValidationError(f"non-finite score for pair {pair_id}: {score}")
    return [pid for pid, _ in sorted(scores, key=lambda item: (-item[1], item[0]))]


def car_select(
    scores: Sequence[tuple[int, float]],
    assignment: ClusterAssignment,
    config: SelectionConfig,
) -> SelectionResult:
    """Select the global top-n1 union the per-cluster top-n2, deduplicated."""
    score_ids = {pid for pid, _ in scores}
    assigned_ids = set(range(assignment.n))
    if score_ids != assigned_ids:
        missing = sorted(assigned_ids - score_ids)[:5]
        extra = sorted(score_ids - assigned_ids)[:5]
        raise ValidationError(
            f"scores and cluster assignment cover different ids "
            f"(missing from scores: {missing}, unknown to clusters: {extra})"
        )
    if len(scores) != len(score_ids):
        raise ValidationError("duplicate pair ids in scores")
    if config.n1 > len(scores):
        raise ValidationError(
            f"n1={config.n1} exceeds the corpus size {len(scores)}"
        )

    ranked = rank_by_score(scores)
    position = {pid: rank for rank, pid in enumerate(ranked)}
    from_global = set(ranked[: config.n1])

    from_cluster: dict[int, list[int]] = {}
    for cluster_id in assignment.cluster_ids():
        members = sorted(assignment.members(cluster_id), key=position.__getitem__)
        from_cluster[cluster_id] = [int(pid) for pid in members[: config.n2]]

    union = set(from_global)
    for ids in from_cluster.values():
        union.update(ids)
    selected = sorted(union)
    overlap = config.n1 + sum(len(ids) for ids in from_cluster.values()) - len(selected)
    logger.info(
        "selected %d of %d pairs (n1=%d, n2=%d, k=%d, overlap=%d)",
        len(selected), len(scores), config.n1, config.n2, assignment.k, overlap,
    )
    return SelectionResult(
        selected_ids=selected,
        from_global=from_global,
        from_cluster=from_cluster,
        overlap_count=overlap,
    )


def selection_report(
    result: SelectionResult,
    scores: Sequence[tuple[int, float]],
    assignment: ClusterAssignment,
) -> SelectionReport:
    score_map = dict(scores)
    selected_scores = [score_map[pid] for pid in result.selected_ids]
    selected_set = set(result.selected_ids)
    covered = sum(
        1
        for cluster_id in assignment.cluster_ids()
        if any(int(pid) in selected_set for pid in assignment.members(cluster_id))
    )
    k = assignment.k
    return SelectionReport(
        subset_size=len(result.selected_ids),
        corpus_size=len(scores),
        percent_of_corpus=100.0 * len(result.selected_ids) / len(scores) if scores else 0.0,
        cluster_coverage=covered / k if k else 0.0,
        mean_selected_score=float(np.mean(selected_scores)) if selected_scores else float("nan"),
        min_selected_score=float(np.min(selected_scores)) if selected_scores else float("nan"),
    )


def save_selection_csv(
    result: SelectionResult,
    scores: Sequence[tuple[int, float]],
    assignment: ClusterAssignment,
    path: str | Path,
) -> None:
    """Write the per-pair manifest: pair_id, score, cluster_id, source."""
    score_map = dict(scores)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "score", "cluster_id", "source"])
        for pid in result.selected_ids:
            writer.writerow(
                [
                    pid,
                    f"{score_map[pid]:.6f}",
                    int(assignment.labels[pid]),
                    result.source_of(pid),
                ]
            )


def load_selection_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["pair_id", "score", "cluster_id", "source"]:
            raise FormatError(
                f"{path}: expected header pair_id,score,cluster_id,source"
            )
        return [
            {
                "pair_id": int(row["pair_id"]),
                "score": float(row["score"]),
                "cluster_id": int(row["cluster_id"]),
                "source": row["source"],
            }
            for row in reader
        ]
