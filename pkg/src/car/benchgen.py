"""Synthetic worlds with planted clusters and planted quality.

A world is k isotropic unit-variance Gaussian blobs whose centers sit on
random orthogonal directions at a configured separation, plus a per-point
quality drawn from a per-cluster-shifted normal.  Because both the cluster
structure and the quality are known, selection behavior can be checked
against ground truth and swept over n1/n2 grids.

Sweep outputs are CSV rows ``param,mean_quality,coverage,subset_size``.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from car.cluster import ClusterAssignment
from car.errors import ValidationError
from car.rng import RNG_NAME
from car.selection import SelectionConfig, car_select, selection_report

logger = logging.getLogger(__name__)


@dataclass
class SyntheticWorld:
    embeddings: np.ndarray    # (n, dim)
    true_labels: np.ndarray   # (n,)
    true_quality: np.ndarray  # (n,)
    seed: int

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def k(self) -> int:
        return int(self.true_labels.max()) + 1 if self.n else 0


@dataclass
class SweepRow:
    param: int
    mean_quality: float
    coverage: float
    subset_size: int


def gen_blobs(
    k: int,
    per_cluster_n: int,
    dim: int,
    sep: float,
    seed: int,
    quality_shift_scale: float = 1.0,
    quality_noise: float = 1.0,
    quality_shifts: Sequence[float] | None = None,
) -> SyntheticWorld:
    """Generate k blobs of ``per_cluster_n`` points each.

    Centers are random orthogonal directions scaled so every pair of centers
    is at least ``sep`` apart (blob std is 1).  Quality for a point in
    cluster c is shift_c + noise; shifts come from ``quality_shifts`` when
    given, otherwise they are drawn normal(0, quality_shift_scale).
    """
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if per_cluster_n < 1:
        raise ValidationError(f"per_cluster_n must be >= 1, got {per_cluster_n}")
    if dim < k:
        raise ValidationError(
            f"dim must be >= k to place orthogonal centers, got dim={dim}, k={k}"
        )
    if quality_shifts is not None and len(quality_shifts) != k:
        raise ValidationError(
            f"quality_shifts must have one entry per cluster ({k}), "
            f"got {len(quality_shifts)}"
        )
    rng = np.random.default_rng(seed)
    basis, _ = np.linalg.qr(rng.normal(size=(dim, k)))
    centers = (sep / np.sqrt(2.0)) * basis.T  # pairwise distance exactly sep

    if quality_shifts is None:
        shifts = rng.normal(0.0, quality_shift_scale, size=k)
    else:
        shifts = np.asarray(quality_shifts, dtype=np.float64)

    n = k * per_cluster_n
    embeddings = np.empty((n, dim))
    labels = np.repeat(np.arange(k), per_cluster_n)
    quality = np.empty(n)
    for c in range(k):
        rows = slice(c * per_cluster_n, (c + 1) * per_cluster_n)
        embeddings[rows] = centers[c] + rng.normal(size=(per_cluster_n, dim))
        quality[rows] = shifts[c] + rng.normal(0.0, quality_noise, size=per_cluster_n)
    return SyntheticWorld(
        embeddings=embeddings, true_labels=labels, true_quality=quality, seed=seed
    )


def world_assignment(world: SyntheticWorld) -> ClusterAssignment:
    """ClusterAssignment built from the planted labels (not from k-means)."""
    k = world.k
    centroids = np.stack(
        [world.embeddings[world.true_labels == c].mean(axis=0) for c in range(k)]
    )
    inertia = float(
        ((world.embeddings - centroids[world.true_labels]) ** 2).sum()
    )
    return ClusterAssignment(
        labels=world.true_labels.copy(),
        centroids=centroids,
        inertia=inertia,
        iterations=0,
        seed=world.seed,
        rng_name=RNG_NAME,
    )


def world_scores(world: SyntheticWorld) -> list[tuple[int, float]]:
    return [(i, float(q)) for i, q in enumerate(world.true_quality)]


def _select_row(
    world: SyntheticWorld,
    assignment: ClusterAssignment,
    param: int,
    n1: int,
    n2: int,
) -> SweepRow:
    result = car_select(
        world_scores(world), assignment, SelectionConfig(n1=n1, n2=n2)
    )
    report = selection_report(result, world_scores(world), assignment)
    return SweepRow(
        param=param,
        mean_quality=report.mean_selected_score,
        coverage=report.cluster_coverage,
        subset_size=report.subset_size,
    )


def sweep_n1(
    world: SyntheticWorld, n1_grid: Sequence[int], n2: int = 0
) -> list[SweepRow]:
    """Selection quality as the global budget n1 grows (n2 fixed)."""
    assignment = world_assignment(world)
    return [_select_row(world, assignment, n1, n1, n2) for n1 in n1_grid]


def sweep_n2(
    world: SyntheticWorld, n1: int, n2_grid: Sequence[int]
) -> list[SweepRow]:
    """Selection quality as the per-cluster budget n2 grows (n1 fixed)."""
    assignment = world_assignment(world)
    return [_select_row(world, assignment, n2, n1, n2) for n2 in n2_grid]


def rescue_comparison(
    world: SyntheticWorld, n1: int, n2: int = 1
) -> list[dict]:
    """Per-cluster selected counts: pure top-n1 versus top-n1 with cluster
    supplements.  Shows how a low-quality cluster vanishes under
    quality-only selection but stays covered with n2 >= 1."""
    assignment = world_assignment(world)
    scores = world_scores(world)
    quality_only = car_select(scores, assignment, SelectionConfig(n1=n1, n2=0))
    with_clusters = car_select(scores, assignment, SelectionConfig(n1=n1, n2=n2))
    rows = []
    for c in range(world.k):
        members = set(int(i) for i in np.nonzero(world.true_labels == c)[0])
        rows.append(
            {
                "cluster_id": c,
                "quality_only_count": len(members & set(quality_only.selected_ids)),
                "car_count": len(members & set(with_clusters.selected_ids)),
            }
        )
    return rows


def save_sweep_csv(rows: Sequence[SweepRow], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["param", "mean_quality", "coverage", "subset_size"])
        for row in rows:
            writer.writerow(
                [
                    row.param,
                    f"{row.mean_quality:.6f}",
                    f"{row.coverage:.6f}",
                    row.subset_size,
                ]
            )


def save_rescue_csv(rows: Sequence[dict], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["cluster_id", "quality_only_count", "car_count"])
        for row in rows:
            writer.writerow(
                [row["cluster_id"], row["quality_only_count"], row["car_count"]]
            )
