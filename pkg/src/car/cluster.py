"""Seeded k-means over reduced embeddings.

Initialization is k-means++ driven by the package's xorshift64* stream, so a
(matrix, k, seed) triple always yields the same clustering.  Lloyd iterations
stop when the largest centroid shift drops below ``tol`` or after
``max_iter`` rounds; the within-cluster squared-distance objective is checked
to be non-increasing at every iteration.  A cluster that empties is reseeded
with the point currently farthest from its assigned centroid.

Assignments persist as a ``pair_id,cluster_id`` CSV; centroids as a binary
``CEN1`` file (magic, u32 k, u32 m, k*m little-endian float64).
"""

from __future__ import annotations

import csv
import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from car.errors import FormatError, ValidationError
from car.rng import RNG_NAME, Xorshift64Star

logger = logging.getLogger(__name__)

_MAGIC = b"CEN1"
_HEADER = struct.Struct("<4sII")


@dataclass
class ClusterAssignment:
    labels: np.ndarray     # (n,) cluster id per point
    centroids: np.ndarray  # (k, m)
    inertia: float         # sum of squared distances to assigned centroid
    iterations: int
    seed: int = 0
    rng_name: str = RNG_NAME

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def k(self) -> int:
        return self.centroids.shape[0]

    def cluster_ids(self) -> range:
        return range(self.k)

    def members(self, cluster_id: int) -> np.ndarray:
        return np.nonzero(self.labels == cluster_id)[0]


def default_k(n: int) -> int:
    """Cluster-count rule ceil(sqrt(n/2)), clamped to [1, n]."""
    if n < 2:
        raise ValidationError(f"need at least 2 points to cluster, got {n}")
    return max(1, min(n, math.ceil(math.sqrt(n / 2))))


def _squared_distances(Y: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """(n, k) squared Euclidean distances, clipped at zero."""
    d2 = (
        np.sum(Y * Y, axis=1)[:, None]
        - 2.0 * (Y @ centroids.T)
        + np.sum(centroids * centroids, axis=1)[None, :]
    )
    return np.maximum(d2, 0.0)


def _kmeans_pp_init(Y: np.ndarray, k: int, rng: Xorshift64Star) -> np.ndarray:
    """k-means++ seeding: first center uniform, later centers with
    probability proportional to squared distance from the chosen set."""
    n = Y.shape[0]
    centers = np.empty((k, Y.shape[1]), dtype=np.float64)
    first = rng.randbelow(n)
    centers[0] = Y[first]
    d2 = np.sum((Y - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            idx = rng.randbelow(n)
        else:
            r = rng.random() * total
            idx = int(np.searchsorted(np.cumsum(d2), r, side="right"))
            idx = min(idx, n - 1)
        centers[j] = Y[idx]
        d2 = np.minimum(d2, np.sum((Y - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(
    Y: np.ndarray, k: int, seed: int, max_iter: int, tol: float
) -> ClusterAssignment:
    n, m = Y.shape
    rng = Xorshift64Star(seed)
    centroids = _kmeans_pp_init(Y, k, rng)

    labels = np.zeros(n, dtype=np.int64)
    inertia = math.inf
    previous_inertia = math.inf
    iterations = 0
    for iteration in range(1, max_iter + 1):
        d2 = _squared_distances(Y, centroids)
        labels = np.argmin(d2, axis=1)  # ties resolve to the lower index
        point_d2 = d2[np.arange(n), labels]
        inertia = float(point_d2.sum())
        if inertia > previous_inertia * (1.0 + 1e-9) + 1e-12:
            raise AssertionError(
                f"inertia increased at iteration {iteration}: "
                f"{previous_inertia} -> {inertia}"
            )
        previous_inertia = inertia
        iterations = iteration

        sums = np.zeros_like(centroids)
        np.add.at(sums, labels, Y)
        counts = np.bincount(labels, minlength=k).astype(np.float64)
        empty = np.nonzero(counts == 0)[0]
        new_centroids = np.where(
            counts[:, None] > 0, sums / np.maximum(counts, 1.0)[:, None], centroids
        )
        if empty.size:
            # reseed each empty cluster with the worst-fit remaining point
            claimed: set[int] = set()
            order = np.argsort(-point_d2, kind="stable")
            cursor = 0
            for cluster_id in empty:
                while cursor < n and int(order[cursor]) in claimed:
                    cursor += 1
                if cursor >= n:
                    break
                idx = int(order[cursor])
                claimed.add(idx)
                new_centroids[cluster_id] = Y[idx]
            logger.debug("reseeded %d empty clusters", empty.size)

        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < tol and not empty.size:
            break

    d2 = _squared_distances(Y, centroids)
    labels = np.argmin(d2, axis=1)
    inertia = float(d2[np.arange(n), labels].sum())
    if np.bincount(labels, minlength=k).min() == 0:
        raise ValidationError(
            f"could not populate {k} clusters; the data has fewer than {k} "
            "distinct points"
        )
    return ClusterAssignment(
        labels=labels,
        centroids=centroids,
        inertia=inertia,
        iterations=iterations,
        seed=seed,
    )


def kmeans(
    Y: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
    restarts: int = 1,
) -> ClusterAssignment:
    """Cluster the rows of Y into k groups.

    With ``restarts`` > 1, run seeds ``seed, seed+1, ...`` and keep the
    lowest-inertia result (earliest run wins ties).
    """
    Y = np.asarray(Y, dtype=np.float64)
    if Y.ndim != 2:
        raise ValidationError(f"expected a 2-D matrix, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise ValidationError("clustering input contains NaN or Inf")
    n = Y.shape[0]
    if not (1 <= k <= n):
        raise ValidationError(f"k must be in [1, {n}], got {k}")
    if restarts < 1:
        raise ValidationError(f"restarts must be >= 1, got {restarts}")

    best: ClusterAssignment | None = None
    for run in range(restarts):
        result = _lloyd(Y, k, seed + run, max_iter, tol)
        if best is None or result.inertia < best.inertia:
            best = result
    assert best is not None
    logger.info(
        "k-means: n=%d k=%d seed=%d inertia=%.6g iterations=%d",
        n, k, best.seed, best.inertia, best.iterations,
    )
    return best


def save_assignment_csv(assignment: ClusterAssignment, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "cluster_id"])
        for pair_id, cluster_id in enumerate(assignment.labels):
            writer.writerow([pair_id, int(cluster_id)])


def load_assignment_csv(path: str | Path) -> np.ndarray:
    """Read back a ``pair_id,cluster_id`` CSV as a label array."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["pair_id", "cluster_id"]:
            raise FormatError(f"{path}: expected header pair_id,cluster_id")
        try:
            rows = [(int(pid), int(cid)) for pid, cid in reader]
        except ValueError as exc:
            raise FormatError(f"{path}: malformed assignment row: {exc}") from exc
    rows.sort()
    ids = [pid for pid, _ in rows]
    if ids != list(range(len(rows))):
        raise FormatError(f"{path}: pair ids must be exactly 0..{len(rows) - 1}")
    return np.array([cid for _, cid in rows], dtype=np.int64)


def save_centroids(centroids: np.ndarray, path: str | Path) -> None:
    centroids = np.asarray(centroids, dtype=np.float64)
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, centroids.shape[0], centroids.shape[1]))
        fh.write(np.ascontiguousarray(centroids, dtype="<f8").tobytes())


def load_centroids(path: str | Path) -> np.ndarray:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: too short for a CEN1 header")
    magic, k, m = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    expected = _HEADER.size + 8 * k * m
    if len(blob) != expected:
        raise FormatError(
            f"{path}: header says {k}x{m} ({expected} bytes) but file has "
            f"{len(blob)} bytes"
        )
    return np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(k, m).copy()
