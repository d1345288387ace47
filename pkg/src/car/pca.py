"""Centering plus projection onto the smallest principal subspace that keeps
a target fraction of the variance.

The decomposition uses the SVD of the centered matrix (stable at d=384, no
covariance squaring).  Singular-value signs are arbitrary, so each component
row is flipped to make its largest-magnitude entry non-negative; together
with serial numpy this makes the fit bit-reproducible.

The ``PCA1`` file layout is: magic ``PCA1``, u32 d, u32 m, the mean
(d float64), the components (m*d float64 row-major), and the explained
variance ratio (float64), all little-endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from car.embedding import EmbeddingMatrix
from car.errors import FormatError, ValidationError

_MAGIC = b"PCA1"
_HEADER = struct.Struct("<4sII")

# variance below this fraction of the total is numerical noise, not signal
_RANK_EPS = 1e-12
# slack when comparing cumulative ratios against the target
_TARGET_EPS = 1e-12


@dataclass
class PcaModel:
    mean: np.ndarray          # (d,)
    components: np.ndarray    # (m, d), orthonormal rows
    explained_ratio: float

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    @property
    def m(self) -> int:
        return self.components.shape[0]


def fit_pca(X: EmbeddingMatrix | np.ndarray, variance_target: float = 0.95) -> PcaModel:
    """Fit the minimal principal subspace with explained variance >= target.

    Variance at or below numerical noise (1e-12 of the total) counts as zero,
    so a rank-r matrix yields at most r components and ``variance_target=1.0``
    keeps exactly the effective rank.
    """
    data = X.data if isinstance(X, EmbeddingMatrix) else np.asarray(X, dtype=np.float64)
    n, d = data.shape
    if n < 2:
        raise ValidationError(f"PCA needs at least 2 rows, got {n}")
    if not (0.0 < variance_target <= 1.0):
        raise ValidationError(
            f"variance target must be in (0, 1], got {variance_target}"
        )
    mean = data.mean(axis=0)
    centered = data - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    variances = singular**2
    total_raw = float(variances.sum())
    if total_raw <= 0.0:
        raise ValidationError("degenerate: zero variance (all rows identical)")
    keep = variances > total_raw * _RANK_EPS
    variances = variances[keep]
    vt = vt[keep]
    cumulative = np.cumsum(variances)
    total = cumulative[-1]
    ratios = cumulative / total
    m = int(np.searchsorted(ratios, variance_target - _TARGET_EPS, side="left")) + 1
    m = min(m, len(variances))

    components = vt[:m].copy()
    # sign convention: largest-magnitude entry of each component non-negative
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(
        mean=mean,
        components=components,
        explained_ratio=float(ratios[m - 1]),
    )


def pca_transform(model: PcaModel, X: EmbeddingMatrix | np.ndarray) -> np.ndarray:
    """Project rows of X onto the retained subspace: (X - mean) @ components.T."""
    data = X.data if isinstance(X, EmbeddingMatrix) else np.asarray(X, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != model.d:
        raise ValidationError(
            f"cannot transform shape {data.shape} with a d={model.d} model"
        )
    return (data - model.mean) @ model.components.T


def save_pca(model: PcaModel, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, model.d, model.m))
        fh.write(np.ascontiguousarray(model.mean, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.components, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", model.explained_ratio))


def load_pca(path: str | Path) -> PcaModel:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: too short for a PCA1 header")
    magic, d, m = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    expected = _HEADER.size + 8 * (d + m * d + 1)
    if len(blob) != expected:
        raise FormatError(
            f"{path}: header says d={d}, m={m} ({expected} bytes) but file has "
            f"{len(blob)} bytes"
        )
    offset = _HEADER.size
    mean = np.frombuffer(blob, dtype="<f8", count=d, offset=offset).copy()
    offset += 8 * d
    components = (
        np.frombuffer(blob, dtype="<f8", count=m * d, offset=offset)
        .reshape(m, d)
        .copy()
    )
    offset += 8 * m * d
    (ratio,) = struct.unpack_from("<d", blob, offset)
    return PcaModel(mean=mean, components=components, explained_ratio=ratio)
