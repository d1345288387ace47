"""Dense vector representations of instruction-pair texts.

Three interchangeable backends produce an n-by-d matrix whose row i is the
vector for pair i:

* ``hash``:   deterministic feature hashing of unigrams and adjacent
               bigrams; no model download, identical output on every platform.
* ``file``:   precomputed vectors from an ``EMB1`` binary file, for users
               who bring real sentence-encoder embeddings.
* ``remote``: an HTTP embedding service speaking
               ``POST {"texts": [...]} -> {"embeddings": [[...], ...]}``.

The ``EMB1`` file layout is: magic ``EMB1``, u32 row count, u32 dimension,
then row-major little-endian float64 values.
"""

from __future__ import annotations

import hashlib
import logging
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from car.dataset import Dataset, concat_text
from car.errors import FormatError, RemoteServiceError, ValidationError

logger = logging.getLogger(__name__)

EMBED_API_KEY_VAR = "EMBED_API_KEY"

_MAGIC = b"EMB1"
_HEADER = struct.Struct("<4sII")


@dataclass
class EmbeddingMatrix:
    """n-by-d matrix of finite float64 vectors, row i <-> pair id i."""

    data: np.ndarray

    def __post_init__(self) -> None:
        self.data = np.asarray(self.data, dtype=np.float64)
        if self.data.ndim != 2:
            raise ValidationError(
                f"embedding matrix must be 2-D, got shape {self.data.shape}"
            )
        if not np.all(np.isfinite(self.data)):
            raise ValidationError("embedding matrix contains NaN or Inf")

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def d(self) -> int:
        return self.data.shape[1]


@dataclass
class EmbedderSpec:
    """Which backend to use and its parameters."""

    backend: str = "hash"
    dim: int = 384
    seed: int = 0
    path: str = ""
    endpoint: str = ""
    instruction_only: bool = False
    batch_size: int = 64
    timeout: float = 30.0
    retries: int = 2
    concurrency: int = 4

    def __post_init__(self) -> None:
        if self.backend not in ("hash", "file", "remote"):
            raise ValidationError(f"unknown embedding backend: {self.backend!r}")
        if self.dim < 2:
            raise ValidationError(f"embedding dim must be >= 2, got {self.dim}")


def hash_embed(text: str, dim: int, seed: int = 0) -> np.ndarray:
    """Feature-hash a text into a unit vector of length ``dim``.

    Tokens are the lowercased Unicode-whitespace splits of ``text``; each
    unigram and each adjacent bigram is hashed (keyed on ``seed``) to a bucket
    and a sign, accumulated, and the result is L2-normalized unless zero.
    """
    if dim < 2:
        raise ValidationError(f"embedding dim must be >= 2, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    tokens = [t.lower() for t in text.split()]
    key = (seed & 0xFFFFFFFFFFFFFFFF).to_bytes(8, "little")
    grams = tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
    for gram in grams:
        digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=9, key=key).digest()
        bucket = int.from_bytes(digest[:8], "little") % dim
        vec[bucket] += 1.0 if digest[8] & 1 else -1.0
    norm = float(np.linalg.norm(vec))
    if norm > 0.0:
        vec /= norm
    return vec


def pair_text(pair, instruction_only: bool = False) -> str:
    """The text a pair is embedded as: the full concatenation by default."""
    if instruction_only:
        return " ".join(pair.instruction.split())
    return concat_text(pair)


def embed_corpus(dataset: Dataset, spec: EmbedderSpec) -> EmbeddingMatrix:
    """Embed every pair of ``dataset``; row order matches pair ids."""
    texts = [pair_text(p, spec.instruction_only) for p in dataset]
    logger.info("embedding %d pairs via %s backend (d=%d)", len(texts), spec.backend, spec.dim)
    if spec.backend == "hash":
        data = np.stack(
            [hash_embed(t, spec.dim, spec.seed) for t in texts]
        ) if texts else np.zeros((0, spec.dim))
        return EmbeddingMatrix(data)
    if spec.backend == "file":
        matrix = load_embeddings(spec.path)
        if matrix.n != len(dataset):
            raise ValidationError(
                f"{spec.path}: has {matrix.n} rows but dataset has {len(dataset)} pairs"
            )
        if matrix.d != spec.dim:
            raise ValidationError(
                f"{spec.path}: dimension {matrix.d} does not match requested {spec.dim}"
            )
        return matrix
    return _embed_remote(texts, spec)


def _embed_remote(texts: Sequence[str], spec: EmbedderSpec) -> EmbeddingMatrix:
    """Batch texts to the remote service; output order is input order
    regardless of completion order."""
    import requests

    if not spec.endpoint:
        raise ValidationError("remote embedding backend needs an endpoint")
    headers = {"Content-Type": "application/json"}
    api_key = os.environ.get(EMBED_API_KEY_VAR)
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    batches = [
        texts[i : i + spec.batch_size] for i in range(0, len(texts), spec.batch_size)
    ]

    def fetch(index_batch) -> tuple[int, list[list[float]]]:
        index, batch = index_batch
        last_error: Exception | None = None
        for _attempt in range(spec.retries + 1):
            try:
                resp = requests.post(
                    spec.endpoint,
                    json={"texts": list(batch)},
                    headers=headers,
                    timeout=spec.timeout,
                )
            except requests.RequestException as exc:
                last_error = exc
                continue
            if 400 <= resp.status_code < 500:
                # client errors will not change on retry
                raise RemoteServiceError(
                    f"embedding request rejected ({resp.status_code}): "
                    f"{resp.text[:200]}"
                )
            if resp.status_code >= 500:
                last_error = RemoteServiceError(
                    f"server error {resp.status_code}: {resp.text[:200]}"
                )
                continue
            try:
                vectors = resp.json().get("embeddings")
            except ValueError as exc:
                last_error = exc
                continue
            if not isinstance(vectors, list) or len(vectors) != len(batch):
                last_error = RemoteServiceError(
                    f"batch {index}: expected {len(batch)} embeddings in reply"
                )
                continue
            return index, vectors
        raise RemoteServiceError(
            f"embedding batch {index} failed after {spec.retries + 1} attempts: "
            f"{last_error}"
        )

    results: list[list[list[float]] | None] = [None] * len(batches)
    with ThreadPoolExecutor(max_workers=max(1, spec.concurrency)) as pool:
        for index, vectors in pool.map(fetch, enumerate(batches)):
            results[index] = vectors

    rows: list[list[float]] = []
    for vectors in results:
        rows.extend(vectors or [])
    data = np.asarray(rows, dtype=np.float64)
    if data.size == 0:
        data = data.reshape(0, spec.dim)
    if data.ndim != 2 or data.shape[1] != spec.dim:
        raise ValidationError(
            f"remote service returned dimension {data.shape[-1] if data.ndim == 2 else '?'}, "
            f"expected {spec.dim}"
        )
    return EmbeddingMatrix(data)


def save_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(_MAGIC, matrix.n, matrix.d))
        fh.write(np.ascontiguousarray(matrix.data, dtype="<f8").tobytes())


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    """Read an ``EMB1`` file; round-trips with save_embeddings bit-exactly."""
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: too short for an EMB1 header")
    magic, n, d = _HEADER.unpack_from(blob)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {_MAGIC!r}")
    expected = _HEADER.size + 8 * n * d
    if len(blob) != expected:
        raise FormatError(
            f"{path}: header says {n}x{d} ({expected} bytes) but file has "
            f"{len(blob)} bytes"
        )
    data = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(n, d).copy()
    return EmbeddingMatrix(data)
