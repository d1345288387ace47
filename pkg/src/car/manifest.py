"""Run manifests: every pipeline artifact gets a sidecar JSON recording the
stage that produced it, the parameters and seed, content hashes of its
inputs, and the content hash of the original corpus.

The corpus hash propagates stage to stage, so mixing artifacts derived from
different corpora (say, scores from one dataset with clusters from another)
is caught before selection instead of producing silent garbage.  Manifests
carry no timestamps; a rerun with the same config is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from car import __version__
from car.errors import ManifestError


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def config_hash(params: dict) -> str:
    canonical = json.dumps(params, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def manifest_path(artifact: str | Path) -> Path:
    return Path(str(artifact) + ".manifest.json")


def write_manifest(
    artifact: str | Path,
    stage: str,
    params: dict,
    inputs: dict[str, str | Path],
    corpus_sha256: str = "",
    seed: int | None = None,
) -> dict:
    """Write ``<artifact>.manifest.json`` and return its contents."""
    record = {
        "artifact": Path(artifact).name,
        "artifact_sha256": sha256_file(artifact),
        "stage": stage,
        "version": __version__,
        "seed": seed,
        "params": params,
        "config_sha256": config_hash(params),
        "corpus_sha256": corpus_sha256,
        "inputs": {
            name: {"path": str(path), "sha256": sha256_file(path)}
            for name, path in inputs.items()
        },
    }
    manifest_path(artifact).write_text(
        json.dumps(record, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return record


def read_manifest(artifact: str | Path) -> dict:
    path = manifest_path(artifact)
    if not path.exists():
        raise ManifestError(f"no manifest next to {artifact} (expected {path})")
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: malformed manifest: {exc}") from exc
    if not isinstance(record, dict) or "corpus_sha256" not in record:
        raise ManifestError(f"{path}: not a run manifest")
    return record


def corpus_hash_of(artifact: str | Path) -> str:
    return read_manifest(artifact)["corpus_sha256"]


def check_same_corpus(expected: str, artifacts: dict[str, str | Path]) -> None:
    """Reject chained artifacts whose manifests disagree about the corpus."""
    for name, artifact in artifacts.items():
        found = corpus_hash_of(artifact)
        if found != expected:
            raise ManifestError(
                f"{name} ({artifact}) was derived from corpus {found[:12]}..., "
                f"expected {expected[:12]}...; refusing to mix pipelines"
            )
