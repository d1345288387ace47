"""Pairwise-preference quality scorer.

Training data is built from an original corpus and an expert-revised copy of
it: aligned pairs whose concatenated texts differ by more than an edit-
distance threshold become (chosen=revised, rejected=original) examples.  A
linear model over the embedding backend is then fit with the pairwise
logistic loss

    L(w) = sum_i -ln sigmoid(s(chosen_i) - s(rejected_i)) + lambda * ||w||^2,

by full-batch gradient descent from zero weights, which keeps training exactly
reproducible.  A pair's quality score is s(x) = w.x + b.

The model file (``IQS1``) is: magic, u32 d, w (d float64), b (float64),
u32 metadata length, UTF-8 JSON metadata.  Scores persist as a
``pair_id,score`` CSV with six decimal places.
"""

from __future__ import annotations

import csv
import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from car.dataset import Dataset, InstructionPair, concat_text
from car.embedding import EmbeddingMatrix
from car.errors import FormatError, ValidationError

logger = logging.getLogger(__name__)

_MAGIC = b"IQS1"

EmbedFn = Callable[[str], np.ndarray]


@dataclass(frozen=True)
class PreferenceExample:
    """An expert-revised pair (chosen) against its original form (rejected)."""

    chosen: InstructionPair
    rejected: InstructionPair
    edit_distance: int

    def __post_init__(self) -> None:
        if concat_text(self.chosen) == concat_text(self.rejected):
            raise ValidationError(
                "chosen and rejected texts are identical; not a preference"
            )
        if self.edit_distance <= 0:
            raise ValidationError(
                f"edit distance must be positive, got {self.edit_distance}"
            )


@dataclass
class TrainConfig:
    epochs: int = 200
    eta: float = 0.1
    lam: float = 1e-4
    seed: int = 0


@dataclass
class ScorerModel:
    w: np.ndarray
    b: float
    train_meta: dict = field(default_factory=dict)
    loss_history: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self.w = np.asarray(self.w, dtype=np.float64)
        if not (np.all(np.isfinite(self.w)) and np.isfinite(self.b)):
            raise ValidationError("scorer parameters must be finite")

    @property
    def d(self) -> int:
        return self.w.shape[0]


def levenshtein(a: str, b: str) -> int:
    """Unit-cost insert/delete/substitute distance over Unicode scalars."""
    if a == b:
        return 0
    # strip the common prefix and suffix; revisions usually touch a small span
    lo = 0
    hi_a, hi_b = len(a), len(b)
    while lo < hi_a and lo < hi_b and a[lo] == b[lo]:
        lo += 1
    while hi_a > lo and hi_b > lo and a[hi_a - 1] == b[hi_b - 1]:
        hi_a -= 1
        hi_b -= 1
    a, b = a[lo:hi_a], b[lo:hi_b]
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(b) < len(a):
        a, b = b, a
    previous = list(range(len(a) + 1))
    for j, cb in enumerate(b, start=1):
        current = [j] + [0] * len(a)
        for i, ca in enumerate(a, start=1):
            current[i] = min(
                previous[i] + 1,       # delete
                current[i - 1] + 1,    # insert
                previous[i - 1] + (ca != cb),  # substitute
            )
        previous = current
    return previous[-1]


def curate_preferences(
    originals: Dataset, revised: Dataset, min_edit: int
) -> list[PreferenceExample]:
    """Keep index i as an example iff the concatenated texts differ by an edit
    distance strictly greater than ``min_edit`` (identical texts never
    qualify)."""
    if len(originals) != len(revised):
        raise ValidationError(
            f"datasets are not aligned: {len(originals)} vs {len(revised)} pairs"
        )
    examples: list[PreferenceExample] = []
    for orig, rev in zip(originals, revised):
        distance = levenshtein(concat_text(orig), concat_text(rev))
        if distance > min_edit and distance > 0:
            examples.append(
                PreferenceExample(chosen=rev, rejected=orig, edit_distance=distance)
            )
    logger.info(
        "curated %d preference examples from %d aligned pairs (min_edit=%d)",
        len(examples), len(originals), min_edit,
    )
    return examples


def split_811(
    examples: Sequence[PreferenceExample], seed: int = 0
) -> dict[str, list[PreferenceExample]]:
    """Seeded shuffle, then an 8:1:1 train/val/test split
    (floor(0.8n) / floor(0.1n) / remainder)."""
    n = len(examples)
    if n < 10:
        raise ValidationError(f"need at least 10 examples to split 8:1:1, got {n}")
    order = np.random.default_rng(seed).permutation(n)
    shuffled = [examples[i] for i in order]
    n_train = int(0.8 * n)
    n_val = int(0.1 * n)
    return {
        "train": shuffled[:n_train],
        "val": shuffled[n_train : n_train + n_val],
        "test": shuffled[n_train + n_val :],
    }


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def pairwise_loss(
    w: np.ndarray, x_chosen: np.ndarray, x_rejected: np.ndarray, lam: float
) -> float:
    """Summed pairwise logistic loss plus the ridge penalty."""
    delta = (x_chosen - x_rejected) @ w
    return float(np.logaddexp(0.0, -delta).sum() + lam * float(w @ w))


def pairwise_grad(
    w: np.ndarray, x_chosen: np.ndarray, x_rejected: np.ndarray, lam: float
) -> np.ndarray:
    """Gradient of pairwise_loss with respect to w."""
    diff = x_chosen - x_rejected
    delta = diff @ w
    return -(_sigmoid(-delta) @ diff) + 2.0 * lam * w


def example_features(
    examples: Sequence[PreferenceExample], embed_fn: EmbedFn
) -> tuple[np.ndarray, np.ndarray]:
    """Embed the chosen and rejected concatenated texts of every example."""
    x_chosen = np.stack([embed_fn(concat_text(ex.chosen)) for ex in examples])
    x_rejected = np.stack([embed_fn(concat_text(ex.rejected)) for ex in examples])
    return x_chosen, x_rejected


def train_scorer(
    examples: Sequence[PreferenceExample],
    embed_fn: EmbedFn,
    config: TrainConfig | None = None,
) -> ScorerModel:
    """Fit the linear preference scorer by full-batch gradient descent."""
    if not examples:
        raise ValidationError("cannot train on an empty example list")
    config = config or TrainConfig()
    x_chosen, x_rejected = example_features(examples, embed_fn)
    if not (np.all(np.isfinite(x_chosen)) and np.all(np.isfinite(x_rejected))):
        raise ValidationError("non-finite features in the training set")

    w = np.zeros(x_chosen.shape[1], dtype=np.float64)
    history: list[float] = []
    for epoch in range(config.epochs):
        loss = pairwise_loss(w, x_chosen, x_rejected, config.lam)
        if not np.isfinite(loss):
            raise ValidationError(
                f"training diverged: non-finite loss at epoch {epoch} "
                f"(eta={config.eta}, lambda={config.lam}, ||w||={np.linalg.norm(w):.3g})"
            )
        history.append(loss)
        w -= config.eta * pairwise_grad(w, x_chosen, x_rejected, config.lam)
        logger.debug("epoch %d: loss %.6f", epoch, loss)
    logger.info(
        "trained scorer on %d examples: loss %.6f -> %.6f",
        len(examples), history[0], history[-1],
    )
    return ScorerModel(
        w=w,
        b=0.0,
        train_meta={
            "seed": config.seed,
            "epochs": config.epochs,
            "eta": config.eta,
            "lambda": config.lam,
        },
        loss_history=history,
    )


def score_pairs(
    model: ScorerModel, matrix: EmbeddingMatrix
) -> list[tuple[int, float]]:
    """Score every row: (pair_id, w.x + b)."""
    if matrix.d != model.d:
        raise ValidationError(
            f"model dimension {model.d} does not match embeddings {matrix.d}"
        )
    scores = matrix.data @ model.w + model.b
    return [(i, float(s)) for i, s in enumerate(scores)]


def eval_pref_accuracy(
    model: ScorerModel,
    examples: Sequence[PreferenceExample],
    embed_fn: EmbedFn,
) -> float:
    """Fraction of examples with s(chosen) > s(rejected); ties count as
    incorrect."""
    if not examples:
        raise ValidationError("cannot evaluate on an empty example list")
    x_chosen, x_rejected = example_features(examples, embed_fn)
    s_chosen = x_chosen @ model.w + model.b
    s_rejected = x_rejected @ model.w + model.b
    return float(np.mean(s_chosen > s_rejected))


def save_scorer(model: ScorerModel, path: str | Path) -> None:
    meta = json.dumps(model.train_meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", model.d))
        fh.write(np.ascontiguousarray(model.w, dtype="<f8").tobytes())
        fh.write(struct.pack("<d", model.b))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)


def load_scorer(path: str | Path) -> ScorerModel:
    blob = Path(path).read_bytes()
    if len(blob) < 8 or blob[:4] != _MAGIC:
        raise FormatError(f"{path}: not an IQS1 scorer file")
    (d,) = struct.unpack_from("<I", blob, 4)
    offset = 8
    if len(blob) < offset + 8 * d + 8 + 4:
        raise FormatError(f"{path}: truncated scorer file")
    w = np.frombuffer(blob, dtype="<f8", count=d, offset=offset).copy()
    offset += 8 * d
    (b,) = struct.unpack_from("<d", blob, offset)
    offset += 8
    (meta_len,) = struct.unpack_from("<I", blob, offset)
    offset += 4
    if len(blob) != offset + meta_len:
        raise FormatError(f"{path}: metadata block truncated")
    try:
        meta = json.loads(blob[offset:].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: bad metadata block: {exc}") from exc
    return ScorerModel(w=w, b=b, train_meta=meta)


def save_scores_csv(scores: Sequence[tuple[int, float]], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["pair_id", "score"])
        for pair_id, score in scores:
            writer.writerow([pair_id, f"{score:.6f}"])


def load_scores_csv(path: str | Path) -> list[tuple[int, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["pair_id", "score"]:
            raise FormatError(f"{path}: expected header pair_id,score")
        try:
            return [(int(pid), float(s)) for pid, s in reader]
        except ValueError as exc:
            raise FormatError(f"{path}: malformed score row: {exc}") from exc


def save_preferences_json(
    examples: Sequence[PreferenceExample], path: str | Path
) -> None:
    records = [
        {
            "chosen": _pair_fields(ex.chosen),
            "rejected": _pair_fields(ex.rejected),
        }
        for ex in examples
    ]
    Path(path).write_text(
        json.dumps(records, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )


def load_preferences_json(path: str | Path) -> list[PreferenceExample]:
    try:
        records = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON: {exc}") from exc
    if not isinstance(records, list):
        raise ValidationError(f"{path}: top level must be a JSON array")
    examples = []
    for i, record in enumerate(records):
        try:
            chosen = _pair_from_fields(record["chosen"], i)
            rejected = _pair_from_fields(record["rejected"], i)
        except (KeyError, TypeError) as exc:
            raise ValidationError(
                f"{path}: entry {i} missing chosen/rejected objects"
            ) from exc
        examples.append(
            PreferenceExample(
                chosen=chosen,
                rejected=rejected,
                edit_distance=levenshtein(concat_text(chosen), concat_text(rejected)),
            )
        )
    return examples


def _pair_fields(pair: InstructionPair) -> dict:
    return {
        "instruction": pair.instruction,
        "input": pair.input,
        "output": pair.output,
    }


def _pair_from_fields(fields_: dict, index: int) -> InstructionPair:
    return InstructionPair(
        id=index,
        instruction=fields_["instruction"],
        input=fields_.get("input", ""),
        output=fields_.get("output", ""),
    )
