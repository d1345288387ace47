"""Loading, validating, deduplicating, and writing instruction-pair datasets.

The on-disk convention is a UTF-8 JSON array of objects with keys
``instruction``, ``input``, ``output``; missing ``input``/``output`` keys are
treated as empty text.  Pairs get integer ids in file order.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from car.errors import ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class InstructionPair:
    """One instruction/input/output triple; the unit scored, clustered,
    and selected."""

    id: int
    instruction: str
    input: str
    output: str


@dataclass
class Dataset:
    pairs: list[InstructionPair]
    source_path: str = ""

    def __len__(self) -> int:
        return len(self.pairs)

    def __getitem__(self, i: int) -> InstructionPair:
        return self.pairs[i]

    def __iter__(self):
        return iter(self.pairs)


def concat_text(pair: InstructionPair) -> str:
    """Join instruction, input, and output with single spaces.

    Whitespace runs inside each part collapse to one space and
    empty/whitespace-only parts are skipped, so the result never has leading,
    trailing, or doubled spaces.
    """
    tokens: list[str] = []
    for part in (pair.instruction, pair.input, pair.output):
        tokens.extend(part.split())
    return " ".join(tokens)


def load_dataset(path: str | Path, format: str = "alpaca-json") -> Dataset:
    """Load a dataset file, assigning ids in file order.

    Raises ValidationError on malformed JSON (with a byte offset), a non-array
    top level, non-object entries, or entries whose instruction is empty after
    trimming.
    """
    if format != "alpaca-json":
        raise ValidationError(f"unknown dataset format: {format!r}")
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        byte_offset = len(text[: exc.pos].encode("utf-8"))
        raise ValidationError(
            f"{path}: malformed JSON at byte offset {byte_offset} "
            f"(line {exc.lineno}, column {exc.colno}): {exc.msg}"
        ) from exc
    if not isinstance(raw, list):
        raise ValidationError(f"{path}: top level must be a JSON array")

    pairs: list[InstructionPair] = []
    empty_instruction: list[int] = []
    for i, entry in enumerate(raw):
        if not isinstance(entry, dict):
            raise ValidationError(f"{path}: entry {i} is not a JSON object")
        instruction = _text_field(entry, "instruction", path, i)
        if not instruction.strip():
            empty_instruction.append(i)
            continue
        pairs.append(
            InstructionPair(
                id=len(pairs),
                instruction=instruction,
                input=_text_field(entry, "input", path, i),
                output=_text_field(entry, "output", path, i),
            )
        )
    if empty_instruction:
        raise ValidationError(
            f"{path}: {len(empty_instruction)} entries with empty instruction "
            f"at indices {empty_instruction[:20]}"
            + ("..." if len(empty_instruction) > 20 else "")
        )
    logger.info("loaded %d pairs from %s", len(pairs), path)
    return Dataset(pairs=pairs, source_path=str(path))


def _text_field(entry: dict, key: str, path: Path, index: int) -> str:
    value = entry.get(key, "")
    if value is None:
        return ""
    if not isinstance(value, str):
        raise ValidationError(f"{path}: entry {index} field {key!r} is not text")
    return value


def dedupe_pairs(ids: Iterable[int], dataset: Dataset) -> list[int]:
    """Drop duplicate ids and exact content clones, keeping the lowest id.

    Two pairs are duplicates when their ids match or their concat_text is
    identical.  The result is sorted ascending by id.
    """
    unique = sorted(set(ids))
    n = len(dataset)
    for pid in unique:
        if pid < 0 or pid >= n:
            raise ValidationError(f"unknown pair id {pid} (dataset has {n} pairs)")
    kept: list[int] = []
    seen_text: set[str] = set()
    for pid in unique:
        key = concat_text(dataset[pid])
        if key in seen_text:
            continue
        seen_text.add(key)
        kept.append(pid)
    return kept


def write_dataset(dataset: Dataset, ids: Sequence[int], path: str | Path) -> None:
    """Write the selected pairs as a JSON array, preserving field values."""
    n = len(dataset)
    for pid in ids:
        if pid < 0 or pid >= n:
            raise ValidationError(f"unknown pair id {pid} (dataset has {n} pairs)")
    records = [
        {
            "instruction": dataset[pid].instruction,
            "input": dataset[pid].input,
            "output": dataset[pid].output,
        }
        for pid in ids
    ]
    Path(path).write_text(
        json.dumps(records, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    logger.info("wrote %d pairs to %s", len(records), path)
