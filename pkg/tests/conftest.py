import json

import pytest

from car.dataset import Dataset, InstructionPair


def make_pair(pid: int, instruction: str, input_: str = "", output: str = "") -> InstructionPair:
    return InstructionPair(id=pid, instruction=instruction, input=input_, output=output)


def make_dataset(rows) -> Dataset:
    """rows: iterable of (instruction, input, output) triples."""
    pairs = [
        InstructionPair(id=i, instruction=r[0], input=r[1], output=r[2])
        for i, r in enumerate(rows)
    ]
    return Dataset(pairs=pairs, source_path="<memory>")


def write_corpus_json(path, rows) -> None:
    records = [
        {"instruction": r[0], "input": r[1], "output": r[2]} for r in rows
    ]
    path.write_text(json.dumps(records, ensure_ascii=False, indent=2), encoding="utf-8")


@pytest.fixture
def tiny_rows():
    return [
        ("Give three tips for staying healthy.", "", "Eat well. Sleep. Move."),
        ("Translate to Spanish.", "hello", "hola"),
        ("Sum 2 and 3.", "", "5"),
        ("Name a primary color.", "", "Blue."),
    ]
