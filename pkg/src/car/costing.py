"""Linear cost estimator for selection and fine-tuning budgets.

Both estimators are exactly linear in their size argument; the calibration
constants (API token pricing, GPU rental rate, full-corpus training hours)
come from the user.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from car.errors import ValidationError


@dataclass
class CostConfig:
    api_price_per_1k_tokens: float = 0.0
    avg_tokens_per_pair: float = 0.0
    gpu_hour_rate: float = 0.0
    full_train_hours: float = 0.0
    local_selection_hours: float = 0.0

    def __post_init__(self) -> None:
        for name in (
            "api_price_per_1k_tokens",
            "avg_tokens_per_pair",
            "gpu_hour_rate",
            "full_train_hours",
            "local_selection_hours",
        ):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be non-negative")


def selection_cost(n_pairs: int, mode: str, cfg: CostConfig) -> float:
    """Cost of scoring ``n_pairs``: API token pricing, or local GPU hours."""
    if n_pairs < 0:
        raise ValidationError(f"n_pairs must be non-negative, got {n_pairs}")
    if mode == "api":
        return n_pairs * cfg.avg_tokens_per_pair / 1000.0 * cfg.api_price_per_1k_tokens
    if mode == "local":
        return cfg.local_selection_hours * cfg.gpu_hour_rate
    raise ValidationError(f"unknown selection mode: {mode!r}")


def training_cost(subset_fraction: float, cfg: CostConfig) -> float:
    """Cost of fine-tuning on a fraction of the corpus, linear in the
    fraction."""
    if not (0.0 < subset_fraction <= 1.0):
        raise ValidationError(
            f"subset fraction must be in (0, 1], got {subset_fraction}"
        )
    return cfg.full_train_hours * subset_fraction * cfg.gpu_hour_rate


@dataclass
class CostTable:
    selection: float
    training: float

    @property
    def total(self) -> float:
        return round(self.selection, 2) + round(self.training, 2)

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("Selection", round(self.selection, 2)),
            ("Training", round(self.training, 2)),
            ("Total", self.total),
        ]


def cost_table(
    n_pairs: int, mode: str, subset_fraction: float, cfg: CostConfig
) -> CostTable:
    return CostTable(
        selection=selection_cost(n_pairs, mode, cfg),
        training=training_cost(subset_fraction, cfg),
    )


def format_cost_csv(table: CostTable) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer)
    writer.writerow(["item", "cost"])
    for name, value in table.rows():
        writer.writerow([name, f"{value:.2f}"])
    return buffer.getvalue()


def format_cost_text(table: CostTable) -> str:
    lines = [f"{'Item':<12}{'Cost ($)':>12}"]
    for name, value in table.rows():
        lines.append(f"{name:<12}{value:>12.2f}")
    return "\n".join(lines) + "\n"


def save_cost_csv(table: CostTable, path: str | Path) -> None:
    Path(path).write_text(format_cost_csv(table), encoding="utf-8")
