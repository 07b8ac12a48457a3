"""GPU-hour normalization and training-compute comparison arithmetic."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

CAVEAT = (
    "Normalization uses peak TFLOPS only; memory bandwidth, MFU, and "
    "communication overhead are excluded."
)


class ComputeError(ValueError):
    pass


@dataclass(frozen=True)
class TrainingBudget:
    label: str
    gpu_hours: float
    peak_tflops: float
    precision: str = "bf16"

    def __post_init__(self):
        if self.gpu_hours < 0:
            raise ComputeError("gpu_hours must be >= 0")
        if self.peak_tflops <= 0:
            raise ComputeError("peak_tflops must be > 0")


def normalized_compute(b: TrainingBudget) -> float:
    """TFLOP-hours: gpu_hours x peak_tflops."""
    return b.gpu_hours * b.peak_tflops


def compute_ratio(a: TrainingBudget, b: TrainingBudget) -> float:
    denom = normalized_compute(b)
    if denom == 0:
        raise ComputeError(f"budget {b.label!r} has zero normalized compute")
    return normalized_compute(a) / denom


def format_percent(ratio: float) -> str:
    return f"{ratio * 100:.1f}%"


def load_budgets(path: str | Path) -> list[TrainingBudget]:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise ComputeError("budget file must be a nonempty JSON array")
    out = []
    for i, obj in enumerate(data):
        try:
            out.append(TrainingBudget(
                label=obj["label"],
                gpu_hours=float(obj["gpu_hours"]),
                peak_tflops=float(obj["peak_tflops"]),
                precision=obj.get("precision", "bf16"),
            ))
        except (KeyError, TypeError) as exc:
            raise ComputeError(f"budget entry {i}: {exc}") from exc
    return out
