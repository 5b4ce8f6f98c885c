"""3D Euclidean position-error metrics and scenario-level aggregation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .timeseries import SampledSignal

__all__ = ["ErrorMetrics", "aggregate_scenario", "format_cell", "position_error_3d"]


def position_error_3d(pred: SampledSignal, truth: SampledSignal) -> tuple[float, float]:
    """MAE and RMSE (mm) of the per-sample Euclidean error ``||pred - truth||``."""
    if len(pred) != len(truth):
        raise ValueError(f"length mismatch: pred {len(pred)} vs truth {len(truth)}")
    if pred.sample_rate_hz != truth.sample_rate_hz:
        raise ValueError(
            f"rate mismatch: pred {pred.sample_rate_hz} Hz vs truth {truth.sample_rate_hz} Hz")
    if pred.data.shape[1] != 3 or truth.data.shape[1] != 3:
        raise ValueError("position error needs 3-channel signals")
    err = np.linalg.norm(pred.data - truth.data, axis=1)
    return float(np.mean(err)), float(np.sqrt(np.mean(err**2)))


def aggregate_scenario(values) -> tuple[float, float]:
    """Mean and sample standard deviation (N-1); a single value has std 0."""
    values = np.asarray(list(values), dtype=float)
    if values.size == 0:
        raise ValueError("cannot aggregate an empty list")
    if values.size == 1:
        return float(values[0]), 0.0
    return float(values.mean()), float(values.std(ddof=1))


def format_cell(mean: float, std: float) -> str:
    return f"{mean:.2f}±{std:.2f}"


@dataclass
class ErrorMetrics:
    """Per-sequence errors of one method on one scenario's test split."""

    per_sequence: list[tuple[int, int, float, float]] = field(default_factory=list)

    def add(self, series_id: int, seq_id: int, pred: SampledSignal, truth: SampledSignal):
        mae, rmse = position_error_3d(pred, truth)
        self.per_sequence.append((series_id, seq_id, mae, rmse))
        return mae, rmse

    @property
    def mae_mm(self) -> float:
        return aggregate_scenario(r[2] for r in self.per_sequence)[0]

    @property
    def rmse_mm(self) -> float:
        return aggregate_scenario(r[3] for r in self.per_sequence)[0]

    def summary(self) -> dict[str, tuple[float, float]]:
        return {
            "MAE": aggregate_scenario(r[2] for r in self.per_sequence),
            "RMSE": aggregate_scenario(r[3] for r in self.per_sequence),
        }

