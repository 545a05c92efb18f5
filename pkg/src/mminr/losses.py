"""Balanced errors for the imbalanced rainfall distribution.

Pixel weights grow stepwise with the physical rain rate of the target, so
heavy-rain cells count more than the vastly more common light-rain cells.
Weights are always derived from mm/h targets; the error itself may be taken
in normalized space (training) or physical space (reporting).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

DEFAULT_THRESHOLDS = (0.5, 2.0, 5.0, 10.0)
DEFAULT_WEIGHTS = (1.0, 2.0, 5.0, 10.0, 30.0)


@dataclass(frozen=True)
class WeightSchedule:
    """Stepped pixel-weight schedule keyed on rain-rate thresholds.

    A target in bin [thresholds[k-1], thresholds[k]) receives weights[k];
    the last bin is closed above.
    """

    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    weights: tuple[float, ...] = DEFAULT_WEIGHTS

    def __post_init__(self):
        thresholds = tuple(float(t) for t in self.thresholds)
        weights = tuple(float(w) for w in self.weights)
        if any(b <= a for a, b in zip(thresholds, thresholds[1:])):
            raise ValueError(f"thresholds must be strictly ascending, got {thresholds}")
        if len(weights) != len(thresholds) + 1:
            raise ValueError(
                f"need {len(thresholds) + 1} weights for {len(thresholds)} thresholds, got {len(weights)}"
            )
        if any(w <= 0 for w in weights):
            raise ValueError(f"weights must be positive, got {weights}")
        object.__setattr__(self, "thresholds", thresholds)
        object.__setattr__(self, "weights", weights)


def pixel_weights(target_mmh: np.ndarray, schedule: WeightSchedule | None = None) -> np.ndarray:
    """Per-pixel weights from a physical-space (mm/h) target field."""
    schedule = schedule or WeightSchedule()
    target_mmh = np.asarray(target_mmh, dtype=np.float64)
    idx = np.searchsorted(schedule.thresholds, target_mmh, side="right")
    return np.asarray(schedule.weights, dtype=np.float64)[idx]


def _check_shapes(pred, target, weight_source):
    if pred.shape != target.shape:
        raise ValueError(f"pred shape {pred.shape} != target shape {target.shape}")
    if weight_source is not None and np.asarray(weight_source).shape != target.shape:
        raise ValueError(
            f"weight source shape {np.asarray(weight_source).shape} != target shape {target.shape}"
        )


def b_mse(pred, target, schedule: WeightSchedule | None = None, weight_source=None) -> float:
    """Weighted mean squared error: mean over all cells of w * (pred-target)^2.

    ``weight_source`` supplies the mm/h field the weights are read from; when
    omitted the target itself is assumed to be in mm/h.
    """
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_shapes(pred, target, weight_source)
    w = pixel_weights(target if weight_source is None else weight_source, schedule)
    return float(np.mean(w * (pred - target) ** 2))


def b_mae(pred, target, schedule: WeightSchedule | None = None, weight_source=None) -> float:
    """Weighted mean absolute error: mean over all cells of w * |pred-target|."""
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    _check_shapes(pred, target, weight_source)
    w = pixel_weights(target if weight_source is None else weight_source, schedule)
    return float(np.mean(w * np.abs(pred - target)))


def pixel_weights_torch(target_mmh: torch.Tensor, schedule: WeightSchedule | None = None) -> torch.Tensor:
    """Torch twin of :func:`pixel_weights`, for use inside training graphs."""
    schedule = schedule or WeightSchedule()
    thresholds = torch.as_tensor(schedule.thresholds, dtype=target_mmh.dtype, device=target_mmh.device)
    weights = torch.as_tensor(schedule.weights, dtype=target_mmh.dtype, device=target_mmh.device)
    idx = torch.bucketize(target_mmh, thresholds, right=True)
    return weights[idx]


def balanced_error_torch(
    pred: torch.Tensor, target: torch.Tensor, weights: torch.Tensor, kind: str = "b_mae"
) -> torch.Tensor:
    """Differentiable balanced error with precomputed pixel weights.

    kind: "b_mae", "b_mse", or "sum" (their sum).
    """
    if pred.shape != target.shape:
        raise ValueError(f"pred shape {tuple(pred.shape)} != target shape {tuple(target.shape)}")
    err = pred - target
    if kind == "b_mae":
        return (weights * err.abs()).mean()
    if kind == "b_mse":
        return (weights * err.square()).mean()
    if kind == "sum":
        return (weights * (err.abs() + err.square())).mean()
    raise ValueError(f"unknown loss kind {kind!r}")
