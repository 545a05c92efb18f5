"""Forecast verification: contingency tables, CSI/HSS at rain-rate
thresholds, balanced errors, and per-lead-time breakdowns.

Scores are computed on physical mm/h fields. Binarization is inclusive:
a cell is an event when value >= threshold. Undefined scores (empty
denominators) are encoded as NaN and excluded from frame averages.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import RadarSequence
from .losses import DEFAULT_THRESHOLDS, WeightSchedule, b_mae, b_mse


@dataclass
class ContingencyTable:
    """Event counts for one binarization threshold."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tn: int = 0

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("contingency counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    def __add__(self, other: "ContingencyTable") -> "ContingencyTable":
        return ContingencyTable(
            self.tp + other.tp, self.fp + other.fp, self.fn + other.fn, self.tn + other.tn
        )


def contingency(pred: np.ndarray, obs: np.ndarray, threshold: float) -> ContingencyTable:
    """Count hits/false alarms/misses/correct negatives over all cells."""
    pred = np.asarray(pred)
    obs = np.asarray(obs)
    if pred.shape != obs.shape:
        raise ValueError(f"pred shape {pred.shape} != obs shape {obs.shape}")
    p = pred >= threshold
    o = obs >= threshold
    tp = int(np.count_nonzero(p & o))
    fp = int(np.count_nonzero(p & ~o))
    fn = int(np.count_nonzero(~p & o))
    tn = int(np.count_nonzero(~p & ~o))
    return ContingencyTable(tp, fp, fn, tn)


def csi(t: ContingencyTable) -> float:
    """Critical success index tp / (tp + fp + fn); NaN when no events occur."""
    denom = t.tp + t.fp + t.fn
    if denom == 0:
        return math.nan
    return t.tp / denom


def hss(t: ContingencyTable) -> float:
    """Heidke skill score 2(tp*tn - fn*fp) / ((tp+fn)(fn+tn) + (tp+fp)(fp+tn));
    NaN when the denominator vanishes."""
    denom = (t.tp + t.fn) * (t.fn + t.tn) + (t.tp + t.fp) * (t.fp + t.tn)
    if denom == 0:
        return math.nan
    return 2.0 * (t.tp * t.tn - t.fn * t.fp) / denom


@dataclass(frozen=True)
class ThresholdScore:
    """CSI/HSS at one threshold, pooled over all cells and as per-frame means."""

    csi: float
    hss: float
    csi_frame_mean: float
    hss_frame_mean: float


@dataclass
class SkillReport:
    """Verification summary: per-threshold CSI/HSS plus balanced errors.

    ``pooling`` records the default aggregation (counts summed before
    scoring); per-frame means are carried alongside. ``per_lead_time`` holds
    one report per prediction step when requested.
    """

    per_threshold: dict[float, ThresholdScore]
    b_mse: float
    b_mae: float
    pooling: str = "pooled"
    per_lead_time: list["SkillReport"] | None = None


def _as_stack(seqs) -> np.ndarray:
    """Coerce a sequence set to one (set, frames, height, width) array."""
    if isinstance(seqs, np.ndarray):
        if seqs.ndim == 3:
            return seqs[np.newaxis].astype(np.float64)
        if seqs.ndim != 4:
            raise ValueError(f"expected 3-D or 4-D array, got shape {seqs.shape}")
        return seqs.astype(np.float64)
    arrays = []
    for s in seqs:
        arrays.append(s.as_array() if isinstance(s, RadarSequence) else np.asarray(s))
    return np.stack(arrays).astype(np.float64)


def _nanmean(values) -> float:
    kept = [v for v in values if not math.isnan(v)]
    if not kept:
        return math.nan
    return float(np.mean(kept))


def _score_block(preds: np.ndarray, obs: np.ndarray, thresholds, schedule) -> SkillReport:
    per_threshold = {}
    flat_p = preds.reshape(-1, preds.shape[-2], preds.shape[-1])
    flat_o = obs.reshape(-1, obs.shape[-2], obs.shape[-1])
    for thr in thresholds:
        tables = [contingency(p, o, thr) for p, o in zip(flat_p, flat_o)]
        pooled = ContingencyTable()
        for t in tables:
            pooled = pooled + t
        per_threshold[float(thr)] = ThresholdScore(
            csi=csi(pooled),
            hss=hss(pooled),
            csi_frame_mean=_nanmean([csi(t) for t in tables]),
            hss_frame_mean=_nanmean([hss(t) for t in tables]),
        )
    return SkillReport(
        per_threshold=per_threshold,
        b_mse=b_mse(preds, obs, schedule),
        b_mae=b_mae(preds, obs, schedule),
    )


def evaluate(
    preds,
    obs,
    thresholds=DEFAULT_THRESHOLDS,
    schedule: WeightSchedule | None = None,
    per_lead_time: bool = False,
) -> SkillReport:
    """Score a prediction set against observations (both in mm/h).

    ``preds`` and ``obs`` may be (set, frames, H, W) arrays or matched lists
    of RadarSequence / 3-D arrays. CSI/HSS pool contingency counts over all
    cells; balanced errors weight by the observed rain rate.
    """
    preds = _as_stack(preds)
    obs = _as_stack(obs)
    if preds.shape != obs.shape:
        raise ValueError(f"prediction set shape {preds.shape} != observation set shape {obs.shape}")
    schedule = schedule or WeightSchedule()
    report = _score_block(preds, obs, thresholds, schedule)
    if per_lead_time:
        report.per_lead_time = [
            _score_block(preds[:, j], obs[:, j], thresholds, schedule)
            for j in range(preds.shape[1])
        ]
    return report


def _fmt(value: float) -> str:
    return "   n/a" if math.isnan(value) else f"{value:.4f}"


def format_report(report: SkillReport, label: str = "forecast") -> str:
    """Render the summary as a fixed-width text table.

    One row per aggregation mode, pooled counts first (the default), then
    per-frame means.
    """
    thresholds = sorted(report.per_threshold)
    heads = [f"r>={t:g}" for t in thresholds]
    lines = []
    lines.append(f"# skill report: {label} (default aggregation: {report.pooling})")
    header = f"{'aggregation':<12}" + "".join(f"{h:>9}" for h in heads) * 2 + f"{'B-MSE':>10}{'B-MAE':>10}"
    group = f"{'':<12}" + f"{'CSI':>{9 * len(heads)}}" + f"{'HSS':>{9 * len(heads)}}"
    lines.append(group)
    lines.append(header)
    pooled = [report.per_threshold[t].csi for t in thresholds] + [
        report.per_threshold[t].hss for t in thresholds
    ]
    frame = [report.per_threshold[t].csi_frame_mean for t in thresholds] + [
        report.per_threshold[t].hss_frame_mean for t in thresholds
    ]
    lines.append(
        f"{'pooled':<12}" + "".join(f"{_fmt(v):>9}" for v in pooled)
        + f"{report.b_mse:>10.4f}{report.b_mae:>10.4f}"
    )
    lines.append(
        f"{'frame-mean':<12}" + "".join(f"{_fmt(v):>9}" for v in frame)
        + f"{report.b_mse:>10.4f}{report.b_mae:>10.4f}"
    )
    return "\n".join(lines) + "\n"


def _block_dict(report: SkillReport) -> dict:
    return {
        "per_threshold": {
            f"{t:g}": {
                "csi": report.per_threshold[t].csi,
                "hss": report.per_threshold[t].hss,
                "csi_frame_mean": report.per_threshold[t].csi_frame_mean,
                "hss_frame_mean": report.per_threshold[t].hss_frame_mean,
            }
            for t in sorted(report.per_threshold)
        },
        "b_mse": report.b_mse,
        "b_mae": report.b_mae,
    }


def report_to_dict(report: SkillReport) -> dict:
    """Machine-readable form of the report (JSON-safe; NaN encoded as null)."""
    payload = _block_dict(report)
    payload["pooling"] = report.pooling
    if report.per_lead_time is not None:
        payload["per_lead_time"] = [_block_dict(r) for r in report.per_lead_time]
    return payload


def write_report(report: SkillReport, out_dir: str | Path, label: str = "forecast") -> tuple[Path, Path]:
    """Write the text table and JSON form to ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    text_path = out_dir / "report.txt"
    json_path = out_dir / "report.json"
    text_path.write_text(format_report(report, label))
    payload = _null_nans(report_to_dict(report))
    json_path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return text_path, json_path


def _null_nans(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _null_nans(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_null_nans(v) for v in obj]
    return obj
