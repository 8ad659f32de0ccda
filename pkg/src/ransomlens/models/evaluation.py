from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from ..errors import DimensionMismatch
from ..features import FeatureSequence, NGramVector
from .linear import LinearModel
from .lstm import LstmModel

SliceKey = tuple[int, int]


@dataclass(frozen=True)
class Prediction:
    score: float
    label: bool
    threshold: float = 0.5


def _check_input(model, sample) -> None:
    if isinstance(model, LinearModel):
        if not isinstance(sample, NGramVector):
            raise DimensionMismatch("linear model expects an NGramVector")
        if len(sample) != model.weights.size:
            raise DimensionMismatch(f"vector length {len(sample)}, model expects {model.weights.size}")
    elif isinstance(model, LstmModel):
        if not isinstance(sample, FeatureSequence):
            raise DimensionMismatch("recurrent model expects a FeatureSequence")
        if sample.alphabet.size != model.input_dim:
            raise DimensionMismatch(f"alphabet size {sample.alphabet.size}, model expects {model.input_dim}")
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")


def predict(model: LinearModel | LstmModel, sample: NGramVector | FeatureSequence,
            threshold: float = 0.5) -> Prediction:
    _check_input(model, sample)
    score = min(max(model.score(sample), 0.0), 1.0)
    return Prediction(score, score >= threshold, threshold)


def score_many(model: LinearModel | LstmModel, samples: Sequence) -> np.ndarray:
    for s in samples:
        _check_input(model, s)
    return np.clip(model.score_batch(list(samples)), 0.0, 1.0)


@dataclass
class EvalReport:
    accuracy: float
    false_positive_rate: float
    true_positive_rate: float
    confusion: dict[str, int]
    detection_rates: dict[SliceKey, float | None] = field(default_factory=dict)
    slice_counts: dict[SliceKey, int] = field(default_factory=dict)
    threshold: float = 0.5

    def to_json(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "false_positive_rate": self.false_positive_rate,
            "true_positive_rate": self.true_positive_rate,
            "confusion": dict(self.confusion),
            "threshold": self.threshold,
            "detection_rates": [
                {"period_s": p, "window_steps": w, "rate": r, "count": self.slice_counts.get((p, w), 0)}
                for (p, w), r in sorted(self.detection_rates.items())
            ],
        }

    def table(self) -> str:
        c = self.confusion
        lines = [
            f"accuracy  {self.accuracy:.4f}",
            f"TPR       {self.true_positive_rate:.4f}",
            f"FPR       {self.false_positive_rate:.4f}",
            f"confusion tp={c['tp']} fp={c['fp']} tn={c['tn']} fn={c['fn']}",
        ]
        if self.detection_rates:
            windows = sorted({w for _, w in self.detection_rates})
            periods = sorted({p for p, _ in self.detection_rates})
            lines.append("detection rate by period (rows) x window (cols)")
            lines.append("period " + "".join(f"{w:>9}" for w in windows))
            for p in periods:
                cells = []
                for w in windows:
                    r = self.detection_rates.get((p, w))
                    cells.append(f"{'-':>9}" if r is None else f"{r:>9.3f}")
                lines.append(f"{p:>6} " + "".join(cells))
        return "\n".join(lines)


def _rate(num: int, den: int) -> float:
    return num / den if den else math.nan


def evaluate(model: LinearModel | LstmModel, dataset: Sequence[tuple], slices: Iterable[SliceKey] | None = None,
             threshold: float = 0.5) -> EvalReport:
    """Score a labeled dataset of ``(sample, label)`` or ``(sample, label, (period_s, window_steps))``.

    Detection rates are the fraction of positive samples in each slice cell
    predicted positive; requested cells with no samples report ``None``.
    """
    samples = [row[0] for row in dataset]
    labels = np.array([bool(row[1]) for row in dataset], dtype=bool)
    keys = [tuple(row[2]) if len(row) > 2 and row[2] is not None else None for row in dataset]
    scores = score_many(model, samples) if samples else np.empty(0)
    pred = scores >= threshold
    tp = int(np.sum(pred & labels))
    fp = int(np.sum(pred & ~labels))
    tn = int(np.sum(~pred & ~labels))
    fn = int(np.sum(~pred & labels))
    n = len(labels)
    cells = list(slices) if slices is not None else sorted({k for k in keys if k is not None})
    rates: dict[SliceKey, float | None] = {}
    counts: dict[SliceKey, int] = {}
    for cell in cells:
        cell = (int(cell[0]), int(cell[1]))
        rows = [i for i, k in enumerate(keys) if k == cell and labels[i]]
        counts[cell] = len(rows)
        rates[cell] = float(np.mean(pred[rows])) if rows else None
    return EvalReport(
        accuracy=_rate(tp + tn, n),
        false_positive_rate=_rate(fp, fp + tn),
        true_positive_rate=_rate(tp, tp + fn),
        confusion={"tp": tp, "fp": fp, "tn": tn, "fn": fn},
        detection_rates=rates,
        slice_counts=counts,
        threshold=threshold,
    )
