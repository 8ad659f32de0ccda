"""Integrated Gradients for the recurrent model, with event-aligned reports.

Any model exposing ``score_relaxed(x)`` and ``grad_input(x)`` over a T x D
relaxed one-hot input can be explained; ``LinearSurrogate`` is the simplest
such model and has closed-form attributions.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Any, Protocol

import numpy as np

from .errors import DimensionMismatch, LengthMismatch
from .eventlog import DecoySpec, ExecutionLog, is_decoy
from .features import FeatureSequence


class Differentiable(Protocol):
    input_dim: int

    def score_relaxed(self, x: np.ndarray) -> float: ...

    def grad_input(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class IgConfig:
    steps: int = 50
    baseline: np.ndarray | None = None  # None means the all-zeros input

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")


@dataclass(frozen=True)
class AttributionResult:
    per_step: np.ndarray
    per_coordinate: np.ndarray
    f_input: float
    f_baseline: float
    completeness_gap: float
    steps: int

    def __len__(self) -> int:
        return int(self.per_step.size)


@dataclass(frozen=True)
class LinearSurrogate:
    """F(x) = sum(w * x); the gradient is ``w`` everywhere."""

    w: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.w.shape[-1]

    def score_relaxed(self, x: np.ndarray) -> float:
        return float(np.sum(self._weights(x) * x))

    def grad_input(self, x: np.ndarray) -> np.ndarray:
        return np.broadcast_to(self._weights(x), np.shape(x)).copy()

    def _weights(self, x):
        w = np.asarray(self.w, dtype=np.float64)
        return w if w.ndim == 1 else w[: np.shape(x)[0]]


def integrated_gradients(model: Differentiable, seq: FeatureSequence | np.ndarray,
                         cfg: IgConfig = IgConfig()) -> AttributionResult:
    """Midpoint Riemann sum of the path integral from the baseline to the one-hot input.

    Interpolated inputs stay relaxed (never re-quantized to one-hot).
    """
    if isinstance(seq, FeatureSequence):
        if seq.alphabet.size != model.input_dim:
            raise DimensionMismatch(f"alphabet size {seq.alphabet.size}, model expects {model.input_dim}")
        x = seq.one_hot()
    else:
        x = np.asarray(seq, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise DimensionMismatch(f"input must be T x {model.input_dim}, got {x.shape}")
    if x.shape[0] == 0:
        raise ValueError("cannot attribute an empty sequence")
    base = np.zeros_like(x) if cfg.baseline is None else np.asarray(cfg.baseline, dtype=np.float64)
    if base.shape != x.shape:
        raise DimensionMismatch(f"baseline shape {base.shape} differs from input {x.shape}")
    diff = x - base
    grad_sum = np.zeros_like(x)
    if np.any(diff):
        alphas = (np.arange(cfg.steps) + 0.5) / cfg.steps
        many = getattr(model, "grad_input_many", None)
        for chunk in np.array_split(alphas, max(1, int(np.ceil(cfg.steps / 100)))):
            if many is not None:
                grad_sum += many(base[None] + chunk[:, None, None] * diff[None]).sum(axis=0)
            else:
                for alpha in chunk:
                    grad_sum += model.grad_input(base + alpha * diff)
    per_coord = diff * (grad_sum / cfg.steps)
    f_x = model.score_relaxed(x)
    f_b = model.score_relaxed(base)
    gap = abs(float(per_coord.sum()) - (f_x - f_b))
    return AttributionResult(per_coord.sum(axis=1), per_coord, f_x, f_b, gap, cfg.steps)


def check_completeness(result: AttributionResult, tol: float) -> bool:
    return result.completeness_gap <= tol * max(abs(result.f_input - result.f_baseline), 1e-6)


@dataclass(frozen=True)
class AttributionReport:
    rows: list[dict[str, Any]]
    summary: dict[str, Any]

    def to_csv(self) -> str:
        out = io.StringIO()
        fields = ["index", "timestamp_ms", "event", "path", "entropy", "attribution", "decoy"]
        writer = csv.DictWriter(out, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in self.rows:
            writer.writerow({**row, "entropy": "" if row["entropy"] is None else f"{row['entropy']:.6f}",
                             "decoy": int(row["decoy"])})
        return out.getvalue()

    def to_tsv(self) -> str:
        lines = ["index\tattribution\tdecoy"]
        lines += [f"{r['index']}\t{r['attribution']:.9g}\t{int(r['decoy'])}" for r in self.rows]
        return "\n".join(lines) + "\n"


def attribution_report(log: ExecutionLog, result: AttributionResult,
                       spec: DecoySpec = DecoySpec()) -> AttributionReport:
    if len(log) != len(result):
        raise LengthMismatch(f"log has {len(log)} events, attribution has {len(result)} steps")
    rows = []
    for i, (ev, a) in enumerate(zip(log.events, result.per_step)):
        rows.append({
            "index": i,
            "timestamp_ms": ev.timestamp_ms,
            "event": ev.kind.value,
            "path": ev.path,
            "entropy": ev.entropy,
            "attribution": float(a),
            "decoy": is_decoy(ev, spec),
        })
    decoy_vals = [r["attribution"] for r in rows if r["decoy"]]
    other_vals = [r["attribution"] for r in rows if not r["decoy"]]
    summary = {
        "f_input": result.f_input,
        "f_baseline": result.f_baseline,
        "completeness_gap": result.completeness_gap,
        "steps": result.steps,
        "n_events": len(rows),
        "n_decoy": len(decoy_vals),
        "decoy_mean": float(np.mean(decoy_vals)) if decoy_vals else None,
        "non_decoy_mean": float(np.mean(other_vals)) if other_vals else None,
    }
    return AttributionReport(rows, summary)
