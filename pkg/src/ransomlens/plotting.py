"""Matplotlib figures for experiment reports. Uses the non-interactive Agg backend."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

_STYLE = {
    "axes.spines.top": False,
    "axes.spines.right": False,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def _save(fig, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def detection_rate_bars(rates: dict[tuple[int, int], float | None], path: str | Path,
                        title: str = "Detection rate by period and window") -> Path:
    """Grouped bars: one group per period, one bar per window size. Missing cells are left empty."""
    periods = sorted({p for p, _ in rates})
    windows = sorted({w for _, w in rates})
    width = 0.8 / max(len(windows), 1)
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(7, 3))
        x = np.arange(len(periods))
        for j, w in enumerate(windows):
            vals = [rates.get((p, w)) for p in periods]
            ax.bar(x + j * width, [np.nan if v is None else v for v in vals], width, label=f"{w} steps")
        ax.set_xticks(x + width * (len(windows) - 1) / 2, [f"{p}s" for p in periods])
        ax.set_ylim(0, 1.05)
        ax.set_xlabel("early-stage period")
        ax.set_ylabel("detection rate")
        ax.set_title(title)
        ax.legend(frameon=False, ncol=len(windows))
        return _save(fig, path)


def attribution_bars(per_step: Sequence[float], decoy: Sequence[bool], path: str | Path,
                     title: str = "Per-event attribution") -> Path:
    per_step = np.asarray(per_step, dtype=float)
    colors = np.where(np.asarray(decoy, dtype=bool), "tab:red", "tab:gray")
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(8, 2.6))
        ax.bar(np.arange(per_step.size), per_step, width=1.0, color=colors)
        ax.set_xlabel("event index (red: decoy)")
        ax.set_ylabel("attribution")
        ax.set_title(title)
        return _save(fig, path)


def score_curve(xs: Sequence[float], scores: Sequence[float], path: str | Path, threshold: float = 0.5,
                xlabel: str = "benign inserts per gap", title: str = "Score under dilution") -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3))
        ax.plot(xs, scores, marker="o")
        ax.axhline(threshold, color="tab:red", ls="--", lw=1, label="threshold")
        ax.set_ylim(-0.02, 1.02)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("score")
        ax.set_title(title)
        ax.legend(frameon=False)
        return _save(fig, path)


def evasion_rounds(baseline: float, rates: Sequence[float], path: str | Path) -> Path:
    vals = [baseline, *rates]
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3))
        ax.plot(range(len(vals)), vals, marker="s")
        ax.set_xticks(range(len(vals)), ["naive"] + [f"r{i + 1}" for i in range(len(rates))])
        ax.set_ylim(-0.02, 1.02)
        ax.set_ylabel("held-out evasion rate")
        ax.set_title("Adversarial retraining")
        return _save(fig, path)
