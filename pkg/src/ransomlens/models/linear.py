"""L2-regularized linear SVM on N-gram vectors, trained with Pegasos.

Margins are mapped to probabilities with a Platt sigmoid fit on a stratified
held-out fold.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize

from ..errors import DegenerateData, DimensionMismatch
from ..features import FeatureAlphabet, NGramVector
from .config import TrainConfig

log = logging.getLogger(__name__)


@dataclass
class LinearModel:
    alphabet: FeatureAlphabet
    weights: np.ndarray
    bias: float = 0.0
    lam: float = 1e-4
    calibration: tuple[float, float] = (1.0, 0.0)
    feature_norm: str = "L2Unit"
    diagnostics: dict = field(default_factory=dict)

    kind = "linear"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.shape != (self.alphabet.ngram_dim,):
            raise DimensionMismatch(f"weights length {self.weights.size}, alphabet needs {self.alphabet.ngram_dim}")
        if self.feature_norm not in ("Raw", "L2Unit"):
            raise ValueError(f"unknown feature_norm {self.feature_norm!r}")
        self.calibration = (float(self.calibration[0]), float(self.calibration[1]))

    def _prepare(self, x: NGramVector | np.ndarray) -> np.ndarray:
        counts = x.counts if isinstance(x, NGramVector) else np.asarray(x)
        if counts.shape[-1] != self.weights.size:
            raise DimensionMismatch(f"vector length {counts.shape[-1]}, model expects {self.weights.size}")
        return normalize(counts, self.feature_norm)

    def margin(self, x: NGramVector | np.ndarray) -> float:
        return float(self._prepare(x) @ self.weights + self.bias)

    def score(self, x: NGramVector) -> float:
        a, b = self.calibration
        return float(_sigmoid(a * self.margin(x) + b))

    def score_batch(self, xs: Sequence[NGramVector]) -> np.ndarray:
        if not len(xs):
            return np.empty(0)
        mat = self._prepare(np.stack([x.counts for x in xs]))
        a, b = self.calibration
        return _sigmoid(a * (mat @ self.weights + self.bias) + b)

    def copy(self) -> "LinearModel":
        return LinearModel(self.alphabet, self.weights.copy(), self.bias, self.lam, self.calibration,
                           self.feature_norm, dict(self.diagnostics))


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def normalize(counts: np.ndarray, mode: str) -> np.ndarray:
    x = np.asarray(counts, dtype=np.float64)
    if mode == "Raw":
        return x
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    return np.divide(x, norm, out=np.zeros_like(x), where=norm > 0)


def pegasos(X: np.ndarray, y: np.ndarray, lam: float, epochs: int, rng: np.random.Generator):
    """Stochastic subgradient descent on hinge loss + (lam/2)||w||^2, step 1/(lam t).

    The bias rides along as a constant feature. Returns the average of the
    iterates over the second half of training, which is less noisy than the
    last iterate.
    """
    n, d = X.shape
    Xa = np.hstack([X, np.ones((n, 1))])
    w = np.zeros(d + 1)
    avg = np.zeros(d + 1)
    n_avg = 0
    total = epochs * n
    radius = 1.0 / np.sqrt(lam)
    t = 0
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = 1.0 / (lam * t)
            viol = y[i] * (Xa[i] @ w) < 1.0
            w *= 1.0 - eta * lam
            if viol:
                w += eta * y[i] * Xa[i]
            norm = np.linalg.norm(w)
            if norm > radius:
                w *= radius / norm
            if t > total // 2:
                avg += w
                n_avg += 1
    w = avg / max(n_avg, 1) if n_avg else w
    return w[:-1], float(w[-1])


def fit_platt(margins: np.ndarray, labels: np.ndarray) -> tuple[float, float]:
    """Fit sigmoid(a*m + b) by maximum likelihood with Platt's smoothed targets."""
    n_pos = int(labels.sum())
    n_neg = len(labels) - n_pos
    target = np.where(labels == 1, (n_pos + 1.0) / (n_pos + 2.0), 1.0 / (n_neg + 2.0))

    def nll(params):
        a, b = params
        z = a * margins + b
        # log(1+e^z) computed stably
        lse = np.logaddexp(0.0, z)
        loss = np.sum(lse - target * z)
        p = _sigmoid(z)
        r = p - target
        return loss, np.array([np.sum(r * margins), np.sum(r)])

    res = minimize(nll, x0=np.array([1.0, 0.0]), jac=True, method="L-BFGS-B")
    a, b = res.x
    return float(a), float(b)


def _stratified_holdout(y: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    held = np.zeros(len(y), dtype=bool)
    for cls in (0, 1):
        idx = np.flatnonzero(y == cls)
        k = int(round(fraction * len(idx)))
        if 0 < k < len(idx):
            held[rng.choice(idx, size=k, replace=False)] = True
    return held


def train_linear(samples: Sequence[tuple[NGramVector, int | bool]], config: TrainConfig = TrainConfig(),
                 alphabet: FeatureAlphabet | None = None) -> LinearModel:
    labels = np.array([int(bool(lbl)) for _, lbl in samples], dtype=np.int64)
    if len(samples) == 0 or labels.min() == labels.max():
        raise DegenerateData("training data must contain both classes")
    if alphabet is None:
        alphabet = samples[0][0].alphabet
    mode = "L2Unit" if config.l2_normalize else "Raw"
    X = np.stack([v.counts for v, _ in samples]).astype(np.float64)
    if X.shape[1] != alphabet.ngram_dim:
        raise DimensionMismatch(f"vectors of length {X.shape[1]}, alphabet needs {alphabet.ngram_dim}")
    X = normalize(X, mode)
    rng = np.random.default_rng(config.seed)
    held = _stratified_holdout(labels, config.holdout_fraction, rng)
    if not (held.any() and labels[held].min() != labels[held].max()):
        # too few samples for a separate fold; calibrate on the training margins
        held = np.zeros(len(labels), dtype=bool)
    fit = ~held
    y_pm = np.where(labels == 1, 1.0, -1.0)
    w, b = pegasos(X[fit], y_pm[fit], config.lam, max(config.epochs, 1), rng)
    model = LinearModel(alphabet, w, b, config.lam, (1.0, 0.0), mode)
    cal_rows = held if held.any() else fit
    margins = X[cal_rows] @ w + b
    model.calibration = fit_platt(margins, labels[cal_rows])
    train_pred = (X[fit] @ w + b) >= 0
    train_acc = float(np.mean(train_pred == (labels[fit] == 1)))
    majority = float(max(labels[fit].mean(), 1 - labels[fit].mean()))
    model.diagnostics = {
        "n_train": int(fit.sum()),
        "n_calibration": int(held.sum()),
        "train_accuracy": train_acc,
        "majority_rate": majority,
        "non_separable": bool(train_acc < 1.0),
        # no better than predicting the majority class: no usable linear signal
        "no_signal": bool(train_acc <= majority + 1e-12),
    }
    log.info("linear model train accuracy %.4f", train_acc)
    return model
