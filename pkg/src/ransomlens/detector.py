"""Online sliding-window detection over a file-I/O event stream.

The detector keeps the most recent ``window_steps`` events, scores the buffer
every ``stride_steps`` pushes, and turns window scores into alerts according
to an alert policy. Memory is bounded by the window size.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import asdict, dataclass
from typing import Any, Iterable, Iterator

import numpy as np

from .errors import DimensionMismatch, InvalidConfig
from .eventlog import DecoySpec, ExecutionLog, IoEvent, first_decoy_index
from .features import FeatureSequence, Featurizer, encode_event, ngram_vector


class PolicyKind(str, enum.Enum):
    FIRST_HIT = "FirstHit"
    K_OF_M = "KofM"
    EVERY_HIT = "EveryHit"


@dataclass(frozen=True)
class AlertPolicy:
    """FirstHit stops at the first positive window.

    KofM alerts when k of the last m scored windows are positive (the current
    one included), then starts counting afresh. EveryHit alerts on every
    positive window and never stops.
    """

    kind: PolicyKind = PolicyKind.FIRST_HIT
    k: int = 1
    m: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", PolicyKind(self.kind))
        if self.kind is PolicyKind.K_OF_M and not 1 <= self.k <= self.m:
            raise InvalidConfig(f"KofM needs 1 <= k <= m, got k={self.k}, m={self.m}")

    @classmethod
    def parse(cls, text: str) -> "AlertPolicy":
        """Accepts ``first``, ``every``, or ``k-of-m`` such as ``2of3``."""
        t = text.strip().casefold()
        if t in ("first", "firsthit"):
            return cls()
        if t in ("every", "everyhit", "all"):
            return cls(PolicyKind.EVERY_HIT)
        if "of" in t:
            k, _, m = t.partition("of")
            try:
                return cls(PolicyKind.K_OF_M, int(k), int(m))
            except ValueError:
                pass
        raise InvalidConfig(f"unknown alert policy {text!r}")

    def __str__(self) -> str:
        return f"{self.k}of{self.m}" if self.kind is PolicyKind.K_OF_M else self.kind.value


@dataclass(frozen=True)
class DetectorConfig:
    window_steps: int = 500
    stride_steps: int = 50
    threshold: float = 0.5
    alert_policy: AlertPolicy = AlertPolicy()

    def __post_init__(self):
        if self.window_steps < 1:
            raise InvalidConfig("window_steps must be positive")
        if not 0 < self.stride_steps <= self.window_steps:
            raise InvalidConfig(f"stride_steps must be in (0, {self.window_steps}], got {self.stride_steps}")

    def to_json(self) -> dict:
        return {"window_steps": self.window_steps, "stride_steps": self.stride_steps,
                "threshold": self.threshold, "alert_policy": str(self.alert_policy)}


@dataclass(frozen=True)
class Alert:
    triggered_at_step: int
    triggered_at_ms: int
    score: float
    start_step: int
    end_step: int
    partial: bool = False

    def to_json(self) -> dict:
        return asdict(self)


class StreamDetector:
    """Push-style detector for one stream. Not thread-safe; share the model, not the detector."""

    def __init__(self, model: Any, cfg: DetectorConfig, featurizer: Featurizer | None = None):
        featurizer = featurizer or Featurizer(getattr(model, "alphabet", Featurizer().alphabet))
        model_alphabet = getattr(model, "alphabet", None)
        if model_alphabet is not None and model_alphabet.size != featurizer.alphabet.size:
            raise DimensionMismatch(
                f"featurizer alphabet size {featurizer.alphabet.size}, model expects {model_alphabet.size}")
        self.model = model
        self.cfg = cfg
        self.featurizer = featurizer
        self._linear = getattr(model, "kind", None) == "linear"
        self._ids: deque[int] = deque(maxlen=cfg.window_steps)
        self._last_ms = 0
        self._recent: deque[bool] = deque(maxlen=max(1, cfg.alert_policy.m))
        self.n_seen = 0
        self.n_scored = 0
        self.stopped = False

    @property
    def buffer_len(self) -> int:
        return len(self._ids)

    def _score(self) -> float:
        seq = FeatureSequence(np.fromiter(self._ids, dtype=np.int64, count=len(self._ids)), self.featurizer.alphabet)
        self.n_scored += 1
        return float(self.model.score(ngram_vector(seq) if self._linear else seq))

    def _decide(self, score: float, partial: bool) -> Alert | None:
        positive = score >= self.cfg.threshold
        policy = self.cfg.alert_policy
        self._recent.append(positive)
        if not positive:
            return None
        if policy.kind is PolicyKind.K_OF_M:
            if sum(self._recent) < policy.k:
                return None
            self._recent.clear()
        elif policy.kind is PolicyKind.FIRST_HIT:
            self.stopped = True
        end = self.n_seen - 1
        return Alert(end, self._last_ms, score, end - len(self._ids) + 1, end, partial)

    def push(self, event: IoEvent) -> Alert | None:
        if self.stopped:
            return None
        self._ids.append(encode_event(event, self.featurizer.alphabet, self.featurizer.whitelist))
        self._last_ms = event.timestamp_ms
        self.n_seen += 1
        w = self.cfg.window_steps
        if self.n_seen >= w and (self.n_seen - w) % self.cfg.stride_steps == 0:
            return self._decide(self._score(), partial=False)
        return None

    def finish(self) -> Alert | None:
        """Score a short stream once with its partial window."""
        if self.stopped or self.n_seen == 0 or self.n_seen >= self.cfg.window_steps:
            return None
        return self._decide(self._score(), partial=True)


def stream_detect(events: Iterable[IoEvent], model: Any, cfg: DetectorConfig,
                  featurizer: Featurizer | None = None) -> Iterator[Alert]:
    """Lazily yield alerts while consuming ``events``; stops pulling after a FirstHit alert."""
    det = StreamDetector(model, cfg, featurizer)
    for ev in events:
        alert = det.push(ev)
        if alert is not None:
            yield alert
        if det.stopped:
            return
    alert = det.finish()
    if alert is not None:
        yield alert


@dataclass(frozen=True)
class Latency:
    events: int
    ms: int
    anticipatory: bool = False


def detection_latency(log: ExecutionLog, model: Any, cfg: DetectorConfig, spec: DecoySpec = DecoySpec(),
                      featurizer: Featurizer | None = None) -> Latency | None:
    """Distance from the first decoy event to the first alert; negative distances clamp to 0."""
    first = next(stream_detect(log, model, cfg, featurizer), None)
    if first is None:
        return None
    start = first_decoy_index(log, spec)
    if start is None:
        start = 0
    d_events = first.triggered_at_step - start
    d_ms = first.triggered_at_ms - log.events[start].timestamp_ms
    if d_events < 0:
        return Latency(0, 0, anticipatory=True)
    return Latency(d_events, max(d_ms, 0))
