"""Categorical event encoding and bag-of-N-gram vectors.

Each event maps to one of nine base symbols: Create, Rename, Delete, and six
Change symbols, one per entropy bucket. With the system-path flag the alphabet
doubles to 18, the upper half marking events on whitelisted OS folders.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import MissingEntropy, OutOfRange
from .eventlog import DEFAULT_SYSTEM_WHITELIST, EventKind, ExecutionLog, IoEvent, is_system_path

BASE_SIZE = 9
ENTROPY_EDGES = (0.2, 0.4, 0.6, 0.8, 0.9)
_KIND_BASE = {EventKind.CREATE: 0, EventKind.RENAME: 1, EventKind.DELETE: 2}
CHANGE_BASE = 3


@dataclass(frozen=True)
class FeatureAlphabet:
    path_flag_enabled: bool = False

    @property
    def size(self) -> int:
        return BASE_SIZE * (2 if self.path_flag_enabled else 1)

    @property
    def ngram_dim(self) -> int:
        return self.size + self.size * self.size

    def to_json(self) -> dict:
        return {"path_flag_enabled": self.path_flag_enabled, "size": self.size}

    @classmethod
    def from_json(cls, payload: dict) -> "FeatureAlphabet":
        alphabet = cls(bool(payload["path_flag_enabled"]))
        if "size" in payload and payload["size"] != alphabet.size:
            raise ValueError(f"alphabet size {payload['size']} inconsistent with path flag")
        return alphabet

    def symbol_name(self, idx: int) -> str:
        base = idx % BASE_SIZE
        if base < CHANGE_BASE:
            name = ("Create", "Rename", "Delete")[base]
        else:
            name = f"Change[b{base - CHANGE_BASE}]"
        return name + ("@sys" if idx >= BASE_SIZE else "")


@dataclass(frozen=True)
class FeatureSequence:
    ids: np.ndarray
    alphabet: FeatureAlphabet

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64).reshape(-1)
        if ids.size and (ids.min() < 0 or ids.max() >= self.alphabet.size):
            raise OutOfRange(f"feature id outside [0, {self.alphabet.size})")
        object.__setattr__(self, "ids", ids)

    def __len__(self) -> int:
        return int(self.ids.size)

    def one_hot(self) -> np.ndarray:
        out = np.zeros((len(self), self.alphabet.size))
        out[np.arange(len(self)), self.ids] = 1.0
        return out

    def tail(self, n: int | None) -> "FeatureSequence":
        if n is None or len(self) <= n:
            return self
        return FeatureSequence(self.ids[-n:], self.alphabet)


@dataclass(frozen=True)
class NGramVector:
    counts: np.ndarray
    alphabet: FeatureAlphabet

    def __len__(self) -> int:
        return int(self.counts.size)

    @property
    def unigrams(self) -> np.ndarray:
        return self.counts[: self.alphabet.size]

    @property
    def bigrams(self) -> np.ndarray:
        s = self.alphabet.size
        return self.counts[s:].reshape(s, s)


def bucket_entropy(e: float) -> int:
    """Bucket index 0..5 for edges [0, .2, .4, .6, .8, .9, 1], low-inclusive, 1.0 in the top bucket."""
    if not 0.0 <= e <= 1.0:
        raise OutOfRange(f"entropy {e} outside [0, 1]")
    return bisect.bisect_right(ENTROPY_EDGES, e)


def encode_event(event: IoEvent, alphabet: FeatureAlphabet = FeatureAlphabet(),
                 whitelist: Sequence[str] = DEFAULT_SYSTEM_WHITELIST) -> int:
    if event.kind is EventKind.CHANGE:
        if event.entropy is None:
            raise MissingEntropy(f"Change event on {event.path!r} has no entropy")
        base = CHANGE_BASE + bucket_entropy(event.entropy)
    else:
        base = _KIND_BASE[event.kind]
    if alphabet.path_flag_enabled and is_system_path(event.path, whitelist):
        return base + BASE_SIZE
    return base


def encode_sequence(log: ExecutionLog | Sequence[IoEvent], alphabet: FeatureAlphabet = FeatureAlphabet(),
                    whitelist: Sequence[str] = DEFAULT_SYSTEM_WHITELIST) -> FeatureSequence:
    ids = np.fromiter((encode_event(e, alphabet, whitelist) for e in log), dtype=np.int64, count=len(log))
    return FeatureSequence(ids, alphabet)


def ngram_vector(seq: FeatureSequence) -> NGramVector:
    """Unigram counts followed by row-major bigram counts over consecutive pairs."""
    s = seq.alphabet.size
    ids = seq.ids
    uni = np.bincount(ids, minlength=s)
    if ids.size > 1:
        bi = np.bincount(ids[:-1] * s + ids[1:], minlength=s * s)
    else:
        bi = np.zeros(s * s, dtype=np.int64)
    return NGramVector(np.concatenate([uni, bi]).astype(np.int64), seq.alphabet)


@dataclass(frozen=True)
class Featurizer:
    """Bundles alphabet and whitelist; turns raw events into model inputs.

    ``max_events`` keeps only the most recent events, matching how the
    recurrent model is trained on end-anchored windows.
    """

    alphabet: FeatureAlphabet = FeatureAlphabet()
    whitelist: tuple[str, ...] = field(default=DEFAULT_SYSTEM_WHITELIST)
    max_events: int | None = None

    def sequence(self, events: ExecutionLog | Sequence[IoEvent]) -> FeatureSequence:
        events = list(events)
        if self.max_events is not None and len(events) > self.max_events:
            events = events[-self.max_events:]
        return encode_sequence(events, self.alphabet, self.whitelist)

    def ngrams(self, events: ExecutionLog | Sequence[IoEvent]) -> NGramVector:
        return ngram_vector(self.sequence(events))

    def for_model(self, model) -> Callable:
        """Featurization matching the model kind (N-gram for linear, sequence for recurrent)."""
        return self.ngrams if getattr(model, "kind", None) == "linear" else self.sequence
