"""File-I/O execution logs: data types, canonical CSV format, entropy and path helpers.

A log row is ``timestamp_ms,event,path,entropy`` with no header. Timestamps are
non-negative integer milliseconds relative to the start of execution, entropy is
the normalized Shannon entropy of the touched file (empty for events that do not
write content).
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import MalformedRow, SchemaMismatch

ENTROPY_CAP_BYTES = 1_048_576
CONFIG_SCHEMA_VERSION = 1

DEFAULT_DECOY_KEYWORDS = ("myFile",)
DEFAULT_SYSTEM_WHITELIST = (
    "c:\\Windows",
    "c:\\ProgramData",
    "c:\\Program Files",
    "c:\\Progra~",
    "c:\\AppData",
)


class EventKind(str, enum.Enum):
    CREATE = "Create"
    RENAME = "Rename"
    DELETE = "Delete"
    CHANGE = "Change"

    @classmethod
    def parse(cls, name: str) -> "EventKind":
        folded = name.strip().casefold()
        for kind in cls:
            if kind.value.casefold() == folded:
                return kind
        raise ValueError(f"unknown event name {name!r}")


class Label(str, enum.Enum):
    RANSOMWARE = "Ransomware"
    BENIGN = "Benign"
    UNLABELED = "Unlabeled"

    @property
    def is_positive(self) -> bool:
        return self is Label.RANSOMWARE


@dataclass(frozen=True)
class IoEvent:
    timestamp_ms: int
    kind: EventKind
    path: str
    entropy: float | None = None

    def __post_init__(self):
        if self.timestamp_ms < 0:
            raise ValueError("timestamp_ms must be non-negative")
        if not self.path:
            raise ValueError("path must be non-empty")
        if self.entropy is not None and not 0.0 <= self.entropy <= 1.0:
            raise ValueError(f"entropy {self.entropy} outside [0, 1]")

    def with_timestamp(self, timestamp_ms: int) -> "IoEvent":
        return IoEvent(timestamp_ms, self.kind, self.path, self.entropy)


@dataclass(frozen=True)
class ExecutionLog:
    """Ordered events of one execution, with its label and provenance."""

    events: tuple[IoEvent, ...] = ()
    label: Label = Label.UNLABELED
    source_id: str = ""

    def __post_init__(self):
        events = tuple(self.events)
        if any(b.timestamp_ms < a.timestamp_ms for a, b in zip(events, events[1:])):
            # sorted() is stable, so ties keep their input order
            events = tuple(sorted(events, key=lambda e: e.timestamp_ms))
        object.__setattr__(self, "events", events)

    def __len__(self) -> int:
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def __getitem__(self, idx):
        return self.events[idx]

    def replace_events(self, events: Iterable[IoEvent], source_id: str | None = None) -> "ExecutionLog":
        return ExecutionLog(tuple(events), self.label, self.source_id if source_id is None else source_id)

    def rebased(self) -> "ExecutionLog":
        """Shift timestamps so the first event sits at 0."""
        if not self.events:
            return self
        t0 = self.events[0].timestamp_ms
        return self.replace_events(e.with_timestamp(e.timestamp_ms - t0) for e in self.events)

    @property
    def duration_ms(self) -> int:
        if not self.events:
            return 0
        return self.events[-1].timestamp_ms - self.events[0].timestamp_ms


@dataclass(frozen=True)
class DecoySpec:
    keywords: tuple[str, ...] = DEFAULT_DECOY_KEYWORDS
    folders: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "keywords", tuple(self.keywords))
        object.__setattr__(self, "folders", tuple(self.folders))


def shannon_entropy(data: bytes | bytearray | memoryview | np.ndarray) -> float:
    """Normalized Shannon entropy (bits per byte / 8) of the first 1 MiB of ``data``."""
    buf = np.frombuffer(bytes(data[:ENTROPY_CAP_BYTES]), dtype=np.uint8) if not isinstance(data, np.ndarray) \
        else np.asarray(data[:ENTROPY_CAP_BYTES], dtype=np.uint8)
    if buf.size == 0:
        return 0.0
    return histogram_entropy(np.bincount(buf, minlength=256))


def histogram_entropy(counts: np.ndarray) -> float:
    """Normalized entropy of a 256-bin byte histogram."""
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        return 0.0
    p = counts[counts > 0] / total
    h = -float(np.sum(p * np.log2(p))) / 8.0
    if h <= 0.0:
        return 0.0  # single symbol; avoids returning -0.0
    return min(h, 1.0)


def file_entropy(path: str | Path) -> float:
    with open(path, "rb") as fh:
        return shannon_entropy(fh.read(ENTROPY_CAP_BYTES))


def is_decoy(event: IoEvent, spec: DecoySpec = DecoySpec()) -> bool:
    path = event.path.casefold()
    if any(k.casefold() in path for k in spec.keywords if k):
        return True
    return any(path.startswith(f.casefold()) for f in spec.folders if f)


def is_system_path(path: str, whitelist: Sequence[str] = DEFAULT_SYSTEM_WHITELIST) -> bool:
    folded = path.casefold()
    return any(folded.startswith(prefix.casefold()) for prefix in whitelist)


def decoy_mask(log: ExecutionLog | Sequence[IoEvent], spec: DecoySpec = DecoySpec()) -> np.ndarray:
    return np.fromiter((is_decoy(e, spec) for e in log), dtype=bool, count=len(log))


def first_decoy_index(log: ExecutionLog | Sequence[IoEvent], spec: DecoySpec = DecoySpec()) -> int | None:
    for i, e in enumerate(log):
        if is_decoy(e, spec):
            return i
    return None


def approx_start_time(log: ExecutionLog, spec: DecoySpec = DecoySpec()) -> int | None:
    """Timestamp of the first decoy event, a rough start of malicious activity."""
    idx = first_decoy_index(log, spec)
    return None if idx is None else log.events[idx].timestamp_ms


def _format_entropy(value: float | None) -> str:
    return "" if value is None else f"{value:.6f}"


def serialize_csv(log: ExecutionLog | Sequence[IoEvent]) -> str:
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for e in log:
        writer.writerow([e.timestamp_ms, e.kind.value, e.path, _format_entropy(e.entropy)])
    return out.getvalue()


def parse_row(row: Sequence[str], line_no: int) -> IoEvent:
    if len(row) != 4:
        raise MalformedRow(line_no, f"expected 4 columns, got {len(row)}")
    ts_raw, name, path, entropy_raw = row
    try:
        ts = int(ts_raw.strip())
    except ValueError:
        raise MalformedRow(line_no, f"unparsable timestamp {ts_raw!r}") from None
    if ts < 0:
        raise MalformedRow(line_no, "negative timestamp")
    try:
        kind = EventKind.parse(name)
    except ValueError:
        raise MalformedRow(line_no, f"unknown event name {name!r}") from None
    if not path:
        raise MalformedRow(line_no, "empty path")
    entropy = None
    if entropy_raw.strip():
        try:
            entropy = float(entropy_raw)
        except ValueError:
            raise MalformedRow(line_no, f"unparsable entropy {entropy_raw!r}") from None
        if not (0.0 <= entropy <= 1.0) or math.isnan(entropy):
            raise MalformedRow(line_no, f"entropy {entropy_raw!r} outside [0, 1]")
    return IoEvent(ts, kind, path, entropy)


def parse_csv(text: str, label: Label = Label.UNLABELED, source_id: str = "") -> ExecutionLog:
    """Parse a canonical log. Blank lines are skipped; line numbers are 1-based."""
    events = []
    reader = csv.reader(io.StringIO(text))
    for row in reader:
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        events.append(parse_row(row, reader.line_num))
    return ExecutionLog(tuple(events), label, source_id)


def read_log(path: str | Path, label: Label = Label.UNLABELED, source_id: str | None = None) -> ExecutionLog:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    return parse_csv(text, label, path.stem if source_id is None else source_id)


def write_log(log: ExecutionLog, path: str | Path) -> None:
    Path(path).write_text(serialize_csv(log), encoding="utf-8", newline="")


@dataclass(frozen=True)
class PathConfig:
    """Decoy spec and system-path whitelist loaded from a versioned JSON file."""

    decoys: DecoySpec = field(default_factory=DecoySpec)
    whitelist: tuple[str, ...] = DEFAULT_SYSTEM_WHITELIST

    def to_json(self) -> dict:
        return {
            "schema_version": CONFIG_SCHEMA_VERSION,
            "decoy_keywords": list(self.decoys.keywords),
            "decoy_folders": list(self.decoys.folders),
            "system_whitelist": list(self.whitelist),
        }

    @classmethod
    def from_json(cls, payload: dict) -> "PathConfig":
        version = payload.get("schema_version")
        if version != CONFIG_SCHEMA_VERSION:
            raise SchemaMismatch(f"config schema_version {version!r}, expected {CONFIG_SCHEMA_VERSION}")
        decoys = DecoySpec(
            tuple(payload.get("decoy_keywords", DEFAULT_DECOY_KEYWORDS)),
            tuple(payload.get("decoy_folders", ())),
        )
        return cls(decoys, tuple(payload.get("system_whitelist", DEFAULT_SYSTEM_WHITELIST)))


def load_config(path: str | Path | None) -> PathConfig:
    if path is None:
        return PathConfig()
    return PathConfig.from_json(json.loads(Path(path).read_text(encoding="utf-8")))
