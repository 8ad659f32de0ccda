"""Block bootstrapping and keyed augmentation of execution logs.

Bootstrapping cuts each log into early-stage prefixes (first N seconds) and
then end-anchored windows of a fixed number of events. Keyed augmentation edits
a log while treating human-marked "key" events, and contiguous key groups, as
blocks that must survive every edit intact.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Sequence

import numpy as np

from .errors import KeyViolation
from .eventlog import DecoySpec, ExecutionLog, IoEvent, Label, decoy_mask

DEFAULT_PERIODS_S = (1, 5, 10, 20, 40, 80, 160)
DEFAULT_WINDOWS = (250, 500, 1000)


class Method(str, enum.Enum):
    EARLY_SLICE = "EarlySlice"
    SLIDING_WINDOW = "SlidingWindow"
    REPLACE = "Replace"
    DELETE = "Delete"
    INSERT = "Insert"
    PERMUTE = "Permute"
    PRUNE = "Prune"
    KEYED_WINDOW = "KeyedWindow"


class PermuteMode(str, enum.Enum):
    RELOCATE = "Relocate"
    REVERSE = "Reverse"
    SHUFFLE = "Shuffle"


class PruneSide(str, enum.Enum):
    HEAD = "Head"
    TAIL = "Tail"
    BOTH = "Both"


@dataclass(frozen=True)
class KeySpec:
    key_indices: frozenset[int]
    key_groups: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "key_indices", frozenset(int(i) for i in self.key_indices))
        groups = tuple(tuple(int(i) for i in g) for g in self.key_groups)
        seen: set[int] = set()
        for g in groups:
            if not g:
                raise ValueError("empty key group")
            if list(g) != list(range(g[0], g[0] + len(g))):
                raise ValueError(f"key group {g} is not a contiguous ascending run")
            if seen.intersection(g):
                raise ValueError("key groups overlap")
            seen.update(g)
        if not seen <= self.key_indices:
            raise ValueError("key group members must also be key indices")
        object.__setattr__(self, "key_groups", groups)

    @property
    def protected(self) -> frozenset[int]:
        return self.key_indices

    def group_of(self, idx: int) -> tuple[int, ...] | None:
        for g in self.key_groups:
            if g[0] <= idx <= g[-1]:
                return g
        return None


@dataclass(frozen=True)
class AugmentedSample:
    log: ExecutionLog
    origin: str
    method: Method
    params: dict[str, Any] = field(default_factory=dict)
    # key positions in the output log, for keyed methods
    keyspec: KeySpec | None = None

    def to_json(self) -> dict:
        return {
            "source_id": self.log.source_id,
            "origin": self.origin,
            "method": self.method.value,
            "label": self.log.label.value,
            "params": self.params,
        }


def keyspec_from_decoys(log: ExecutionLog, spec: DecoySpec = DecoySpec()) -> KeySpec:
    """Decoy events become keys; consecutive decoy events on the same path form a key group."""
    mask = decoy_mask(log, spec)
    keys = np.flatnonzero(mask).tolist()
    groups = []
    run: list[int] = []
    for i in keys:
        if run and i == run[-1] + 1 and log[i].path == log[run[-1]].path:
            run.append(i)
            continue
        if len(run) > 1:
            groups.append(tuple(run))
        run = [i]
    if len(run) > 1:
        groups.append(tuple(run))
    return KeySpec(frozenset(keys), tuple(groups))


# -- block bootstrapping ---------------------------------------------------


def slice_early(log: ExecutionLog, period_s: int) -> ExecutionLog:
    if period_s <= 0:
        raise ValueError("period_s must be positive")
    cutoff = period_s * 1000
    return log.replace_events(e for e in log.events if e.timestamp_ms < cutoff)


def slide_windows(log: ExecutionLog, window_steps: int, stride: int | None = None) -> list[ExecutionLog]:
    """End-anchored windows of ``window_steps`` events, timestamps re-based per window.

    With ``stride`` set, further windows are taken stepping back from the end by
    ``stride`` events; output is in chronological order.
    """
    if window_steps <= 0:
        raise ValueError("window_steps must be positive")
    n = len(log)
    if n <= window_steps:
        return [log.rebased()]
    ends = [n]
    if stride is not None:
        if stride <= 0:
            raise ValueError("stride must be positive")
        ends = list(range(n, window_steps - 1, -stride))
    return [log.replace_events(log.events[end - window_steps:end]).rebased() for end in reversed(ends)]


def bootstrap_log(log: ExecutionLog, periods: Sequence[int] = DEFAULT_PERIODS_S,
                  windows: Sequence[int] | None = DEFAULT_WINDOWS,
                  spec: DecoySpec = DecoySpec()) -> list[AugmentedSample]:
    if log.label is Label.UNLABELED:
        raise ValueError(f"log {log.source_id!r} is unlabeled")
    out = []
    for period in periods:
        early = slice_early(log, period)
        if not windows:
            candidates = [(early, Method.EARLY_SLICE, {"period_s": period})]
        else:
            candidates = [(slide_windows(early, w)[0], Method.SLIDING_WINDOW,
                           {"period_s": period, "window_steps": w}) for w in windows]
        for sample_log, method, params in candidates:
            if len(sample_log) == 0:
                continue
            if log.label is Label.RANSOMWARE and not decoy_mask(sample_log, spec).any():
                continue
            suffix = "_".join(f"{v}" for v in params.values())
            sample_log = sample_log.replace_events(sample_log.events, f"{log.source_id}@{suffix}")
            out.append(AugmentedSample(sample_log, log.source_id, method, params))
    return out


def bootstrap_dataset(logs: Iterable[ExecutionLog], periods: Sequence[int] = DEFAULT_PERIODS_S,
                      windows: Sequence[int] | None = DEFAULT_WINDOWS,
                      spec: DecoySpec = DecoySpec()) -> list[AugmentedSample]:
    """Early slices crossed with end-anchored windows for every log.

    Ransomware samples without any decoy event are dropped; benign samples are
    never filtered. With ``windows`` empty, the early slices themselves are emitted.
    """
    out: list[AugmentedSample] = []
    for log in logs:
        out.extend(bootstrap_log(log, periods, windows, spec))
    return out


# -- keyed augmentation ----------------------------------------------------


def _median_gap(log: ExecutionLog) -> int:
    if len(log) < 2:
        return 1
    ts = np.fromiter((e.timestamp_ms for e in log), dtype=np.int64, count=len(log))
    return max(1, int(np.median(np.diff(ts))))


def _units(n: int, keyspec: KeySpec) -> list[list[int]]:
    """Partition positions 0..n-1 into movable blocks: key groups and single events."""
    starts = {g[0]: g for g in keyspec.key_groups}
    units, i = [], 0
    while i < n:
        if i in starts:
            units.append(list(starts[i]))
            i += len(starts[i])
        else:
            units.append([i])
            i += 1
    return units


def _check_keys(log: ExecutionLog, keyspec: KeySpec) -> None:
    if not keyspec.key_indices:
        raise KeyViolation("log has no key observations to preserve")
    if max(keyspec.key_indices) >= len(log) or min(keyspec.key_indices) < 0:
        raise KeyViolation("key index outside the log")


def _check_untouched(positions: Iterable[int], keyspec: KeySpec, n: int) -> list[int]:
    positions = sorted(set(int(p) for p in positions))
    for p in positions:
        if not 0 <= p < n:
            raise IndexError(f"position {p} outside log of length {n}")
        if p in keyspec.key_indices:
            raise KeyViolation(f"position {p} is a key observation")
    return positions


def _assemble(log: ExecutionLog, items: list[tuple[IoEvent, int | None]], keyspec: KeySpec,
              method: Method, params: dict) -> AugmentedSample:
    """Build the output from (event, source position or None) pairs, re-timing monotonically."""
    gap = _median_gap(log)
    events = [ev.with_timestamp(i * gap) for i, (ev, _) in enumerate(items)]
    where = {src: i for i, (_, src) in enumerate(items) if src is not None}
    keys = frozenset(where[k] for k in keyspec.key_indices)
    groups = tuple(tuple(where[k] for k in g) for g in keyspec.key_groups)
    out_spec = KeySpec(keys, groups)
    for g in groups:
        if list(g) != list(range(g[0], g[0] + len(g))):
            raise KeyViolation("edit would split a key group")
    new_log = log.replace_events(events, f"{log.source_id}#{method.value.lower()}")
    return AugmentedSample(new_log, log.source_id, method, params, out_spec)


def keyed_replace(log: ExecutionLog, keyspec: KeySpec, positions: Iterable[int],
                  pool: Sequence[IoEvent], seed: int = 0) -> AugmentedSample:
    _check_keys(log, keyspec)
    positions = _check_untouched(positions, keyspec, len(log))
    if positions and not pool:
        raise ValueError("replacement pool is empty")
    rng = np.random.default_rng(seed)
    picks = dict(zip(positions, rng.integers(0, len(pool), size=len(positions)).tolist()))
    items = [(pool[picks[i]] if i in picks else e, i) for i, e in enumerate(log.events)]
    return _assemble(log, items, keyspec, Method.REPLACE, {"positions": positions, "seed": seed})


def keyed_delete(log: ExecutionLog, keyspec: KeySpec, positions: Iterable[int]) -> AugmentedSample:
    _check_keys(log, keyspec)
    positions = _check_untouched(positions, keyspec, len(log))
    drop = set(positions)
    items = [(e, i) for i, e in enumerate(log.events) if i not in drop]
    return _assemble(log, items, keyspec, Method.DELETE, {"positions": positions})


def keyed_insert(log: ExecutionLog, keyspec: KeySpec, position: int,
                 events: Sequence[IoEvent]) -> AugmentedSample:
    """Insert ``events`` before index ``position`` (``len(log)`` appends)."""
    _check_keys(log, keyspec)
    if not 0 <= position <= len(log):
        raise IndexError(f"insert position {position} outside [0, {len(log)}]")
    for g in keyspec.key_groups:
        if g[0] < position <= g[-1]:
            raise KeyViolation(f"insert position {position} is inside key group {g}")
    items = [(e, i) for i, e in enumerate(log.events)]
    items[position:position] = [(e, None) for e in events]
    return _assemble(log, items, keyspec, Method.INSERT, {"position": position, "count": len(events)})


def keyed_interleave(log: ExecutionLog, keyspec: KeySpec, per_gap: int,
                     pool: Sequence[IoEvent]) -> AugmentedSample:
    """Insert ``per_gap`` pool events between every pair of consecutive key blocks.

    The same leading pool events are used in every gap, so raising ``per_gap``
    only adds events and never swaps earlier ones.
    """
    _check_keys(log, keyspec)
    if per_gap < 0:
        raise ValueError("per_gap must be non-negative")
    if per_gap > len(pool):
        raise ValueError("pool smaller than per_gap")
    units = _units(len(log), keyspec)
    key_units = [k for k, u in enumerate(units) if u[0] in keyspec.key_indices]
    after = set(key_units[:-1])
    items: list[tuple[IoEvent, int | None]] = []
    for k, u in enumerate(units):
        items.extend((log.events[i], i) for i in u)
        if k in after:
            items.extend((e, None) for e in pool[:per_gap])
    return _assemble(log, items, keyspec, Method.INSERT, {"per_gap": per_gap})


def keyed_permute(log: ExecutionLog, keyspec: KeySpec, mode: PermuteMode | str,
                  seed: int = 0) -> AugmentedSample:
    """Reorder blocks; each key group moves as one unit.

    Relocate moves the second half of the log (split at the block boundary
    nearest the midpoint) in front of the first half.
    """
    _check_keys(log, keyspec)
    mode = PermuteMode(mode)
    units = _units(len(log), keyspec)
    if mode is PermuteMode.REVERSE:
        order = units[::-1]
    elif mode is PermuteMode.SHUFFLE:
        rng = np.random.default_rng(seed)
        order = [units[k] for k in rng.permutation(len(units))]
    else:
        bounds = np.cumsum([len(u) for u in units])
        split = int(np.argmin(np.abs(bounds - len(log) / 2))) + 1
        order = units[split:] + units[:split]
    items = [(log.events[i], i) for u in order for i in u]
    return _assemble(log, items, keyspec, Method.PERMUTE, {"mode": mode.value, "seed": seed})


def keyed_prune(log: ExecutionLog, keyspec: KeySpec, side: PruneSide | str, count: int) -> AugmentedSample:
    _check_keys(log, keyspec)
    side = PruneSide(side)
    if count < 0:
        raise ValueError("count must be non-negative")
    n = len(log)
    drop: set[int] = set()
    if side in (PruneSide.HEAD, PruneSide.BOTH):
        drop.update(range(min(count, n)))
    if side in (PruneSide.TAIL, PruneSide.BOTH):
        drop.update(range(max(n - count, 0), n))
    hit = drop & keyspec.key_indices
    if hit:
        raise KeyViolation(f"pruning would drop key observation(s) {sorted(hit)[:5]}")
    items = [(e, i) for i, e in enumerate(log.events) if i not in drop]
    return _assemble(log, items, keyspec, Method.PRUNE, {"side": side.value, "count": count})


def keyed_window(log: ExecutionLog, keyspec: KeySpec, start: int, length: int) -> AugmentedSample:
    """Extract ``log[start:start+length]``; must hold a key and not cut a key group."""
    _check_keys(log, keyspec)
    stop = min(start + length, len(log))
    if not 0 <= start < stop:
        raise IndexError("empty or out-of-range window")
    for g in keyspec.key_groups:
        inside = [start <= i < stop for i in g]
        if any(inside) and not all(inside):
            raise KeyViolation(f"window [{start}, {stop}) cuts key group {g}")
    sub_keys = {k for k in keyspec.key_indices if start <= k < stop}
    if not sub_keys:
        raise KeyViolation("window holds no key observation")
    sub_spec = KeySpec(frozenset(sub_keys), tuple(g for g in keyspec.key_groups if start <= g[0] < stop))
    items = [(log.events[i], i) for i in range(start, stop)]
    return _assemble(log, items, sub_spec, Method.KEYED_WINDOW, {"start": start, "length": length})


def contains_group_in_order(log: ExecutionLog, group_events: Sequence[IoEvent]) -> bool:
    """True if ``group_events`` occur as a contiguous run in ``log`` (timestamps ignored)."""
    sig = [(e.kind, e.path, e.entropy) for e in group_events]
    rows = [(e.kind, e.path, e.entropy) for e in log.events]
    m = len(sig)
    return any(rows[i:i + m] == sig for i in range(len(rows) - m + 1))
