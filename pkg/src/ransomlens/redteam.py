"""Synthetic ransomware and benign execution logs, gray-box attack search, and hardening.

This module never looks inside a model. Attacks see only a score oracle (any
object with ``score(x)`` or a plain callable) and a caller-supplied featurizer,
so the red team knows the feature vocabulary but not the architecture or weights.
"""

from __future__ import annotations

import enum
import functools
import logging
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Iterator, Sequence

import numpy as np

from .errors import InvalidConfig
from .eventlog import (
    DecoySpec,
    EventKind,
    ExecutionLog,
    IoEvent,
    Label,
    histogram_entropy,
    is_decoy,
    shannon_entropy,
)

log = logging.getLogger(__name__)

USER_ROOT = "c:\\Users\\alice"
DECOY_FOLDERS = ("Documents", "Downloads", "Music", "Pictures", "Videos", "Desktop")
VICTIM_EXTS = ("txt", "docx", "xlsx", "pdf", "jpg", "png", "mp3", "csv", "pptx", "zip")
OPS = ("EncryptWrite", "Rename", "Delete")
PLAINTEXT_POOL_BYTES = 1 << 20


# -- content model -------------------------------------------------------------


def _plaintext_distribution() -> np.ndarray:
    """Byte probabilities for lowercase English-like text, about 0.52 normalized entropy."""
    letters = {
        "e": 12.7, "t": 9.1, "a": 8.2, "o": 7.5, "i": 7.0, "n": 6.7, "s": 6.3, "h": 6.1, "r": 6.0,
        "d": 4.3, "l": 4.0, "c": 2.8, "u": 2.8, "m": 2.4, "w": 2.4, "f": 2.2, "g": 2.0, "y": 2.0,
        "p": 1.9, "b": 1.5, "v": 1.0, "k": 0.8, "j": 0.15, "x": 0.15, "q": 0.1, "z": 0.07,
    }
    p = np.zeros(256)
    total = sum(letters.values())
    for ch, f in letters.items():
        p[ord(ch)] += 0.78 * f / total
    p[ord(" ")] += 0.2
    for ch, f in {".": 0.01, ",": 0.007, "\n": 0.003}.items():
        p[ord(ch)] += f
    return p / p.sum()


PLAINTEXT_PROBS = _plaintext_distribution()
PLAINTEXT_ENTROPY = histogram_entropy(PLAINTEXT_PROBS * 1e9)


@functools.lru_cache(maxsize=1)
def _plaintext_pool() -> np.ndarray:
    rng = np.random.default_rng(20190101)
    return rng.choice(256, size=PLAINTEXT_POOL_BYTES, p=PLAINTEXT_PROBS).astype(np.uint8)


def synthesize_content(encrypted_fraction: float, pad_fraction: float, size: int,
                       rng: np.random.Generator) -> np.ndarray:
    """Bytes of a victim file after (partial) encryption and low-entropy padding.

    ``pad_fraction`` of the final file is constant filler; of the rest,
    ``encrypted_fraction`` is uniform pseudorandom ciphertext and the remainder
    stays plaintext.
    """
    if not (0.0 <= encrypted_fraction <= 1.0 and 0.0 <= pad_fraction <= 1.0):
        raise InvalidConfig("fractions must lie in [0, 1]")
    pad_n = int(round(pad_fraction * size))
    content_n = size - pad_n
    enc_n = int(round(encrypted_fraction * content_n))
    plain_n = content_n - enc_n
    pool = _plaintext_pool()
    start = int(rng.integers(0, len(pool) - plain_n + 1)) if plain_n else 0
    return np.concatenate([
        rng.integers(0, 256, size=enc_n, dtype=np.uint8),
        pool[start:start + plain_n],
        np.zeros(pad_n, dtype=np.uint8),
    ])


def entropy_of_mixture(encrypted_fraction: float, pad_fraction: float, size: int = 65536, seed: int = 0) -> float:
    """Entropy of a synthetic file built from the byte-level content model."""
    rng = np.random.default_rng(seed)
    return shannon_entropy(synthesize_content(encrypted_fraction, pad_fraction, size, rng))


# -- benign activity -----------------------------------------------------------


class Archetype(str, enum.Enum):
    INSTALLER = "Installer"
    UPDATER = "Updater"
    DOCUMENT_EDITOR = "DocumentEditor"
    INDEXER = "Indexer"


# Action templates: each action is a short burst of events sharing one directory.
# "C" marks a Change whose entropy is drawn from the profile histogram.
_ACTIONS: dict[Archetype, list[tuple[float, tuple[str, ...]]]] = {
    Archetype.INSTALLER: [
        (0.55, ("Create", "C", "C")),
        (0.2, ("Create", "C")),
        (0.15, ("Delete",)),
        (0.1, ("Rename",)),
    ],
    Archetype.UPDATER: [
        (0.45, ("Create", "C", "Rename", "Rename", "Delete")),
        (0.3, ("C", "Rename")),
        (0.25, ("Create", "C")),
    ],
    Archetype.DOCUMENT_EDITOR: [
        (0.45, ("Create", "C", "Delete", "Rename")),
        (0.4, ("C",)),
        (0.15, ("Create", "C", "C")),
    ],
    Archetype.INDEXER: [
        (0.7, ("C", "C")),
        (0.2, ("Create", "C")),
        (0.1, ("Delete",)),
    ],
}

_SYSTEM_DIRS = (
    "c:\\Windows\\System32", "c:\\Windows\\Temp", "c:\\Windows\\WinSxS", "c:\\ProgramData\\Vendor",
    "c:\\Program Files\\Vendor\\app", "c:\\Program Files (x86)\\Tools", "c:\\PROGRA~1\\Common",
)
_USER_DIRS = (
    USER_ROOT + "\\Documents\\work", USER_ROOT + "\\Downloads", USER_ROOT + "\\AppData\\Local\\Temp",
    USER_ROOT + "\\AppData\\Roaming\\Editor", USER_ROOT + "\\Pictures\\camera", USER_ROOT + "\\Desktop",
)
_BENIGN_STEMS = ("report", "notes", "setup", "data", "index", "cache", "draft", "budget", "photo", "module")
_BENIGN_EXTS = ("dll", "exe", "dat", "tmp", "docx", "xlsx", "db", "log", "cab", "json")

DEFAULT_ENTROPY_HIST = {
    Archetype.INSTALLER: (0.05, 0.1, 0.2, 0.35, 0.15, 0.15),
    Archetype.UPDATER: (0.05, 0.1, 0.2, 0.3, 0.15, 0.2),
    Archetype.DOCUMENT_EDITOR: (0.05, 0.15, 0.5, 0.2, 0.05, 0.05),
    Archetype.INDEXER: (0.1, 0.3, 0.35, 0.2, 0.05, 0.0),
}
DEFAULT_SYSTEM_BIAS = {
    Archetype.INSTALLER: 0.95,
    Archetype.UPDATER: 0.9,
    Archetype.DOCUMENT_EDITOR: 0.05,
    Archetype.INDEXER: 0.6,
}
_BUCKET_EDGES = (0.0, 0.2, 0.4, 0.6, 0.8, 0.9, 1.0)


@dataclass(frozen=True)
class BenignProfile:
    seed: int = 0
    app_archetype: Archetype = Archetype.INDEXER
    system_path_bias: float | None = None
    event_rate_hz: float = 10.0
    duration_s: float = 60.0
    entropy_distribution: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "app_archetype", Archetype(self.app_archetype))
        if self.system_path_bias is None:
            object.__setattr__(self, "system_path_bias", DEFAULT_SYSTEM_BIAS[self.app_archetype])
        if self.entropy_distribution is None:
            object.__setattr__(self, "entropy_distribution", DEFAULT_ENTROPY_HIST[self.app_archetype])
        hist = tuple(float(x) for x in self.entropy_distribution)
        if len(hist) != 6 or min(hist) < 0 or sum(hist) <= 0:
            raise InvalidConfig("entropy_distribution needs 6 non-negative weights")
        object.__setattr__(self, "entropy_distribution", hist)
        if not 0.0 <= self.system_path_bias <= 1.0:
            raise InvalidConfig("system_path_bias must be a probability")
        if self.event_rate_hz <= 0 or self.duration_s < 0:
            raise InvalidConfig("event_rate_hz must be positive and duration_s non-negative")

    def to_json(self) -> dict:
        d = asdict(self)
        d["app_archetype"] = self.app_archetype.value
        d["entropy_distribution"] = list(self.entropy_distribution)
        return d

    @classmethod
    def from_json(cls, payload: dict) -> "BenignProfile":
        payload = dict(payload)
        if payload.get("entropy_distribution") is not None:
            payload["entropy_distribution"] = tuple(payload["entropy_distribution"])
        return cls(**payload)


def _draw_entropy(rng: np.random.Generator, hist: np.ndarray) -> float:
    b = int(rng.choice(6, p=hist))
    lo, hi = _BUCKET_EDGES[b], _BUCKET_EDGES[b + 1]
    return round(float(rng.uniform(lo, hi if b < 5 else 1.0)), 6)


def benign_actions(profile: BenignProfile, rng: np.random.Generator) -> Iterator[list[tuple[EventKind, str, float | None]]]:
    """Endless stream of benign actions, each a list of (kind, path, entropy)."""
    templates = _ACTIONS[profile.app_archetype]
    weights = np.array([w for w, _ in templates])
    weights /= weights.sum()
    hist = np.array(profile.entropy_distribution)
    hist /= hist.sum()
    while True:
        _, steps = templates[int(rng.choice(len(templates), p=weights))]
        dirs = _SYSTEM_DIRS if rng.random() < profile.system_path_bias else _USER_DIRS
        folder = dirs[int(rng.integers(len(dirs)))]
        stem = _BENIGN_STEMS[int(rng.integers(len(_BENIGN_STEMS)))]
        ext = _BENIGN_EXTS[int(rng.integers(len(_BENIGN_EXTS)))]
        path = f"{folder}\\{stem}_{int(rng.integers(1000))}.{ext}"
        action = []
        for step in steps:
            if step == "C":
                action.append((EventKind.CHANGE, path, _draw_entropy(rng, hist)))
            else:
                action.append((EventKind(step), path, None))
        yield action


def benign_events(profile: BenignProfile, rng: np.random.Generator) -> Iterator[tuple[EventKind, str, float | None]]:
    for action in benign_actions(profile, rng):
        yield from action


def simulate_benign(profile: BenignProfile) -> ExecutionLog:
    """Archetype-driven benign log. Paths never contain decoy keywords."""
    rng = np.random.default_rng(profile.seed)
    horizon = profile.duration_s * 1000.0
    events: list[IoEvent] = []
    t = 0.0
    for action in benign_actions(profile, rng):
        t += rng.exponential(1000.0 * len(action) / profile.event_rate_hz)
        if t >= horizon:
            break
        ts = t
        for kind, path, entropy in action:
            if ts >= horizon:
                break
            events.append(IoEvent(int(ts), kind, path, entropy))
            ts += rng.uniform(0.5, 4.0)
        t = ts
    return ExecutionLog(tuple(events), Label.BENIGN, f"benign-{profile.app_archetype.value}-{profile.seed}")


# -- ransomware ------------------------------------------------------------------


AMBIENT_PROFILE = BenignProfile(seed=0, app_archetype=Archetype.INDEXER, system_path_bias=0.5,
                                event_rate_hz=10.0, duration_s=0.0)


@dataclass(frozen=True)
class RedTeamConfig:
    """Knobs of the simulated ransomware.

    ``ops_mix`` weights are per-victim inclusion probabilities after scaling by
    the largest weight; every victim gets at least one operation.
    """

    seed: int = 0
    victim_count: int = 50
    ops_mix: dict[str, float] = field(default_factory=lambda: {"EncryptWrite": 1.0, "Rename": 0.8, "Delete": 0.2})
    benign_insert_count: int = 0
    sleep_gap_ms: int = 0
    ambient_rate_hz: float = 10.0
    partial_encrypt_fraction: float = 1.0
    pad_low_entropy_fraction: float = 0.0
    start_delay_ms: int = 0
    tail_ms: int = 0
    op_gap_ms: int = 30

    def validate(self) -> None:
        if self.victim_count < 1:
            raise InvalidConfig("victim_count must be >= 1")
        for name in ("benign_insert_count", "sleep_gap_ms", "start_delay_ms", "tail_ms", "op_gap_ms"):
            if getattr(self, name) < 0:
                raise InvalidConfig(f"{name} must be non-negative")
        if self.ambient_rate_hz < 0:
            raise InvalidConfig("ambient_rate_hz must be non-negative")
        for name in ("partial_encrypt_fraction", "pad_low_entropy_fraction"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise InvalidConfig(f"{name} must lie in [0, 1]")
        unknown = set(self.ops_mix) - set(OPS)
        if unknown:
            raise InvalidConfig(f"unknown operations {sorted(unknown)}")
        weights = [self.ops_mix.get(op, 0.0) for op in OPS]
        if min(weights) < 0 or max(weights) <= 0:
            raise InvalidConfig("ops_mix needs non-negative weights with a positive maximum")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, payload: dict) -> "RedTeamConfig":
        return cls(**payload)

    def with_seed(self, seed: int) -> "RedTeamConfig":
        return replace(self, seed=seed)


def decoy_path(decoys: DecoySpec, k: int, rng: np.random.Generator) -> str:
    ext = VICTIM_EXTS[int(rng.integers(len(VICTIM_EXTS)))]
    keyword = decoys.keywords[0] if decoys.keywords else "file"
    if decoys.folders:
        parent = decoys.folders[k % len(decoys.folders)].rstrip("\\")
    else:
        parent = f"{USER_ROOT}\\{DECOY_FOLDERS[k % len(DECOY_FOLDERS)]}"
    return f"{parent}\\{keyword}{k}.{ext}"


def _victim_ops(cfg: RedTeamConfig, rng: np.random.Generator) -> list[str]:
    weights = np.array([cfg.ops_mix.get(op, 0.0) for op in OPS], dtype=float)
    incl = weights / weights.max()
    ops = [op for op, p in zip(OPS, incl) if rng.random() < p]
    if not ops:
        ops = [OPS[int(rng.choice(3, p=weights / weights.sum()))]]
    return ops


def simulate_ransomware(cfg: RedTeamConfig, decoys: DecoySpec = DecoySpec(),
                        ambient: BenignProfile = AMBIENT_PROFILE) -> ExecutionLog:
    """Synthesize one ransomware run.

    Timeline: ambient activity for ``start_delay_ms``, then the malicious phase
    (every malicious event targets a decoy file; ``benign_insert_count`` benign
    events between consecutive malicious events; sleep gaps filled with ambient
    events), then ``tail_ms`` of ambient activity.
    """
    cfg.validate()
    if not decoys.keywords and not decoys.folders:
        raise InvalidConfig("decoy spec must name a keyword or folder so malicious events self-label")
    rng = np.random.default_rng(cfg.seed)
    amb = benign_events(ambient, np.random.default_rng(int(rng.integers(2**31))))
    events: list[IoEvent] = []
    t = 0.0

    def emit(kind, path, entropy):
        events.append(IoEvent(int(t), kind, path, entropy))

    def ambient_until(end: float):
        nonlocal t
        if cfg.ambient_rate_hz <= 0:
            t = max(t, end)
            return
        while True:
            nxt = t + rng.exponential(1000.0 / cfg.ambient_rate_hz)
            if nxt >= end:
                break
            t = nxt
            emit(*next(amb))
        t = max(t, end)

    ambient_until(float(cfg.start_delay_ms))
    malicious: list[tuple[EventKind, str, float | None]] = []
    for k in range(cfg.victim_count):
        path = decoy_path(decoys, k, rng)
        for op in _victim_ops(cfg, rng):
            if op == "EncryptWrite":
                size = int(rng.integers(4096, 16385))
                content = synthesize_content(cfg.partial_encrypt_fraction, cfg.pad_low_entropy_fraction, size, rng)
                malicious.append((EventKind.CHANGE, path, round(shannon_entropy(content), 6)))
            else:
                malicious.append((EventKind(op), path, None))
    for j, (kind, path, entropy) in enumerate(malicious):
        if j:
            step = cfg.op_gap_ms * rng.uniform(0.5, 1.5)
            for _ in range(cfg.benign_insert_count):
                t += step / (cfg.benign_insert_count + 1)
                emit(*next(amb))
            if cfg.sleep_gap_ms:
                ambient_until(t + cfg.sleep_gap_ms)
            t += step / (cfg.benign_insert_count + 1)
        emit(kind, path, entropy)
    ambient_until(t + cfg.tail_ms)
    return ExecutionLog(tuple(events), Label.RANSOMWARE, f"rt-{cfg.seed}")


# -- attacks ----------------------------------------------------------------------


@dataclass
class AttackOutcome:
    config: RedTeamConfig
    score: float
    evaded: bool
    log_ref: str
    log: ExecutionLog | None = field(default=None, repr=False)

    def to_json(self) -> dict:
        return {"config": self.config.to_json(), "score": self.score, "evaded": self.evaded, "log_ref": self.log_ref}


def _oracle(model) -> Callable[[Any], float]:
    if hasattr(model, "score"):
        return model.score
    if callable(model):
        return model
    raise TypeError("model must be callable or expose score()")


def attack_search(model, grid: Sequence[RedTeamConfig], decoys: DecoySpec, featurizer: Callable[[ExecutionLog], Any],
                  threshold: float = 0.5, ambient: BenignProfile = AMBIENT_PROFILE) -> list[AttackOutcome]:
    """Generate, featurize, and score one log per config; evaded means scored below threshold."""
    score = _oracle(model)
    outcomes = []
    for cfg in grid:
        rt_log = simulate_ransomware(cfg, decoys, ambient)
        s = float(score(featurizer(rt_log)))
        outcomes.append(AttackOutcome(cfg, s, s < threshold, rt_log.source_id, rt_log))
    return outcomes


def evasion_rate(outcomes: Sequence[AttackOutcome]) -> float:
    return float(np.mean([o.evaded for o in outcomes])) if outcomes else 0.0


@dataclass
class HardeningResult:
    model: Any
    evasion_rates: list[float]
    baseline_rate: float
    dataset_growth: list[int]
    outcomes: list[list[AttackOutcome]] = field(default_factory=list, repr=False)

    def __iter__(self):
        # unpacks as (model, evasion_rates)
        return iter((self.model, self.evasion_rates))

    def to_json(self) -> dict:
        return {
            "baseline_evasion_rate": self.baseline_rate,
            "evasion_rates": self.evasion_rates,
            "dataset_growth": self.dataset_growth,
            "rounds": [[o.to_json() for o in round_] for round_ in self.outcomes],
        }


def adversarial_retrain(model, base_dataset: Sequence[ExecutionLog], grid: Sequence[RedTeamConfig], rounds: int,
                        *, train_fn: Callable[[list[ExecutionLog]], Any], featurizer: Callable[[ExecutionLog], Any],
                        decoys: DecoySpec = DecoySpec(), heldout_grid: Sequence[RedTeamConfig] | None = None,
                        threshold: float = 0.5, ambient: BenignProfile = AMBIENT_PROFILE,
                        round_seed_stride: int = 1_000) -> HardeningResult:
    """Attack, collect evading logs as ransomware, retrain from scratch; repeat.

    Round ``k`` attacks with every grid seed shifted by ``k * round_seed_stride``,
    so later rounds probe fresh samples of the same tricks instead of replaying
    logs that are already in the training set. ``evasion_rates[k]`` is the
    held-out-grid evasion rate of the model after round ``k``; ``baseline_rate``
    is the same measure for the input model.
    """
    if rounds < 1:
        raise ValueError("rounds must be >= 1")
    heldout = list(heldout_grid) if heldout_grid is not None else list(grid)
    dataset = list(base_dataset)
    current = model
    baseline = evasion_rate(attack_search(current, heldout, decoys, featurizer, threshold, ambient))
    rates, growth, history = [], [], []
    for r in range(rounds):
        probes = [c.with_seed(c.seed + r * round_seed_stride) for c in grid]
        outcomes = attack_search(current, probes, decoys, featurizer, threshold, ambient)
        evading = [o.log for o in outcomes if o.evaded]
        history.append(outcomes)
        growth.append(len(evading))
        if evading:
            dataset.extend(evading)
            current = train_fn(dataset)
        rate = evasion_rate(attack_search(current, heldout, decoys, featurizer, threshold, ambient))
        rates.append(rate)
        log.info("hardening round %d: %d evading configs, held-out evasion %.3f", r + 1, len(evading), rate)
    return HardeningResult(current, rates, baseline, growth, history)


def evasion_grid(seed: int = 0, victims: int = 40) -> list[RedTeamConfig]:
    """Sweep of the evasive axes: tempo dilution, sleeping, partial encryption, padding."""
    grid = [RedTeamConfig(seed=seed, victim_count=victims)]
    s = seed + 1
    for inserts in (2, 4, 6, 8, 10):
        grid.append(RedTeamConfig(seed=s, victim_count=victims, benign_insert_count=inserts))
        s += 1
    for sleep in (200, 500, 1000):
        grid.append(RedTeamConfig(seed=s, victim_count=victims, sleep_gap_ms=sleep, ambient_rate_hz=10.0))
        s += 1
    for enc in (0.5, 0.3, 0.1):
        grid.append(RedTeamConfig(seed=s, victim_count=victims, partial_encrypt_fraction=enc))
        s += 1
    for pad in (0.3, 0.6, 1.0):
        grid.append(RedTeamConfig(seed=s, victim_count=victims, pad_low_entropy_fraction=pad))
        s += 1
    for inserts, enc in ((4, 0.3), (6, 0.5)):
        grid.append(RedTeamConfig(seed=s, victim_count=victims, benign_insert_count=inserts,
                                  partial_encrypt_fraction=enc))
        s += 1
    return grid


def log_has_decoy(log_: ExecutionLog, decoys: DecoySpec = DecoySpec()) -> bool:
    return any(is_decoy(e, decoys) for e in log_)
