"""Synthetic corpora, dataset assembly, and the end-to-end experiment pipeline.

Everything here is orchestration over the other modules: it builds labeled
corpora with the simulator, bootstraps and featurizes them, trains both model
kinds, and runs the evaluation, attack, and hardening stages.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from .augment import DEFAULT_PERIODS_S, DEFAULT_WINDOWS, bootstrap_dataset
from .eventlog import DecoySpec, ExecutionLog, Label
from .features import FeatureAlphabet, Featurizer
from .models import EvalReport, TrainConfig, evaluate, train_linear, train_lstm
from .redteam import (
    AMBIENT_PROFILE,
    Archetype,
    BenignProfile,
    RedTeamConfig,
    adversarial_retrain,
    attack_search,
    evasion_grid,
    evasion_rate,
    simulate_benign,
    simulate_ransomware,
)

log = logging.getLogger(__name__)

# Hard negatives write high-entropy files in user folders: an editor saving
# compressed documents and an installer unpacking archives into a user profile.
COMPRESSED_DOC_HIST = (0.05, 0.1, 0.2, 0.15, 0.2, 0.3)
USER_INSTALL_HIST = (0.02, 0.03, 0.1, 0.15, 0.3, 0.4)

_OPS_VARIANTS = (
    {"EncryptWrite": 1.0, "Rename": 0.8, "Delete": 0.2},
    {"EncryptWrite": 1.0, "Rename": 1.0},
    {"EncryptWrite": 1.0, "Delete": 1.0},
    {"EncryptWrite": 1.0},
)


def mild_redteam_configs(n: int, seed: int = 0) -> list[RedTeamConfig]:
    """Ransomware configs with light evasion, variable onset, and ambient tails."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        enc = 1.0 if rng.random() < 0.7 else float(rng.uniform(0.6, 1.0))
        pad = 0.0 if rng.random() < 0.8 else float(rng.uniform(0.0, 0.2))
        out.append(RedTeamConfig(
            seed=seed * 100_003 + i,
            victim_count=int(rng.integers(60, 301)),
            ops_mix=dict(_OPS_VARIANTS[int(rng.integers(len(_OPS_VARIANTS)))]),
            benign_insert_count=int(rng.choice([0, 0, 0, 1, 2])),
            sleep_gap_ms=int(rng.choice([0, 0, 0, 50, 100])),
            ambient_rate_hz=float(rng.uniform(5.0, 15.0)),
            partial_encrypt_fraction=round(enc, 3),
            pad_low_entropy_fraction=round(pad, 3),
            start_delay_ms=int(rng.integers(0, 30_001)),
            tail_ms=int(rng.integers(0, 5_001)),
            op_gap_ms=int(rng.integers(15, 61)),
        ))
    return out


def benign_profiles(n: int, seed: int = 0, hard_fraction: float = 0.25,
                    archetype_weights: dict[Archetype, float] | None = None) -> list[BenignProfile]:
    """Mixed-archetype benign profiles; ``hard_fraction`` of them write high-entropy user files."""
    rng = np.random.default_rng(seed)
    archetypes = list(Archetype)
    weights = np.array([(archetype_weights or {}).get(a, 1.0) for a in archetypes], dtype=float)
    weights /= weights.sum()
    out = []
    for i in range(n):
        arch = archetypes[int(rng.choice(len(archetypes), p=weights))]
        profile = BenignProfile(
            seed=seed * 100_003 + i,
            app_archetype=arch,
            event_rate_hz=float(rng.uniform(5.0, 20.0)),
            duration_s=float(rng.uniform(30.0, 120.0)),
        )
        if rng.random() < hard_fraction:
            if rng.random() < 0.5:
                profile = replace(profile, app_archetype=Archetype.DOCUMENT_EDITOR, system_path_bias=0.05,
                                  entropy_distribution=COMPRESSED_DOC_HIST)
            else:
                profile = replace(profile, app_archetype=Archetype.INSTALLER, system_path_bias=float(rng.uniform(0.0, 0.3)),
                                  entropy_distribution=USER_INSTALL_HIST)
        out.append(profile)
    return out


@dataclass(frozen=True)
class CorpusConfig:
    n_ransomware: int = 400
    n_benign: int = 400
    seed: int = 0
    hard_fraction: float = 0.25

    def to_json(self) -> dict:
        return asdict(self)


def generate_corpus(cfg: CorpusConfig, decoys: DecoySpec = DecoySpec()) -> list[ExecutionLog]:
    logs = [simulate_ransomware(c, decoys) for c in mild_redteam_configs(cfg.n_ransomware, cfg.seed)]
    logs += [simulate_benign(p) for p in benign_profiles(cfg.n_benign, cfg.seed + 1, cfg.hard_fraction)]
    return logs


def split_logs(logs: Sequence[ExecutionLog], test_fraction: float = 0.25,
               seed: int = 0) -> tuple[list[ExecutionLog], list[ExecutionLog]]:
    """Stratified split by label at the log level, so no log leaks across folds."""
    rng = np.random.default_rng(seed)
    train, test = [], []
    for label in (Label.RANSOMWARE, Label.BENIGN):
        group = [g for g in logs if g.label is label]
        order = rng.permutation(len(group))
        n_test = int(round(test_fraction * len(group)))
        test += [group[i] for i in order[:n_test]]
        train += [group[i] for i in order[n_test:]]
    return train, test


SliceKey = tuple[int, int]


def bootstrap_logs(logs: Sequence[ExecutionLog], periods: Sequence[int] = DEFAULT_PERIODS_S,
                   windows: Sequence[int] = DEFAULT_WINDOWS,
                   decoys: DecoySpec = DecoySpec()) -> list[tuple[ExecutionLog, SliceKey | None]]:
    samples = bootstrap_dataset(logs, periods, windows, decoys)
    return [(s.log, (s.params["period_s"], s.params.get("window_steps", 0))) for s in samples]


def featurize_dataset(items: Sequence[tuple[ExecutionLog, SliceKey | None]], featurize: Callable,
                      dedupe: bool = False) -> list[tuple]:
    """(x, label, slice) triples. ``dedupe`` drops repeated (features, label) pairs, keeping the first."""
    out, seen = [], set()
    for lg, key in items:
        x = featurize(lg)
        label = lg.label.is_positive
        if dedupe:
            raw = x.counts if hasattr(x, "counts") else x.ids
            fp = (raw.tobytes(), label)
            if fp in seen:
                continue
            seen.add(fp)
        out.append((x, label, key))
    return out


@dataclass(frozen=True)
class ModelSpec:
    """Which model to train and how: the kind, alphabet, and whether to bootstrap the training logs."""

    kind: str = "lstm"
    path_flag: bool = False
    bootstrap: bool = True
    train: TrainConfig = TrainConfig()
    periods: tuple[int, ...] = DEFAULT_PERIODS_S
    windows: tuple[int, ...] = DEFAULT_WINDOWS

    def featurizer(self) -> Featurizer:
        max_events = self.train.max_sequence_len if self.kind == "lstm" else None
        return Featurizer(FeatureAlphabet(self.path_flag), max_events=max_events)

    def featurize_fn(self) -> Callable:
        f = self.featurizer()
        return f.ngrams if self.kind == "linear" else f.sequence

    def to_json(self) -> dict:
        d = asdict(self)
        d["train"] = self.train.to_json()
        return d


DEFAULT_LSTM_TRAIN = TrainConfig(seed=0, epochs=20, learning_rate=0.01, lr_decay=0.9, batch_size=64, dropout=0.5,
                                 weight_decay=0.003, max_sequence_len=1000)
DEFAULT_LINEAR_TRAIN = TrainConfig(seed=0, epochs=20, lam=1e-4)


def train_on_logs(spec: ModelSpec, logs: Sequence[ExecutionLog], decoys: DecoySpec = DecoySpec()):
    """Bootstrap (or not), featurize, deduplicate, and train one model."""
    items = bootstrap_logs(logs, spec.periods, spec.windows, decoys) if spec.bootstrap else [(g, None) for g in logs]
    data = featurize_dataset(items, spec.featurize_fn(), dedupe=True)
    pairs = [(x, y) for x, y, _ in data]
    alphabet = FeatureAlphabet(spec.path_flag)
    if spec.kind == "linear":
        return train_linear(pairs, spec.train, alphabet)
    if spec.kind == "lstm":
        return train_lstm(pairs, spec.train, alphabet)
    raise ValueError(f"unknown model kind {spec.kind!r}")


def evaluate_on_logs(model, spec: ModelSpec, logs: Sequence[ExecutionLog], decoys: DecoySpec = DecoySpec(),
                     threshold: float = 0.5, bootstrap: bool = True) -> EvalReport:
    items = bootstrap_logs(logs, spec.periods, spec.windows, decoys) if bootstrap else [(g, None) for g in logs]
    data = featurize_dataset(items, spec.featurize_fn())
    slices = sorted({k for _, _, k in data if k is not None}) or None
    return evaluate(model, data, slices, threshold)


# -- pipeline -------------------------------------------------------------------------


@dataclass(frozen=True)
class PipelineConfig:
    corpus: CorpusConfig = CorpusConfig()
    test_fraction: float = 0.25
    lstm_train: TrainConfig = DEFAULT_LSTM_TRAIN
    linear_train: TrainConfig = DEFAULT_LINEAR_TRAIN
    harden_kind: str = "lstm"
    harden_rounds: int = 3
    grid_victims: int = 40
    threshold: float = 0.5

    def to_json(self) -> dict:
        return {
            "corpus": self.corpus.to_json(),
            "test_fraction": self.test_fraction,
            "lstm_train": self.lstm_train.to_json(),
            "linear_train": self.linear_train.to_json(),
            "harden_kind": self.harden_kind,
            "harden_rounds": self.harden_rounds,
            "grid_victims": self.grid_victims,
            "threshold": self.threshold,
        }


@dataclass
class ExperimentReport:
    config: dict
    corpus_sizes: dict[str, int]
    evaluations: dict[str, dict]
    attack: dict[str, Any]
    hardening: dict[str, Any]
    timings_s: dict[str, float] = field(default_factory=dict)

    def to_json(self) -> dict:
        return asdict(self)

    def table(self) -> str:
        lines = [f"{'model':<22}{'accuracy':>10}{'FPR':>8}{'TPR':>8}"]
        for name, ev in self.evaluations.items():
            lines.append(f"{name:<22}{ev['accuracy']:>10.4f}{ev['false_positive_rate']:>8.4f}"
                         f"{ev['true_positive_rate']:>8.4f}")
        lines.append("")
        lines.append(f"naive-model evasion rate: {self.attack['evasion_rate']:.3f}")
        rates = ", ".join(f"{r:.3f}" for r in self.hardening["evasion_rates"])
        lines.append(f"held-out evasion by hardening round: baseline {self.hardening['baseline_evasion_rate']:.3f}; "
                     f"rounds [{rates}]")
        return "\n".join(lines)


def run_pipeline(cfg: PipelineConfig = PipelineConfig(), decoys: DecoySpec = DecoySpec(),
                 on_model: Callable[[str, Any], None] | None = None) -> ExperimentReport:
    """generate -> bootstrap -> featurize -> train -> evaluate -> attack -> harden -> re-evaluate."""
    timings: dict[str, float] = {}
    t0 = time.perf_counter()
    logs = generate_corpus(cfg.corpus, decoys)
    train_logs, test_logs = split_logs(logs, cfg.test_fraction, cfg.corpus.seed)
    timings["generate"] = time.perf_counter() - t0

    specs = {
        "linear": ModelSpec("linear", train=cfg.linear_train),
        "lstm": ModelSpec("lstm", train=cfg.lstm_train),
        "linear_naive": ModelSpec("linear", bootstrap=False, train=cfg.linear_train),
        "lstm_naive": ModelSpec("lstm", bootstrap=False, train=cfg.lstm_train),
    }
    models, evaluations = {}, {}
    for name, spec in specs.items():
        t = time.perf_counter()
        models[name] = train_on_logs(spec, train_logs, decoys)
        evaluations[name] = evaluate_on_logs(models[name], spec, test_logs, decoys, cfg.threshold).to_json()
        timings[f"train_eval_{name}"] = time.perf_counter() - t
        if on_model:
            on_model(name, models[name])

    t = time.perf_counter()
    hspec = specs[f"{cfg.harden_kind}_naive"]
    naive = models[f"{cfg.harden_kind}_naive"]
    featurize = hspec.featurize_fn()
    grid = evasion_grid(seed=cfg.corpus.seed + 10_000, victims=cfg.grid_victims)
    heldout = evasion_grid(seed=cfg.corpus.seed + 20_000, victims=cfg.grid_victims)
    outcomes = attack_search(naive, grid, decoys, featurize, cfg.threshold)
    attack = {"evasion_rate": evasion_rate(outcomes), "outcomes": [o.to_json() for o in outcomes]}
    result = adversarial_retrain(
        naive, train_logs, grid, cfg.harden_rounds,
        train_fn=lambda ds: train_on_logs(hspec, ds, decoys), featurizer=featurize,
        decoys=decoys, heldout_grid=heldout, threshold=cfg.threshold,
    )
    hardening = result.to_json()
    evaluations["hardened"] = evaluate_on_logs(result.model, specs[cfg.harden_kind], test_logs, decoys,
                                               cfg.threshold).to_json()
    timings["attack_harden"] = time.perf_counter() - t
    if on_model:
        on_model("hardened", result.model)
    sizes = {"train_logs": len(train_logs), "test_logs": len(test_logs),
             "ransomware": sum(g.label.is_positive for g in logs), "benign": sum(not g.label.is_positive for g in logs)}
    return ExperimentReport(cfg.to_json(), sizes, evaluations, attack, hardening, timings)
