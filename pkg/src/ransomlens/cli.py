"""Command-line interface: ``ransomlens <subcommand> ...``.

Artifacts passed between subcommands are plain files:

* manifest JSON: ``{"schema_version": 1, "logs": [{"path": ..., "label": ...}]}``
  (paths relative to the manifest's directory);
* augment index JSON: the manifest layout plus origin/method/params per sample;
* feature CSV: one row per sample, the label (0/1) first, then integers;
  a ``<file>.json`` sidecar names the mode, alphabet, and per-sample metadata;
* model JSON as written by :func:`ransomlens.models.save_model`.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .attribution import IgConfig, attribution_report, integrated_gradients
from .augment import DEFAULT_PERIODS_S, DEFAULT_WINDOWS, bootstrap_dataset
from .detector import AlertPolicy, DetectorConfig, StreamDetector
from .errors import RansomLensError, SchemaMismatch
from .eventlog import ExecutionLog, Label, load_config, parse_row, read_log, write_log
from .experiments import (
    DEFAULT_LINEAR_TRAIN,
    DEFAULT_LSTM_TRAIN,
    CorpusConfig,
    ModelSpec,
    PipelineConfig,
    benign_profiles,
    mild_redteam_configs,
    run_pipeline,
    train_on_logs,
)
from .features import FeatureAlphabet, FeatureSequence, Featurizer, NGramVector
from .models import LinearModel, TrainConfig, evaluate, load_model, save_model, train_linear, train_lstm
from .redteam import (
    RedTeamConfig,
    adversarial_retrain,
    attack_search,
    evasion_grid,
    evasion_rate,
    simulate_benign,
    simulate_ransomware,
)

ARTIFACT_SCHEMA_VERSION = 1
log = logging.getLogger("ransomlens")


# -- artifact helpers ------------------------------------------------------------------


def _read_json(path: str | Path) -> Any:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def _write_json(path: str | Path, payload: Any) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")


def _check_version(payload: dict, what: str) -> None:
    if payload.get("schema_version") != ARTIFACT_SCHEMA_VERSION:
        raise SchemaMismatch(f"{what} schema_version {payload.get('schema_version')!r}, "
                             f"expected {ARTIFACT_SCHEMA_VERSION}")


def read_manifest(path: str | Path) -> list[ExecutionLog]:
    path = Path(path)
    payload = _read_json(path)
    _check_version(payload, "manifest")
    logs = []
    for entry in payload["logs"]:
        log_path = path.parent / entry["path"]
        logs.append(read_log(log_path, Label(entry["label"]), entry.get("source_id", log_path.stem)))
    return logs


def write_manifest(path: str | Path, entries: list[dict]) -> None:
    _write_json(path, {"schema_version": ARTIFACT_SCHEMA_VERSION, "logs": entries})


def _safe_name(source_id: str) -> str:
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in source_id)


def read_features(path: str | Path) -> tuple[list[tuple], dict]:
    """Load a feature CSV and its sidecar as ``(x, label, slice)`` triples."""
    path = Path(path)
    meta = _read_json(path.with_name(path.name + ".json"))
    _check_version(meta, "feature sidecar")
    alphabet = FeatureAlphabet.from_json(meta["alphabet"])
    samples = meta.get("samples", [])
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for i, row in enumerate(csv.reader(fh)):
            if not row:
                continue
            label = bool(int(row[0]))
            values = np.array([int(v) for v in row[1:]], dtype=np.int64)
            x = NGramVector(values, alphabet) if meta["mode"] == "ngram" else FeatureSequence(values, alphabet)
            key = None
            if i < len(samples) and samples[i].get("period_s") is not None:
                key = (samples[i]["period_s"], samples[i].get("window_steps", 0))
            out.append((x, label, key))
    return out, meta


# -- subcommands --------------------------------------------------------------------------


def cmd_augment(args) -> int:
    logs = read_manifest(args.manifest)
    cfg = load_config(args.config)
    samples = bootstrap_dataset(logs, args.periods, args.windows, cfg.decoys)
    out = Path(args.out)
    (out / "samples").mkdir(parents=True, exist_ok=True)
    entries = []
    for i, s in enumerate(samples):
        rel = Path("samples") / f"{i:06d}_{_safe_name(s.log.source_id)}.csv"
        write_log(s.log, out / rel)
        entries.append({"path": rel.as_posix(), **s.to_json()})
    write_manifest(out / "index.json", entries)
    print(f"wrote {len(entries)} samples to {out}")
    return 0


def cmd_featurize(args) -> int:
    logs = read_manifest(args.index)
    index = _read_json(args.index)["logs"]
    cfg = load_config(args.config)
    featurizer = Featurizer(FeatureAlphabet(args.path_flag), cfg.whitelist)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    meta_samples = []
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for lg, entry in zip(logs, index):
            x = featurizer.ngrams(lg) if args.mode == "ngram" else featurizer.sequence(lg)
            values = x.counts if args.mode == "ngram" else x.ids
            writer.writerow([int(lg.label.is_positive), *values.tolist()])
            params = entry.get("params", {})
            meta_samples.append({"source_id": lg.source_id, "period_s": params.get("period_s"),
                                 "window_steps": params.get("window_steps")})
    _write_json(out.with_name(out.name + ".json"), {
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "mode": args.mode,
        "alphabet": featurizer.alphabet.to_json(),
        "label_column": 0,
        "samples": meta_samples,
    })
    print(f"wrote {len(meta_samples)} {args.mode} rows to {out}")
    return 0


def _train_config(args, kind: str) -> TrainConfig:
    default = DEFAULT_LINEAR_TRAIN if kind == "linear" else DEFAULT_LSTM_TRAIN
    base = TrainConfig.from_json(_read_json(args.train_config)) if args.train_config else default
    overrides = {k: getattr(args, k) for k in ("seed", "epochs", "learning_rate", "lam", "batch_size")
                 if getattr(args, k, None) is not None}
    return replace(base, **overrides)


def cmd_train(args) -> int:
    data, meta = read_features(args.features)
    pairs = [(x, y) for x, y, _ in data]
    alphabet = FeatureAlphabet.from_json(meta["alphabet"])
    cfg = _train_config(args, "linear" if meta["mode"] == "ngram" else "lstm")
    model = train_linear(pairs, cfg, alphabet) if meta["mode"] == "ngram" else train_lstm(pairs, cfg, alphabet)
    save_model(model, args.out)
    print(f"trained {model.kind} model on {len(pairs)} samples -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    model = load_model(args.model)
    data, _ = read_features(args.features)
    slices = sorted({k for _, _, k in data if k is not None}) or None
    report = evaluate(model, data, slices, args.threshold)
    if args.json:
        _write_json(args.json, report.to_json())
    print(report.table())
    return 0


def cmd_explain(args) -> int:
    model = load_model(args.model)
    if isinstance(model, LinearModel):
        raise RansomLensError("explain needs a recurrent model; linear attributions are w * x")
    cfg = load_config(args.config)
    event_log = read_log(args.log)
    featurizer = Featurizer(model.alphabet, cfg.whitelist, max_events=args.max_events)
    seq = featurizer.sequence(event_log)
    if len(seq) < len(event_log):
        event_log = event_log.replace_events(event_log.events[-len(seq):])
    result = integrated_gradients(model, seq, IgConfig(steps=args.steps))
    report = attribution_report(event_log, result, cfg.decoys)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_csv(), encoding="utf-8")
    _write_json(args.summary or out.with_suffix(".summary.json"), report.summary)
    if args.tsv:
        Path(args.tsv).write_text(report.to_tsv(), encoding="utf-8")
    if args.plot:
        from .plotting import attribution_bars
        attribution_bars(result.per_step, [r["decoy"] for r in report.rows], args.plot)
    print(json.dumps(report.summary, indent=2))
    return 0


def cmd_redteam_generate(args) -> int:
    out = Path(args.out)
    (out / "logs").mkdir(parents=True, exist_ok=True)
    cfg = load_config(args.config)
    entries = []
    logs = [simulate_ransomware(c, cfg.decoys) for c in mild_redteam_configs(args.n_ransomware, args.seed)]
    logs += [simulate_benign(p) for p in benign_profiles(args.n_benign, args.seed + 1, args.hard_fraction)]
    for lg in logs:
        rel = Path("logs") / f"{_safe_name(lg.source_id)}.csv"
        write_log(lg, out / rel)
        entries.append({"path": rel.as_posix(), "label": lg.label.value, "source_id": lg.source_id})
    write_manifest(out / "manifest.json", entries)
    print(f"wrote {len(entries)} logs to {out}")
    return 0


def _load_grid(path: str | None, seed: int, victims: int) -> list[RedTeamConfig]:
    if path is None:
        return evasion_grid(seed, victims)
    payload = _read_json(path)
    if isinstance(payload, dict):
        _check_version(payload, "grid")
        payload = payload["configs"]
    return [RedTeamConfig.from_json(c) for c in payload]


def _model_featurizer(model, whitelist):
    f = Featurizer(model.alphabet, whitelist, max_events=None if model.kind == "linear" else 1000)
    return f.for_model(model)


def cmd_redteam_attack(args) -> int:
    model = load_model(args.model)
    cfg = load_config(args.config)
    grid = _load_grid(args.grid, args.seed, args.victims)
    outcomes = attack_search(model, grid, cfg.decoys, _model_featurizer(model, cfg.whitelist), args.threshold)
    payload = {"schema_version": ARTIFACT_SCHEMA_VERSION, "evasion_rate": evasion_rate(outcomes),
               "outcomes": [o.to_json() for o in outcomes]}
    _write_json(args.out, payload)
    print(f"evasion rate {payload['evasion_rate']:.3f} over {len(outcomes)} configs -> {args.out}")
    return 0


def cmd_redteam_harden(args) -> int:
    model = load_model(args.model)
    cfg = load_config(args.config)
    base = read_manifest(args.manifest)
    spec = ModelSpec(model.kind, model.alphabet.path_flag_enabled, bootstrap=args.bootstrap,
                     train=_train_config(args, model.kind))
    grid = _load_grid(args.grid, args.seed, args.victims)
    heldout = _load_grid(args.heldout_grid, args.seed + 10_000, args.victims)
    result = adversarial_retrain(
        model, base, grid, args.rounds,
        train_fn=lambda ds: train_on_logs(spec, ds, cfg.decoys),
        featurizer=_model_featurizer(model, cfg.whitelist),
        decoys=cfg.decoys, heldout_grid=heldout, threshold=args.threshold,
    )
    save_model(result.model, args.out_model)
    _write_json(args.out, {"schema_version": ARTIFACT_SCHEMA_VERSION, **result.to_json()})
    print("held-out evasion: baseline {:.3f}, rounds {}".format(
        result.baseline_rate, ", ".join(f"{r:.3f}" for r in result.evasion_rates)))
    return 0


def _live_events(stream):
    for line_no, row in enumerate(csv.reader(stream), start=1):
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        yield parse_row(row, line_no)


def cmd_detect(args) -> int:
    model = load_model(args.model)
    cfg = load_config(args.config)
    det_cfg = DetectorConfig(args.window, args.stride, args.threshold, AlertPolicy.parse(args.policy))
    detector = StreamDetector(model, det_cfg, Featurizer(model.alphabet, cfg.whitelist))
    replay = args.log is not None
    events = read_log(args.log) if replay else _live_events(sys.stdin)
    n_alerts = 0

    def emit(alert):
        nonlocal n_alerts
        if alert is None:
            return
        n_alerts += 1
        sys.stdout.write(json.dumps(alert.to_json()) + "\n")
        sys.stdout.flush()

    for ev in events:
        emit(detector.push(ev))
        if detector.stopped:
            break
    emit(detector.finish())
    return 2 if replay and n_alerts else 0


def cmd_pipeline(args) -> int:
    corpus = CorpusConfig(args.n_ransomware, args.n_benign, args.seed)
    cfg = PipelineConfig(corpus=corpus, harden_kind=args.harden_kind, harden_rounds=args.rounds)
    if args.lstm_epochs is not None:
        cfg = replace(cfg, lstm_train=replace(cfg.lstm_train, epochs=args.lstm_epochs))
    out = Path(args.out)
    models_dir = out / "models"
    models_dir.mkdir(parents=True, exist_ok=True)

    def keep(name, model):
        save_model(model, models_dir / f"{name}.json")

    report = run_pipeline(cfg, load_config(args.config).decoys, on_model=keep)
    _write_json(out / "report.json", report.to_json())
    table = report.table()
    (out / "report.txt").write_text(table + "\n", encoding="utf-8")
    if not args.no_plots:
        from .plotting import detection_rate_bars, evasion_rounds
        for name, ev in report.evaluations.items():
            rates = {(d["period_s"], d["window_steps"]): d["rate"] for d in ev["detection_rates"]}
            if rates:
                detection_rate_bars(rates, out / "figures" / f"detection_{name}.png", f"Detection rate: {name}")
        evasion_rounds(report.hardening["baseline_evasion_rate"], report.hardening["evasion_rates"],
                       out / "figures" / "evasion_rounds.png")
    print(table)
    return 0


# -- parser ----------------------------------------------------------------------------


def _add_train_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--train-config", help="TrainConfig JSON")
    p.add_argument("--seed", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--learning-rate", type=float)
    p.add_argument("--lam", type=float)
    p.add_argument("--batch-size", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ransomlens", description="Ransomware detection from file-I/O event logs.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    parser.add_argument("--config", help="path-config JSON (decoy keywords/folders, system whitelist)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("augment", help="bootstrap logs listed in a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--periods", type=int, nargs="+", default=list(DEFAULT_PERIODS_S))
    p.add_argument("--windows", type=int, nargs="*", default=list(DEFAULT_WINDOWS),
                   help="window sizes; pass none to emit early slices only")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("featurize", help="turn an index of logs into feature rows")
    p.add_argument("--index", required=True, help="manifest or augment index JSON")
    p.add_argument("--out", required=True, help="feature CSV path")
    p.add_argument("--mode", choices=("sequence", "ngram"), default="ngram")
    p.add_argument("--path-flag", action="store_true")
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("train", help="train a model (kind follows the feature mode)")
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    _add_train_options(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model on a feature file")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--json", help="write the report JSON here")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("explain", help="Integrated Gradients report for one log")
    p.add_argument("--model", required=True)
    p.add_argument("--log", required=True)
    p.add_argument("--out", required=True, help="per-event CSV")
    p.add_argument("--summary", help="summary JSON (default: next to --out)")
    p.add_argument("--tsv", help="plot-ready TSV of per-step attributions")
    p.add_argument("--plot", help="PNG bar chart")
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--max-events", type=int, default=1000, help="explain only the most recent events")
    p.set_defaults(func=cmd_explain)

    rt = sub.add_parser("redteam", help="simulated ransomware: corpora, attacks, hardening")
    rsub = rt.add_subparsers(dest="redteam_command", required=True)
    p = rsub.add_parser("generate", help="write a labeled synthetic corpus and manifest")
    p.add_argument("--out", required=True)
    p.add_argument("--n-ransomware", type=int, default=400)
    p.add_argument("--n-benign", type=int, default=400)
    p.add_argument("--hard-fraction", type=float, default=0.25)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_redteam_generate)

    for name, func in (("attack", cmd_redteam_attack), ("harden", cmd_redteam_harden)):
        p = rsub.add_parser(name)
        p.add_argument("--model", required=True)
        p.add_argument("--grid", help="JSON array of RedTeamConfig (default: built-in evasion grid)")
        p.add_argument("--victims", type=int, default=40, help="victims per config of the built-in grid")
        p.add_argument("--threshold", type=float, default=0.5)
        p.add_argument("--out", required=True, help="JSON result path")
        p.set_defaults(func=func)
        if name == "attack":
            p.add_argument("--seed", type=int, default=0, help="seed of the built-in grid")
        else:
            p.add_argument("--manifest", required=True, help="base training logs")
            p.add_argument("--heldout-grid")
            p.add_argument("--rounds", type=int, default=3)
            p.add_argument("--out-model", required=True)
            p.add_argument("--no-bootstrap", dest="bootstrap", action="store_false")
            _add_train_options(p)
            p.set_defaults(seed=0)

    p = sub.add_parser("detect", help="sliding-window detection over a replayed or live stream")
    p.add_argument("--model", required=True)
    p.add_argument("--log", help="canonical CSV to replay (default: read live rows from stdin)")
    p.add_argument("--window", type=int, default=500)
    p.add_argument("--stride", type=int, default=50)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--policy", default="first", help="first, every, or KofM such as 2of3")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("pipeline", help="end-to-end synthetic experiment")
    p.add_argument("--out", required=True)
    p.add_argument("--n-ransomware", type=int, default=400)
    p.add_argument("--n-benign", type=int, default=400)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--harden-kind", choices=("linear", "lstm"), default="lstm")
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--lstm-epochs", type=int)
    p.add_argument("--no-plots", action="store_true")
    p.set_defaults(func=cmd_pipeline)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RansomLensError, OSError, ValueError, KeyError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
