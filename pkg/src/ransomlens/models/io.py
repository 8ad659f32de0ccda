"""Versioned JSON model files.

Python floats serialize through ``repr``, so a save/load round trip restores
every parameter bit-for-bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DimensionMismatch, SchemaMismatch
from ..features import FeatureAlphabet
from .linear import LinearModel
from .lstm import LstmModel

MODEL_SCHEMA_VERSION = 1


def model_to_json(model: LinearModel | LstmModel) -> dict:
    payload = {
        "schema_version": MODEL_SCHEMA_VERSION,
        "model_kind": model.kind,
        "alphabet": model.alphabet.to_json(),
        "diagnostics": _jsonable(model.diagnostics),
    }
    if isinstance(model, LinearModel):
        payload.update({
            "weights": model.weights.tolist(),
            "bias": model.bias,
            "lambda": model.lam,
            "calibration": {"scale": model.calibration[0], "offset": model.calibration[1]},
            "feature_norm": model.feature_norm,
        })
    else:
        payload.update({
            "hidden": model.hidden,
            "dropout_rate": model.dropout_rate,
            "params": {k: v.tolist() for k, v in model.params().items()},
        })
    return payload


def model_from_json(payload: dict) -> LinearModel | LstmModel:
    version = payload.get("schema_version")
    if version != MODEL_SCHEMA_VERSION:
        raise SchemaMismatch(f"model schema_version {version!r}, expected {MODEL_SCHEMA_VERSION}")
    try:
        alphabet = FeatureAlphabet.from_json(payload["alphabet"])
    except (KeyError, ValueError) as exc:
        raise SchemaMismatch(f"bad alphabet: {exc}") from None
    kind = payload.get("model_kind")
    try:
        if kind == "linear":
            cal = payload["calibration"]
            return LinearModel(alphabet, np.array(payload["weights"], dtype=np.float64), float(payload["bias"]),
                               float(payload["lambda"]), (cal["scale"], cal["offset"]), payload["feature_norm"],
                               payload.get("diagnostics", {}))
        if kind == "lstm":
            params = {k: np.array(v, dtype=np.float64) for k, v in payload["params"].items()}
            return LstmModel(alphabet, dropout_rate=float(payload["dropout_rate"]),
                             diagnostics=payload.get("diagnostics", {}), **params)
    except DimensionMismatch as exc:
        raise SchemaMismatch(f"parameter shapes disagree with alphabet: {exc}") from None
    raise SchemaMismatch(f"unknown model_kind {kind!r}")


def save_model(model: LinearModel | LstmModel, path: str | Path) -> None:
    Path(path).write_text(json.dumps(model_to_json(model)), encoding="utf-8")


def load_model(path: str | Path) -> LinearModel | LstmModel:
    return model_from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj
