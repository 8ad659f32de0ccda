"""Classifiers: a Pegasos-trained linear SVM over N-grams and a small LSTM."""

from .config import TrainConfig
from .evaluation import EvalReport, Prediction, evaluate, predict, score_many
from .io import MODEL_SCHEMA_VERSION, load_model, model_from_json, model_to_json, save_model
from .linear import LinearModel, train_linear
from .lstm import LstmModel, dataset_loss, init_lstm, train_lstm

__all__ = [
    "EvalReport",
    "LinearModel",
    "LstmModel",
    "MODEL_SCHEMA_VERSION",
    "Prediction",
    "TrainConfig",
    "dataset_loss",
    "evaluate",
    "init_lstm",
    "load_model",
    "model_from_json",
    "model_to_json",
    "predict",
    "save_model",
    "score_many",
    "train_linear",
    "train_lstm",
]
