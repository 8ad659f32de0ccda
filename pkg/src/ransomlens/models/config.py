from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass(frozen=True)
class TrainConfig:
    """Training knobs for both model kinds.

    Linear: ``lam`` (L2 strength), ``epochs`` passes of Pegasos, ``holdout_fraction``
    for the Platt fold. Recurrent: Adam (or plain SGD) on mini-batches with
    ``learning_rate`` multiplied by ``lr_decay`` after each epoch, ``dropout``
    on the LSTM output, global-norm ``clip_norm``, and sequences truncated to the
    last ``max_sequence_len`` events. ``weight_decay`` is an L2 penalty on the
    LSTM weight matrices. With ``zero_cell_bias`` the cell-candidate bias stays
    at zero, which makes the all-zeros input a fixed point of the recurrence.
    ``zero_output_bias`` pins the output bias at zero as well, so together they
    score the all-zeros input at exactly 0.5 regardless of length.
    ``path_augment`` is the fraction of each batch duplicated with its one-hot
    inputs scaled by a uniform factor in [0, 1] and its target pulled toward 0.5
    by the same factor.
    ``label_smoothing`` mixes the one-hot targets with the uniform distribution.
    """

    seed: int = 0
    epochs: int = 10
    learning_rate: float = 0.01
    lr_decay: float = 1.0
    batch_size: int = 64
    lam: float = 1e-4
    l2_normalize: bool = True
    holdout_fraction: float = 0.1
    dropout: float = 0.5
    clip_norm: float = 5.0
    max_sequence_len: int = 1000
    optimizer: str = "adam"
    weight_decay: float = 0.0
    zero_cell_bias: bool = False
    zero_output_bias: bool = False
    label_smoothing: float = 0.0
    path_augment: float = 0.0

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, payload: dict) -> "TrainConfig":
        return cls(**payload)
