"""One-hot -> LSTM(16) -> dropout -> dense(2) -> softmax, in numpy float64.

Gate layout along the 4H axis is input, forget, cell candidate, output.
Batches are right-padded; padded steps carry the state through unchanged, so
the last state of every row is the state after its final real event.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..errors import DegenerateData, DimensionMismatch
from ..features import FeatureAlphabet, FeatureSequence
from .config import TrainConfig

log = logging.getLogger(__name__)

HIDDEN = 16


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(logits):
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class LstmModel:
    alphabet: FeatureAlphabet
    Wx: np.ndarray
    Wh: np.ndarray
    b: np.ndarray
    Wy: np.ndarray
    by: np.ndarray
    dropout_rate: float = 0.5
    diagnostics: dict = field(default_factory=dict)

    kind = "lstm"

    def __post_init__(self):
        d, h = self.input_dim, self.hidden
        shapes = {"Wx": (d, 4 * h), "Wh": (h, 4 * h), "b": (4 * h,), "Wy": (h, 2), "by": (2,)}
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise DimensionMismatch(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} has non-finite entries")
            setattr(self, name, arr)

    @property
    def input_dim(self) -> int:
        return self.alphabet.size

    @property
    def hidden(self) -> int:
        return self.Wh.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {"Wx": self.Wx, "Wh": self.Wh, "b": self.b, "Wy": self.Wy, "by": self.by}

    def copy(self) -> "LstmModel":
        return LstmModel(self.alphabet, **{k: v.copy() for k, v in self.params().items()},
                         dropout_rate=self.dropout_rate, diagnostics=dict(self.diagnostics))

    # -- inference ---------------------------------------------------------

    def _check_seq(self, seq: FeatureSequence) -> None:
        if seq.alphabet.size != self.input_dim:
            raise DimensionMismatch(f"sequence alphabet size {seq.alphabet.size}, model expects {self.input_dim}")

    def _check_relaxed(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise DimensionMismatch(f"relaxed input must be T x {self.input_dim}, got {x.shape}")
        return x

    def score(self, seq: FeatureSequence) -> float:
        """Positive-class probability after the last event (dropout off)."""
        self._check_seq(seq)
        proj = self.Wx[seq.ids][:, None, :] + self.b
        hs, _, _ = _forward(proj, None, self.Wh)
        return float(_softmax(hs[-1] @ self.Wy + self.by)[0, 1])

    def score_relaxed(self, x: np.ndarray) -> float:
        x = self._check_relaxed(x)
        proj = (x @ self.Wx)[:, None, :] + self.b
        hs, _, _ = _forward(proj, None, self.Wh)
        return float(_softmax(hs[-1] @ self.Wy + self.by)[0, 1])

    def score_batch(self, seqs: Sequence[FeatureSequence], batch_size: int = 256) -> np.ndarray:
        for s in seqs:
            self._check_seq(s)
        ids = [s.ids for s in seqs]
        out = np.empty(len(ids))
        for rows in _length_batches(ids, batch_size):
            tokens, mask = _pad([ids[r] for r in rows])
            hs, _, _ = _forward(self.Wx[tokens] + self.b, mask, self.Wh)
            out[rows] = _softmax(hs[-1] @ self.Wy + self.by)[:, 1]
        return out

    def grad_input(self, x: np.ndarray | FeatureSequence) -> np.ndarray:
        """d(positive-class probability)/d(input) for a one-hot or relaxed T x D input."""
        if isinstance(x, FeatureSequence):
            self._check_seq(x)
            x = x.one_hot()
        x = self._check_relaxed(x)
        return self.grad_input_many(x[None])[0]

    def grad_input_many(self, xs: np.ndarray) -> np.ndarray:
        """Input gradients for a stack of equal-length relaxed inputs (B x T x D), in one pass."""
        xs = np.asarray(xs, dtype=np.float64)
        if xs.ndim != 3 or xs.shape[2] != self.input_dim:
            raise DimensionMismatch(f"relaxed inputs must be B x T x {self.input_dim}, got {xs.shape}")
        if xs.shape[1] == 0:
            raise ValueError("grad_input needs a non-empty sequence")
        proj = np.einsum("btd,dk->tbk", xs, self.Wx) + self.b
        hs, cs, gates = _forward(proj, None, self.Wh)
        p = _softmax(hs[-1] @ self.Wy + self.by)
        pp = p[:, 0] * p[:, 1]
        dlogits = np.stack([-pp, pp], axis=1)
        d_proj, _, _ = _backward(dlogits @ self.Wy.T, hs, cs, gates, None, self.Wh)
        return np.einsum("tbk,dk->btd", d_proj, self.Wx)


# -- core recurrences --------------------------------------------------------


def _forward(proj: np.ndarray, mask: np.ndarray | None, Wh: np.ndarray):
    """Run the recurrence over precomputed input projections ``proj`` (T x B x 4H)."""
    T, B, H4 = proj.shape
    H = H4 // 4
    hs = np.zeros((T + 1, B, H))
    cs = np.zeros((T + 1, B, H))
    gates = np.empty((T, B, H4))
    for t in range(T):
        z = proj[t] + hs[t] @ Wh
        a = _sigmoid(z)
        a[:, 2 * H:3 * H] = np.tanh(z[:, 2 * H:3 * H])
        gates[t] = a
        c = a[:, H:2 * H] * cs[t] + a[:, :H] * a[:, 2 * H:3 * H]
        h = a[:, 3 * H:] * np.tanh(c)
        if mask is None:
            cs[t + 1], hs[t + 1] = c, h
        else:
            m = mask[t][:, None]
            cs[t + 1] = np.where(m, c, cs[t])
            hs[t + 1] = np.where(m, h, hs[t])
    return hs, cs, gates


def _backward(dh_last: np.ndarray, hs, cs, gates, mask, Wh):
    """Backpropagate a gradient on the final hidden state through time.

    Returns (d_proj, dWh, dh0).
    """
    T, B, H4 = gates.shape
    H = H4 // 4
    d_proj = np.zeros_like(gates)
    dWh = np.zeros_like(Wh)
    dh = dh_last.copy()
    dc = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        a = gates[t]
        ai, af, ag, ao = a[:, :H], a[:, H:2 * H], a[:, 2 * H:3 * H], a[:, 3 * H:]
        if mask is None:
            dh_in, dc_in = dh, dc
        else:
            m = mask[t][:, None]
            dh_in, dc_in = dh * m, dc * m
        tc = np.tanh(cs[t + 1])
        dct = dc_in + dh_in * ao * (1.0 - tc * tc)
        dz = np.empty((B, H4))
        dz[:, :H] = dct * ag * ai * (1.0 - ai)
        dz[:, H:2 * H] = dct * cs[t] * af * (1.0 - af)
        dz[:, 2 * H:3 * H] = dct * ai * (1.0 - ag * ag)
        dz[:, 3 * H:] = dh_in * tc * ao * (1.0 - ao)
        d_proj[t] = dz
        dWh += hs[t].T @ dz
        dh_prev = dz @ Wh.T
        dc_prev = dct * af
        if mask is not None:
            dh_prev += dh - dh_in
            dc_prev += dc - dc_in
        dh, dc = dh_prev, dc_prev
    return d_proj, dWh, dh


def _pad(seqs: Sequence[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """Right-pad id sequences into T x B tokens and mask."""
    T = max((len(s) for s in seqs), default=0)
    tokens = np.zeros((T, len(seqs)), dtype=np.int64)
    mask = np.zeros((T, len(seqs)), dtype=bool)
    for j, s in enumerate(seqs):
        tokens[:len(s), j] = s
        mask[:len(s), j] = True
    return tokens, mask


def _length_batches(seqs: Sequence[np.ndarray], batch_size: int, rng=None) -> list[np.ndarray]:
    """Group indices of similar length so padding stays small."""
    lengths = np.array([len(s) for s in seqs])
    if rng is None:
        order = np.argsort(lengths, kind="stable")
    else:
        jitter = rng.permutation(len(seqs))
        order = jitter[np.argsort(lengths[jitter] // 25, kind="stable")]
    batches = [order[i:i + batch_size] for i in range(0, len(order), batch_size)]
    if rng is not None:
        batches = [batches[k] for k in rng.permutation(len(batches))]
    return batches


# -- training ----------------------------------------------------------------


def init_lstm(alphabet: FeatureAlphabet, rng: np.random.Generator, hidden: int = HIDDEN,
              dropout_rate: float = 0.5) -> LstmModel:
    d = alphabet.size
    lim_x = np.sqrt(6.0 / (d + 4 * hidden))
    Wx = rng.uniform(-lim_x, lim_x, size=(d, 4 * hidden))
    q, r = np.linalg.qr(rng.normal(size=(4 * hidden, hidden)))
    Wh = (q * np.sign(np.diag(r))).T
    b = np.zeros(4 * hidden)
    b[hidden:2 * hidden] = 1.0  # forget-gate bias
    lim_y = np.sqrt(6.0 / (hidden + 2))
    Wy = rng.uniform(-lim_y, lim_y, size=(hidden, 2))
    return LstmModel(alphabet, Wx, Wh, b, Wy, np.zeros(2), dropout_rate)


def _batch_loss_and_grads(model: LstmModel, tokens, mask, y, drop_mask, smoothing: float = 0.0,
                          scale: np.ndarray | None = None):
    """Mean cross-entropy and parameter gradients for one padded batch.

    ``scale`` (per row, in [0, 1]) multiplies that row's one-hot inputs; the
    row's target then moves linearly from 0.5 at scale 0 to its label at 1.
    """
    emb = model.Wx[tokens]
    if scale is not None:
        emb = emb * scale[None, :, None]
    proj = emb + model.b
    hs, cs, gates = _forward(proj, mask, model.Wh)
    h_last = hs[-1] if drop_mask is None else hs[-1] * drop_mask
    p = _softmax(h_last @ model.Wy + model.by)
    B = len(y)
    target = np.full((B, 2), smoothing / 2.0)
    target[np.arange(B), y] += 1.0 - smoothing
    if scale is not None:
        target = 0.5 + scale[:, None] * (target - 0.5)
    loss = -float(np.mean(np.sum(target * np.log(np.clip(p, 1e-300, None)), axis=1)))
    dlogits = (p - target) / B
    grads = {"Wy": h_last.T @ dlogits, "by": dlogits.sum(axis=0)}
    dh = dlogits @ model.Wy.T
    if drop_mask is not None:
        dh = dh * drop_mask
    d_proj, dWh, _ = _backward(dh, hs, cs, gates, mask, model.Wh)
    flat_tokens = tokens.reshape(-1)
    flat_d = d_proj.reshape(-1, d_proj.shape[-1])
    grads["b"] = flat_d.sum(axis=0)
    if scale is not None:
        flat_d = (d_proj * scale[None, :, None]).reshape(flat_d.shape)
    onehot = np.zeros((flat_tokens.size, model.input_dim))
    onehot[np.arange(flat_tokens.size), flat_tokens] = 1.0
    grads["Wx"] = onehot.T @ flat_d
    grads["Wh"] = dWh
    return loss, grads


def dataset_loss(model: LstmModel, seqs: Sequence[FeatureSequence], labels: Sequence[int]) -> float:
    """Mean cross-entropy with dropout off."""
    scores = model.score_batch(seqs)
    y = np.asarray(labels, dtype=int)
    p = np.where(y == 1, scores, 1.0 - scores)
    return float(-np.mean(np.log(np.clip(p, 1e-300, None))))


def train_lstm(samples: Sequence[tuple[FeatureSequence, int | bool]], config: TrainConfig = TrainConfig(),
               alphabet: FeatureAlphabet | None = None) -> LstmModel:
    """Cross-entropy training by truncated-tail BPTT with global-norm clipping.

    Deterministic for a fixed ``config.seed``.
    """
    labels = np.array([int(bool(lbl)) for _, lbl in samples], dtype=np.int64)
    if len(samples) == 0 or labels.min() == labels.max():
        raise DegenerateData("training data must contain both classes")
    if alphabet is None:
        alphabet = samples[0][0].alphabet
    for seq, _ in samples:
        if seq.alphabet.size != alphabet.size:
            raise DimensionMismatch("mixed alphabets in training data")
    rng = np.random.default_rng(config.seed)
    model = init_lstm(alphabet, rng, dropout_rate=config.dropout)
    ids = [seq.tail(config.max_sequence_len).ids for seq, _ in samples]

    opt_state = {k: (np.zeros_like(v), np.zeros_like(v)) for k, v in model.params().items()}
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    lr = config.learning_rate
    losses = []
    keep = 1.0 - config.dropout
    for epoch in range(config.epochs):
        total, count = 0.0, 0
        for rows in _length_batches(ids, config.batch_size, rng):
            tokens, mask = _pad([ids[r] for r in rows])
            drop = None
            if config.dropout > 0:
                drop = (rng.random((len(rows), model.hidden)) < keep) / keep
            y, scale = labels[rows], None
            if config.path_augment:
                # scaled copies of part of the batch keep the score smooth between the zero input and x
                extra = rng.random(len(rows)) < config.path_augment
                tokens = np.concatenate([tokens, tokens[:, extra]], axis=1)
                mask = np.concatenate([mask, mask[:, extra]], axis=1)
                y = np.concatenate([y, y[extra]])
                scale = np.concatenate([np.ones(len(rows)), rng.random(int(extra.sum()))])
                if drop is not None:
                    drop = np.concatenate([drop, drop[extra]])
            loss, grads = _batch_loss_and_grads(model, tokens, mask, y, drop, config.label_smoothing, scale)
            total += loss * len(rows)
            count += len(rows)
            if config.zero_cell_bias:
                grads["b"][2 * model.hidden:3 * model.hidden] = 0.0
            if config.zero_output_bias:
                grads["by"] = np.zeros_like(grads["by"])
            if config.weight_decay:
                for k in ("Wx", "Wh", "Wy"):
                    grads[k] = grads[k] + config.weight_decay * getattr(model, k)
            norm = np.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
            if config.clip_norm and norm > config.clip_norm:
                grads = {k: g * (config.clip_norm / norm) for k, g in grads.items()}
            step += 1
            for k, g in grads.items():
                param = getattr(model, k)
                if config.optimizer == "sgd":
                    param -= lr * g
                    continue
                m, v = opt_state[k]
                m *= beta1
                m += (1 - beta1) * g
                v *= beta2
                v += (1 - beta2) * g * g
                m_hat = m / (1 - beta1 ** step)
                v_hat = v / (1 - beta2 ** step)
                param -= lr * m_hat / (np.sqrt(v_hat) + eps)
        losses.append(total / max(count, 1))
        log.info("lstm epoch %d loss %.5f", epoch + 1, losses[-1])
        lr *= config.lr_decay
    model.diagnostics = {"epoch_loss": losses, "n_train": len(samples)}
    return model
