from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ransomlens.errors import DegenerateData, DimensionMismatch, SchemaMismatch
from ransomlens.features import FeatureAlphabet, FeatureSequence, ngram_vector
from ransomlens.models import (
    LinearModel,
    TrainConfig,
    dataset_loss,
    evaluate,
    init_lstm,
    load_model,
    model_from_json,
    model_to_json,
    predict,
    save_model,
    score_many,
    train_linear,
    train_lstm,
)
from ransomlens.models.lstm import _batch_loss_and_grads, _pad

PLAIN = FeatureAlphabet(False)
FLAG = FeatureAlphabet(True)


def seq(ids, alphabet=PLAIN):
    return FeatureSequence(np.asarray(ids, dtype=np.int64), alphabet)


def toy_sequences(n, rng, length=(5, 30)):
    """Positives contain symbol 8 (high-entropy Change); negatives never do."""
    out = []
    for i in range(n):
        k = int(rng.integers(*length))
        ids = rng.integers(0, 8, size=k)
        label = i % 2
        if label:
            ids[rng.integers(0, k, size=max(1, k // 4))] = 8
        out.append((seq(ids), label))
    return out


def small_model(seed=0, alphabet=PLAIN):
    m = init_lstm(alphabet, np.random.default_rng(seed))
    m.Wx *= 3  # larger weights make finite-difference checks exercise the nonlinearities
    return m


# -- LSTM ------------------------------------------------------------------------------------


@pytest.mark.parametrize("smoothing, scale", [(0.0, None), (0.1, None), (0.0, np.array([1.0, 0.3, 0.7]))])
def test_parameter_gradients_match_finite_differences(smoothing, scale):
    model = small_model(1)
    rng = np.random.default_rng(0)
    tokens, mask = _pad([rng.integers(0, 9, 7), rng.integers(0, 9, 4), rng.integers(0, 9, 6)])
    y = np.array([1, 0, 1])
    _, grads = _batch_loss_and_grads(model, tokens, mask, y, None, smoothing, scale)
    for name in ("Wx", "Wh", "b", "Wy", "by"):
        param = getattr(model, name)
        for idx in [tuple(rng.integers(0, s) for s in param.shape) for _ in range(6)]:
            old = param[idx]
            param[idx] = old + 1e-6
            up, _ = _batch_loss_and_grads(model, tokens, mask, y, None, smoothing, scale)
            param[idx] = old - 1e-6
            down, _ = _batch_loss_and_grads(model, tokens, mask, y, None, smoothing, scale)
            param[idx] = old
            assert grads[name][idx] == pytest.approx((up - down) / 2e-6, rel=1e-4, abs=1e-8)


def test_input_gradient_matches_finite_differences():
    model = small_model(2)
    x = np.random.default_rng(3).random((6, 9))
    g = model.grad_input(x)
    for t, d in [(0, 0), (2, 5), (5, 8), (3, 1)]:
        e = np.zeros_like(x)
        e[t, d] = 1e-6
        fd = (model.score_relaxed(x + e) - model.score_relaxed(x - e)) / 2e-6
        assert g[t, d] == pytest.approx(fd, rel=1e-4, abs=1e-9)


def test_grad_input_many_matches_single():
    model = small_model(4)
    xs = np.random.default_rng(0).random((3, 5, 9))
    many = model.grad_input_many(xs)
    for b in range(3):
        assert np.allclose(many[b], model.grad_input(xs[b]))


def test_batch_scoring_ignores_padding():
    model = small_model(5)
    seqs = [seq([1, 2, 8]), seq([8] * 12), seq([0]), seq(list(range(9)))]
    assert np.allclose(model.score_batch(seqs), [model.score(s) for s in seqs], atol=1e-12)
    assert model.score_relaxed(seqs[1].one_hot()) == pytest.approx(model.score(seqs[1]))


def test_lstm_learns_toy_task_and_is_deterministic():
    rng = np.random.default_rng(0)
    data = toy_sequences(200, rng)
    cfg = TrainConfig(epochs=15, learning_rate=0.02, batch_size=32, dropout=0.0, seed=3)
    model = train_lstm(data, cfg)
    test = toy_sequences(100, np.random.default_rng(1))
    report = evaluate(model, test)
    assert report.accuracy >= 0.95
    assert dataset_loss(model, [s for s, _ in data], [y for _, y in data]) < 0.2
    again = train_lstm(data, cfg)
    assert all(np.array_equal(a, b) for a, b in zip(model.params().values(), again.params().values()))


def test_lstm_rejects_wrong_alphabet_and_degenerate_data():
    model = small_model()
    with pytest.raises(DimensionMismatch):
        model.score(seq([1, 2], FLAG))
    with pytest.raises(DegenerateData):
        train_lstm([(seq([1]), 0), (seq([2]), 0)])
    with pytest.raises(DegenerateData):
        train_lstm([])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 8), min_size=1, max_size=40))
def test_lstm_score_is_probability(ids):
    assert 0.0 <= small_model(7).score(seq(ids)) <= 1.0


# -- linear ------------------------------------------------------------------------------------


def test_linear_learns_toy_task():
    rng = np.random.default_rng(0)
    data = [(ngram_vector(s), y) for s, y in toy_sequences(300, rng)]
    model = train_linear(data, TrainConfig(epochs=10, lam=1e-3))
    test = [(ngram_vector(s), y) for s, y in toy_sequences(100, np.random.default_rng(9))]
    report = evaluate(model, test)
    assert report.accuracy >= 0.95
    assert model.calibration[0] > 0
    assert model.diagnostics["no_signal"] is False


def test_linear_no_signal_flag():
    v = ngram_vector(seq([1, 2, 3]))
    data = [(v, i % 2) for i in range(40)]
    model = train_linear(data, TrainConfig(epochs=3))
    assert model.diagnostics["no_signal"]


def test_linear_score_scale_invariant_under_l2():
    rng = np.random.default_rng(2)
    model = LinearModel(PLAIN, rng.normal(size=90), 0.1)
    v = ngram_vector(seq([1, 8, 8, 2]))
    assert model.score(v) == pytest.approx(model.score(v.counts * 7))


def test_linear_dimension_checks():
    with pytest.raises(DimensionMismatch):
        LinearModel(PLAIN, np.zeros(342))
    model = LinearModel(PLAIN, np.zeros(90))
    with pytest.raises(DimensionMismatch):
        predict(model, ngram_vector(seq([1], FLAG)))
    with pytest.raises(DimensionMismatch):
        predict(model, seq([1]))


# -- evaluation ------------------------------------------------------------------------------


def test_evaluate_confusion_and_slices():
    model = LinearModel(PLAIN, np.zeros(90), 0.0)
    pos = ngram_vector(seq([8]))
    rows = [(pos, 1, (1, 250)), (pos, 1, (5, 250)), (pos, 0, (1, 250))]
    model.weights[8] = 10.0
    model.calibration = (1.0, 0.0)
    report = evaluate(model, rows, slices=[(1, 250), (5, 250), (10, 250)])
    assert report.confusion == {"tp": 2, "fp": 1, "tn": 0, "fn": 0}
    assert report.detection_rates == {(1, 250): 1.0, (5, 250): 1.0, (10, 250): None}
    assert report.false_positive_rate == 1.0
    assert "period" in report.table()
    assert json.loads(json.dumps(report.to_json()))["confusion"]["tp"] == 2


def test_evaluate_threshold_and_empty():
    model = LinearModel(PLAIN, np.zeros(90), 0.0)  # scores exactly 0.5
    v = ngram_vector(seq([1]))
    assert predict(model, v, 0.5).label is True
    assert predict(model, v, 0.51).label is False
    assert np.isnan(evaluate(model, []).accuracy)
    assert score_many(model, [v, v]).tolist() == [0.5, 0.5]


# -- persistence ------------------------------------------------------------------------------


def test_round_trip_bit_exact(tmp_path):
    lstm = small_model(8, FLAG)
    lin = LinearModel(PLAIN, np.random.default_rng(0).normal(size=90), -0.3, 1e-4, (1.7, -0.2))
    for model in (lstm, lin):
        path = tmp_path / f"{model.kind}.json"
        save_model(model, path)
        back = load_model(path)
        assert type(back) is type(model) and back.alphabet == model.alphabet
        if model.kind == "lstm":
            assert all(np.array_equal(a, b) for a, b in zip(model.params().values(), back.params().values()))
            s = seq([0, 8, 17, 3], FLAG)
        else:
            assert np.array_equal(back.weights, model.weights) and back.calibration == model.calibration
            s = ngram_vector(seq([0, 8, 3]))
        assert back.score(s) == model.score(s)


def test_load_rejects_bad_payloads():
    payload = model_to_json(small_model())
    with pytest.raises(SchemaMismatch):
        model_from_json({**payload, "schema_version": 2})
    with pytest.raises(SchemaMismatch):
        model_from_json({**payload, "model_kind": "forest"})
    with pytest.raises(SchemaMismatch):
        model_from_json({**payload, "alphabet": FLAG.to_json()})
