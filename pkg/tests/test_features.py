from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ransomlens.errors import MissingEntropy, OutOfRange
from ransomlens.eventlog import EventKind, ExecutionLog, IoEvent, parse_csv
from ransomlens.features import (
    FeatureAlphabet,
    FeatureSequence,
    Featurizer,
    bucket_entropy,
    encode_event,
    encode_sequence,
    ngram_vector,
)

FLAG = FeatureAlphabet(True)
PLAIN = FeatureAlphabet(False)


def test_alphabet_sizes():
    assert PLAIN.size == 9 and PLAIN.ngram_dim == 90
    assert FLAG.size == 18 and FLAG.ngram_dim == 342


def test_alphabet_json_round_trip():
    assert FeatureAlphabet.from_json(FLAG.to_json()) == FLAG
    with pytest.raises(ValueError):
        FeatureAlphabet.from_json({"path_flag_enabled": True, "size": 9})


@pytest.mark.parametrize("e, b", [(0.0, 0), (0.95, 5), (0.85, 4), (0.2, 1), (0.199999, 0), (0.9, 5), (1.0, 5),
                                  (0.4, 2), (0.6, 3), (0.8, 4)])
def test_bucket_entropy(e, b):
    assert bucket_entropy(e) == b


@pytest.mark.parametrize("e", [-0.01, 1.01, float("nan")])
def test_bucket_entropy_out_of_range(e):
    with pytest.raises(OutOfRange):
        bucket_entropy(e)


@given(st.floats(0, 1), st.floats(0, 1))
def test_bucket_monotone(a, b):
    lo, hi = sorted((a, b))
    assert bucket_entropy(lo) <= bucket_entropy(hi)


def test_encode_event_examples():
    assert encode_event(IoEvent(0, EventKind.CREATE, "c:\\Users\\u\\a.txt"), PLAIN) == 0
    assert encode_event(IoEvent(0, EventKind.CHANGE, "c:\\Users\\u\\a.txt", 0.97), FLAG) == 8
    assert encode_event(IoEvent(0, EventKind.DELETE, "c:\\Windows\\x"), FLAG) == 11
    assert encode_event(IoEvent(0, EventKind.RENAME, "c:\\Windows\\x"), PLAIN) == 1


def test_encode_change_without_entropy():
    with pytest.raises(MissingEntropy):
        encode_event(IoEvent(0, EventKind.CHANGE, "a"))


events = st.builds(
    IoEvent,
    st.just(0),
    st.sampled_from(list(EventKind)),
    st.sampled_from(["c:\\Windows\\a", "c:\\Users\\u\\b", "C:\\PROGRA~1\\c", "d:\\x"]),
    st.floats(0, 1),
)


@given(events)
def test_flag_off_equals_flag_on_mod_nine(e):
    assert encode_event(e, PLAIN) == encode_event(e, FLAG) % 9


def test_encode_sequence_examples():
    assert len(encode_sequence(ExecutionLog(), PLAIN)) == 0
    log = parse_csv("0,Create,c:\\Users\\u\\myFile1.txt,\n5,Change,c:\\Users\\u\\myFile1.txt,0.97")
    assert encode_sequence(log, FLAG).ids.tolist() == [0, 8]
    three = ExecutionLog((IoEvent(0, EventKind.DELETE, "a"), IoEvent(1, EventKind.CREATE, "b"),
                          IoEvent(2, EventKind.RENAME, "c")))
    assert encode_sequence(three, PLAIN).ids.tolist() == [2, 0, 1]


def test_feature_sequence_rejects_out_of_range():
    with pytest.raises(OutOfRange):
        FeatureSequence(np.array([9]), PLAIN)


def test_ngram_examples():
    v = ngram_vector(FeatureSequence(np.array([3, 3, 3]), PLAIN))
    expected = np.zeros(90, dtype=int)
    expected[3] = 3
    expected[9 + 3 * 9 + 3] = 2
    assert np.array_equal(v.counts, expected)

    assert np.array_equal(ngram_vector(FeatureSequence(np.array([], dtype=int), PLAIN)).counts, np.zeros(90))

    v = ngram_vector(FeatureSequence(np.array([0, 1]), PLAIN))
    assert len(v) == 90 and v.counts[0] == 1 and v.counts[1] == 1 and v.bigrams[0, 1] == 1 and v.counts.sum() == 3


def _brute_ngrams(ids, size):
    counts = [0] * (size + size * size)
    for i in ids:
        counts[i] += 1
    for a, b in zip(ids, ids[1:]):
        counts[size + a * size + b] += 1
    return counts


@given(st.booleans(), st.lists(st.integers(0, 17), max_size=60))
def test_ngram_matches_brute_force(flag, raw):
    alphabet = FeatureAlphabet(flag)
    ids = [i % alphabet.size for i in raw]
    v = ngram_vector(FeatureSequence(np.array(ids, dtype=int), alphabet))
    assert v.counts.tolist() == _brute_ngrams(ids, alphabet.size)
    assert v.unigrams.sum() == len(ids)
    assert v.bigrams.sum() == max(len(ids) - 1, 0)


def test_featurizer_keeps_tail_and_dispatches():
    log = ExecutionLog(tuple(IoEvent(i, EventKind.CREATE if i % 2 else EventKind.DELETE, "a") for i in range(10)))
    f = Featurizer(PLAIN, max_events=4)
    assert len(f.sequence(log)) == 4
    assert f.sequence(log).ids.tolist() == encode_sequence(log, PLAIN).ids[-4:].tolist()

    class Lin:
        kind = "linear"

    assert f.for_model(Lin()) == f.ngrams
    assert f.for_model(object()) == f.sequence
