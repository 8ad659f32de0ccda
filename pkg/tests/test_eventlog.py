from __future__ import annotations

import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ransomlens.errors import MalformedRow, SchemaMismatch
from ransomlens.eventlog import (
    ENTROPY_CAP_BYTES,
    DecoySpec,
    EventKind,
    ExecutionLog,
    IoEvent,
    Label,
    PathConfig,
    approx_start_time,
    file_entropy,
    is_decoy,
    is_system_path,
    load_config,
    parse_csv,
    read_log,
    serialize_csv,
    shannon_entropy,
    write_log,
)


def ev(ts, kind="Create", path="c:\\Users\\u\\a.txt", entropy=None):
    return IoEvent(ts, EventKind(kind), path, entropy)


# -- entropy -------------------------------------------------------------------


def test_entropy_constant_bytes_is_zero():
    assert shannon_entropy(b"\x41" * 4096) == 0.0


def test_entropy_uniform_is_one():
    assert shannon_entropy(bytes(range(256))) == pytest.approx(1.0, abs=1e-12)


def test_entropy_two_symbols_equal_mix():
    assert shannon_entropy(b"\x00" * 1000 + b"\xff" * 1000) == pytest.approx(0.125, abs=1e-12)


def test_entropy_empty_is_zero():
    assert shannon_entropy(b"") == 0.0


def test_entropy_ignores_bytes_past_cap():
    head = bytes(range(256)) * (ENTROPY_CAP_BYTES // 256)
    assert shannon_entropy(head + b"\x00" * 50_000) == pytest.approx(1.0, abs=1e-12)


def test_entropy_accepts_numpy_arrays():
    arr = np.arange(256, dtype=np.uint8)
    assert shannon_entropy(arr) == pytest.approx(1.0)


def test_file_entropy(tmp_path):
    p = tmp_path / "f.bin"
    p.write_bytes(b"\x00" * 10 + b"\x01" * 10)
    assert file_entropy(p) == pytest.approx(0.125)


@settings(max_examples=100, deadline=None)
@given(st.binary(min_size=1, max_size=2048), st.randoms(use_true_random=False))
def test_entropy_permutation_invariant(data, rnd):
    shuffled = bytearray(data)
    rnd.shuffle(shuffled)
    assert shannon_entropy(bytes(shuffled)) == pytest.approx(shannon_entropy(data), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.binary(min_size=1, max_size=512), st.integers(2, 8))
def test_entropy_repetition_invariant(data, k):
    assert shannon_entropy(data * k) == pytest.approx(shannon_entropy(data), abs=1e-12)


@given(st.binary(max_size=4096))
def test_entropy_range(data):
    assert 0.0 <= shannon_entropy(data) <= 1.0


# -- CSV format ------------------------------------------------------------------------


def test_parse_two_rows():
    log = parse_csv("0,Create,c:\\Users\\u\\myFile1.txt,\n5,Change,c:\\Users\\u\\myFile1.txt,0.97")
    assert len(log) == 2
    assert log[0].kind is EventKind.CREATE and log[0].entropy is None
    assert log[1].entropy == 0.97 and log[1].timestamp_ms == 5


def test_parse_empty():
    assert len(parse_csv("")) == 0


@pytest.mark.parametrize("text, line", [
    ("0,Frobnicate,x,", 1),
    ("0,Create,a,\n1,Create,b", 2),
    ("0,Create,a,\nabc,Create,b,", 2),
    ("0,Change,a,1.5", 1),
    ("0,Change,a,-0.1", 1),
    ("-3,Create,a,", 1),
    ("0,Create,,", 1),
    ("0,Change,a,nan", 1),
])
def test_parse_malformed_rows(text, line):
    with pytest.raises(MalformedRow) as info:
        parse_csv(text)
    assert info.value.line_no == line


def test_parse_skips_blank_lines_and_keeps_line_numbers():
    with pytest.raises(MalformedRow) as info:
        parse_csv("0,Create,a,\n\n2,Bogus,b,")
    assert info.value.line_no == 3


def test_parse_event_names_case_insensitive():
    assert parse_csv("0,rename,a,")[0].kind is EventKind.RENAME


def test_parse_sorts_stably():
    log = parse_csv("5,Create,b,\n1,Create,a,\n5,Delete,c,")
    assert [e.path for e in log] == ["a", "b", "c"]


def test_serialize_format():
    log = ExecutionLog((ev(0), ev(7, "Change", "c:\\x, y.txt", 0.5)))
    text = serialize_csv(log)
    assert text == '0,Create,c:\\Users\\u\\a.txt,\n7,Change,"c:\\x, y.txt",0.500000\n'


events_st = st.lists(
    st.builds(
        IoEvent,
        st.integers(0, 10**9),
        st.sampled_from(list(EventKind)),
        st.text(alphabet=st.characters(blacklist_categories=("Cs", "Cc")), min_size=1, max_size=30)
        .filter(lambda s: s.strip() == s and s),
        st.one_of(st.none(), st.integers(0, 10**6).map(lambda i: i / 10**6)),
    ),
    max_size=30,
)


@settings(max_examples=100, deadline=None)
@given(events_st)
def test_csv_round_trip(events):
    log = ExecutionLog(tuple(events))
    assert parse_csv(serialize_csv(log)).events == log.events


def test_read_write_log(tmp_path):
    log = ExecutionLog((ev(0), ev(3, "Change", entropy=0.25)), Label.BENIGN, "x")
    write_log(log, tmp_path / "x.csv")
    raw = (tmp_path / "x.csv").read_bytes()
    assert b"\r" not in raw
    back = read_log(tmp_path / "x.csv", Label.BENIGN)
    assert back.events == log.events and back.source_id == "x"


def test_event_invariants():
    with pytest.raises(ValueError):
        IoEvent(0, EventKind.CHANGE, "", 0.5)
    with pytest.raises(ValueError):
        IoEvent(0, EventKind.CHANGE, "a", 1.2)
    with pytest.raises(ValueError):
        IoEvent(-1, EventKind.CREATE, "a")


# -- decoys and system paths --------------------------------------------------------------


def test_is_decoy_examples():
    assert is_decoy(ev(0, path="c:\\Users\\u\\Documents\\myFile23.doc"))
    assert not is_decoy(ev(0, path="c:\\Windows\\system32\\kernel32.dll"))
    assert is_decoy(ev(0, path="c:\\DECOY\\a.txt"), DecoySpec(keywords=(), folders=("c:\\DECOY",)))
    assert is_decoy(ev(0, path="c:\\x\\MYFILE.txt"))


def test_is_system_path_examples():
    assert is_system_path("c:\\Windows\\Temp\\a.tmp")
    assert not is_system_path("c:\\Users\\bob\\invoice.docx")
    assert is_system_path("C:\\PROGRA~1\\App\\x.dat")


@given(st.text(max_size=40))
def test_path_predicates_case_insensitive(s):
    path = "c:\\windows\\" + s
    assert is_system_path(path) == is_system_path(path.upper()) == is_system_path(path.lower())
    e = ev(0, path="x" + s + "myfile")
    assert is_decoy(e) == is_decoy(ev(0, path=e.path.upper()))


def test_approx_start_time():
    log = ExecutionLog((ev(0), ev(900, path="c:\\myFile1"), ev(3000, path="c:\\myFile2")))
    assert approx_start_time(log) == 900
    assert approx_start_time(ExecutionLog((ev(0), ev(4200, path="a\\myFile")))) == 4200
    assert approx_start_time(ExecutionLog((ev(0),))) is None


# -- config ------------------------------------------------------------------------------


def test_config_round_trip(tmp_path):
    cfg = PathConfig(DecoySpec(("canary",), ("c:\\Bait",)), ("c:\\Windows",))
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(cfg.to_json()))
    assert load_config(p) == cfg
    assert load_config(None) == PathConfig()


def test_config_rejects_wrong_version(tmp_path):
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(SchemaMismatch):
        load_config(p)
    p.write_text(json.dumps({"decoy_keywords": ["x"]}))
    with pytest.raises(SchemaMismatch):
        load_config(p)
