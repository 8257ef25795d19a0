import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from levilab.report import CSV_COLUMNS, atomic_write, chunked_map, dumps, slack_rows, thread_count
from levilab.verify import InequalityReport


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_float_roundtrip(x):
    assert json.loads(dumps({"v": x}))["v"] == x


def test_sorted_keys_and_nonfinite():
    text = dumps({"b": 1, "a": [math.nan, math.inf, -math.inf, np.float64(0.5)], "c": np.bool_(True)})
    assert text.index('"a"') < text.index('"b"')
    data = json.loads(text)
    assert data["a"] == ["nan", "inf", "-inf", 0.5]
    assert data["c"] is True


def test_integral_float_keeps_type():
    assert json.loads(dumps({"x": 2.0}))["x"] == 2.0
    assert "2.0" in dumps({"x": 2.0})


def test_unserializable():
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_atomic_write_replaces(tmp_path):
    p = tmp_path / "sub" / "out.json"
    atomic_write(str(p), "one")
    atomic_write(str(p), "two")
    assert p.read_text() == "two"
    assert [f.name for f in p.parent.iterdir()] == ["out.json"]


def test_slack_rows():
    rep = InequalityReport("demo", np.array([0.5, -1.0]))
    rep.points = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
    rep.directions = np.array([[1, 0], [0, 1j]])
    rep.labels = np.array([0, 1])
    rows = list(csv.reader(io.StringIO(slack_rows([rep, InequalityReport("skip", np.zeros(1))]))))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert len(rows) == 3
    assert rows[2][0] == "demo" and float(rows[2][4]) == -1.0 and rows[2][5] == "1"


def test_thread_count_env(monkeypatch):
    monkeypatch.setenv("LEVI_LAB_THREADS", "3")
    assert thread_count() == 3
    monkeypatch.setenv("LEVI_LAB_THREADS", "x")
    with pytest.raises(ValueError):
        thread_count()


def test_chunked_map_preserves_order(monkeypatch):
    monkeypatch.setenv("LEVI_LAB_THREADS", "4")
    X = np.arange(5000.0)[:, None]
    parts = chunked_map(lambda c: c[:, 0] * 2, X, min_chunk=100)
    assert len(parts) == 4
    assert np.array_equal(np.concatenate(parts), X[:, 0] * 2)
