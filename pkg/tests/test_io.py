"""Self-describing CSV and report files."""

import math

import numpy as np
import pytest

from pulseprep.io import (
    format_value,
    parse_value,
    read_csv,
    read_report,
    write_csv,
    write_plot_triplet,
    write_report,
)


def test_format_value():
    assert format_value(True) == "true"
    assert format_value(False) == "false"
    assert format_value(0.1) == "0.1"
    assert format_value(1 / 3) == repr(1 / 3)
    assert format_value(42) == "42"
    assert format_value("010") == "010"


def test_parse_value_types():
    assert parse_value("true") is True
    assert parse_value("false") is False
    assert parse_value("42") == 42 and isinstance(parse_value("42"), int)
    assert parse_value("0") == 0 and isinstance(parse_value("0"), int)
    assert parse_value("4.25e-3") == 4.25e-3
    assert parse_value("-inf") == -math.inf
    assert math.isnan(parse_value("nan"))
    # Leading zeros mark basis-state labels, not numbers.
    assert parse_value("010") == "010"
    assert parse_value("0101") == "0101"
    assert parse_value("abc") == "abc"


def test_float_repr_round_trips_exactly():
    for v in (0.1, 1 / 3, -5.138710516292, 2 * math.pi):
        assert parse_value(format_value(v)) == v


def test_csv_round_trip(tmp_path):
    path = tmp_path / "out.csv"
    header = {"seed": 42, "tol": 1e-3, "flag": True}
    cols = {"state": ["010", "100"], "p": [0.25, 1 / 3], "n": [1, 2]}
    write_csv(path, header, cols)
    head, back = read_csv(path)
    assert head == {"seed": "42", "tol": "0.001", "flag": "true"}
    # "100" has no leading zero, so type inference reads it as an integer;
    # str() recovers the label either way.
    assert [str(v) for v in back["state"]] == ["010", "100"]
    assert back["state"][0] == "010"
    assert back["p"] == [0.25, 1 / 3]
    assert back["n"] == [1, 2]


def test_csv_rejects_ragged_columns(tmp_path):
    with pytest.raises(ValueError):
        write_csv(tmp_path / "bad.csv", {}, {"a": [1, 2], "b": [1]})


def test_csv_empty_columns(tmp_path):
    path = tmp_path / "empty.csv"
    write_csv(path, {"k": 1}, {"a": [], "b": []})
    _, back = read_csv(path)
    assert back == {"a": [], "b": []}


def test_csv_is_byte_deterministic(tmp_path):
    cols = {"x": list(np.linspace(0, 1, 5)), "y": [0.1, 0.2, 0.3, 0.4, 0.5]}
    write_csv(tmp_path / "a.csv", {"seed": 1}, cols)
    write_csv(tmp_path / "b.csv", {"seed": 1}, cols)
    assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()


def test_plot_triplet_columns(tmp_path):
    path = tmp_path / "fig.csv"
    write_plot_triplet(path, {}, [1.0, 2.0], [3.0, 4.0], [0.0, 0.1])
    _, cols = read_csv(path)
    assert list(cols) == ["x", "y", "yerr"]
    assert cols["y"] == [3.0, 4.0]


def test_report_round_trip(tmp_path):
    path = tmp_path / "report.txt"
    write_report(path, {"seed": 7}, {"e0": -1.25, "converged": True,
                                     "label": "010"})
    head, body = read_report(path)
    assert head == {"seed": "7"}
    assert body == {"e0": -1.25, "converged": True, "label": "010"}
