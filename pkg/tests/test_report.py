"""Value formatting and output-path resolution."""

import math

import pytest

from fairslot.report import (
    format_value,
    render_report,
    resolve_output_path,
    write_report,
)


def test_format_value():
    assert format_value(True) == "true"
    assert format_value(False) == "false"
    assert format_value(3) == "3"
    assert format_value(0.1) == "0.1"
    assert format_value(15.0 / 86.0) == "0.174418604651"
    assert format_value(float("nan")) == "nan"
    assert format_value(math.inf) == "inf"
    assert format_value(-math.inf) == "-inf"
    assert format_value("text") == "text"


def test_render_report_layout():
    text = render_report(["a", "b"], [[1, 2.5], [True, float("nan")]],
                         "scenario=abc seed=1")
    lines = text.split("\n")
    assert lines[0] == "# scenario=abc seed=1"
    assert lines[1] == "a,b"
    assert lines[2] == "1,2.5"
    assert lines[3] == "true,nan"
    assert lines[4] == ""  # trailing newline
    with pytest.raises(ValueError):
        render_report(["a", "b"], [[1]], "c")


def test_resolve_output_path(monkeypatch, tmp_path):
    monkeypatch.delenv("FAIRSLOT_OUT", raising=False)
    assert resolve_output_path(None) is None
    assert str(resolve_output_path("rel/x.csv")) == "rel/x.csv"
    monkeypatch.setenv("FAIRSLOT_OUT", str(tmp_path))
    assert resolve_output_path("rel/x.csv") == tmp_path / "rel" / "x.csv"
    absolute = tmp_path / "abs.csv"
    assert resolve_output_path(str(absolute)) == absolute


def test_write_report_creates_parents(monkeypatch, tmp_path):
    monkeypatch.setenv("FAIRSLOT_OUT", str(tmp_path))
    target = write_report(["x"], [[1]], "c", "deep/nested/out.csv")
    assert target == tmp_path / "deep" / "nested" / "out.csv"
    assert target.read_text() == "# c\nx\n1\n"


def test_write_report_stdout(capsys):
    assert write_report(["x"], [[2]], "c", None) is None
    assert capsys.readouterr().out == "# c\nx\n2\n"
