import pytest

from pib.excellon import parse_excellon
from pib.native import ParseError


def test_minimal_program():
    prog = parse_excellon("M48\nMETRIC\nT01C1.0\n%\nT01\nX10.0Y10.0\nM30\n")
    assert prog.tools == {"T01": 1.0}
    assert prog.hits == [("T01", (10.0, 10.0))]


def test_empty_body_keeps_tools():
    prog = parse_excellon("M48\nMETRIC\nT01C1.0\nT2C0.8\n%\nM30\n")
    assert prog.tools == {"T01": 1.0, "T02": 0.8}
    assert prog.hits == []


def test_hit_without_tool():
    with pytest.raises(ParseError) as e:
        parse_excellon("M48\nMETRIC\nT01C1.0\n%\nX5.Y5.\nM30\n")
    assert "HitWithoutTool" in str(e.value)
    assert e.value.line == 5


def test_unknown_tool():
    with pytest.raises(ParseError) as e:
        parse_excellon("M48\nMETRIC\nT01C1.0\n%\nT07\nX1.0Y1.0\nM30\n")
    assert "UnknownTool" in str(e.value)


def test_inch_and_implicit_coordinates():
    prog = parse_excellon("M48\nINCH,LZ\nT01C0.040\n%\nT01\nX01Y005\nM30\n")
    assert prog.tools["T01"] == pytest.approx(1.016)
    x, y = prog.hits[0][1]
    assert x == pytest.approx(25.4)
    assert y == pytest.approx(0.5 * 25.4)


def test_modal_coordinates_and_comments():
    prog = parse_excellon("M48\n; tools\nMETRIC\nT01C1.0\n%\nT01\nX1.0Y2.0\nX3.0\nY4.0\nM30\n")
    assert [xy for _, xy in prog.hits] == [(1.0, 2.0), (3.0, 2.0), (3.0, 4.0)]
    assert prog.hits_for("T01") == [(1.0, 2.0), (3.0, 2.0), (3.0, 4.0)]


def test_bytes_input_and_bad_utf8():
    assert parse_excellon(b"M48\nMETRIC\nT01C1.0\n%\nM30\n").tools == {"T01": 1.0}
    with pytest.raises(ParseError):
        parse_excellon(b"M48\nMETRIC\nT01C\xff\n%\nM30\n")
