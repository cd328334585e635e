import json
import os
import random

import pytest

from conftest import DATA, EXAMPLE, read_bytes
from pib.board import Polygon
from pib.native import ParseError, board_to_document, emit_native, parse_budget, parse_native

MINIMAL = {
    "meta": {"name": "tiny"},
    "layers": [{"name": "top", "kind": "external-top", "copper_weight": 1},
               {"name": "bottom", "kind": "external-bottom", "copper_weight": 1}],
    "nets": [{"name": "V", "kind": "power", "nominal_voltage": 3.3}, {"name": "GND", "kind": "ground"}],
    "copper": [
        {"id": "a", "type": "pad", "net": "V", "layer": "top", "at": [0, 0], "shape": "circle", "diameter": 1},
        {"id": "b", "type": "pad", "net": "V", "layer": "top", "at": [5, 0], "shape": "circle", "diameter": 1},
        {"id": "g", "type": "pad", "net": "GND", "layer": "bottom", "at": [5, 3], "shape": "circle",
         "diameter": 1},
        {"id": "t", "type": "segment", "net": "V", "layer": "top", "start": [0, 0], "end": [5, 0], "width": 0.5},
    ],
    "sources": [{"name": "S", "net": "V", "pin": "a", "voltage": 3.3}],
    "loads": [{"ref_des": "L", "power_pin": "b", "ground_pin": "g", "load_current": 0.1, "min_voltage": 3.0}],
}


def doc(**changes):
    d = json.loads(json.dumps(MINIMAL))
    d.update(changes)
    return json.dumps(d)


def test_minimal_document():
    b = parse_native(doc())
    assert b.name == "tiny"
    assert [f.id for f in b.copper] == ["a", "b", "g", "t"]
    assert b.loads[0].load_current == 0.1


def test_bundled_board_loads(example_board):
    assert [ld.ref_des for ld in example_board.loads] == [f"DV{k}" for k in range(1, 13)]
    assert {ld.load_current for ld in example_board.loads} == {1.3}
    assert example_board.net("HT").nominal_voltage == 12.0


def test_round_trip_is_stable(example_board):
    text = emit_native(example_board)
    again = parse_native(text)
    assert again == example_board
    assert emit_native(again) == text
    assert text == read_bytes(EXAMPLE).decode("utf-8")


def test_polygon_preserved(example_board):
    polys = [f for f in example_board.copper if isinstance(f.shape, Polygon)]
    assert len(polys) == 6
    back = board_to_document(example_board)
    assert any(f["type"] == "polygon" for f in back["copper"])


def test_mil_units_scale():
    d = json.loads(doc())
    d["meta"]["units"] = "mil"
    b = parse_native(json.dumps(d))
    assert b.copper[3].shape.width == pytest.approx(0.5 * 0.0254)


def test_unknown_key_strict_vs_lenient():
    d = json.loads(doc())
    d["copper"][0]["colour"] = "red"
    with pytest.raises(ParseError) as e:
        parse_native(json.dumps(d))
    assert e.value.path == "$.copper[0].colour"
    assert parse_native(json.dumps(d), lenient=True).copper[0].id == "a"


def test_syntax_error_is_positioned():
    text = doc()[:-5]
    with pytest.raises(ParseError) as e:
        parse_native(text)
    assert e.value.line is not None and e.value.column is not None


def test_schema_error_has_path():
    d = json.loads(doc())
    d["loads"][0]["load_current"] = "lots"
    with pytest.raises(ParseError) as e:
        parse_native(json.dumps(d))
    assert e.value.path == "$.loads[0].load_current"


def test_structural_errors_attached():
    d = json.loads(doc())
    d["loads"][0]["power_pin"] = "nowhere"
    with pytest.raises(ParseError) as e:
        parse_native(json.dumps(d))
    assert [x.kind for x in e.value.errors] == ["UnknownPad"]
    assert parse_native(json.dumps(d), validate=False).loads[0].power_pin == "nowhere"


def test_bad_utf8():
    with pytest.raises(ParseError) as e:
        parse_native(b'{"meta":\n{"name": "\xff"}}')
    assert e.value.line == 2


def test_budget_sidecar():
    lines = parse_budget(json.dumps({"budget": [{"name": "m", "rail": "HT", "voltage": 12, "current": 1.3,
                                                "quantity": 12}]}))
    assert lines[0].quantity == 12


def test_golden_import_round_trip():
    text = read_bytes(os.path.join(DATA, "golden_board.pib.json")).decode()
    assert emit_native(parse_native(text)) == text


def test_byte_mutation_never_crashes():
    data = bytearray(doc().encode())
    rng = random.Random(7)
    for _ in range(500):
        m = bytearray(data)
        for _ in range(rng.randint(1, 4)):
            m[rng.randrange(len(m))] = rng.randrange(256)
        try:
            parse_native(bytes(m))
        except ParseError:
            pass
