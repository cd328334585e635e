"""Native ``.pib.json`` board format.

The document is a JSON object with ``meta``, ``layers``, ``nets``,
``copper``, ``components``, ``sources``, ``loads``, ``regulators``,
``testpoints``, ``budget``, ``outline`` and ``rules`` sections. All lengths
use ``meta.units`` (``mm`` or ``mil``); copper weight is always oz.
See docs/native_format.md for the full schema.
"""

from __future__ import annotations

import json
import logging
import math

from .board import (
    Board,
    BudgetLine,
    Component,
    CopperFeature,
    Layer,
    LoadSpec,
    Net,
    Pad,
    Pin,
    Polygon,
    RegulatorSpec,
    Segment,
    SourceSpec,
    TestPoint,
    Via,
    validate_board,
)
from .units import MIL_MM

log = logging.getLogger(__name__)

SECTIONS = (
    "meta", "layers", "nets", "copper", "components", "sources", "loads",
    "regulators", "testpoints", "budget", "outline", "rules",
)


class ParseError(ValueError):
    """Malformed input, positioned by line/column or document path."""

    def __init__(self, message, path=None, line=None, column=None, errors=None):
        self.message = message
        self.path = path
        self.line = line
        self.column = column
        self.errors = list(errors or [])
        where = []
        if line is not None:
            where.append(f"line {line}" + (f", column {column}" if column is not None else ""))
        if path:
            where.append(path)
        super().__init__(f"{' '.join(where)}: {message}" if where else message)


class _Reader:
    def __init__(self, scale, lenient):
        self.scale = scale
        self.lenient = lenient
        self.warnings: list[str] = []

    def obj(self, v, path, allowed, required=()):
        if not isinstance(v, dict):
            raise ParseError("expected an object", path)
        for k in v:
            if k not in allowed:
                msg = f"unknown key {k!r}"
                if self.lenient:
                    self.warnings.append(f"{path}: {msg}")
                    log.warning("%s: %s", path, msg)
                else:
                    raise ParseError(msg, f"{path}.{k}")
        for k in required:
            if k not in v:
                raise ParseError(f"missing key {k!r}", path)
        return v

    def list(self, v, path):
        if not isinstance(v, list):
            raise ParseError("expected a list", path)
        return v

    def str(self, v, path):
        if not isinstance(v, str) or not v:
            raise ParseError("expected a non-empty string", path)
        return v

    def num(self, v, path):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ParseError("expected a finite number", path)
        return float(v)

    def opt_num(self, d, key, path):
        return None if d.get(key) is None else self.num(d[key], f"{path}.{key}")

    def int(self, v, path):
        if isinstance(v, bool) or not isinstance(v, int):
            raise ParseError("expected an integer", path)
        return v

    def bool(self, v, path):
        if not isinstance(v, bool):
            raise ParseError("expected true/false", path)
        return v

    def length(self, v, path):
        return self.num(v, path) * self.scale

    def point(self, v, path):
        v = self.list(v, path)
        if len(v) != 2:
            raise ParseError("expected [x, y]", path)
        return (self.length(v[0], path + "[0]"), self.length(v[1], path + "[1]"))


def _feature(r: _Reader, d, path):
    kind = d.get("type") if isinstance(d, dict) else None
    common = ("id", "type", "net")
    if kind == "segment":
        r.obj(d, path, common + ("layer", "start", "end", "width"), common + ("layer", "start", "end", "width"))
        shape = Segment(r.point(d["start"], path + ".start"), r.point(d["end"], path + ".end"),
                        r.length(d["width"], path + ".width"))
        layer = r.str(d["layer"], path + ".layer")
    elif kind == "polygon":
        r.obj(d, path, common + ("layer", "points"), common + ("layer", "points"))
        pts = r.list(d["points"], path + ".points")
        shape = Polygon(tuple(r.point(p, f"{path}.points[{i}]") for i, p in enumerate(pts)))
        layer = r.str(d["layer"], path + ".layer")
    elif kind == "via":
        r.obj(d, path, common + ("layers", "at", "drill", "diameter", "tented"),
              common + ("layers", "at", "drill", "diameter"))
        ls = r.list(d["layers"], path + ".layers")
        if len(ls) != 2:
            raise ParseError("via needs exactly two layers", path + ".layers")
        layers = (r.str(ls[0], path + ".layers[0]"), r.str(ls[1], path + ".layers[1]"))
        shape = Via(r.point(d["at"], path + ".at"), r.length(d["drill"], path + ".drill"),
                    r.length(d["diameter"], path + ".diameter"), layers,
                    r.bool(d.get("tented", False), path + ".tented"))
        layer = layers[0]
    elif kind == "pad":
        r.obj(d, path, common + ("layer", "at", "shape", "diameter", "size", "plated", "drill", "mask_expansion"),
              common + ("layer", "at", "shape"))
        ps = d["shape"]
        if ps == "circle":
            if "diameter" not in d:
                raise ParseError("circle pad needs 'diameter'", path)
            dia = r.length(d["diameter"], path + ".diameter")
            size = (dia, dia)
        elif ps == "rect":
            if "size" not in d:
                raise ParseError("rect pad needs 'size'", path)
            sz = r.list(d["size"], path + ".size")
            if len(sz) != 2:
                raise ParseError("expected [w, h]", path + ".size")
            size = (r.length(sz[0], path + ".size[0]"), r.length(sz[1], path + ".size[1]"))
        else:
            raise ParseError(f"unknown pad shape {ps!r}", path + ".shape")
        drill = None if d.get("drill") is None else r.length(d["drill"], path + ".drill")
        mask = None if d.get("mask_expansion") is None else r.length(d["mask_expansion"], path + ".mask_expansion")
        shape = Pad(r.point(d["at"], path + ".at"), ps, size, r.bool(d.get("plated", True), path + ".plated"),
                    drill, mask)
        layer = r.str(d["layer"], path + ".layer")
    else:
        raise ParseError(f"unknown copper type {kind!r}", path + ".type")
    return CopperFeature(r.str(d["id"], path + ".id"), layer, r.str(d["net"], path + ".net"), shape)


def _decode(text):
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            raise ParseError(f"invalid UTF-8: {e.reason}", line=bytes(text)[: e.start].count(b"\n") + 1) from None
    return text


def parse_native(text, lenient=False, validate=True) -> Board:
    """Parse a native board document into a :class:`Board`.

    Raises :class:`ParseError` on syntax errors (with line/column), schema
    errors (with a document path) and, when ``validate`` is set, on
    structural errors reported by :func:`validate_board`.
    """
    text = _decode(text)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno) from None
    except RecursionError:
        raise ParseError("document nested too deeply") from None
    board, _ = board_from_document(doc, lenient=lenient)
    if validate:
        errors = validate_board(board)
        if errors:
            raise ParseError("; ".join(str(e) for e in errors), errors=errors)
    return board


def board_from_document(doc, lenient=False):
    """Build a Board from an already-decoded document; returns (board, warnings)."""
    probe = _Reader(1.0, lenient)
    probe.obj(doc, "$", SECTIONS, ("meta", "layers"))
    meta = probe.obj(doc["meta"], "$.meta", ("name", "units", "thickness"), ("name",))
    units = meta.get("units", "mm")
    if units not in ("mm", "mil"):
        raise ParseError(f"units must be 'mm' or 'mil', got {units!r}", "$.meta.units")
    r = _Reader(1.0 if units == "mm" else MIL_MM, lenient)
    r.warnings = probe.warnings

    def items(key):
        return list(enumerate(r.list(doc.get(key, []), f"$.{key}")))

    layers = []
    for i, d in items("layers"):
        p = f"$.layers[{i}]"
        r.obj(d, p, ("name", "kind", "copper_weight"), ("name", "kind", "copper_weight"))
        layers.append(Layer(r.str(d["name"], p + ".name"), r.str(d["kind"], p + ".kind"),
                            r.num(d["copper_weight"], p + ".copper_weight")))

    nets = []
    for i, d in items("nets"):
        p = f"$.nets[{i}]"
        r.obj(d, p, ("name", "kind", "nominal_voltage", "max_current"), ("name", "kind"))
        nets.append(Net(r.str(d["name"], p + ".name"), r.str(d["kind"], p + ".kind"),
                        r.opt_num(d, "nominal_voltage", p), r.opt_num(d, "max_current", p)))

    copper = [_feature(r, d, f"$.copper[{i}]") for i, d in items("copper")]

    components = []
    for i, d in items("components"):
        p = f"$.components[{i}]"
        r.obj(d, p, ("ref_des", "pins"), ("ref_des",))
        pins = []
        for j, pd in enumerate(r.list(d.get("pins", []), p + ".pins")):
            pp = f"{p}.pins[{j}]"
            r.obj(pd, pp, ("name", "pad", "net"), ("name", "pad", "net"))
            pins.append(Pin(r.str(pd["name"], pp + ".name"), r.str(pd["pad"], pp + ".pad"),
                            r.str(pd["net"], pp + ".net")))
        components.append(Component(r.str(d["ref_des"], p + ".ref_des"), tuple(pins)))

    sources = []
    for i, d in items("sources"):
        p = f"$.sources[{i}]"
        r.obj(d, p, ("name", "net", "pin", "voltage", "max_current", "ground_pin"),
              ("name", "net", "pin", "voltage"))
        sources.append(SourceSpec(r.str(d["name"], p + ".name"), r.str(d["net"], p + ".net"),
                                  r.str(d["pin"], p + ".pin"), r.num(d["voltage"], p + ".voltage"),
                                  r.opt_num(d, "max_current", p),
                                  None if d.get("ground_pin") is None else r.str(d["ground_pin"], p + ".ground_pin")))

    loads = []
    for i, d in items("loads"):
        p = f"$.loads[{i}]"
        keys = ("ref_des", "power_pin", "ground_pin", "load_current", "min_voltage")
        r.obj(d, p, keys, keys)
        loads.append(LoadSpec(r.str(d["ref_des"], p + ".ref_des"), r.str(d["power_pin"], p + ".power_pin"),
                              r.str(d["ground_pin"], p + ".ground_pin"),
                              r.num(d["load_current"], p + ".load_current"),
                              r.num(d["min_voltage"], p + ".min_voltage")))

    regulators = []
    for i, d in items("regulators"):
        p = f"$.regulators[{i}]"
        req = ("ref_des", "input_pin", "output_pin", "ground_pin", "set_voltage")
        r.obj(d, p, req + ("dropout", "quiescent_current"), req)
        regulators.append(RegulatorSpec(
            r.str(d["ref_des"], p + ".ref_des"), r.str(d["input_pin"], p + ".input_pin"),
            r.str(d["output_pin"], p + ".output_pin"), r.str(d["ground_pin"], p + ".ground_pin"),
            r.num(d["set_voltage"], p + ".set_voltage"),
            r.num(d.get("dropout", 2.0), p + ".dropout"),
            r.num(d.get("quiescent_current", 0.0), p + ".quiescent_current")))

    testpoints = []
    for i, d in items("testpoints"):
        p = f"$.testpoints[{i}]"
        req = ("name", "net", "pad", "expected_voltage", "tolerance")
        r.obj(d, p, req + ("ground_pad",), req)
        testpoints.append(TestPoint(
            r.str(d["name"], p + ".name"), r.str(d["net"], p + ".net"), r.str(d["pad"], p + ".pad"),
            r.num(d["expected_voltage"], p + ".expected_voltage"), r.num(d["tolerance"], p + ".tolerance"),
            None if d.get("ground_pad") is None else r.str(d["ground_pad"], p + ".ground_pad")))

    budget = [budget_line(r, d, f"$.budget[{i}]") for i, d in items("budget")]

    outline = []
    for i, d in items("outline"):
        p = f"$.outline[{i}]"
        e = r.list(d, p)
        if len(e) != 2:
            raise ParseError("outline edge must be [[x1, y1], [x2, y2]]", p)
        outline.append((r.point(e[0], p + "[0]"), r.point(e[1], p + "[1]")))

    rules = []
    rd = r.obj(doc.get("rules", {}), "$.rules", RULE_KEYS)
    for k in sorted(rd):
        rules.append((k, r.num(rd[k], f"$.rules.{k}") * (r.scale if k in MM_RULES else 1.0)))

    board = Board(
        name=r.str(meta["name"], "$.meta.name"),
        layers=tuple(layers), nets=tuple(nets), copper=tuple(copper),
        components=tuple(components), sources=tuple(sources), loads=tuple(loads),
        regulators=tuple(regulators), testpoints=tuple(testpoints), budget=tuple(budget),
        outline=tuple(outline), rules=tuple(rules),
        thickness=r.length(meta.get("thickness", 1.6), "$.meta.thickness"),
    )
    return board, r.warnings


# rule values in document length units; the mil-valued rules are always mil
MM_RULES = ("min_clearance", "min_annular_ring", "mask_expansion", "drill_merge_tolerance", "outline_chain_gap")
RULE_KEYS = MM_RULES + ("min_track_width", "min_via_diameter", "min_via_drill")


def budget_line(r, d, p):
    req = ("name", "rail", "voltage", "current")
    r.obj(d, p, req + ("quantity",), req)
    return BudgetLine(r.str(d["name"], p + ".name"), r.str(d["rail"], p + ".rail"),
                      r.num(d["voltage"], p + ".voltage"), r.num(d["current"], p + ".current"),
                      r.int(d.get("quantity", 1), p + ".quantity"))


def parse_budget(text):
    """Parse a budget sidecar: ``{"budget": [...]}`` or a bare list."""
    text = _decode(text)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(e.msg, line=e.lineno, column=e.colno) from None
    r = _Reader(1.0, False)
    if isinstance(doc, dict):
        r.obj(doc, "$", ("budget",), ("budget",))
        doc = doc["budget"]
    return tuple(budget_line(r, d, f"$[{i}]") for i, d in enumerate(r.list(doc, "$")))


def _feature_doc(f: CopperFeature):
    s = f.shape
    d = {"id": f.id, "type": f.kind, "net": f.net}
    if isinstance(s, Segment):
        d.update(layer=f.layer, start=list(s.start), end=list(s.end), width=s.width)
    elif isinstance(s, Polygon):
        d.update(layer=f.layer, points=[list(p) for p in s.vertices])
    elif isinstance(s, Via):
        d.update(layers=list(s.layers), at=list(s.center), drill=s.drill, diameter=s.diameter)
        if s.tented:
            d["tented"] = True
    else:
        d.update(layer=f.layer, at=list(s.center), shape=s.shape)
        if s.shape == "circle":
            d["diameter"] = s.size[0]
        else:
            d["size"] = list(s.size)
        if not s.plated:
            d["plated"] = False
        if s.drill is not None:
            d["drill"] = s.drill
        if s.mask_expansion is not None:
            d["mask_expansion"] = s.mask_expansion
    return d


def _drop_none(d):
    return {k: v for k, v in d.items() if v is not None}


def board_to_document(board: Board) -> dict:
    doc = {"meta": {"name": board.name, "units": "mm", "thickness": board.thickness}}
    doc["layers"] = [{"name": l.name, "kind": l.kind, "copper_weight": l.copper_weight} for l in board.layers]
    if board.nets:
        doc["nets"] = [_drop_none({"name": n.name, "kind": n.kind, "nominal_voltage": n.nominal_voltage,
                                   "max_current": n.max_current}) for n in board.nets]
    if board.copper:
        doc["copper"] = [_feature_doc(f) for f in board.copper]
    if board.components:
        doc["components"] = [{"ref_des": c.ref_des,
                              "pins": [{"name": p.name, "pad": p.pad, "net": p.net} for p in c.pins]}
                             for c in board.components]
    if board.sources:
        doc["sources"] = [_drop_none({"name": s.name, "net": s.net, "pin": s.pin, "voltage": s.voltage,
                                      "max_current": s.max_current, "ground_pin": s.ground_pin})
                          for s in board.sources]
    if board.loads:
        doc["loads"] = [{"ref_des": l.ref_des, "power_pin": l.power_pin, "ground_pin": l.ground_pin,
                         "load_current": l.load_current, "min_voltage": l.min_voltage} for l in board.loads]
    if board.regulators:
        doc["regulators"] = [{"ref_des": r.ref_des, "input_pin": r.input_pin, "output_pin": r.output_pin,
                              "ground_pin": r.ground_pin, "set_voltage": r.set_voltage, "dropout": r.dropout,
                              "quiescent_current": r.quiescent_current} for r in board.regulators]
    if board.testpoints:
        doc["testpoints"] = [_drop_none({"name": t.name, "net": t.net, "pad": t.pad,
                                         "expected_voltage": t.expected_voltage, "tolerance": t.tolerance,
                                         "ground_pad": t.ground_pad}) for t in board.testpoints]
    if board.budget:
        doc["budget"] = [{"name": b.name, "rail": b.rail, "voltage": b.voltage, "current": b.current,
                          "quantity": b.quantity} for b in board.budget]
    if board.outline:
        doc["outline"] = [[list(a), list(b)] for a, b in board.outline]
    if board.rules:
        doc["rules"] = dict(board.rules)
    return doc


def emit_native(board: Board) -> str:
    """Serialise ``board`` to native text (mm units, stable key order)."""
    return json.dumps(board_to_document(board), indent=1) + "\n"
