"""Immutable in-memory board model and structural validation."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional, Union

from .units import oz_to_um

LAYER_KINDS = ("external-top", "external-bottom", "internal")
NET_KINDS = ("power", "ground", "signal")
UNASSIGNED_NET = "unassigned"

Point = tuple[float, float]


@dataclass(frozen=True)
class Layer:
    name: str
    kind: str
    copper_weight: float  # oz

    @property
    def thickness_um(self) -> float:
        return oz_to_um(self.copper_weight)

    @property
    def is_external(self) -> bool:
        return self.kind != "internal"


@dataclass(frozen=True)
class Net:
    name: str
    kind: str
    nominal_voltage: Optional[float] = None
    # declared worst-case current, used when the net is not solved
    max_current: Optional[float] = None


@dataclass(frozen=True)
class Segment:
    start: Point
    end: Point
    width: float


@dataclass(frozen=True)
class Polygon:
    vertices: tuple[Point, ...]


@dataclass(frozen=True)
class Via:
    center: Point
    drill: float
    diameter: float
    layers: tuple[str, str]
    tented: bool = False


@dataclass(frozen=True)
class Pad:
    center: Point
    shape: str  # "circle" | "rect"
    size: tuple[float, float]  # (d, d) for circles, (w, h) for rects
    plated: bool = True
    drill: Optional[float] = None
    mask_expansion: Optional[float] = None

    @property
    def through_hole(self) -> bool:
        return self.plated and self.drill is not None

    @property
    def min_dimension(self) -> float:
        return min(self.size)


Shape = Union[Segment, Polygon, Via, Pad]


@dataclass(frozen=True)
class CopperFeature:
    id: str
    layer: str
    net: str
    shape: Shape

    @property
    def kind(self) -> str:
        return type(self.shape).__name__.lower()


@dataclass(frozen=True)
class Pin:
    name: str
    pad: str
    net: str


@dataclass(frozen=True)
class Component:
    ref_des: str
    pins: tuple[Pin, ...] = ()


@dataclass(frozen=True)
class SourceSpec:
    name: str
    net: str
    pin: str
    voltage: float
    max_current: Optional[float] = None
    # return pad pinned at 0 V; without one the ground nets are ideal
    ground_pin: Optional[str] = None


@dataclass(frozen=True)
class LoadSpec:
    ref_des: str
    power_pin: str
    ground_pin: str
    load_current: float
    min_voltage: float


@dataclass(frozen=True)
class RegulatorSpec:
    ref_des: str
    input_pin: str
    output_pin: str
    ground_pin: str
    set_voltage: float
    dropout: float = 2.0
    quiescent_current: float = 0.0


@dataclass(frozen=True)
class TestPoint:
    __test__ = False  # not a pytest class

    name: str
    net: str
    pad: str
    expected_voltage: float
    tolerance: float
    ground_pad: Optional[str] = None


@dataclass(frozen=True)
class BudgetLine:
    name: str
    rail: str
    voltage: float
    current: float
    quantity: int = 1


@dataclass(frozen=True)
class Board:
    name: str
    layers: tuple[Layer, ...]
    nets: tuple[Net, ...] = ()
    copper: tuple[CopperFeature, ...] = ()
    components: tuple[Component, ...] = ()
    sources: tuple[SourceSpec, ...] = ()
    loads: tuple[LoadSpec, ...] = ()
    regulators: tuple[RegulatorSpec, ...] = ()
    testpoints: tuple[TestPoint, ...] = ()
    budget: tuple[BudgetLine, ...] = ()
    outline: tuple[tuple[Point, Point], ...] = ()
    rules: tuple[tuple[str, float], ...] = ()
    thickness: float = 1.6  # mm, dielectric stack height for via barrels

    def layer(self, name):
        for l in self.layers:
            if l.name == name:
                return l
        raise KeyError(name)

    def net(self, name):
        for n in self.nets:
            if n.name == name:
                return n
        raise KeyError(name)

    @property
    def layer_map(self) -> dict:
        return {l.name: l for l in self.layers}

    @property
    def net_map(self) -> dict:
        return {n.name: n for n in self.nets}

    @property
    def pads(self) -> dict:
        """Pad and via features by id."""
        return {f.id: f for f in self.copper if isinstance(f.shape, (Pad, Via))}

    def feature(self, fid):
        for f in self.copper:
            if f.id == fid:
                return f
        raise KeyError(fid)

    def feature_layers(self, f: CopperFeature) -> tuple:
        """Copper layers a feature occupies (plated holes span the stack)."""
        if isinstance(f.shape, Via):
            return f.shape.layers
        if isinstance(f.shape, Pad) and f.shape.through_hole:
            return tuple(l.name for l in self.layers)
        return (f.layer,)


@dataclass(frozen=True)
class StructuralError:
    kind: str
    subject: str
    message: str

    def __str__(self):
        return f"{self.kind}: {self.subject}: {self.message}"


def natural_key(s):
    return [int(t) if t.isdigit() else t for t in re.split(r"(\d+)", s)]


def _collinear(pts):
    (x0, y0) = pts[0]
    for i in range(1, len(pts)):
        for j in range(i + 1, len(pts)):
            (x1, y1), (x2, y2) = pts[i], pts[j]
            if abs((x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)) > 1e-12:
                return False
    return True


def _check_shape(f: CopperFeature, layers, err):
    s = f.shape
    if isinstance(s, Segment):
        if not s.width > 0:
            err("BadGeometry", f.id, "segment width must be > 0")
    elif isinstance(s, Polygon):
        if len(s.vertices) < 3 or _collinear(s.vertices):
            err("BadGeometry", f.id, "polygon needs >= 3 non-collinear vertices")
    elif isinstance(s, Via):
        if not (0 < s.drill < s.diameter):
            err("BadGeometry", f.id, "via drill must be > 0 and < pad diameter")
        if len(s.layers) != 2 or s.layers[0] == s.layers[1]:
            err("BadGeometry", f.id, "via must join two distinct layers")
        for ln in s.layers:
            if ln not in layers:
                err("UnknownLayer", f.id, f"layer {ln!r} not defined")
    elif isinstance(s, Pad):
        if s.shape not in ("circle", "rect"):
            err("BadGeometry", f.id, f"pad shape {s.shape!r}")
        if min(s.size) <= 0:
            err("BadGeometry", f.id, "pad dimensions must be > 0")
        if s.drill is not None and not (0 < s.drill < s.min_dimension):
            err("BadGeometry", f.id, "pad drill must be > 0 and smaller than the pad")
        if s.mask_expansion is not None and s.mask_expansion < 0:
            err("BadGeometry", f.id, "mask expansion must be >= 0")


def regulator_cycle(board: Board):
    """Return a list of regulator ref_des forming a cycle over nets, or None."""
    pads = board.pads
    graph: dict[str, list[tuple[str, str]]] = {}
    for r in board.regulators:
        a = pads.get(r.input_pin)
        b = pads.get(r.output_pin)
        if a is None or b is None:
            continue
        graph.setdefault(a.net, []).append((b.net, r.ref_des))

    state: dict[str, int] = {}
    stack: list[str] = []

    def visit(n):
        state[n] = 1
        for m, ref in graph.get(n, ()):
            stack.append(ref)
            if state.get(m) == 1:
                return list(stack)
            if state.get(m) is None:
                found = visit(m)
                if found:
                    return found
            stack.pop()
        state[n] = 2
        return None

    for n in sorted(graph):
        if state.get(n) is None:
            found = visit(n)
            if found:
                return found
    return None


def reachable_nets(board: Board) -> set:
    """Nets fed by a source directly or through a chain of regulators."""
    pads = board.pads
    reached = {s.net for s in board.sources}
    edges = []
    for r in board.regulators:
        a, b = pads.get(r.input_pin), pads.get(r.output_pin)
        if a is not None and b is not None:
            edges.append((a.net, b.net))
    changed = True
    while changed:
        changed = False
        for a, b in edges:
            if a in reached and b not in reached:
                reached.add(b)
                changed = True
    return reached


def validate_board(board: Board) -> list:
    """Check every structural invariant; returns a (possibly empty) error list."""
    errors: list[StructuralError] = []

    def err(kind, subject, message):
        errors.append(StructuralError(kind, subject, message))

    # layer stack
    kinds = [l.kind for l in board.layers]
    seen = set()
    for l in board.layers:
        if l.name in seen:
            err("DuplicateId", l.name, "layer defined twice")
        seen.add(l.name)
        if l.kind not in LAYER_KINDS:
            err("BadLayer", l.name, f"unknown layer kind {l.kind!r}")
        if not l.copper_weight > 0:
            err("BadLayer", l.name, "copper weight must be > 0")
    for k in ("external-top", "external-bottom"):
        if kinds.count(k) != 1:
            err("LayerStack", board.name, f"need exactly one {k} layer, found {kinds.count(k)}")
    layers = {l.name for l in board.layers}

    # nets
    nets = {}
    for n in board.nets:
        if n.name in nets:
            err("DuplicateId", n.name, "net defined twice")
        nets[n.name] = n
        if n.kind not in NET_KINDS:
            err("BadNet", n.name, f"unknown net kind {n.kind!r}")
        elif n.kind == "power" and not (n.nominal_voltage is not None and n.nominal_voltage > 0):
            err("NetVoltage", n.name, "power nets need a nominal voltage > 0")
        elif n.kind == "ground" and n.nominal_voltage not in (None, 0, 0.0):
            err("NetVoltage", n.name, "ground nets are the 0 V reference")
        elif n.kind == "signal" and n.nominal_voltage is not None:
            err("NetVoltage", n.name, "signal nets carry no nominal voltage")

    # copper
    fids = set()
    for f in board.copper:
        if f.id in fids:
            err("DuplicateId", f.id, "copper feature id used twice")
        fids.add(f.id)
        if f.layer not in layers:
            err("UnknownLayer", f.id, f"layer {f.layer!r} not defined")
        if f.net not in nets and f.net != UNASSIGNED_NET:
            err("UnknownNet", f.id, f"net {f.net!r} not defined")
        _check_shape(f, layers, err)
    pads = board.pads

    def pad_on(subject, pad_id, net=None, what="pin"):
        p = pads.get(pad_id)
        if p is None:
            err("UnknownPad", subject, f"{what} references missing pad {pad_id!r}")
            return None
        if net is not None and p.net != net:
            err("NetMismatch", subject, f"{what} pad {pad_id!r} is on {p.net!r}, not {net!r}")
        return p

    # components
    refs = set()
    for c in board.components:
        if c.ref_des in refs:
            err("DuplicateRefDes", c.ref_des, "ref_des used twice")
        refs.add(c.ref_des)
        for pin in c.pins:
            if pin.net not in nets:
                err("UnknownNet", c.ref_des, f"pin {pin.name} on unknown net {pin.net!r}")
            pad_on(c.ref_des, pin.pad, pin.net, f"pin {pin.name}")

    for s in board.sources:
        if not s.voltage > 0:
            err("BadSource", s.name, "source voltage must be > 0")
        if s.max_current is not None and not s.max_current > 0:
            err("BadSource", s.name, "max_current must be > 0")
        pad_on(s.name, s.pin, s.net, "source pin")
        if s.ground_pin is not None:
            p = pad_on(s.name, s.ground_pin, None, "source ground pin")
            if p is not None and nets.get(p.net) and nets[p.net].kind != "ground":
                err("NetMismatch", s.name, f"ground pin {s.ground_pin!r} is not on a ground net")

    load_refs = set()
    for ld in board.loads:
        if ld.ref_des in load_refs:
            err("DuplicateRefDes", ld.ref_des, "load ref_des used twice")
        load_refs.add(ld.ref_des)
        if not ld.load_current > 0:
            err("BadLoad", ld.ref_des, "load current must be > 0")
        p = pad_on(ld.ref_des, ld.power_pin, None, "power pin")
        g = pad_on(ld.ref_des, ld.ground_pin, None, "ground pin")
        if p is not None and p.net in nets and nets[p.net].kind != "power":
            err("NetMismatch", ld.ref_des, f"power pin on non-power net {p.net!r}")
        if g is not None and g.net in nets and nets[g.net].kind != "ground":
            err("NetMismatch", ld.ref_des, f"ground pin on non-ground net {g.net!r}")

    reg_refs = set()
    for r in board.regulators:
        if r.ref_des in reg_refs:
            err("DuplicateRefDes", r.ref_des, "regulator ref_des used twice")
        reg_refs.add(r.ref_des)
        if not r.set_voltage > 0:
            err("BadRegulator", r.ref_des, "set_voltage must be > 0")
        if r.dropout < 0 or r.quiescent_current < 0:
            err("BadRegulator", r.ref_des, "dropout and quiescent current must be >= 0")
        a = pad_on(r.ref_des, r.input_pin, None, "input pin")
        b = pad_on(r.ref_des, r.output_pin, None, "output pin")
        g = pad_on(r.ref_des, r.ground_pin, None, "ground pin")
        if a is not None and b is not None and a.net == b.net:
            err("BadRegulator", r.ref_des, "input and output on the same net")
        if b is not None and b.net in nets and nets[b.net].kind != "power":
            err("NetMismatch", r.ref_des, f"output on non-power net {b.net!r}")
        if g is not None and g.net in nets and nets[g.net].kind != "ground":
            err("NetMismatch", r.ref_des, f"ground pin on non-ground net {g.net!r}")
    cycle = regulator_cycle(board)
    if cycle:
        err("RegulatorCycle", " -> ".join(cycle), "regulators feed each other in a loop")

    tps = set()
    for tp in board.testpoints:
        if tp.name in tps:
            err("DuplicateId", tp.name, "test point name used twice")
        tps.add(tp.name)
        if not tp.tolerance > 0:
            err("BadTestPoint", tp.name, "tolerance must be > 0")
        if tp.net not in nets:
            err("UnknownNet", tp.name, f"net {tp.net!r} not defined")
        pad_on(tp.name, tp.pad, tp.net, "test point pad")
        if tp.ground_pad is not None:
            pad_on(tp.name, tp.ground_pad, None, "test point ground pad")

    for b in board.budget:
        if b.quantity < 1 or b.current < 0:
            err("BadBudgetLine", b.name, "quantity must be >= 1 and current >= 0")
        if b.rail not in nets:
            err("UnknownNet", b.name, f"rail {b.rail!r} not defined")

    for key, value in board.rules:
        if not value > 0:
            err("BadRule", key, "rule values must be > 0")

    # load nets must be fed from somewhere
    reached = reachable_nets(board)
    for ld in board.loads:
        p = pads.get(ld.power_pin)
        if p is not None and p.net not in reached:
            err("UnreachableNet", ld.ref_des, f"net {p.net!r} has no source or regulator feeding it")

    return errors
