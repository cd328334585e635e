"""Design-rule and manufacturability checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Optional

from shapely.geometry import LineString, Point
from shapely.geometry import Polygon as ShapelyPolygon

from .board import Board, Pad, Polygon, Segment, Via, natural_key
from .excellon import DrillProgram
from .units import mil_to_mm

EPS = 1e-9  # mm; measured values within EPS of the limit pass


@dataclass(frozen=True)
class RuleSet:
    min_clearance: float = 0.15  # mm
    min_annular_ring: float = 0.3  # mm
    mask_expansion: float = 0.05  # mm
    min_track_width: float = 15.0  # mil
    min_via_diameter: float = 24.0  # mil
    min_via_drill: float = 12.0  # mil
    drill_merge_tolerance: float = 0.1  # mm
    outline_chain_gap: float = 0.01  # mm

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ValueError(f"rule {f.name} must be > 0, got {v!r}")
        if not self.min_via_drill < self.min_via_diameter:
            raise ValueError("min_via_drill must be smaller than min_via_diameter")

    def updated(self, **values):
        return replace(self, **values)


PROFILES = {
    # electrical clearance of the routing DRC
    "drc": RuleSet(min_clearance=mil_to_mm(10.0)),
    # fabrication clearance
    "dfm": RuleSet(),
}


def ruleset(profile="dfm", board: Optional[Board] = None, overrides=None) -> RuleSet:
    """Profile defaults, then board ``rules``, then explicit overrides."""
    if profile not in PROFILES:
        raise ValueError(f"unknown profile {profile!r}")
    rules = PROFILES[profile]
    if board is not None and board.rules:
        rules = rules.updated(**dict(board.rules))
    if overrides:
        rules = rules.updated(**dict(overrides))
    return rules


@dataclass(frozen=True)
class Violation:
    rule: str
    severity: str  # error | warn
    features: tuple
    measured: float
    required: float
    location: tuple

    def key(self):
        return (self.rule, self.features, round(self.measured, 9))


# ------------------------------------------------------------- geometry


def core_geometry(shape):
    """(core geometry, radius): the copper is the core grown by radius."""
    if isinstance(shape, Segment):
        if shape.start == shape.end:
            return Point(shape.start), shape.width / 2
        return LineString([shape.start, shape.end]), shape.width / 2
    if isinstance(shape, Polygon):
        return ShapelyPolygon(shape.vertices), 0.0
    if isinstance(shape, Via):
        return Point(shape.center), shape.diameter / 2
    if shape.shape == "circle":
        return Point(shape.center), shape.size[0] / 2
    cx, cy = shape.center
    w, h = shape.size[0] / 2, shape.size[1] / 2
    return ShapelyPolygon([(cx - w, cy - h), (cx + w, cy - h), (cx + w, cy + h), (cx - w, cy + h)]), 0.0


def edge_distance(a, b) -> float:
    """Edge-to-edge gap between two copper shapes (negative when they overlap)."""
    ga, ra = core_geometry(a)
    gb, rb = core_geometry(b)
    return ga.distance(gb) - ra - rb


def _bbox(shape, grow=0.0):
    g, r = core_geometry(shape)
    x0, y0, x1, y1 = g.bounds
    r += grow
    return x0 - r, y0 - r, x1 + r, y1 + r


def _overlap(a, b):
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _midpoint(a, b):
    ga, _ = core_geometry(a)
    gb, _ = core_geometry(b)
    pa, pb = ga.centroid, gb.centroid
    return ((pa.x + pb.x) / 2, (pa.y + pb.y) / 2)


# -------------------------------------------------------------- rules


def check_clearance(board: Board, rules: RuleSet) -> list:
    """Different-net features on a shared layer closer than min_clearance."""
    per_layer = {}
    for f in board.copper:
        for ln in board.feature_layers(f):
            per_layer.setdefault(ln, []).append(f)
    seen = set()
    out = []
    for ln in sorted(per_layer):
        feats = sorted(per_layer[ln], key=lambda f: f.id)
        boxes = [_bbox(f.shape, rules.min_clearance) for f in feats]
        for i in range(len(feats)):
            for j in range(i + 1, len(feats)):
                a, b = feats[i], feats[j]
                if a.net == b.net or not _overlap(boxes[i], boxes[j]):
                    continue
                pair = tuple(sorted((a.id, b.id)))
                if pair in seen:
                    continue
                gap = edge_distance(a.shape, b.shape)
                if gap < rules.min_clearance - EPS:
                    seen.add(pair)
                    out.append(Violation("clearance", "error", pair, max(gap, 0.0), rules.min_clearance,
                                         _midpoint(a.shape, b.shape)))
    return out


def check_annular_rings(board: Board, rules: RuleSet) -> list:
    out = []
    for f in board.copper:
        s = f.shape
        if isinstance(s, Via):
            ring = (s.diameter - s.drill) / 2
        elif isinstance(s, Pad) and s.through_hole:
            ring = (s.min_dimension - s.drill) / 2
        else:
            continue
        if ring < rules.min_annular_ring - EPS:
            out.append(Violation("annular_ring", "error", (f.id,), ring, rules.min_annular_ring, s.center))
    return out


def check_mask(board: Board, rules: RuleSet) -> list:
    """Mask openings: enough expansion, and no foreign copper exposed."""
    out = []
    openings = []
    for f in board.copper:
        s = f.shape
        if isinstance(s, Pad):
            exp = rules.mask_expansion if s.mask_expansion is None else s.mask_expansion
            if exp < rules.mask_expansion - EPS:
                out.append(Violation("mask_expansion", "error", (f.id,), exp, rules.mask_expansion, s.center))
            openings.append((f, exp))
        elif isinstance(s, Via) and not s.tented:
            openings.append((f, rules.mask_expansion))

    external = {l.name for l in board.layers if l.is_external}
    for f, exp in openings:
        layers = set(board.feature_layers(f)) & external
        g, r = core_geometry(f.shape)
        box = _bbox(f.shape, exp)
        for other in board.copper:
            if other.net == f.net or not (set(board.feature_layers(other)) & layers):
                continue
            if not _overlap(box, _bbox(other.shape)):
                continue
            go, ro = core_geometry(other.shape)
            if g.distance(go) - r - exp - ro < -EPS:
                out.append(Violation("exposed_foreign_copper", "error", (f.id, other.id),
                                     g.distance(go) - r - ro, exp, f.shape.center))
    return out


def check_outline(board: Board, rules: RuleSet) -> list:
    """The rout path must be one closed chain of edges."""
    edges = list(board.outline)
    if not edges:
        return []
    tol = rules.outline_chain_gap + EPS
    ends = [p for e in edges for p in e]
    # cluster endpoints within the chain gap
    parent = list(range(len(ends)))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    for i in range(len(ends)):
        for j in range(i + 1, len(ends)):
            if math.dist(ends[i], ends[j]) <= tol:
                parent[find(i)] = find(j)
    vertex = [find(k) for k in range(len(ends))]
    degree = {}
    for v in vertex:
        degree[v] = degree.get(v, 0) + 1
    dangling = sorted({v for v, d in degree.items() if d != 2})
    if dangling:
        gaps = []
        for v in dangling:
            p = ends[v]
            others = [math.dist(p, ends[w]) for w in dangling if w != v]
            gaps.append(min(others) if others else math.inf)
        worst = max(gaps)
        return [Violation("outline_open", "error", tuple(f"outline[{v // 2}]" for v in dangling),
                          worst, rules.outline_chain_gap, ends[dangling[0]])]
    # closed chains: count loops over edge connectivity
    comp = {v: v for v in set(vertex)}

    def cfind(k):
        while comp[k] != k:
            comp[k] = comp[comp[k]]
            k = comp[k]
        return k

    for k in range(len(edges)):
        comp[cfind(vertex[2 * k])] = cfind(vertex[2 * k + 1])
    loops = len({cfind(v) for v in comp})
    if loops > 1:
        return [Violation("outline_multiple", "error", ("outline",), float(loops), 1.0, ends[0])]
    return []


def check_track_geometry(board: Board, rules: RuleSet) -> list:
    out = []
    wmin = mil_to_mm(rules.min_track_width)
    dmin = mil_to_mm(rules.min_via_diameter)
    drmin = mil_to_mm(rules.min_via_drill)
    for f in board.copper:
        s = f.shape
        if isinstance(s, Segment) and s.width < wmin - EPS:
            mid = ((s.start[0] + s.end[0]) / 2, (s.start[1] + s.end[1]) / 2)
            out.append(Violation("track_width", "error", (f.id,), s.width, wmin, mid))
        elif isinstance(s, Via):
            if s.diameter < dmin - EPS:
                out.append(Violation("via_diameter", "error", (f.id,), s.diameter, dmin, s.center))
            if s.drill < drmin - EPS:
                out.append(Violation("via_drill", "error", (f.id,), s.drill, drmin, s.center))
    return out


@dataclass(frozen=True)
class DrillPlan:
    mapping: tuple  # (tool id, original diameter, planned diameter)
    sizes: tuple  # planned diameters, ascending

    @property
    def original_count(self) -> int:
        return len(self.mapping)

    @property
    def planned_count(self) -> int:
        return len(self.sizes)

    @property
    def reduction(self) -> int:
        return self.original_count - self.planned_count

    def size_for(self, tool):
        for t, _, planned in self.mapping:
            if t == tool:
                return planned
        raise KeyError(tool)


def optimize_drills(program: DrillProgram, rules: RuleSet) -> DrillPlan:
    """Greedy ascending clustering of near-equal drill sizes.

    A cluster keeps absorbing the next larger tool while its span stays
    within ``drill_merge_tolerance``; every member is drilled at the
    cluster's largest size so no hole shrinks.
    """
    tools = sorted(program.tools.items(), key=lambda kv: (kv[1], natural_key(kv[0])))
    clusters = []
    for tool, dia in tools:
        if clusters and dia - clusters[-1][0][1] <= rules.drill_merge_tolerance + EPS:
            clusters[-1].append((tool, dia))
        else:
            clusters.append([(tool, dia)])
    mapping = []
    sizes = []
    for cl in clusters:
        size = max(d for _, d in cl)
        sizes.append(size)
        mapping.extend((t, d, size) for t, d in cl)
    mapping.sort(key=lambda m: natural_key(m[0]))
    return DrillPlan(tuple(mapping), tuple(sizes))


def check_drills(program: DrillProgram, rules: RuleSet) -> list:
    """Warn for each tool the optimiser would fold into a larger one."""
    plan = optimize_drills(program, rules)
    out = []
    for tool, dia, planned in plan.mapping:
        if planned != dia:
            loc = next((xy for t, xy in program.hits if t == tool), (0.0, 0.0))
            out.append(Violation("drill_mergeable", "warn", (tool,), dia, planned, loc))
    return out


def lint_board(board: Board, rules: RuleSet, drills: Optional[DrillProgram] = None) -> list:
    out = []
    out += check_clearance(board, rules)
    out += check_annular_rings(board, rules)
    out += check_mask(board, rules)
    out += check_outline(board, rules)
    out += check_track_geometry(board, rules)
    if drills is not None:
        out += check_drills(drills, rules)
    out.sort(key=lambda v: (v.rule, [natural_key(f) for f in v.features]))
    return out
