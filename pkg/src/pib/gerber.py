"""Gerber X2 subset reader/writer and Gerber + drill import into a board.

Supported: ``%FS``/``%MO``, ``%ADD`` circle and rectangle apertures,
``D01`` linear strokes (``G01``), ``D02`` moves, ``D03`` flashes, ``Dnn``
aperture selection, ``G04`` comments, X2 attributes (ignored) and ``M02``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, replace
from typing import Optional

from .board import UNASSIGNED_NET, Board, CopperFeature, Layer, Pad, Segment, Via, natural_key
from .excellon import DrillProgram
from .native import ParseError
from .units import MIL_MM

TOUCH = 1e-6  # mm; features closer than this are one conductor


class UnsupportedFeature(ParseError):
    def __init__(self, command, line=None, column=None):
        self.command = command
        super().__init__(f"UnsupportedFeature({command!r}): outside the supported Gerber subset",
                         line=line, column=column)


@dataclass(frozen=True)
class GerberAperture:
    dcode: int
    shape: str  # "circle" | "rect"
    size: tuple  # (d,) or (w, h), mm

    def __post_init__(self):
        if self.dcode < 10:
            raise ValueError("aperture d-codes start at 10")
        if not all(v > 0 for v in self.size):
            raise ValueError("aperture dimensions must be > 0")


@dataclass
class GerberImage:
    apertures: dict
    strokes: list  # (start, end, aperture)
    flashes: list  # (center, aperture)


_UNSUPPORTED_G = {"02", "03", "36", "37", "74", "75", "91"}
_WORD = re.compile(r"(?:G0?1)?(?:X([+-]?\d+))?(?:Y([+-]?\d+))?(?:I[+-]?\d+)?(?:J[+-]?\d+)?D0?([123])$")


def _statements(text):
    """Yield (statement, extended, line, column)."""
    i, n = 0, len(text)
    line, col = 1, 1

    def advance(k):
        nonlocal i, line, col
        for ch in text[i:i + k]:
            if ch == "\n":
                line, col = line + 1, 1
            else:
                col += 1
        i += k

    while i < n:
        ch = text[i]
        if ch in " \t\r\n":
            advance(1)
            continue
        start = (line, col)
        if ch == "%":
            end = text.find("%", i + 1)
            if end < 0:
                raise ParseError("truncated file: unterminated % block", line=start[0], column=start[1])
            body = text[i + 1:end]
            advance(end + 1 - i)
            parts = body.replace("\n", "").replace("\r", "").split("*")
            if parts[-1].strip():
                raise ParseError("extended command missing '*'", line=start[0], column=start[1])
            for p in parts[:-1]:
                yield p.strip(), True, start[0], start[1]
        else:
            end = text.find("*", i)
            if end < 0:
                raise ParseError("truncated file: statement missing '*'", line=start[0], column=start[1])
            body = text[i:end]
            advance(end + 1 - i)
            yield re.sub(r"\s+", "", body), False, start[0], start[1]


class _Format:
    def __init__(self):
        self.x = self.y = None  # (int digits, dec digits)
        self.omit = "L"
        self.scale = None  # file unit -> mm

    def coord(self, s, axis):
        ints, decs = self.x if axis == "X" else self.y
        neg = s.startswith("-")
        digits = s.lstrip("+-")
        if len(digits) > ints + decs:
            raise ValueError(f"{axis} coordinate {s!r} exceeds the {ints}.{decs} format")
        if self.omit == "T":
            digits = digits.ljust(ints + decs, "0")
        v = int(digits) / 10 ** decs
        return (-v if neg else v) * self.scale


def parse_gerber(text) -> GerberImage:
    """Parse one Gerber layer into apertures, strokes and flashes (mm)."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("ascii")
        except UnicodeDecodeError as e:
            line = bytes(text)[: e.start].count(b"\n") + 1
            raise ParseError("non-ASCII byte in Gerber file", line=line) from None
    fmt = _Format()
    apertures: dict[int, GerberAperture] = {}
    strokes, flashes = [], []
    current = None
    selected = False
    x = y = 0.0
    ended = False
    for stmt, ext, ln, col in _statements(text):
        if ended:
            raise ParseError("content after M02", line=ln, column=col)
        if ext:
            head = stmt[:2]
            if head == "FS":
                m = re.fullmatch(r"FS([LT])A(?:N\d)?(?:G\d)?X(\d)(\d)Y(\d)(\d)", stmt)
                if not m:
                    if re.match(r"FS[LT]?I", stmt):
                        raise UnsupportedFeature("FS incremental", ln, col)
                    raise ParseError(f"bad format statement {stmt!r}", line=ln, column=col)
                fmt.omit = m.group(1)
                fmt.x = (int(m.group(2)), int(m.group(3)))
                fmt.y = (int(m.group(4)), int(m.group(5)))
            elif head == "MO":
                if stmt == "MOMM":
                    fmt.scale = 1.0
                elif stmt == "MOIN":
                    fmt.scale = MIL_MM * 1000.0
                else:
                    raise ParseError(f"bad unit statement {stmt!r}", line=ln, column=col)
            elif head == "AD":
                code, ap = _aperture(stmt, fmt, ln, col)
                apertures[code] = ap
                # files that never select explicitly draw with the latest definition
                if not selected:
                    current = ap
            elif head in ("AM", "SR", "AB"):
                raise UnsupportedFeature("%" + head, ln, col)
            elif head == "LP":
                if stmt != "LPD":
                    raise UnsupportedFeature("%" + stmt, ln, col)
            elif head in ("TF", "TA", "TO", "TD", "IP", "IN", "LN", "OF", "SF"):
                continue
            elif stmt == "":
                continue
            else:
                raise ParseError(f"unknown extended command {stmt!r}", line=ln, column=col)
            continue

        if stmt.startswith("G04") or stmt in ("", "G01", "G90", "G70", "G71"):
            if stmt == "G70":
                fmt.scale = MIL_MM * 1000.0
            elif stmt == "G71":
                fmt.scale = 1.0
            continue
        if stmt in ("M02", "M00"):
            ended = True
            continue
        m = re.match(r"G(\d+)", stmt)
        if m and m.group(1).zfill(2) in _UNSUPPORTED_G:
            raise UnsupportedFeature("G" + m.group(1).zfill(2), ln, col)
        sel = re.fullmatch(r"(?:G54)?D(\d+)", stmt)
        if sel and int(sel.group(1)) >= 10:
            code = int(sel.group(1))
            if code not in apertures:
                raise ParseError(f"aperture D{code} is not defined", line=ln, column=col)
            current = apertures[code]
            continue
        m = _WORD.fullmatch(stmt)
        if not m:
            if re.search(r"G\d", stmt) and not stmt.startswith("G01"):
                raise UnsupportedFeature(re.search(r"G\d+", stmt).group(0), ln, col)
            raise ParseError(f"unrecognised statement {stmt!r}", line=ln, column=col)
        if fmt.x is None or fmt.scale is None:
            raise ParseError("coordinate before %FS and %MO", line=ln, column=col)
        try:
            nx = fmt.coord(m.group(1), "X") if m.group(1) is not None else x
            ny = fmt.coord(m.group(2), "Y") if m.group(2) is not None else y
        except ValueError as e:
            raise ParseError(str(e), line=ln, column=col) from None
        op = m.group(3)
        if op != "2" and current is None:
            raise ParseError("draw or flash before any aperture selection", line=ln, column=col)
        if op == "1":
            if current.shape != "circle":
                raise UnsupportedFeature("rectangular-aperture stroke", ln, col)
            strokes.append(((x, y), (nx, ny), current))
        elif op == "3":
            flashes.append(((nx, ny), current))
        x, y = nx, ny
    if not ended:
        raise ParseError("truncated file: missing M02", line=text.count("\n") + 1, column=1)
    return GerberImage(apertures, strokes, flashes)


def _aperture(stmt, fmt, ln, col):
    m = re.fullmatch(r"ADD(\d+)([A-Za-z_][\w.$]*),?(.*)", stmt)
    if not m:
        raise ParseError(f"bad aperture definition {stmt!r}", line=ln, column=col)
    code, kind, params = int(m.group(1)), m.group(2), m.group(3)
    if kind not in ("C", "R"):
        raise UnsupportedFeature(f"aperture {kind}", ln, col)
    if fmt.scale is None:
        raise ParseError("aperture before %MO", line=ln, column=col)
    try:
        vals = [float(v) * fmt.scale for v in params.split("X")]
    except ValueError:
        raise ParseError(f"bad aperture parameters {params!r}", line=ln, column=col) from None
    if (kind == "C" and len(vals) != 1) or (kind == "R" and len(vals) != 2):
        raise UnsupportedFeature(f"aperture {kind} with hole", ln, col)
    if not all(math.isfinite(v) for v in vals):
        raise ParseError("aperture dimensions must be finite", line=ln, column=col)
    try:
        ap = GerberAperture(code, "circle" if kind == "C" else "rect", tuple(vals))
    except ValueError as e:
        raise ParseError(str(e), line=ln, column=col) from None
    return code, ap


# ---------------------------------------------------------------- nets


def _touching(a: CopperFeature, b: CopperFeature) -> bool:
    from .lint import edge_distance

    return edge_distance(a.shape, b.shape) <= TOUCH


def assign_nets(board: Board, features, seeds, warnings=None):
    """Flood-fill nets through touching copper, starting from seed pads.

    ``seeds`` maps feature id -> net. Features in a group without a seed
    land on the unassigned net; groups reached by two nets keep the
    first seed in id order and the clash is reported.
    """
    from .lint import _bbox, _overlap

    feats = list(features)
    n = len(feats)
    parent = list(range(n))

    def find(k):
        while parent[k] != k:
            parent[k] = parent[parent[k]]
            k = parent[k]
        return k

    layers = [set(board.feature_layers(f)) for f in feats]
    boxes = [_bbox(f.shape, TOUCH) for f in feats]
    for i in range(n):
        for j in range(i + 1, n):
            if layers[i] & layers[j] and _overlap(boxes[i], boxes[j]) and _touching(feats[i], feats[j]):
                parent[find(i)] = find(j)
    group_net = {}
    for k in sorted(range(n), key=lambda k: natural_key(feats[k].id)):
        net = seeds.get(feats[k].id)
        if net is None:
            continue
        g = find(k)
        if g in group_net and group_net[g] != net and warnings is not None:
            warnings.append(f"{feats[k].id}: seed net {net!r} conflicts with {group_net[g]!r}")
        group_net.setdefault(g, net)
    out = []
    unassigned = []
    for k, f in enumerate(feats):
        net = group_net.get(find(k), UNASSIGNED_NET)
        if net == UNASSIGNED_NET:
            unassigned.append(f.id)
        out.append(replace(f, net=net))
    if unassigned and warnings is not None:
        warnings.append(f"{len(unassigned)} feature(s) on net {UNASSIGNED_NET!r}: "
                        + ", ".join(sorted(unassigned, key=natural_key)))
    return out


def parse_gerber_layer(text, layer: Layer, net_map=None, warnings=None) -> list:
    """Copper features of one Gerber layer.

    ``net_map`` maps a flashed pad location (x, y) to a net name. Strokes
    and flashes touching a seeded flash inherit its net.
    """
    img = parse_gerber(text)
    feats = []
    for k, (c, ap) in enumerate(img.flashes, 1):
        size = (ap.size[0], ap.size[0]) if ap.shape == "circle" else ap.size
        feats.append(CopperFeature(f"{layer.name}-p{k}", layer.name, UNASSIGNED_NET,
                                   Pad(c, ap.shape, size, plated=False)))
    for k, (a, b, ap) in enumerate(img.strokes, 1):
        if math.dist(a, b) == 0.0:
            feats.append(CopperFeature(f"{layer.name}-s{k}", layer.name, UNASSIGNED_NET,
                                       Pad(a, "circle", (ap.size[0], ap.size[0]), plated=False)))
        else:
            feats.append(CopperFeature(f"{layer.name}-s{k}", layer.name, UNASSIGNED_NET,
                                       Segment(a, b, ap.size[0])))
    seeds = {}
    for loc, net in (net_map or {}).items():
        for f in feats:
            if isinstance(f.shape, Pad) and math.dist(f.shape.center, loc) <= TOUCH:
                seeds[f.id] = net
    stack = Board(name="import", layers=(layer,))
    return assign_nets(stack, feats, seeds, warnings)


# -------------------------------------------------------------- import


def import_board(skeleton: Board, gerbers: dict, drills: Optional[DrillProgram] = None,
                 warnings=None) -> Board:
    """Merge Gerber geometry (and drill hits) with a skeleton's electrical data.

    Flashes that sit on a skeleton pad take over its id, net and drill;
    unmatched drilled flashes present on two layers become vias. The
    skeleton's copper is otherwise discarded.
    """
    warnings = warnings if warnings is not None else []
    layer_map = skeleton.layer_map
    for name in gerbers:
        if name not in layer_map:
            raise ParseError(f"Gerber layer {name!r} is not in the skeleton stack")
    images = {name: parse_gerber(text) for name, text in sorted(gerbers.items())}
    skel_pads = [f for f in skeleton.copper if isinstance(f.shape, Pad)]

    def skeleton_pad(layer, c):
        for f in skel_pads:
            if math.dist(f.shape.center, c) <= TOUCH and (f.layer == layer or f.shape.through_hole):
                return f
        return None

    holes = []
    if drills is not None:
        holes = [(xy, drills.tools[t]) for t, xy in drills.hits]

    def hole_at(c):
        for xy, d in holes:
            if math.dist(xy, c) <= TOUCH:
                return d
        return None

    # flash locations per layer, for via detection
    flashed = {name: [(c, ap) for c, ap in img.flashes] for name, img in images.items()}
    feats = []
    used_pads = set()
    vias_done = []
    via_k = 0
    for name in sorted(images, key=lambda n: [l.name for l in skeleton.layers].index(n)):
        img = images[name]
        for k, (c, ap) in enumerate(img.flashes, 1):
            size = (ap.size[0], ap.size[0]) if ap.shape == "circle" else ap.size
            sp = skeleton_pad(name, c)
            if sp is not None:
                if sp.id in used_pads:
                    continue  # other-layer image of a plated through-hole
                used_pads.add(sp.id)
                feats.append(replace(sp, shape=replace(sp.shape, center=c, shape=ap.shape, size=size)))
                continue
            drill = hole_at(c)
            others = [l for l, fl in flashed.items() if l != name and any(
                math.dist(c2, c) <= TOUCH and a2.shape == "circle" for c2, a2 in fl)]
            if drill is not None and ap.shape == "circle" and others:
                if any(math.dist(c, v) <= TOUCH for v in vias_done):
                    continue
                vias_done.append(c)
                via_k += 1
                feats.append(CopperFeature(f"via{via_k}", name, UNASSIGNED_NET,
                                           Via(c, drill, ap.size[0], (name, others[0]))))
                continue
            feats.append(CopperFeature(f"{name}-p{k}", name, UNASSIGNED_NET,
                                       Pad(c, ap.shape, size, plated=drill is not None, drill=drill)))
        for k, (a, b, ap) in enumerate(img.strokes, 1):
            if math.dist(a, b) == 0.0:
                warnings.append(f"{name}: zero-length stroke at {a} skipped")
                continue
            feats.append(CopperFeature(f"{name}-s{k}", name, UNASSIGNED_NET, Segment(a, b, ap.size[0])))
    missing = [f.id for f in skel_pads if f.id not in used_pads]
    if missing:
        warnings.append("skeleton pads without a Gerber flash: " + ", ".join(sorted(missing, key=natural_key)))
        feats.extend(f for f in skel_pads if f.id in missing)
    seeds = {f.id: f.net for f in skel_pads}
    feats = assign_nets(skeleton, feats, seeds, warnings)
    feats.sort(key=lambda f: natural_key(f.id))
    return replace(skeleton, copper=tuple(feats))


# -------------------------------------------------------------- writer


def _fmt(v, decs):
    n = round(v * 10 ** decs)
    return str(n)


def write_gerber_layer(board: Board, layer: str, decimals=(3, 4)) -> str:
    """Emit the segments and pads of one layer as a Gerber X2 subset file."""
    ints, decs = decimals
    aps: dict = {}

    def aperture(shape, size):
        key = (shape, tuple(round(s, 9) for s in size))
        if key not in aps:
            aps[key] = 10 + len(aps)
        return aps[key]

    body = []
    for f in board.copper:
        if isinstance(f.shape, Via) and layer in f.shape.layers:
            s = f.shape
            body.append(("flash", aperture("circle", (s.diameter,)), s.center))
        elif isinstance(f.shape, Pad) and layer in board.feature_layers(f):
            s = f.shape
            size = (s.size[0],) if s.shape == "circle" else s.size
            body.append(("flash", aperture(s.shape, size), s.center))
        elif isinstance(f.shape, Segment) and f.layer == layer:
            s = f.shape
            body.append(("stroke", aperture("circle", (s.width,)), (s.start, s.end)))
    out = [
        "G04 pib Gerber export*",
        f"%TF.FileFunction,Copper,{layer}*%",
        "%MOMM*%",
        f"%FSLAX{ints}{decs}Y{ints}{decs}*%",
        "%LPD*%",
    ]
    for (shape, size), code in aps.items():
        params = "X".join(f"{v:.6f}".rstrip("0").rstrip(".") for v in size)
        out.append(f"%ADD{code}{'C' if shape == 'circle' else 'R'},{params}*%")
    out.append("G01*")
    cur = None
    for kind, code, geom in body:
        if code != cur:
            out.append(f"D{code}*")
            cur = code
        if kind == "flash":
            out.append(f"X{_fmt(geom[0], decs)}Y{_fmt(geom[1], decs)}D03*")
        else:
            (a, b) = geom
            out.append(f"X{_fmt(a[0], decs)}Y{_fmt(a[1], decs)}D02*")
            out.append(f"X{_fmt(b[0], decs)}Y{_fmt(b[1], decs)}D01*")
    out.append("M02*")
    return "\n".join(out) + "\n"


def write_excellon(board: Board) -> str:
    """Drill file for every plated hole and via of a board (metric, decimal)."""
    tools: dict = {}
    hits = []
    for f in board.copper:
        s = f.shape
        d = s.drill if isinstance(s, (Via, Pad)) else None
        if d is None:
            continue
        key = round(d, 6)
        if key not in tools:
            tools[key] = len(tools) + 1
        hits.append((tools[key], s.center))
    out = ["M48", "METRIC,LZ"]
    for d, t in tools.items():
        out.append(f"T{t:02d}C{d:.3f}")
    out.append("%")
    out.append("G90")
    out.append("G05")
    for t in sorted(tools.values()):
        out.append(f"T{t:02d}")
        out.extend(f"X{x:.4f}Y{y:.4f}" for tt, (x, y) in hits if tt == t)
    out.append("M30")
    return "\n".join(out) + "\n"
