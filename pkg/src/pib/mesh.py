"""Rasterise board copper into a resistive conductance graph.

Polygons and pads are sampled on a square grid (cell centres at
``(i + 0.5) * cell_size``). Orthogonal neighbours of the same net are joined
by the sheet conductance ``sigma * t``. Pads are equipotential super-nodes
absorbing the cells under them; plated through-hole pads span every layer.
Segments become 1-D resistor chains (``sigma * w * t / l`` per piece,
pieces no longer than one cell) whose nodes snap onto pads and onto
same-net cells they pass over. Vias join their two layers through the
plated barrel, ``sigma * pi * d * t_plating / board_thickness``.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field

import numpy as np

from .board import Board, Pad, Polygon, Segment, Via
from .units import COPPER_RESISTIVITY

SIGMA = 1.0 / COPPER_RESISTIVITY  # S/m
SNAP = 1e-6  # mm; features closer than this touch

GRID, CHAIN, VIA, LINK = 0, 1, 2, 3


class MeshError(ValueError):
    pass


@dataclass
class LayerGrid:
    name: str
    thickness_um: float
    i0: int
    j0: int
    nx: int
    ny: int
    node: np.ndarray  # (ny, nx) node id, -1 where there is no meshed copper
    net: np.ndarray  # (ny, nx) object array of net names ("" if empty)
    pad: np.ndarray  # (ny, nx) bool, cell absorbed into a pad

    def origin(self, h):
        return self.i0 * h, self.j0 * h

    def center(self, h, r, c):
        return (self.i0 + c + 0.5) * h, (self.j0 + r + 0.5) * h


@dataclass
class ConductanceGraph:
    cell_size: float
    node_x: np.ndarray
    node_y: np.ndarray
    node_layer: np.ndarray  # -1 for multi-layer pad nodes
    node_net: list
    node_label: list
    edge_a: np.ndarray
    edge_b: np.ndarray
    edge_g: np.ndarray
    edge_kind: np.ndarray
    pad_node: dict
    via_nodes: dict
    layers: list
    # grid edges: (edge index, layer index, row_a, col_a, row_b, col_b, axis)
    grid_edges: np.ndarray
    # chain pieces: edge index -> (feature id, x0, y0, x1, y1, width mm, thickness mm, layer index)
    chain_pieces: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return len(self.node_x)

    @property
    def n_edges(self) -> int:
        return len(self.edge_a)

    def laplacian(self):
        from scipy.sparse import coo_matrix

        n = self.n_nodes
        a, b, g = self.edge_a, self.edge_b, self.edge_g
        rows = np.concatenate([a, b, a, b])
        cols = np.concatenate([a, b, b, a])
        vals = np.concatenate([g, g, -g, -g])
        return coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _pad_contains(pad: Pad, x, y, grow=0.0):
    cx, cy = pad.center
    if pad.shape == "circle":
        r = pad.size[0] / 2 + grow
        return (x - cx) ** 2 + (y - cy) ** 2 <= r * r + 1e-12
    return (np.abs(x - cx) <= pad.size[0] / 2 + grow + 1e-12) & (np.abs(y - cy) <= pad.size[1] / 2 + grow + 1e-12)


def _via_as_pad(v: Via):
    return Pad(v.center, "circle", (v.diameter, v.diameter), True, v.drill)


def points_in_polygon(px, py, vertices):
    """Even-odd point-in-polygon test, vectorised over points."""
    inside = np.zeros(np.shape(px), dtype=bool)
    n = len(vertices)
    for k in range(n):
        x1, y1 = vertices[k]
        x2, y2 = vertices[(k + 1) % n]
        if y1 == y2:
            continue
        crosses = (y1 > py) != (y2 > py)
        xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
        inside ^= crosses & (px < xint)
    return inside


def _pad_crossings(pad: Pad, x0, y0, dx, dy):
    """Parameters where the line p0 + t*d enters/leaves the pad outline."""
    cx, cy = pad.center
    if pad.shape == "circle":
        r = pad.size[0] / 2
        fx, fy = x0 - cx, y0 - cy
        a = dx * dx + dy * dy
        b = 2 * (fx * dx + fy * dy)
        c = fx * fx + fy * fy - r * r
        disc = b * b - 4 * a * c
        if disc < 0:
            return ()
        sq = math.sqrt(disc)
        return ((-b - sq) / (2 * a), (-b + sq) / (2 * a))
    lo, hi = -math.inf, math.inf
    for p, d, c, half in ((x0, dx, cx, pad.size[0] / 2), (y0, dy, cy, pad.size[1] / 2)):
        if abs(d) < 1e-15:
            if abs(p - c) > half:
                return ()
            continue
        t1, t2 = (c - half - p) / d, (c + half - p) / d
        lo, hi = max(lo, min(t1, t2)), min(hi, max(t1, t2))
    return (lo, hi) if lo <= hi else ()


def _cell_range(lo, hi, h):
    return range(math.floor(lo / h), math.floor(hi / h) + 1)


class _Builder:
    def __init__(self, h):
        self.h = h
        self.x, self.y, self.layer, self.net, self.label = [], [], [], [], []
        self.ea, self.eb, self.eg, self.ek = [], [], [], []

    def node(self, x, y, layer, net, label=""):
        self.x.append(x)
        self.y.append(y)
        self.layer.append(layer)
        self.net.append(net)
        self.label.append(label)
        return len(self.x) - 1

    def edge(self, a, b, g, kind):
        if a == b or not (g > 0 and math.isfinite(g)):
            return None
        self.ea.append(a)
        self.eb.append(b)
        self.eg.append(g)
        self.ek.append(kind)
        return len(self.ea) - 1


def meshed_nets(board: Board):
    return {n.name for n in board.nets if n.kind in ("power", "ground")}


def rasterize(board: Board, cell_size=0.5, via_plating_um=25.0, nets=None) -> ConductanceGraph:
    """Build the conductance graph of the board's power and ground copper."""
    if not (cell_size > 0 and math.isfinite(cell_size)):
        raise MeshError(f"cell size must be > 0, got {cell_size!r}")
    h = float(cell_size)
    nets = meshed_nets(board) if nets is None else set(nets)
    layer_idx = {l.name: k for k, l in enumerate(board.layers)}
    thick_m = []
    for l in board.layers:
        t = l.thickness_um * 1e-6
        if not t > 0:
            raise MeshError(f"layer {l.name!r} has zero copper thickness")
        thick_m.append(t)
    feats = [f for f in board.copper if f.net in nets]
    for f in feats:
        for ln in board.feature_layers(f):
            if ln not in layer_idx:
                raise MeshError(f"feature {f.id!r} is on unknown layer {ln!r}")

    B = _Builder(h)
    warnings = []
    pad_node, via_nodes = {}, {}
    # per layer: list of (pad shape, net, node) and a bucket index by cell
    pad_list = defaultdict(list)
    pad_bucket = defaultdict(lambda: defaultdict(list))

    def register_pad(li, shape, net, node):
        pad_list[li].append((shape, net, node))
        cx, cy = shape.center
        w, hh = shape.size
        for i in _cell_range(cx - w / 2 - SNAP, cx + w / 2 + SNAP, h):
            for j in _cell_range(cy - hh / 2 - SNAP, cy + hh / 2 + SNAP, h):
                pad_bucket[li][(i, j)].append((shape, net, node))

    pads = sorted((f for f in feats if isinstance(f.shape, (Pad, Via))), key=lambda f: f.id)
    for f in pads:
        if isinstance(f.shape, Via):
            v = f.shape
            ends = []
            for ln in v.layers:
                li = layer_idx[ln]
                n = B.node(v.center[0], v.center[1], li, f.net, f"{f.id}@{ln}")
                register_pad(li, _via_as_pad(v), f.net, n)
                ends.append(n)
            via_nodes[f.id] = tuple(ends)
            pad_node[f.id] = ends[0]
        else:
            lns = board.feature_layers(f)
            li0 = layer_idx[lns[0]] if len(lns) == 1 else -1
            n = B.node(f.shape.center[0], f.shape.center[1], li0, f.net, f.id)
            pad_node[f.id] = n
            for ln in lns:
                register_pad(layer_idx[ln], f.shape, f.net, n)

    # cell ownership: pads first, then polygons in id order
    owner = [dict() for _ in board.layers]  # (i, j) -> (net, node or None, is_pad)
    for li in range(len(board.layers)):
        for shape, net, node in pad_list[li]:
            cx, cy = shape.center
            w, hh = shape.size
            for i in _cell_range(cx - w / 2, cx + w / 2, h):
                for j in _cell_range(cy - hh / 2, cy + hh / 2, h):
                    xc, yc = (i + 0.5) * h, (j + 0.5) * h
                    if not _pad_contains(shape, xc, yc):
                        continue
                    prev = owner[li].get((i, j))
                    if prev is None:
                        owner[li][(i, j)] = (net, node, True)
                    elif prev[0] != net:
                        warnings.append(f"pads of nets {prev[0]!r} and {net!r} overlap on {board.layers[li].name}")

    polys = sorted((f for f in feats if isinstance(f.shape, Polygon)), key=lambda f: f.id)
    for f in polys:
        li = layer_idx[f.layer]
        vs = f.shape.vertices
        xs = [p[0] for p in vs]
        ys = [p[1] for p in vs]
        ii = np.arange(math.floor(min(xs) / h), math.floor(max(xs) / h) + 1)
        jj = np.arange(math.floor(min(ys) / h), math.floor(max(ys) / h) + 1)
        gx, gy = np.meshgrid((ii + 0.5) * h, (jj + 0.5) * h)
        inside = points_in_polygon(gx, gy, vs)
        clash = 0
        for r, c in zip(*np.nonzero(inside)):
            key = (int(ii[c]), int(jj[r]))
            prev = owner[li].get(key)
            if prev is None:
                owner[li][key] = (f.net, None, False)
            elif prev[0] != f.net:
                clash += 1
        if clash:
            warnings.append(f"polygon {f.id} overlaps foreign copper in {clash} cells")

    # cell nodes and dense per-layer grids
    grids = []
    for li, l in enumerate(board.layers):
        own = owner[li]
        if own:
            i0 = min(k[0] for k in own)
            j0 = min(k[1] for k in own)
            nx = max(k[0] for k in own) - i0 + 1
            ny = max(k[1] for k in own) - j0 + 1
        else:
            i0 = j0 = 0
            nx = ny = 0
        node = np.full((ny, nx), -1, dtype=np.int64)
        netg = np.full((ny, nx), "", dtype=object)
        padg = np.zeros((ny, nx), dtype=bool)
        for (i, j) in sorted(own, key=lambda k: (k[1], k[0])):
            net, n, is_pad = own[(i, j)]
            if n is None:
                n = B.node((i + 0.5) * h, (j + 0.5) * h, li, net)
            node[j - j0, i - i0] = n
            netg[j - j0, i - i0] = net
            padg[j - j0, i - i0] = is_pad
        grids.append(LayerGrid(l.name, l.thickness_um, i0, j0, nx, ny, node, netg, padg))

    # grid edges: G = sigma t / (f_a + f_b), f = 0 inside a pad, 0.5 otherwise
    grid_edges = []
    for li, g in enumerate(grids):
        sheet = SIGMA * thick_m[li]
        for axis, (dr, dc) in enumerate(((0, 1), (1, 0))):
            a = g.node[: g.ny - dr, : g.nx - dc]
            b = g.node[dr:, dc:]
            same = (a >= 0) & (b >= 0) & (g.net[: g.ny - dr, : g.nx - dc] == g.net[dr:, dc:]) & (a != b)
            pa = g.pad[: g.ny - dr, : g.nx - dc]
            pb = g.pad[dr:, dc:]
            for r, c in zip(*np.nonzero(same)):
                dist = max((0.0 if pa[r, c] else 0.5) + (0.0 if pb[r, c] else 0.5), 0.5)
                e = B.edge(int(a[r, c]), int(b[r, c]), sheet / dist, GRID)
                if e is not None:
                    grid_edges.append((e, li, r, c, r + dr, c + dc, axis))

    # chains
    point_nodes = {}

    def resolve(li, net, x, y):
        for shape, pnet, n in pad_bucket[li].get((math.floor(x / h), math.floor(y / h)), ()):
            if pnet == net and _pad_contains(shape, x, y, SNAP):
                return n
        g = grids[li]
        c = math.floor(x / h) - g.i0
        r = math.floor(y / h) - g.j0
        if 0 <= r < g.ny and 0 <= c < g.nx and g.node[r, c] >= 0 and g.net[r, c] == net:
            return int(g.node[r, c])
        key = (li, net, round(x / SNAP), round(y / SNAP))
        n = point_nodes.get(key)
        if n is None:
            n = point_nodes[key] = B.node(x, y, li, net)
        return n

    segs = sorted((f for f in feats if isinstance(f.shape, Segment)), key=lambda f: f.id)
    by_layer_net = defaultdict(list)
    for f in segs:
        by_layer_net[(f.layer, f.net)].append(f)

    chain_pieces = []
    links = []
    for f in segs:
        s = f.shape
        li = layer_idx[f.layer]
        t_m = thick_m[li]
        (x0, y0), (x1, y1) = s.start, s.end
        dx, dy = x1 - x0, y1 - y0
        length = math.hypot(dx, dy)
        if length <= SNAP:
            resolve(li, f.net, x0, y0)
            continue
        ux, uy = dx / length, dy / length
        params = {0.0, 1.0}

        def project(px, py, reach):
            t = ((px - x0) * ux + (py - y0) * uy) / length
            if 0.0 < t < 1.0:
                d = abs((px - x0) * uy - (py - y0) * ux)
                if d <= reach:
                    return t, d
            return None

        for other in by_layer_net[(f.layer, f.net)]:
            if other is f:
                continue
            for e in (other.shape.start, other.shape.end):
                hit = project(e[0], e[1], s.width / 2 + SNAP)
                if hit:
                    params.add(hit[0])
                    if hit[1] > SNAP:
                        q = (x0 + hit[0] * dx, y0 + hit[0] * dy)
                        links.append((li, f.net, q, e, other.shape.width, hit[1], t_m))
        for shape, pnet, _ in pad_list[li]:
            if pnet == f.net:
                for t in _pad_crossings(shape, x0, y0, dx, dy):
                    if 0.0 < t < 1.0:
                        params.add(t)
        ts = sorted(params)
        pts = []
        for a, b in zip(ts, ts[1:]):
            span = (b - a) * length
            if span <= SNAP:
                continue
            k = max(1, math.ceil(span / h - 1e-9))
            for m in range(k):
                pts.append(a + (b - a) * m / k)
        pts.append(1.0)
        prev_n = prev_t = None
        for t in pts:
            x, y = x0 + t * dx, y0 + t * dy
            n = resolve(li, f.net, x, y)
            if prev_n is not None and n != prev_n:
                piece = (t - prev_t) * length
                e = B.edge(prev_n, n, SIGMA * t_m * s.width / piece, CHAIN)
                if e is not None:
                    chain_pieces.append((e, f.id, x0 + prev_t * dx, y0 + prev_t * dy, x, y,
                                         s.width, t_m * 1e3, li))
            prev_n, prev_t = n, t

    for li, net, q, e, width, dist, t_m in links:
        a = resolve(li, net, q[0], q[1])
        b = resolve(li, net, e[0], e[1])
        B.edge(a, b, SIGMA * t_m * width / dist, LINK)

    plating = via_plating_um * 1e-6
    for fid in sorted(via_nodes):
        v = board.feature(fid).shape
        a, b = via_nodes[fid]
        B.edge(a, b, SIGMA * math.pi * v.drill * plating / board.thickness, VIA)

    return ConductanceGraph(
        cell_size=h,
        node_x=np.array(B.x, dtype=float),
        node_y=np.array(B.y, dtype=float),
        node_layer=np.array(B.layer, dtype=np.int64),
        node_net=B.net,
        node_label=B.label,
        edge_a=np.array(B.ea, dtype=np.int64),
        edge_b=np.array(B.eb, dtype=np.int64),
        edge_g=np.array(B.eg, dtype=float),
        edge_kind=np.array(B.ek, dtype=np.int64),
        pad_node=pad_node,
        via_nodes=via_nodes,
        layers=grids,
        grid_edges=np.array(grid_edges, dtype=np.int64).reshape(-1, 7),
        chain_pieces=chain_pieces,
        warnings=warnings,
    )
