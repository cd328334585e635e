"""DC operating point of the power distribution network."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import spsolve

from .board import Board, natural_key
from .mesh import ConductanceGraph

RESIDUAL_TOL = 1e-10


class SolveError(RuntimeError):
    pass


def laplacian(n, a, b, g):
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    g = np.asarray(g, dtype=float)
    rows = np.concatenate([a, b, a, b])
    cols = np.concatenate([a, b, b, a])
    vals = np.concatenate([g, g, -g, -g])
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def _solve_spd(A, rhs):
    """Direct sparse solve with a couple of refinement sweeps if needed."""
    if A.shape[0] == 0:
        return np.zeros(0)
    A = A.tocsc()
    x = np.atleast_1d(spsolve(A, rhs))
    scale = np.linalg.norm(rhs)
    for _ in range(4):
        if not np.all(np.isfinite(x)):
            break
        r = rhs - A @ x
        if np.linalg.norm(r) <= RESIDUAL_TOL * scale:
            return x
        x = x + np.atleast_1d(spsolve(A, r))
    raise SolveError("linear solve did not converge")


def solve_nodal(n, edge_a, edge_b, edge_g, fixed, injection, L=None, nodes=None):
    """Solve G v = i with some node voltages pinned.

    ``fixed`` maps node -> volts, ``injection`` is the current (A) pushed
    into each node by external elements. Only ``nodes`` (default all) are
    solved; every connected part among them must contain a pinned node
    unless it carries no injection, in which case its voltages are NaN.
    """
    if L is None:
        L = laplacian(n, edge_a, edge_b, edge_g)
    injection = np.asarray(injection, dtype=float)
    v = np.full(n, np.nan)
    idx = np.arange(n) if nodes is None else np.asarray(nodes, dtype=np.int64)
    if len(idx) == 0:
        return v
    sub = L[idx][:, idx]
    ncomp, labels = connected_components(sub, directed=False)
    pinned = np.zeros(len(idx), dtype=bool)
    local = {int(node): k for k, node in enumerate(idx)}
    for node, value in fixed.items():
        if int(node) in local:
            pinned[local[int(node)]] = True
            v[int(node)] = value
    has_pin = np.zeros(ncomp, dtype=bool)
    has_pin[labels[pinned]] = True
    active = has_pin[labels]
    loose = ~has_pin & (np.bincount(labels, weights=np.abs(injection[idx]), minlength=ncomp) > 0)
    if loose.any():
        raise SolveError(f"{int(loose.sum())} island(s) carry current but have no source")
    free = active & ~pinned
    if free.any():
        F = idx[free]
        P = idx[pinned]
        A = sub[free][:, free]
        rhs = injection[F] - (sub[free][:, pinned] @ v[P] if len(P) else 0.0)
        v[F] = _solve_spd(A, rhs)
    return v


@dataclass(frozen=True)
class RegulatorState:
    ref_des: str
    output_current: float
    input_current: float
    input_voltage: float
    output_voltage: float
    ground_voltage: float
    headroom: float  # (V_in - V_gnd) - (set + dropout)

    @property
    def in_dropout(self) -> bool:
        return not self.headroom >= 0


@dataclass
class SolveResult:
    graph: ConductanceGraph
    voltage: np.ndarray
    edge_current: np.ndarray  # A, from edge_a to edge_b
    injection: np.ndarray
    fixed: dict
    source_current: dict
    regulators: list
    ideal_ground: bool
    warnings: list = field(default_factory=list)

    def node_voltage(self, pad_id) -> float:
        n = self.graph.pad_node.get(pad_id)
        if n is None:
            return math.nan
        return float(self.voltage[n])

    @property
    def total_source_current(self) -> float:
        return float(sum(self.source_current.values()))

    def kcl_residual(self) -> np.ndarray:
        """Net current leaving each node through copper minus its injection."""
        g = self.graph
        out = np.zeros(g.n_nodes)
        np.add.at(out, g.edge_a, self.edge_current)
        np.add.at(out, g.edge_b, -self.edge_current)
        return out - self.injection


def solve_dc(graph: ConductanceGraph, board: Board) -> SolveResult:
    """Solve every source island, then each regulated rail in dependency order."""
    n = graph.n_nodes
    L = laplacian(n, graph.edge_a, graph.edge_b, graph.edge_g)
    ncomp, labels = connected_components(L, directed=False)
    pad = graph.pad_node

    def node_of(pad_id, what):
        node = pad.get(pad_id)
        if node is None:
            raise SolveError(f"{what}: pad {pad_id!r} is not on meshed copper")
        return node

    inj = np.zeros(n)
    fixed: dict[int, float] = {}
    ideal_ground = not any(s.ground_pin for s in board.sources)
    ground_nets = {nt.name for nt in board.nets if nt.kind == "ground"}

    def pin(node, value, what):
        if node in fixed and abs(fixed[node] - value) > 1e-12:
            raise SolveError(f"{what}: node already pinned at {fixed[node]} V")
        fixed[node] = value

    # constant pins
    for s in board.sources:
        pin(node_of(s.pin, f"source {s.name}"), s.voltage, f"source {s.name}")
        if s.ground_pin:
            pin(node_of(s.ground_pin, f"source {s.name}"), 0.0, f"source {s.name} ground")
    if ideal_ground:
        for k in range(n):
            if graph.node_net[k] in ground_nets:
                fixed[k] = 0.0

    # loads draw at the power pin and return at the ground pin
    for ld in board.loads:
        inj[node_of(ld.power_pin, ld.ref_des)] -= ld.load_current
        inj[node_of(ld.ground_pin, ld.ref_des)] += ld.load_current

    regs = []
    for r in board.regulators:
        regs.append((r, node_of(r.input_pin, r.ref_des), node_of(r.output_pin, r.ref_des),
                     node_of(r.ground_pin, r.ref_des)))

    # output current of each regulator = everything drawn on its output island
    load_draw = np.zeros(ncomp)
    for ld in board.loads:
        load_draw[labels[pad[ld.power_pin]]] += ld.load_current
    out_current: dict[str, float] = {}

    def regulator_out(r, i_node, o_node, visiting=()):
        if r.ref_des in out_current:
            return out_current[r.ref_des]
        if r.ref_des in visiting:
            raise SolveError(f"regulator loop through {r.ref_des}")
        isl = labels[o_node]
        total = load_draw[isl]
        for r2, i2, o2, g2 in regs:
            if labels[i2] == isl:
                total += regulator_out(r2, i2, o2, visiting + (r.ref_des,)) + r2.quiescent_current
        out_current[r.ref_des] = total
        return total

    for r, i_node, o_node, g_node in regs:
        i_out = regulator_out(r, i_node, o_node)
        inj[i_node] -= i_out + r.quiescent_current
        inj[g_node] += r.quiescent_current

    v = np.full(n, np.nan)
    for k, val in fixed.items():
        v[k] = val
    solved = np.zeros(ncomp, dtype=bool)

    def solve_islands(islands):
        nodes = np.nonzero(np.isin(labels, list(islands)))[0]
        island_fixed = {k: val for k, val in fixed.items() if labels[k] in islands}
        out = solve_nodal(n, graph.edge_a, graph.edge_b, graph.edge_g, island_fixed, inj, L=L, nodes=nodes)
        v[nodes] = out[nodes]
        for isl in islands:
            solved[isl] = True

    # stage 1: everything pinned by sources and ideal grounds
    constant = sorted({int(labels[k]) for k in fixed})
    if constant:
        solve_islands(constant)

    # stage 2: regulated rails once their input and ground are known
    pending = list(regs)
    states = {}
    while pending:
        progressed = False
        for item in list(pending):
            r, i_node, o_node, g_node = item
            if not (solved[labels[i_node]] and solved[labels[g_node]]):
                continue
            isl = int(labels[o_node])
            # every regulator driving this island must be ready before solving it
            drivers = [it for it in pending if labels[it[2]] == isl]
            if not all(solved[labels[it[1]]] and solved[labels[it[3]]] for it in drivers):
                continue
            for r2, i2, o2, g2 in drivers:
                pin(o2, r2.set_voltage + v[g2], r2.ref_des)
                v[o2] = fixed[o2]
            if not solved[isl]:
                solve_islands([isl])
            for d in drivers:
                pending.remove(d)
            progressed = True
            break
        if not progressed:
            names = ", ".join(sorted((it[0].ref_des for it in pending), key=natural_key))
            raise SolveError(f"regulator(s) {names} have an unpowered input or ground")

    # islands with current but no path to any source
    draw = np.bincount(labels, weights=np.abs(inj), minlength=ncomp)
    for isl in range(ncomp):
        if draw[isl] > 0 and not solved[isl]:
            members = np.nonzero(labels == isl)[0]
            nets = sorted({graph.node_net[k] for k in members})
            raise SolveError(f"island on net(s) {', '.join(nets)} carries current but has no source")

    cur = graph.edge_g * (v[graph.edge_a] - v[graph.edge_b])
    cur = np.where(np.isfinite(cur), cur, 0.0)

    # current delivered by each pinned node = outflow through copper - injection
    flow = np.zeros(n)
    np.add.at(flow, graph.edge_a, cur)
    np.add.at(flow, graph.edge_b, -cur)
    source_current = {}
    for s in board.sources:
        k = pad[s.pin]
        source_current[s.name] = float(flow[k] - inj[k])
    # a pinned node's own balance is closed by its source
    inj_out = inj.copy()
    for k in fixed:
        inj_out[k] = flow[k]

    for r, i_node, o_node, g_node in regs:
        i_out = out_current[r.ref_des]
        vin, vg = float(v[i_node]), float(v[g_node])
        states[r.ref_des] = RegulatorState(r.ref_des, i_out, i_out + r.quiescent_current, vin,
                                           float(v[o_node]), vg, (vin - vg) - (r.set_voltage + r.dropout))

    return SolveResult(graph, v, cur, inj_out, dict(fixed), source_current,
                       [states[r.ref_des] for r in board.regulators], ideal_ground,
                       list(graph.warnings))


# ---------------------------------------------------------------- reports


@dataclass(frozen=True)
class LoadReport:
    id: str
    ref_des: str
    load_value: float
    min_voltage: float
    actual_voltage: float
    margin: float
    margin_pct: float
    min_pwr_pin: str
    min_pwr_pin_voltage: float
    max_gnd_pin: str
    max_gnd_pin_voltage: float
    actual_current: float
    load_type: str = "Current"

    @property
    def passed(self) -> bool:
        return self.margin >= 0

    @property
    def pass_fail(self) -> str:
        return "PASS" if self.passed else "FAIL"


def load_row(id, ref_des, load_value, min_voltage, pwr_pin, v_pwr, gnd_pin, v_gnd, actual_current=None):
    actual = v_pwr - v_gnd
    margin = actual - min_voltage
    return LoadReport(id, ref_des, load_value, min_voltage, actual, margin, 100.0 * margin / min_voltage,
                      pwr_pin, v_pwr, gnd_pin, v_gnd, load_value if actual_current is None else actual_current)


def load_reports(result: SolveResult, board: Board) -> list:
    """One Table-style row per load, in natural ref_des order."""
    rows = []
    for k, ld in enumerate(sorted(board.loads, key=lambda l: natural_key(l.ref_des)), start=1):
        vp = result.node_voltage(ld.power_pin)
        vg = 0.0 if result.ideal_ground else result.node_voltage(ld.ground_pin)
        rows.append(load_row(f"Load {k}", ld.ref_des, ld.load_current, ld.min_voltage,
                             ld.power_pin, vp, ld.ground_pin, vg, ld.load_current))
    return rows


@dataclass(frozen=True)
class TestPointFinding:
    __test__ = False

    name: str
    net: str
    pad: str
    expected: float
    tolerance: float
    measured: float
    status: str  # pass | fail | dropout | unsolved
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def _downstream_nets(board: Board, ref_des):
    pads = board.pads
    regs = {r.ref_des: r for r in board.regulators}
    start = pads[regs[ref_des].output_pin].net
    out = {start}
    changed = True
    while changed:
        changed = False
        for r in board.regulators:
            a, b = pads.get(r.input_pin), pads.get(r.output_pin)
            if a is not None and b is not None and a.net in out and b.net not in out:
                out.add(b.net)
                changed = True
    return out


def check_testpoints(result: SolveResult, board: Board) -> list:
    starved = {}
    for st in result.regulators:
        if st.in_dropout:
            for net in _downstream_nets(board, st.ref_des):
                starved.setdefault(net, st.ref_des)
    out = []
    for tp in board.testpoints:
        v = result.node_voltage(tp.pad)
        if tp.ground_pad is not None and not result.ideal_ground:
            v -= result.node_voltage(tp.ground_pad)
        if not math.isfinite(v):
            out.append(TestPointFinding(tp.name, tp.net, tp.pad, tp.expected_voltage, tp.tolerance, v,
                                        "unsolved", "test point is not on a solved island"))
        elif tp.net in starved:
            out.append(TestPointFinding(tp.name, tp.net, tp.pad, tp.expected_voltage, tp.tolerance, v,
                                        "dropout", f"DropoutViolation: regulator {starved[tp.net]} lacks headroom"))
        else:
            ok = abs(v - tp.expected_voltage) <= tp.tolerance
            out.append(TestPointFinding(tp.name, tp.net, tp.pad, tp.expected_voltage, tp.tolerance, v,
                                        "pass" if ok else "fail"))
    return out


def segment_currents(result: SolveResult) -> dict:
    """Peak |I| over the chain pieces of each meshed segment."""
    out = {}
    for e, fid, *_ in result.graph.chain_pieces:
        out[fid] = max(out.get(fid, 0.0), abs(float(result.edge_current[e])))
    return out


@dataclass
class DensityGrid:
    layer: str
    cell_size: float
    origin: tuple  # lower-left corner of cell (0, 0), mm
    values: np.ndarray  # (rows, cols) |J| in A/mm^2, row 0 at the lowest y
    voltage: np.ndarray  # same shape, V, NaN where there is no copper
    max_value: float
    max_location: Optional[tuple]
    max_net: str


def current_density(result: SolveResult) -> list:
    """Per-layer |J| maps (A/mm^2) and matching voltage maps."""
    g = result.graph
    h = g.cell_size
    cur = result.edge_current
    grids = []
    for li, lg in enumerate(g.layers):
        t_mm = lg.thickness_um * 1e-3
        jx = np.zeros((lg.ny, lg.nx))
        jy = np.zeros((lg.ny, lg.nx))
        sel = g.grid_edges[g.grid_edges[:, 1] == li] if len(g.grid_edges) else np.zeros((0, 7), dtype=np.int64)
        if len(sel):
            i_e = cur[sel[:, 0]] / 2.0
            for comp, axis in ((jx, 0), (jy, 1)):
                m = sel[:, 6] == axis
                np.add.at(comp, (sel[m, 2], sel[m, 3]), i_e[m])
                np.add.at(comp, (sel[m, 4], sel[m, 5]), i_e[m])
        dens = np.hypot(jx, jy) / (h * t_mm)
        volt = np.full((lg.ny, lg.nx), np.nan)
        has = lg.node >= 0
        volt[has] = result.voltage[lg.node[has]]
        netmap = lg.net.copy()
        grids.append([lg, dens, volt, netmap])

    # chains paint their width onto the grid; a layer grid may need to grow
    paint = {}
    for e, fid, x0, y0, x1, y1, w, t_mm, li in g.chain_pieces:
        j = abs(float(cur[e])) / (w * t_mm)
        vmean = 0.5 * (result.voltage[g.edge_a[e]] + result.voltage[g.edge_b[e]])
        paint.setdefault(li, []).append((x0, y0, x1, y1, w, j, vmean, g.node_net[g.edge_a[e]]))
    for li, items in paint.items():
        lg, dens, volt, netmap = grids[li]
        xs = [c for it in items for c in (it[0] - it[4] / 2, it[2] + it[4] / 2, it[0] + it[4] / 2, it[2] - it[4] / 2)]
        ys = [c for it in items for c in (it[1] - it[4] / 2, it[3] + it[4] / 2, it[1] + it[4] / 2, it[3] - it[4] / 2)]
        i0 = min(math.floor(min(xs) / h), lg.i0 if lg.nx else math.inf)
        j0 = min(math.floor(min(ys) / h), lg.j0 if lg.ny else math.inf)
        i1 = max(math.floor(max(xs) / h), lg.i0 + lg.nx - 1 if lg.nx else -math.inf)
        j1 = max(math.floor(max(ys) / h), lg.j0 + lg.ny - 1 if lg.ny else -math.inf)
        nx, ny = int(i1 - i0 + 1), int(j1 - j0 + 1)
        d2 = np.zeros((ny, nx))
        v2 = np.full((ny, nx), np.nan)
        n2 = np.full((ny, nx), "", dtype=object)
        if lg.nx:
            sr, sc = lg.j0 - j0, lg.i0 - i0
            d2[sr:sr + lg.ny, sc:sc + lg.nx] = dens
            v2[sr:sr + lg.ny, sc:sc + lg.nx] = volt
            n2[sr:sr + lg.ny, sc:sc + lg.nx] = netmap
        for x0, y0, x1, y1, w, j, vmean, net in items:
            ci = np.arange(math.floor((min(x0, x1) - w / 2) / h), math.floor((max(x0, x1) + w / 2) / h) + 1)
            cj = np.arange(math.floor((min(y0, y1) - w / 2) / h), math.floor((max(y0, y1) + w / 2) / h) + 1)
            cx, cy = np.meshgrid((ci + 0.5) * h, (cj + 0.5) * h)
            dx, dy = x1 - x0, y1 - y0
            ll = dx * dx + dy * dy
            tt = np.clip(((cx - x0) * dx + (cy - y0) * dy) / ll, 0.0, 1.0) if ll > 0 else np.zeros_like(cx)
            dist = np.hypot(cx - (x0 + tt * dx), cy - (y0 + tt * dy))
            hit = dist <= w / 2
            mi, mj = math.floor((x0 + x1) / 2 / h), math.floor((y0 + y1) / 2 / h)
            hit[mj - cj[0], mi - ci[0]] = True
            rr, cc = np.nonzero(hit)
            R, C = cj[rr] - j0, ci[cc] - i0
            d2[R, C] = np.maximum(d2[R, C], j)
            empty = np.isnan(v2[R, C])
            v2[R[empty], C[empty]] = vmean
            n2[R[empty], C[empty]] = net
        grids[li] = [type(lg)(lg.name, lg.thickness_um, int(i0), int(j0), nx, ny, lg.node, lg.net, lg.pad),
                     d2, v2, n2]

    out = []
    for lg, dens, volt, netmap in grids:
        # cells without copper stay blank rather than reading as 0 A/mm^2
        dens = np.where(np.isnan(volt), np.nan, dens)
        if dens.size and np.nanmax(dens, initial=0.0) > 0:
            r, c = np.unravel_index(int(np.nanargmax(dens)), dens.shape)
            loc = ((lg.i0 + c + 0.5) * h, (lg.j0 + r + 0.5) * h)
            mx, net = float(dens[r, c]), str(netmap[r, c])
        else:
            mx, loc, net = 0.0, None, ""
        out.append(DensityGrid(lg.name, h, (lg.i0 * h, lg.j0 * h), dens, volt, mx, loc, net))
    return out
