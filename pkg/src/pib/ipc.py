"""IPC-2221 conductor sizing and rail power budgeting."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .board import Board, Segment, SourceSpec, natural_key
from .units import OZ_MIL, mm_to_mil

# curve-fit constants of the IPC-2221 current/temperature-rise charts
IPC_CONSTANTS = {
    "external": (0.048, 0.44, 0.725),
    "internal": (0.024, 0.44, 0.725),
}

DEFAULT_TEMP_RISE = 10.0
DEFAULT_AMBIENT = 25.0


class SizingError(ValueError):
    pass


@dataclass(frozen=True)
class WidthQuery:
    current: float
    temp_rise: float = DEFAULT_TEMP_RISE
    copper_weight: float = 1.0
    layer_class: str = "external"


def _check(q: WidthQuery):
    if q.layer_class not in IPC_CONSTANTS:
        raise SizingError(f"layer class must be 'internal' or 'external', got {q.layer_class!r}")
    for name in ("current", "temp_rise", "copper_weight"):
        v = getattr(q, name)
        if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
            raise SizingError(f"{name} must be a positive finite number, got {v!r}")


def min_cross_section(q: WidthQuery) -> float:
    """Minimum conductor cross-section in mil^2.

    Inverts I = k * dT^b * A^c for A.
    """
    _check(q)
    k, b, c = IPC_CONSTANTS[q.layer_class]
    return (q.current / (k * q.temp_rise ** b)) ** (1.0 / c)


def min_trace_width(q: WidthQuery) -> float:
    """Minimum trace width in mil for the query's copper weight."""
    return min_cross_section(q) / (q.copper_weight * OZ_MIL)


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass(frozen=True)
class WidthFinding:
    feature: str
    net: str
    layer: str
    status: str  # "pass" | "violation" | "unverifiable"
    current: Optional[float]
    actual_mil: float
    required_mil: Optional[float]
    headroom: Optional[float]

    @property
    def severity(self):
        return {"pass": "info", "violation": "error", "unverifiable": "warn"}[self.status]


def check_segment_width(feature_id, net, layer, width_mm, current, copper_weight,
                        layer_class="external", temp_rise=DEFAULT_TEMP_RISE) -> WidthFinding:
    actual = mm_to_mil(width_mm)
    if current is None:
        return WidthFinding(feature_id, net, layer, "unverifiable", None, actual, None, None)
    current = abs(current)
    if current == 0:
        return WidthFinding(feature_id, net, layer, "pass", 0.0, actual, 0.0, math.inf)
    req = min_trace_width(WidthQuery(current, temp_rise, copper_weight, layer_class))
    status = "violation" if actual < req * (1 - 1e-12) else "pass"
    return WidthFinding(feature_id, net, layer, status, current, actual, req, actual / req)


def check_board_widths(board: Board, segment_currents=None, temp_rise=DEFAULT_TEMP_RISE) -> list:
    """Check every segment's width against the IPC-2221 minimum for its current.

    ``segment_currents`` maps feature id -> peak current (A), typically from
    :func:`pib.solver.segment_currents`. Segments without a solved current
    fall back to their net's declared ``max_current``; if neither exists
    the finding is ``unverifiable``.
    """
    segment_currents = segment_currents or {}
    layers = board.layer_map
    nets = board.net_map
    out = []
    for f in board.copper:
        if not isinstance(f.shape, Segment):
            continue
        layer = layers[f.layer]
        current = segment_currents.get(f.id)
        if current is None and f.net in nets:
            current = nets[f.net].max_current
        out.append(check_segment_width(
            f.id, f.net, f.layer, f.shape.width, current, layer.copper_weight,
            "external" if layer.is_external else "internal", temp_rise))
    out.sort(key=lambda w: natural_key(w.feature))
    return out


class BudgetError(ValueError):
    pass


@dataclass(frozen=True)
class RailBudget:
    rail: str
    voltage: float
    current: float  # A drawn from the rail by its lines and downstream regulators
    output_power: float  # sum of q*V*I of the rail's own lines
    input_power: float  # power referred to the supply


@dataclass(frozen=True)
class RegulatorLoss:
    ref_des: str
    input_rail: str
    output_rail: str
    output_current: float
    input_current: float
    dissipation: float


@dataclass(frozen=True)
class BudgetReport:
    supply: str
    supply_voltage: float
    available_power: Optional[float]
    total_input_power: float
    margin: Optional[float]
    rails: tuple
    regulators: tuple

    @property
    def passed(self) -> bool:
        return self.margin is None or self.margin >= 0


def _rail_nets(board: Board):
    pads = board.pads
    regs = []
    for r in board.regulators:
        a, b = pads.get(r.input_pin), pads.get(r.output_pin)
        if a is None or b is None:
            continue
        regs.append((r, a.net, b.net))
    return regs


def power_budget(lines, supply: SourceSpec, board: Optional[Board] = None) -> BudgetReport:
    """Roll budget lines up to the supply.

    Regulators are linear: I_in = I_out + I_q and the regulated rail is seen
    by its input as V_in * I_in. Only regulators fed (directly or through
    other regulators) by ``supply.net`` take part.
    """
    lines = list(lines)
    regs = _rail_nets(board) if board is not None else []
    nets = board.net_map if board is not None else {}

    fed = {supply.net}
    changed = True
    while changed:
        changed = False
        for r, a, b in regs:
            if a in fed and b not in fed:
                fed.add(b)
                changed = True
    active = [(r, a, b) for r, a, b in regs if a in fed]

    for ln in lines:
        if ln.rail not in fed:
            raise BudgetError(f"budget line {ln.name!r} is on rail {ln.rail!r}, which has no path from {supply.net!r}")

    def rail_voltage(net):
        if net == supply.net:
            return supply.voltage
        for r, a, b in active:
            if b == net:
                return r.set_voltage
        n = nets.get(net)
        return n.nominal_voltage if n is not None and n.nominal_voltage else 0.0

    own_current = {n: 0.0 for n in fed}
    own_power = {n: 0.0 for n in fed}
    for ln in lines:
        own_current[ln.rail] += ln.quantity * ln.current
        own_power[ln.rail] += ln.quantity * ln.voltage * ln.current

    # current drawn from each rail including regulators hanging off it
    memo: dict[str, float] = {}

    def drawn(net, depth=0):
        if net in memo:
            return memo[net]
        if depth > len(active) + 1:
            raise BudgetError("regulator loop in budget topology")
        total = own_current[net]
        for r, a, b in active:
            if a == net:
                total += drawn(b, depth + 1) + r.quiescent_current
        memo[net] = total
        return total

    losses = []
    for r, a, b in sorted(active, key=lambda t: natural_key(t[0].ref_des)):
        i_out = drawn(b)
        v_in = rail_voltage(a)
        losses.append(RegulatorLoss(r.ref_des, a, b, i_out, i_out + r.quiescent_current,
                                    (v_in - r.set_voltage) * i_out + v_in * r.quiescent_current))

    # supply-referred: every amp on a linear chain is an amp at the supply
    def input_power(net):
        if net == supply.net:
            return own_power[net]
        iq = sum(r.quiescent_current for r, a, b in active if b == net)
        return supply.voltage * (own_current[net] + iq)

    rails = []
    for net in sorted(fed, key=natural_key):
        rails.append(RailBudget(net, rail_voltage(net), drawn(net), own_power[net], input_power(net)))
    total = supply.voltage * drawn(supply.net)
    # lines whose nameplate voltage differs from the source rail still count at their own V*I
    total += own_power[supply.net] - supply.voltage * own_current[supply.net]

    available = None if supply.max_current is None else supply.voltage * supply.max_current
    margin = None if available is None else available - total
    return BudgetReport(supply.name, supply.voltage, available, total, margin, tuple(rails), tuple(losses))
