"""Analysis report assembly and its JSON, table and CSV renderings."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .board import natural_key

SIG_DIGITS = 12  # report floats are rounded so runs agree byte for byte


def num(x):
    if x is None:
        return None
    x = float(x)
    if not math.isfinite(x):
        return None
    if x == 0.0:
        return 0.0
    return float(f"{x:.{SIG_DIGITS}g}")


def digest(path) -> dict:
    with open(path, "rb") as fh:
        data = fh.read()
    return {"name": os.path.basename(path), "sha256": hashlib.sha256(data).hexdigest()}


@dataclass
class AnalysisReport:
    board: str
    inputs: list
    config: dict
    loads: list = field(default_factory=list)
    testpoints: list = field(default_factory=list)
    widths: list = field(default_factory=list)
    density: list = field(default_factory=list)
    regulators: list = field(default_factory=list)
    budget: dict | None = None
    lint: list | None = None
    warnings: list = field(default_factory=list)
    tool_version: str = __version__

    def errors(self) -> list:
        """Every error-severity finding as a short string."""
        out = [f"load {r['ref_des']} FAIL" for r in self.loads if r["pass_fail"] != "PASS"]
        out += [f"test point {t['name']} {t['status']}" for t in self.testpoints if t["status"] != "pass"]
        out += [f"width {w['feature']} violation" for w in self.widths if w["severity"] == "error"]
        if self.budget is not None and not self.budget["passed"]:
            out.append("budget margin negative")
        if self.lint:
            out += [f"lint {v['rule']} {'/'.join(v['features'])}" for v in self.lint if v["severity"] == "error"]
        return out

    @property
    def verdict(self) -> str:
        return "PASS" if not self.errors() else "FAIL"

    def to_dict(self) -> dict:
        d = {
            "tool_version": self.tool_version,
            "board": self.board,
            "inputs": self.inputs,
            "config": self.config,
            "verdict": self.verdict,
            "loads": self.loads,
            "testpoints": self.testpoints,
            "widths": self.widths,
            "density": self.density,
            "regulators": self.regulators,
            "budget": self.budget,
            "warnings": self.warnings,
        }
        if self.lint is not None:
            d["lint"] = self.lint
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False, allow_nan=False) + "\n"


# ------------------------------------------------------------- row dicts


def load_dict(r) -> dict:
    return {
        "id": r.id,
        "ref_des": r.ref_des,
        "load_value_a": num(r.load_value),
        "load_type": r.load_type,
        "min_voltage_v": num(r.min_voltage),
        "actual_voltage_v": num(r.actual_voltage),
        "margin_v": num(r.margin),
        "margin_pct": num(r.margin_pct),
        "min_pwr_pin": r.min_pwr_pin,
        "min_pwr_pin_voltage_v": num(r.min_pwr_pin_voltage),
        "max_gnd_pin": r.max_gnd_pin,
        "max_gnd_pin_voltage_v": num(r.max_gnd_pin_voltage),
        "actual_current_a": num(r.actual_current),
        "pass_fail": r.pass_fail if math.isfinite(r.margin) else "FAIL",
    }


def testpoint_dict(t) -> dict:
    return {
        "name": t.name, "net": t.net, "pad": t.pad,
        "expected_v": num(t.expected), "tolerance_v": num(t.tolerance),
        "measured_v": num(t.measured), "status": t.status, "detail": t.detail,
    }


def width_dict(w) -> dict:
    return {
        "feature": w.feature, "net": w.net, "layer": w.layer, "status": w.status,
        "severity": w.severity, "current_a": num(w.current), "actual_mil": num(w.actual_mil),
        "required_mil": num(w.required_mil), "headroom": num(w.headroom),
    }


def density_dict(g) -> dict:
    return {
        "layer": g.layer,
        "cell_mm": num(g.cell_size),
        "units": "A/mm2",
        "max_a_per_mm2": num(g.max_value),
        "max_location_mm": None if g.max_location is None else [num(v) for v in g.max_location],
        "max_net": g.max_net,
    }


def regulator_dict(s) -> dict:
    return {
        "ref_des": s.ref_des,
        "input_voltage_v": num(s.input_voltage), "output_voltage_v": num(s.output_voltage),
        "ground_voltage_v": num(s.ground_voltage), "output_current_a": num(s.output_current),
        "input_current_a": num(s.input_current), "headroom_v": num(s.headroom),
        "in_dropout": bool(s.in_dropout),
    }


def budget_dict(b) -> dict:
    return {
        "supply": b.supply,
        "supply_voltage_v": num(b.supply_voltage),
        "available_w": num(b.available_power),
        "total_w": num(b.total_input_power),
        "margin_w": num(b.margin),
        "passed": b.passed,
        "rails": [{"rail": r.rail, "voltage_v": num(r.voltage), "current_a": num(r.current),
                   "output_w": num(r.output_power), "input_w": num(r.input_power)} for r in b.rails],
        "regulators": [{"ref_des": r.ref_des, "input_rail": r.input_rail, "output_rail": r.output_rail,
                        "output_current_a": num(r.output_current), "input_current_a": num(r.input_current),
                        "dissipation_w": num(r.dissipation)} for r in b.regulators],
    }


def violation_dict(v) -> dict:
    return {
        "rule": v.rule, "severity": v.severity, "features": list(v.features),
        "measured": num(v.measured), "required": num(v.required),
        "location_mm": [num(c) for c in v.location],
    }


# -------------------------------------------------------------- tables


def _fmt(v, nd=4):
    if v is None:
        return "-"
    if isinstance(v, str):
        return v
    return f"{v:.{nd}f}"


def ascii_table(headers, rows, align=None) -> str:
    cells = [[str(c) for c in r] for r in rows]
    widths = [len(h) for h in headers]
    for r in cells:
        widths = [max(w, len(c)) for w, c in zip(widths, r)]
    align = align or ["<"] + [">"] * (len(headers) - 1)
    sep = "+" + "+".join("-" * (w + 2) for w in widths) + "+"

    def line(vals):
        return "| " + " | ".join(f"{v:{a}{w}}" for v, a, w in zip(vals, align, widths)) + " |"

    out = [sep, line(headers), sep]
    out += [line(r) for r in cells]
    out.append(sep)
    return "\n".join(out)


LOAD_HEADERS = ["ID", "Ref", "Load Value (A)", "Load Type", "Min Voltage (V)", "Actual Voltage (V)",
                "Margin (V)", "Margin %", "Min Pwr Pin", "Pwr Pin V", "Max Gnd Pin", "Gnd Pin V", "Pass/Fail"]


def load_rows(loads):
    return [[r["id"], r["ref_des"], _fmt(r["load_value_a"], 2), r["load_type"], _fmt(r["min_voltage_v"], 3),
             _fmt(r["actual_voltage_v"], 4), _fmt(r["margin_v"], 4), _fmt(r["margin_pct"], 2),
             r["min_pwr_pin"], _fmt(r["min_pwr_pin_voltage_v"], 4), r["max_gnd_pin"],
             _fmt(r["max_gnd_pin_voltage_v"], 4), r["pass_fail"]] for r in loads]


def _colour(text, ok, colour):
    if not colour:
        return text
    return f"\x1b[{32 if ok else 31}m{text}\x1b[0m"


def render_table(report: AnalysisReport, colour=False) -> str:
    parts = [f"board: {report.board}   pib {report.tool_version}"]
    if report.loads:
        parts.append(ascii_table(LOAD_HEADERS, load_rows(report.loads)))
    if report.testpoints:
        rows = [[t["name"], t["net"], t["pad"], _fmt(t["expected_v"], 3), _fmt(t["tolerance_v"], 3),
                 _fmt(t["measured_v"], 4), t["status"]] for t in report.testpoints]
        parts.append(ascii_table(["Test Point", "Net", "Pad", "Expected (V)", "Tol (V)", "Measured (V)", "Status"], rows))
    if report.regulators:
        rows = [[s["ref_des"], _fmt(s["input_voltage_v"]), _fmt(s["output_voltage_v"]), _fmt(s["output_current_a"]),
                 _fmt(s["headroom_v"]), "yes" if s["in_dropout"] else "no"] for s in report.regulators]
        parts.append(ascii_table(["Regulator", "Vin (V)", "Vout (V)", "Iout (A)", "Headroom (V)", "Dropout"], rows))
    if report.density:
        rows = [[d["layer"], d["max_net"], _fmt(d["max_a_per_mm2"], 3),
                 "-" if d["max_location_mm"] is None else f"({d['max_location_mm'][0]:.2f}, {d['max_location_mm'][1]:.2f})"]
                for d in report.density]
        parts.append(ascii_table(["Layer", "Net", "Max |J| (A/mm2)", "At (mm)"], rows))
    flagged = [w for w in report.widths if w["status"] != "pass"]
    if flagged:
        rows = [[w["feature"], w["net"], w["layer"], w["status"], _fmt(w["current_a"], 3),
                 _fmt(w["actual_mil"], 2), _fmt(w["required_mil"], 2)] for w in flagged]
        parts.append(ascii_table(["Segment", "Net", "Layer", "Status", "I (A)", "Width (mil)", "Required (mil)"], rows))
    if report.budget is not None:
        parts.append(render_budget(report.budget))
    if report.lint:
        parts.append(render_lint(report.lint))
    ok = report.verdict == "PASS"
    parts.append("verdict: " + _colour(report.verdict, ok, colour))
    return "\n\n".join(parts) + "\n"


def render_budget(b: dict) -> str:
    rows = [[r["rail"], _fmt(r["voltage_v"], 2), _fmt(r["current_a"], 4), _fmt(r["output_w"], 3), _fmt(r["input_w"], 3)]
            for r in b["rails"]]
    rows.append(["total", _fmt(b["supply_voltage_v"], 2), "", "", _fmt(b["total_w"], 3)])
    out = ascii_table(["Rail", "V", "I (A)", "Load (W)", "Supply-referred (W)"], rows)
    if b["regulators"]:
        rrows = [[r["ref_des"], f"{r['input_rail']}->{r['output_rail']}", _fmt(r["output_current_a"], 4),
                  _fmt(r["dissipation_w"], 3)] for r in b["regulators"]]
        out += "\n" + ascii_table(["Regulator", "Rails", "Iout (A)", "Loss (W)"], rrows)
    avail = "unlimited" if b["available_w"] is None else f"{b['available_w']:.3f} W"
    margin = "-" if b["margin_w"] is None else f"{b['margin_w']:.3f} W"
    out += f"\navailable {avail}, demand {b['total_w']:.3f} W, margin {margin}"
    return out


def render_lint(violations) -> str:
    groups = {}
    for v in violations:
        groups.setdefault(v["rule"], []).append(v)
    out = []
    for rule in sorted(groups):
        out.append(f"[{rule}] {len(groups[rule])}")
        for v in groups[rule]:
            loc = v["location_mm"]
            out.append(f"  {v['severity']:<5} {', '.join(v['features'])}: measured {v['measured']:.4f}"
                       f" required {v['required']:.4f} at ({loc[0]:.3f}, {loc[1]:.3f})")
    return "\n".join(out)


# ----------------------------------------------------------------- CSV


def loads_csv(loads) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    keys = list(loads[0].keys()) if loads else ["id", "ref_des", "pass_fail"]
    w.writerow(keys)
    for r in loads:
        w.writerow(["" if r[k] is None else (repr(r[k]) if isinstance(r[k], float) else r[k]) for k in keys])
    return buf.getvalue()


def grid_csv(grid: np.ndarray, layer: str, cell: float, units: str, origin) -> str:
    """One row per grid row, row 0 at the lowest y; empty cells are blank."""
    lines = [f"# layer={layer} cell={cell:g} units={units}",
             f"# origin={origin[0]:g},{origin[1]:g}"]
    for row in grid:
        lines.append(",".join("" if not np.isfinite(v) else f"{num(v)!r}" for v in row))
    return "\n".join(lines) + "\n"


def write_outputs(report: AnalysisReport, grids, out_dir, figures=True) -> list:
    """Write report.json, report.txt, loads.csv and per-layer grids; returns paths."""
    os.makedirs(out_dir, exist_ok=True)
    written = []

    def put(name, text):
        p = os.path.join(out_dir, name)
        with open(p, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        written.append(p)

    put("report.json", report.to_json())
    put("report.txt", render_table(report))
    put("loads.csv", loads_csv(report.loads))
    for g in sorted(grids, key=lambda g: natural_key(g.layer)):
        put(f"density_{g.layer}.csv", grid_csv(g.values, g.layer, g.cell_size, "A/mm2", g.origin))
        put(f"voltage_{g.layer}.csv", grid_csv(g.voltage, g.layer, g.cell_size, "V", g.origin))
    if figures:
        from .plotting import save_heatmaps

        written += save_heatmaps(grids, out_dir)
    return written
