"""Regenerate the bundled quadruped controller board files.

Writes src/pib/data/example_board.pib.json (bottom ground pour) and
example_board_nopour.pib.json (same board, pour removed).
"""

import argparse
import os

from pib.board import (Board, BudgetLine, Component, CopperFeature, Layer, LoadSpec, Net, Pad, Pin,
                       Polygon, RegulatorSpec, Segment, SourceSpec, TestPoint)
from pib.native import emit_native

TOP, BOT = "top", "bottom"
STUB = 0.635  # 25 mil
DIP_PAD, DIP_DRILL = 1.7, 1.0
PITCH = 2.54

ROW_A, ROW_B = 75.0, 40.0
COLS = [20.0 + 16.0 * k for k in range(6)]


def build(pour=True) -> Board:
    copper = []
    comps = []

    def seg(fid, layer, net, a, b, w=STUB):
        copper.append(CopperFeature(fid, layer, net, Segment(a, b, w)))

    def pad(fid, net, at, d=DIP_PAD, drill=DIP_DRILL):
        copper.append(CopperFeature(fid, TOP, net, Pad(at, "circle", (d, d), True, drill)))
        return fid

    def comp(ref, pins):
        comps.append(Component(ref, tuple(Pin(n, p, net) for n, p, net in pins)))

    # supply connector and trunks
    pad("J1-1", "HT", (4.0, 45.0), 3.0, 1.3)
    pad("J1-2", "GND", (4.0, 35.0), 3.0, 1.3)
    comp("J1", [("1", "J1-1", "HT"), ("2", "J1-2", "GND")])
    seg("ht-trunk", TOP, "HT", (4.0, 45.0), (10.0, 45.0), 7.0)
    seg("ht-spine", TOP, "HT", (10.0, 43.0), (10.0, 78.0), 3.0)
    seg("ht-spine-low", TOP, "HT", (10.0, 43.0), (10.0, 10.0), 1.0)
    seg("ht-bus-a", TOP, "HT", (10.0, 78.0), (COLS[-1] + 12.7, 78.0), 3.0)
    seg("ht-bus-b", TOP, "HT", (10.0, 43.0), (COLS[-1] + 12.7, 43.0), 3.0)
    seg("gnd-trunk", BOT, "GND", (4.0, 35.0), (8.0, 35.0), 7.0)
    seg("gnd-spine", BOT, "GND", (8.0, 4.0), (8.0, 55.0), 2.6)
    seg("gnd-bus-a", BOT, "GND", (8.0, 55.0), (COLS[-1] + 12.7, 55.0), 2.6)
    seg("gnd-bus-b", BOT, "GND", (8.0, 20.0), (COLS[-1] + 12.7, 20.0), 2.6)
    seg("gnd-low", BOT, "GND", (8.0, 4.0), (42.54, 4.0), 1.0)

    # regulators: pads IN, GND, OUT left to right
    regs = []
    for ref, y, out_net, vset in (("U3", 60.0, "LT", 5.0), ("U4", 25.0, "LTX", 5.0), ("U5", 10.0, "L9T", 9.0)):
        xs = (13.0, 13.0 + PITCH, 13.0 + 2 * PITCH)
        pad(f"{ref}-1", "HT", (xs[0], y), 1.8)
        pad(f"{ref}-2", "GND", (xs[1], y), 1.8)
        pad(f"{ref}-3", out_net, (xs[2], y), 1.8)
        comp(ref, [("IN", f"{ref}-1", "HT"), ("GND", f"{ref}-2", "GND"), ("OUT", f"{ref}-3", out_net)])
        seg(f"{ref}-in", TOP, "HT", (10.0, y), (xs[0], y))
        regs.append(RegulatorSpec(ref, f"{ref}-1", f"{ref}-3", f"{ref}-2", vset, 2.0, 0.006))
    seg("U3-gnd", BOT, "GND", (13.0 + PITCH, 60.0), (13.0 + PITCH, 55.0))
    seg("U4-gnd", BOT, "GND", (13.0 + PITCH, 25.0), (13.0 + PITCH, 20.0))
    seg("U5-gnd", BOT, "GND", (13.0 + PITCH, 10.0), (13.0 + PITCH, 4.0))
    x_out = 13.0 + 2 * PITCH
    seg("lt-feed", TOP, "LT", (x_out, 60.0), (x_out, 53.0))
    seg("lt-bus", TOP, "LT", (x_out, 53.0), (COLS[-1] + 15.2, 53.0), 1.0)
    seg("ltx-feed", TOP, "LTX", (x_out, 25.0), (x_out, 18.0))
    seg("ltx-bus", TOP, "LTX", (x_out, 18.0), (COLS[-1] + 15.2, 18.0), 1.0)
    seg("l9t-feed", TOP, "L9T", (x_out, 10.0), (x_out, 6.0))
    seg("l9t-run", TOP, "L9T", (x_out, 6.0), (40.0, 6.0))

    # microcontroller supply pins
    pad("U2-VIN", "L9T", (40.0, 6.0))
    pad("U2-GND", "GND", (42.54, 6.0))
    comp("U2", [("VIN", "U2-VIN", "L9T"), ("GND", "U2-GND", "GND")])
    seg("U2-gnd", BOT, "GND", (42.54, 6.0), (42.54, 4.0))

    # switch, indicator resistor and LED
    pad("S1-1", "HT", (20.0, 82.0))
    pad("S1-2", "HT", (20.0 + PITCH, 82.0))
    comp("S1", [("1", "S1-1", "HT"), ("2", "S1-2", "HT")])
    pad("R1M-1", "HT", (30.0, 82.0))
    pad("R1M-2", "LED", (30.0 + PITCH, 82.0))
    comp("R1M", [("1", "R1M-1", "HT"), ("2", "R1M-2", "LED")])
    pad("D1-A", "LED", (40.0, 82.0))
    pad("D1-K", "GND", (40.0 + PITCH, 82.0))
    comp("D1", [("A", "D1-A", "LED"), ("K", "D1-K", "GND")])
    for fid, x in (("S1-stub1", 20.0), ("S1-stub2", 20.0 + PITCH), ("R1M-stub", 30.0)):
        seg(fid, TOP, "HT", (x, 82.0), (x, 78.0))
    seg("led-run", TOP, "LED", (30.0 + PITCH, 82.0), (40.0, 82.0), 0.4)
    seg("D1-gnd", BOT, "GND", (40.0 + PITCH, 82.0), (40.0 + PITCH, 55.0))

    # motor drivers and encoders
    loads = []
    n = 0
    for row, y0, rail, gnd_bus in (("a", ROW_A, "LT", 55.0), ("b", ROW_B, "LTX", 20.0)):
        ht_bus = 78.0 if row == "a" else 43.0
        rail_bus = 53.0 if row == "a" else 18.0
        for x0 in COLS:
            n += 1
            ref, enc = f"DV{n}", f"P{n}"
            xr = x0 + 12.7
            p16 = pad(f"{ref}-16", "HT", (xr, y0))
            p15 = pad(f"{ref}-15", "GND", (xr, y0 - PITCH))
            p10 = pad(f"{ref}-10", rail, (xr, y0 - 6 * PITCH))
            p9 = pad(f"{ref}-9", "GND", (xr, y0 - 7 * PITCH))
            comp(ref, [("VM", p16, "HT"), ("GND", p15, "GND"), ("VIO", p10, rail), ("GND", p9, "GND")])
            seg(f"{ref}-vm", TOP, "HT", (xr, ht_bus), (xr, y0))
            seg(f"{ref}-gnd9", BOT, "GND", (xr, gnd_bus), (xr, y0 - 7 * PITCH))
            seg(f"{ref}-gnd15a", BOT, "GND", (xr, y0 - PITCH), (xr - 2.0, y0 - PITCH))
            seg(f"{ref}-gnd15b", BOT, "GND", (xr - 2.0, y0 - PITCH), (xr - 2.0, gnd_bus))
            seg(f"{ref}-vioa", TOP, rail, (xr + 2.5, rail_bus), (xr + 2.5, y0 - 6 * PITCH))
            seg(f"{ref}-viob", TOP, rail, (xr + 2.5, y0 - 6 * PITCH), (xr, y0 - 6 * PITCH))
            loads.append(LoadSpec(ref, p16, p9, 1.3, 10.5))

            ey = y0 - 25.0
            pv = pad(f"{enc}-VCC", rail, (x0 + 6.35, ey))
            pg = pad(f"{enc}-GND", "GND", (x0 + 8.89, ey))
            comp(enc, [("VCC", pv, rail), ("GND", pg, "GND")])
            seg(f"{enc}-vcc", TOP, rail, (x0 + 6.35, ey), (x0 + 6.35, rail_bus))
            seg(f"{enc}-gnd", BOT, "GND", (x0 + 8.89, ey), (x0 + 8.89, gnd_bus))

    if pour:
        # strips between pad rows keep clear of every foreign pad
        for k, (y_lo, y_hi) in enumerate(((61.5, 73.5), (51.8, 58.0), (41.8, 48.8), (26.5, 38.5), (16.8, 23.0)), 1):
            copper.append(CopperFeature(f"gnd-pour{k}", BOT, "GND", Polygon(
                ((8.0, y_lo), (116.0, y_lo), (116.0, y_hi), (8.0, y_hi)))))
        # wide block alongside the ground spine, clear of J1-1 and the regulators
        copper.append(CopperFeature("gnd-pour6", BOT, "GND", Polygon(
            ((7.0, 26.5), (24.0, 26.5), (24.0, 58.0), (7.0, 58.0)))))

    outline = (((0.0, 0.0), (120.0, 0.0)), ((120.0, 0.0), (120.0, 85.0)),
               ((120.0, 85.0), (0.0, 85.0)), ((0.0, 85.0), (0.0, 0.0)))
    return Board(
        name="quadruped-controller" + ("" if pour else "-nopour"),
        layers=(Layer(TOP, "external-top", 2.0), Layer(BOT, "external-bottom", 2.0)),
        nets=(Net("HT", "power", 12.0), Net("LT", "power", 5.0), Net("LTX", "power", 5.0),
              Net("L9T", "power", 9.0), Net("GND", "ground"), Net("LED", "signal", None, 0.02)),
        copper=tuple(copper),
        components=tuple(comps),
        sources=(SourceSpec("J1", "HT", "J1-1", 12.0, 20.0, "J1-2"),),
        loads=tuple(loads),
        regulators=tuple(regs),
        testpoints=(
            TestPoint("HT", "HT", "J1-1", 12.0, 0.6, "J1-2"),
            TestPoint("LT", "LT", "U3-3", 5.0, 0.25, "U3-2"),
            TestPoint("LTX", "LTX", "U4-3", 5.0, 0.25, "U4-2"),
            TestPoint("L9T", "L9T", "U5-3", 9.0, 0.45, "U5-2"),
        ),
        budget=(BudgetLine("TMC2208 VM", "HT", 12.0, 1.3, 12),),
        outline=outline,
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    here = os.path.dirname(os.path.abspath(__file__))
    ap.add_argument("--out", default=os.path.join(here, "..", "src", "pib", "data"))
    args = ap.parse_args()
    for name, board in (("example_board.pib.json", build(True)), ("example_board_nopour.pib.json", build(False))):
        path = os.path.join(args.out, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(emit_native(board))
        print(path)


if __name__ == "__main__":
    main()
