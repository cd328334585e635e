"""Regenerate the Gerber/Excellon import fixtures under tests/data.

A small two-layer board is drawn out to Gerber and Excellon, its skeleton
keeps only the seeded pads, and the import of the two is frozen as the
golden board.
"""

import argparse
import os
from dataclasses import replace

from pib.board import (Board, Component, CopperFeature, Layer, LoadSpec, Net, Pad, Pin, Segment,
                       SourceSpec, Via)
from pib.gerber import import_board, write_excellon, write_gerber_layer
from pib.native import emit_native


def source_board() -> Board:
    def pad(fid, net, at, shape="circle", size=(1.8, 1.8), drill=1.0):
        return CopperFeature(fid, "top", net, Pad(at, shape, size, True, drill))

    copper = (
        pad("J1-1", "VIN", (2.0, 10.0), size=(2.5, 2.5), drill=1.2),
        pad("J1-2", "GND", (2.0, 4.0), size=(2.5, 2.5), drill=1.2),
        pad("R1-1", "VIN", (30.0, 10.0)),
        pad("R1-2", "GND", (30.0, 4.0)),
        CopperFeature("TP1", "top", "VIN", Pad((16.0, 14.0), "rect", (1.5, 1.0), True, None)),
        CopperFeature("a", "top", "VIN", Segment((2.0, 10.0), (16.0, 10.0), 1.0)),
        CopperFeature("b", "top", "VIN", Segment((16.0, 10.0), (30.0, 10.0), 1.0)),
        CopperFeature("c", "top", "VIN", Segment((16.0, 10.0), (16.0, 14.0), 0.5)),
        CopperFeature("d", "bottom", "GND", Segment((2.0, 4.0), (20.0, 4.0), 1.0)),
        CopperFeature("e", "top", "GND", Segment((20.0, 4.0), (30.0, 4.0), 1.0)),
        CopperFeature("v1", "top", "GND", Via((20.0, 4.0), 0.4, 0.8, ("top", "bottom"))),
        CopperFeature("orphan", "bottom", "GND", Segment((10.0, 14.0), (14.0, 14.0), 0.4)),
    )
    return Board(
        name="golden-import",
        layers=(Layer("top", "external-top", 1.0), Layer("bottom", "external-bottom", 1.0)),
        nets=(Net("VIN", "power", 5.0), Net("GND", "ground")),
        copper=copper,
        components=(Component("J1", (Pin("1", "J1-1", "VIN"), Pin("2", "J1-2", "GND"))),
                    Component("R1", (Pin("1", "R1-1", "VIN"), Pin("2", "R1-2", "GND")))),
        sources=(SourceSpec("J1", "VIN", "J1-1", 5.0, 3.0, "J1-2"),),
        loads=(LoadSpec("R1", "R1-1", "R1-2", 1.0, 4.5),),
        outline=(((0.0, 0.0), (34.0, 0.0)), ((34.0, 0.0), (34.0, 18.0)),
                 ((34.0, 18.0), (0.0, 18.0)), ((0.0, 18.0), (0.0, 0.0))),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    here = os.path.dirname(os.path.abspath(__file__))
    ap.add_argument("--out", default=os.path.join(here, "..", "tests", "data"))
    args = ap.parse_args()
    board = source_board()
    skeleton = replace(board, copper=tuple(f for f in board.copper if f.id in ("J1-1", "J1-2", "R1-1", "R1-2", "TP1")))
    files = {
        "golden_top.gbr": write_gerber_layer(board, "top"),
        "golden_bottom.gbr": write_gerber_layer(board, "bottom"),
        "golden.drl": write_excellon(board),
        "golden_skeleton.pib.json": emit_native(skeleton),
    }
    from pib.excellon import parse_excellon

    imported = import_board(skeleton, {"top": files["golden_top.gbr"], "bottom": files["golden_bottom.gbr"]},
                            parse_excellon(files["golden.drl"]))
    files["golden_board.pib.json"] = emit_native(imported)
    for name, text in files.items():
        path = os.path.join(args.out, name)
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        print(path)


if __name__ == "__main__":
    main()
