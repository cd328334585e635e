"""Excellon drill-file subset.

Header: ``M48``, ``METRIC``/``INCH`` (optionally ``,LZ``/``,TZ``), ``FMAT``,
``Tnn C<diameter>`` tool definitions, terminated by ``%`` or ``M95``.
Body: ``Tnn`` selections, ``X..Y..`` hits, ``G00``/``M15``/``G01``/``M16``
rout paths, ``G90``/``G05``/``M30``. ``;`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .native import ParseError
from .units import MIL_MM

_TOOL_DEF = re.compile(r"T(\d+)(?:F[\d.]+|S[\d.]+)*C([0-9]*\.?[0-9]+)(?:[FS][\d.]+)*$")
_TOOL_SEL = re.compile(r"T(\d+)$")
_COORD = re.compile(r"(?:X([+-]?[0-9]*\.?[0-9]*))?(?:Y([+-]?[0-9]*\.?[0-9]*))?$")
_IGNORED = {"M48", "G90", "G05", "FMAT,1", "FMAT,2", "ICI,OFF", "M71", "M72", "DETECT,ON", "G93X0Y0"}


@dataclass
class DrillProgram:
    tools: dict = field(default_factory=dict)  # tool id -> diameter mm
    hits: list = field(default_factory=list)  # (tool id, (x, y)) mm
    routes: list = field(default_factory=list)  # (tool id, ((x, y), ...)) mm

    def hits_for(self, tool):
        return [xy for t, xy in self.hits if t == tool]


def _tool_id(digits: str) -> str:
    return f"T{int(digits):02d}"


class _Coord:
    def __init__(self):
        self.scale = 1.0  # to mm
        self.zeros = "LZ"
        self.int_digits = 3
        self.dec_digits = 3

    def set_units(self, unit, zeros):
        if unit == "INCH":
            self.scale, self.int_digits, self.dec_digits = MIL_MM * 1000.0, 2, 4
        else:
            self.scale, self.int_digits, self.dec_digits = 1.0, 3, 3
        if zeros:
            self.zeros = zeros

    def value(self, s: str) -> float:
        neg = s.startswith("-")
        s = s.lstrip("+-")
        if not s or s == ".":
            raise ValueError("empty coordinate")
        if "." in s:
            v = float(s)
        else:
            n = self.int_digits + self.dec_digits
            if len(s) > n:
                raise ValueError(f"coordinate {s!r} exceeds {n} digits")
            if self.zeros == "LZ":
                s = s.ljust(n, "0")  # leading zeros kept, trailing omitted
            else:
                s = s.rjust(n, "0")
            v = int(s) / 10 ** self.dec_digits
        return (-v if neg else v) * self.scale


def parse_excellon(text) -> DrillProgram:
    """Parse a drill file; errors carry the 1-based line and column."""
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as e:
            line = bytes(text)[: e.start].count(b"\n") + 1
            raise ParseError("input is not valid UTF-8", line=line) from None
    prog = DrillProgram()
    coord = _Coord()
    in_header = False
    tool = None
    pos = None
    mode = "drill"  # drill | rout-move | rout-cut
    path = None
    x = y = 0.0

    def flush():
        nonlocal path
        if path is not None and len(path) > 1:
            prog.routes.append((tool, tuple(path)))
        path = None

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split(";", 1)[0].strip()
        if not line:
            continue

        def err(msg, col=1):
            return ParseError(msg, line=lineno, column=col)

        up = line.upper()
        if up == "M48":
            in_header = True
            continue
        if up in ("%", "M95"):
            in_header = False
            continue
        if up.startswith(("METRIC", "INCH")):
            parts = up.split(",")
            zeros = next((p for p in parts[1:] if p in ("LZ", "TZ")), None)
            coord.set_units(parts[0], zeros)
            fmt = next((p for p in parts[1:] if re.fullmatch(r"0+\.0+", p)), None)
            if fmt:
                a, b = fmt.split(".")
                coord.int_digits, coord.dec_digits = len(a), len(b)
            continue
        if up in _IGNORED or up.startswith(("FMAT", "VER", "G93")):
            continue
        if up == "M30" or up == "M00":
            flush()
            break
        m = _TOOL_DEF.match(up)
        if m:
            dia = float(m.group(2)) * coord.scale
            if dia <= 0:
                raise err("tool diameter must be > 0", up.index("C") + 1)
            prog.tools[_tool_id(m.group(1))] = dia
            continue
        m = _TOOL_SEL.match(up)
        if m:
            tid = _tool_id(m.group(1))
            if int(m.group(1)) == 0:
                tool = None
                continue
            if tid not in prog.tools:
                raise err(f"UnknownTool: {tid} has no definition")
            flush()
            tool = tid
            continue
        if in_header:
            raise err(f"unrecognised header statement {line!r}")

        body = up
        cmd = None
        for prefix in ("G00", "G01", "M15", "M16", "M17"):
            if body.startswith(prefix):
                cmd, body = prefix, body[len(prefix):]
                break
        if cmd == "M15":
            if pos is None:
                raise err("M15 plunge without a position")
            mode, path = "rout-cut", [pos]
            if not body:
                continue
        elif cmd in ("M16", "M17"):
            flush()
            mode = "drill"
            if not body:
                continue
        elif cmd == "G00":
            flush()
            mode = "rout-move"
        elif cmd == "G01" and mode != "rout-cut":
            mode = "rout-move"
        if not body:
            continue
        m = _COORD.match(body)
        if not m or (m.group(1) is None and m.group(2) is None):
            raise err(f"unrecognised statement {line!r}")
        try:
            if m.group(1) is not None:
                x = coord.value(m.group(1))
            if m.group(2) is not None:
                y = coord.value(m.group(2))
        except ValueError as e:
            raise err(str(e), 2) from None
        if tool is None:
            raise err("HitWithoutTool: coordinate before any tool selection")
        pos = (x, y)
        if mode == "drill" and cmd is None:
            prog.hits.append((tool, pos))
        elif mode == "rout-cut":
            path.append(pos)
    flush()
    return prog
