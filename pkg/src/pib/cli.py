"""``pib`` command line: analyze, width, lint, budget, import."""

from __future__ import annotations

import argparse
import json
import os
import sys

EXIT_OK, EXIT_FINDINGS, EXIT_ERROR = 0, 1, 2


class UsageError(Exception):
    pass


def _colour_enabled(stream) -> bool:
    return not os.environ.get("PIB_NO_COLOR") and hasattr(stream, "isatty") and stream.isatty()


def _err(msg):
    print(f"pib: {msg}", file=sys.stderr)


def _read(path, binary=False):
    try:
        with open(path, "rb" if binary else "r", **({} if binary else {"encoding": "utf-8"})) as fh:
            return fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _load_board(path, lenient):
    from .native import parse_native

    board = parse_native(_read(path, binary=True), lenient=lenient)
    return board


def _load_rules(args, board=None):
    from .lint import ruleset

    overrides = None
    if getattr(args, "rules", None):
        try:
            doc = json.loads(_read(args.rules))
        except json.JSONDecodeError as e:
            raise UsageError(f"{args.rules}: line {e.lineno}, column {e.colno}: {e.msg}") from None
        if isinstance(doc, dict) and isinstance(doc.get("rules"), dict):
            doc = doc["rules"]
        if not isinstance(doc, dict):
            raise UsageError(f"{args.rules}: expected an object of rule values")
        overrides = doc
    try:
        return ruleset(args.profile, board, overrides)
    except (TypeError, ValueError) as e:
        raise UsageError(f"rules: {e}") from None


def _load_drills(path):
    from .excellon import parse_excellon

    return parse_excellon(_read(path, binary=True))


# -------------------------------------------------------------- analyze


def analyze(board, cell_size=0.5, temp_rise=10.0, rules=None, drills=None, inputs=(), config=None):
    """Run the full pipeline and return (AnalysisReport, density grids)."""
    from . import report as rp
    from .ipc import check_board_widths, power_budget
    from .lint import lint_board
    from .mesh import rasterize
    from .solver import check_testpoints, current_density, load_reports, segment_currents, solve_dc

    graph = rasterize(board, cell_size=cell_size)
    result = solve_dc(graph, board)
    loads = load_reports(result, board)
    grids = current_density(result)
    tps = check_testpoints(result, board)
    widths = check_board_widths(board, segment_currents(result), temp_rise=temp_rise)
    budget = None
    if board.budget and board.sources:
        budget = rp.budget_dict(power_budget(board.budget, board.sources[0], board))
    lint = None
    if rules is not None:
        lint = [rp.violation_dict(v) for v in lint_board(board, rules, drills)]
    warnings = list(result.warnings)
    for st in result.regulators:
        if st.in_dropout:
            warnings.append(f"DropoutViolation: {st.ref_des} headroom {st.headroom:.4f} V")
    rep = rp.AnalysisReport(
        board=board.name,
        inputs=list(inputs),
        config=dict(config or {"cell_size_mm": cell_size, "temp_rise_c": temp_rise}),
        loads=[rp.load_dict(r) for r in loads],
        testpoints=[rp.testpoint_dict(t) for t in tps],
        widths=[rp.width_dict(w) for w in widths],
        density=[rp.density_dict(g) for g in grids],
        regulators=[rp.regulator_dict(s) for s in result.regulators],
        budget=budget,
        lint=lint,
        warnings=warnings,
    )
    return rep, grids


def cmd_analyze(args) -> int:
    from dataclasses import replace

    from . import report as rp
    from .native import parse_budget

    if not args.cell_size > 0:
        raise UsageError("--cell-size must be > 0")
    board = _load_board(args.board, args.lenient)
    inputs = [rp.digest(args.board)]
    if args.budget:
        board = replace(board, budget=tuple(parse_budget(_read(args.budget, binary=True))))
        inputs.append(rp.digest(args.budget))
    drills = None
    if args.drill:
        drills = _load_drills(args.drill)
        inputs.append(rp.digest(args.drill))
    rules = _load_rules(args, board) if args.lint else None
    if args.rules:
        inputs.append(rp.digest(args.rules))
    config = {"cell_size_mm": args.cell_size, "temp_rise_c": args.rise, "lint": bool(args.lint)}
    if args.lint:
        config["profile"] = args.profile

    rep, grids = analyze(board, args.cell_size, args.rise, rules, drills, inputs, config)
    if args.out:
        rp.write_outputs(rep, grids, args.out, figures=not args.no_figures)
    for w in rep.warnings:
        _err(f"warning: {w}")
    if args.format == "json":
        sys.stdout.write(rep.to_json())
    elif args.format == "csv":
        sys.stdout.write(rp.loads_csv(rep.loads))
    else:
        sys.stdout.write(rp.render_table(rep, colour=_colour_enabled(sys.stdout)))
    for e in rep.errors():
        _err(e)
    return EXIT_OK if rep.verdict == "PASS" else EXIT_FINDINGS


# ---------------------------------------------------------------- width


def cmd_width(args) -> int:
    from .ipc import SizingError, WidthQuery, min_trace_width, round_half_up
    from .units import MIL_MM

    try:
        w = min_trace_width(WidthQuery(args.current, args.rise, args.oz, args.layer_class))
    except SizingError as e:
        raise UsageError(str(e)) from None
    if args.format == "json":
        print(json.dumps({"current_a": args.current, "temp_rise_c": args.rise, "copper_oz": args.oz,
                          "layer_class": args.layer_class, "width_mil": w, "min_mil": round_half_up(w),
                          "width_mm": w * MIL_MM}))
    else:
        print(f"{w:.1f} mil (min {round_half_up(w)} mil) / {w * MIL_MM:.2f} mm")
    return EXIT_OK


# ----------------------------------------------------------------- lint


def cmd_lint(args) -> int:
    from . import report as rp
    from .lint import lint_board, optimize_drills

    board = _load_board(args.board, args.lenient)
    rules = _load_rules(args, board)
    drills = _load_drills(args.drill) if args.drill else None
    found = [rp.violation_dict(v) for v in lint_board(board, rules, drills)]
    if args.format == "json":
        doc = {"profile": args.profile, "violations": found}
        if drills is not None:
            plan = optimize_drills(drills, rules)
            doc["drill_plan"] = [{"tool": t, "diameter_mm": d, "plan_mm": p} for t, d, p in plan.mapping]
        sys.stdout.write(json.dumps(doc, indent=2) + "\n")
    elif args.format == "csv":
        print("rule,severity,features,measured,required,x_mm,y_mm")
        for v in found:
            print(f"{v['rule']},{v['severity']},{' '.join(v['features'])},{v['measured']!r},"
                  f"{v['required']!r},{v['location_mm'][0]!r},{v['location_mm'][1]!r}")
    else:
        print(rp.render_lint(found) if found else f"no violations ({args.profile} profile)")
        if drills is not None:
            plan = optimize_drills(drills, rules)
            print(f"drill plan: {plan.original_count} tools -> {plan.planned_count}")
    errors = [v for v in found if v["severity"] == "error"]
    return EXIT_FINDINGS if errors else EXIT_OK


# --------------------------------------------------------------- budget


def cmd_budget(args) -> int:
    from dataclasses import replace

    from . import report as rp
    from .ipc import BudgetError, power_budget
    from .native import parse_budget

    board = _load_board(args.board, args.lenient)
    if args.budget:
        board = replace(board, budget=tuple(parse_budget(_read(args.budget, binary=True))))
    if not board.sources:
        raise UsageError("budget needs a source on the board")
    try:
        b = rp.budget_dict(power_budget(board.budget, board.sources[0], board))
    except BudgetError as e:
        raise UsageError(str(e)) from None
    if args.format == "json":
        sys.stdout.write(json.dumps(b, indent=2) + "\n")
    else:
        print(rp.render_budget(b))
    return EXIT_OK if b["passed"] else EXIT_FINDINGS


# --------------------------------------------------------------- import


def cmd_import(args) -> int:
    from dataclasses import replace

    from .gerber import import_board
    from .lint import RuleSet, optimize_drills
    from .native import emit_native, parse_native

    gerbers = {}
    for spec in args.gerber or []:
        layer, sep, path = spec.partition("=")
        if not sep or not layer or not path:
            raise UsageError(f"--gerber expects LAYER=PATH, got {spec!r}")
        gerbers[layer] = _read(path, binary=True)
    drills = _load_drills(args.drill) if args.drill else None
    if not gerbers and drills is None:
        raise UsageError("import needs --gerber and/or --drill")

    if drills is not None:
        plan = optimize_drills(drills, RuleSet())
        print(f"drill plan: {plan.original_count} tools -> {plan.planned_count}", file=sys.stderr)
        for t, d, p in plan.mapping:
            print(f"  {t} {d:.3f} mm -> {p:.3f} mm", file=sys.stderr)
    if args.skeleton is None:
        if gerbers:
            raise UsageError("--skeleton is required to import Gerber layers")
        return EXIT_OK

    skeleton = parse_native(_read(args.skeleton, binary=True), lenient=args.lenient, validate=False)
    warnings: list = []
    if gerbers:
        board = import_board(skeleton, gerbers, drills, warnings)
    else:
        board = replace(skeleton, copper=())
    for w in warnings:
        _err(f"warning: {w}")
    text = emit_native(board)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# ----------------------------------------------------------------- main


def _number(s):
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {s!r}") from None
    return v


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pib", description="DC power-integrity and DFM checks for PCBs.")
    p.add_argument("--version", action="version", version=f"%(prog)s {_version()}")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="IR drop, current density, widths and test points")
    a.add_argument("board")
    a.add_argument("--cell-size", type=_number, default=0.5, help="mesh cell size in mm (default 0.5)")
    a.add_argument("--rise", type=_number, default=10.0, help="allowed temperature rise, C")
    a.add_argument("--out", default=None, help="directory for report.json, tables, CSV grids and figures")
    a.add_argument("--format", choices=("json", "table", "csv"), default="table")
    a.add_argument("--lenient", action="store_true")
    a.add_argument("--budget", help="budget sidecar file")
    a.add_argument("--lint", action="store_true", help="include DFM lint in the verdict")
    a.add_argument("--profile", choices=("drc", "dfm"), default="dfm")
    a.add_argument("--rules")
    a.add_argument("--drill")
    a.add_argument("--no-figures", action="store_true")
    a.set_defaults(func=cmd_analyze)

    w = sub.add_parser("width", help="IPC-2221 minimum trace width")
    w.add_argument("current", type=_number, help="current in A")
    w.add_argument("--rise", type=_number, default=10.0, help="temperature rise, C (default 10)")
    w.add_argument("--oz", type=_number, default=1.0, help="copper weight, oz (default 1)")
    g = w.add_mutually_exclusive_group()
    g.add_argument("--external", dest="layer_class", action="store_const", const="external")
    g.add_argument("--internal", dest="layer_class", action="store_const", const="internal")
    w.add_argument("--format", choices=("json", "table"), default="table")
    w.set_defaults(func=cmd_width, layer_class="external")

    ln = sub.add_parser("lint", help="design-rule and manufacturability checks")
    ln.add_argument("board")
    ln.add_argument("--profile", choices=("drc", "dfm"), default="dfm")
    ln.add_argument("--rules")
    ln.add_argument("--drill")
    ln.add_argument("--format", choices=("json", "table", "csv"), default="table")
    ln.add_argument("--lenient", action="store_true")
    ln.set_defaults(func=cmd_lint)

    b = sub.add_parser("budget", help="rail power budget")
    b.add_argument("board")
    b.add_argument("--budget", help="budget sidecar file")
    b.add_argument("--format", choices=("json", "table"), default="table")
    b.add_argument("--lenient", action="store_true")
    b.set_defaults(func=cmd_budget)

    im = sub.add_parser("import", help="merge Gerber/Excellon geometry with a native skeleton")
    im.add_argument("--skeleton")
    im.add_argument("--gerber", action="append", metavar="LAYER=PATH")
    im.add_argument("--drill")
    im.add_argument("--out")
    im.add_argument("--lenient", action="store_true")
    im.set_defaults(func=cmd_import)
    return p


def _version():
    from . import __version__

    return __version__


def main(argv=None) -> int:
    from .mesh import MeshError
    from .native import ParseError
    from .solver import SolveError

    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        _err(str(e))
    except ParseError as e:
        _err(f"parse error: {e}")
        for sub in e.errors:
            _err(f"  {sub}")
    except (MeshError, SolveError) as e:
        _err(f"analysis error: {e}")
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
