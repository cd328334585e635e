"""The nine acceptance criteria, one test each, at their stated tolerances."""

import io
import json
import os
import random
import subprocess
import sys
import time
from contextlib import redirect_stdout

import numpy as np

from conftest import DATA, EXAMPLE, read_bytes
from oracles import ipc_width_mil, mna_solve, random_network
from pib.board import Board, CopperFeature, Layer, Net, Pad, Segment, Via
from pib.cli import analyze, main
from pib.excellon import DrillProgram, parse_excellon
from pib.gerber import parse_gerber
from pib.lint import RuleSet, lint_board, optimize_drills
from pib.native import ParseError, emit_native, parse_native
from pib.solver import laplacian, load_row, solve_nodal
from pib.units import mil_to_mm

SEED = 20240611


def test_criterion_1_ipc_width(record):
    argv = ["width", "2.0", "--rise", "10", "--oz", "2", "--external"]
    with redirect_stdout(io.StringIO()):
        main(argv)  # warm imports
    buf = io.StringIO()
    t0 = time.perf_counter()
    with redirect_stdout(buf):
        code = main(argv)
    elapsed = time.perf_counter() - t0
    exact = float(buf.getvalue().split()[0])
    oracle = ipc_width_mil(2.0, 10.0, 2.0)
    ok = (code == 0 and "(min 15 mil)" in buf.getvalue() and abs(exact - 15.4) <= 0.3
          and abs(exact - oracle) <= 0.05 and elapsed < 0.010)
    record(1, ok, f"{buf.getvalue().strip()!r}, oracle {oracle:.3f} mil, {elapsed * 1e3:.2f} ms")
    assert ok


def _random_problem(rng):
    n = int(rng.integers(2, 201))
    edges = random_network(rng, n)
    nodes = rng.permutation(n)
    n_src = int(rng.integers(1, min(3, n - 1) + 1))
    sources = {int(k): float(rng.uniform(1.0, 24.0)) for k in nodes[:n_src]}
    inj = np.zeros(n)
    sinks = nodes[n_src:n_src + int(rng.integers(1, 11))]
    inj[sinks] = -rng.uniform(0.0, 3.0, len(sinks))
    return n, edges, sources, inj


def test_criterion_2_oracle_equivalence(record):
    rng = np.random.default_rng(SEED)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n, edges, sources, inj = _random_problem(rng)
        a, b, g = (np.array(x) for x in zip(*edges))
        v = solve_nodal(n, a, b, g, sources, inj)
        worst = max(worst, float(np.max(np.abs(v - mna_solve(n, edges, sources, inj)))))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed < 10.0
    record(2, ok, f"100 meshes, max |dv| {worst:.2e} V, {elapsed:.2f} s")
    assert ok


def test_criterion_3_physical_invariants(record):
    rng = np.random.default_rng(SEED + 1)
    t0 = time.perf_counter()
    kcl = sup = 0.0
    monotone = True
    for _ in range(100):
        n, edges, sources, i1 = _random_problem(rng)
        i2 = np.where(np.isin(np.arange(n), list(sources)), 0.0, -rng.uniform(0.0, 1.0, n))
        a, b, g = (np.array(x) for x in zip(*edges))
        L = laplacian(n, a, b, g)
        solve = lambda inj: solve_nodal(n, a, b, g, sources, inj, L=L)  # noqa: E731
        v0, v1, v2, v12 = solve(np.zeros(n)), solve(i1), solve(i2), solve(i1 + i2)
        free = np.setdiff1d(np.arange(n), list(sources))
        r = (L @ v12 - (i1 + i2))[free]
        drawn = -float(np.sum(i1 + i2))
        kcl = max(kcl, float(np.max(np.abs(r), initial=0.0)) / drawn)
        sup = max(sup, float(np.max(np.abs((v12 - v0) - ((v1 - v0) + (v2 - v0))))))
        # extra sinking current can only lower node voltages
        monotone &= bool(np.all(v12 <= v1 + 1e-9))
    elapsed = time.perf_counter() - t0
    ok = kcl <= 1e-9 and sup <= 1e-9 and monotone and elapsed < 10.0
    record(3, ok, f"100 load pairs, KCL {kcl:.1e} x I_src, superposition {sup:.1e} V, "
                  f"monotone {monotone}, {elapsed:.2f} s")
    assert ok


def test_criterion_4_bundled_board(record):
    buf = io.StringIO()
    t0 = time.perf_counter()
    with redirect_stdout(buf):
        code = main(["analyze", EXAMPLE, "--format", "json", "--cell-size", "0.5"])
    elapsed = time.perf_counter() - t0
    loads = json.loads(buf.getvalue())["loads"]
    margins = [r["margin_pct"] for r in loads]
    ok = (code == 0 and len(loads) == 12 and all(r["pass_fail"] == "PASS" for r in loads)
          and all(0.0 < m < 20.0 for m in margins) and elapsed < 30.0)
    record(4, ok, f"exit {code}, {sum(r['pass_fail'] == 'PASS' for r in loads)}/12 PASS, "
                  f"margins {min(margins):.2f}-{max(margins):.2f} %, {elapsed:.2f} s")
    assert ok


def test_criterion_5_ground_pour(record, example_board, example_nopour):
    with_pour = max(g.max_value for g in analyze(example_board)[1])
    without = max(g.max_value for g in analyze(example_nopour)[1])
    ok = with_pour < without
    record(5, ok, f"max |J| {with_pour:.3f} A/mm2 with pour vs {without:.3f} A/mm2 without")
    assert ok


def _matches(value, stated):
    """Equal once rounded to the decimals the stated value is printed with."""
    decimals = len(stated.partition(".")[2])
    return round(value, decimals) == float(stated)


def test_criterion_6_margin_arithmetic(record):
    cases = [("Load 1", 10.5, 11.032, "0.532", "5.07"), ("Load 6", 10.5, 11.6015, "1.1015", "10.49"),
             ("Load 12", 10.0, 11.4147, "1.4147", "14.15")]
    got = []
    ok = True
    for name, vmin, actual, margin, pct in cases:
        r = load_row(name, name, 1.3, vmin, "p", actual, "g", 0.0)
        got.append(f"{name} {r.margin:.4f} V/{r.margin_pct:.4f} %")
        ok &= _matches(r.margin, margin) and _matches(r.margin_pct, pct) and r.pass_fail == "PASS"
    record(6, ok, ", ".join(got))
    assert ok


TWO = (Layer("top", "external-top", 1.0), Layer("bottom", "external-bottom", 1.0))
NETS = (Net("A", "power", 5.0), Net("B", "power", 3.3))
RECT = (((0.0, 0.0), (20.0, 0.0)), ((20.0, 0.0), (20.0, 10.0)), ((20.0, 10.0), (0.0, 10.0)),
        ((0.0, 10.0), (0.0, 0.0)))


def _fixture(*copper, outline=RECT):
    return Board("fixture", TWO, NETS, tuple(copper), outline=outline)


def _seg(fid, net, y, w=0.5):
    return CopperFeature(fid, "top", net, Segment((2.0, y), (8.0, y), w))


def _pad(fid, d, drill, mask=None, at=(12.0, 5.0)):
    return CopperFeature(fid, "top", "A", Pad(at, "circle", (d, d), True, drill, mask))


def lint_fixtures():
    clean_drills = DrillProgram({"T01": 0.8, "T02": 1.2}, [("T01", (12.0, 5.0)), ("T02", (15.0, 5.0))])
    # a 24/12 mil via leaves only a 0.15 mm ring, so the clean via is larger
    via = Via((15.0, 5.0), 0.4, 1.0, ("top", "bottom"))
    clean = _fixture(_seg("s1", "A", 2.0), _seg("s2", "B", 3.0), _pad("p1", 1.8, 1.0),
                     CopperFeature("v1", "top", "B", via))
    bad = {
        "clearance": (_fixture(_seg("s1", "A", 2.0), _seg("s2", "B", 2.6)), None),
        "annular_ring": (_fixture(_pad("p1", 1.6, 1.1)), None),
        "mask_expansion": (_fixture(_pad("p1", 1.8, 1.0, mask=0.02)), None),
        "outline_open": (_fixture(outline=RECT[:2] + (((20.0, 10.5), (0.0, 10.5)),) + RECT[3:]), None),
        "track_width": (_fixture(_seg("s1", "A", 2.0, w=mil_to_mm(10))), None),
        "drill_mergeable": (_fixture(), DrillProgram({"T01": 0.95, "T02": 1.0}, [("T01", (1.0, 1.0))])),
    }
    return clean, clean_drills, bad


def test_criterion_7_dfm_fixtures(record):
    rules = RuleSet()
    t0 = time.perf_counter()
    clean, clean_drills, bad = lint_fixtures()
    clean_ok = lint_board(clean, rules, clean_drills) == []
    caught = {}
    for rule, (board, drills) in bad.items():
        found = lint_board(board, rules, drills)
        caught[rule] = len(found) == 1 and found[0].rule == rule
    plan = optimize_drills(DrillProgram({"T01": 0.95, "T02": 1.00, "T03": 1.02}), rules)
    drills_ok = plan.sizes == (1.02,) and {p for _, _, p in plan.mapping} == {1.02}
    elapsed = time.perf_counter() - t0
    ok = clean_ok and all(caught.values()) and drills_ok and elapsed < 5.0
    missed = [r for r, v in caught.items() if not v]
    record(7, ok, f"clean fixture {'clean' if clean_ok else 'dirty'}, {sum(caught.values())}/6 rules caught"
                  f"{' (missed ' + ', '.join(missed) + ')' if missed else ''}, "
                  f"drills -> {list(plan.sizes)} mm, {elapsed:.2f} s")
    assert ok


def _mutate(rng, data):
    m = bytearray(data)
    for _ in range(rng.randint(1, 4)):
        op, k = rng.randrange(3), rng.randrange(len(m))
        if op == 0:
            m[k] = rng.randrange(256)
        elif op == 1 and len(m) > 1:
            del m[k]
        else:
            m.insert(k, rng.randrange(256))
    return bytes(m)


def test_criterion_8_parser_robustness(record):
    t0 = time.perf_counter()
    golden = read_bytes(os.path.join(DATA, "golden_board.pib.json")).decode()
    example = read_bytes(EXAMPLE).decode()
    round_trip = emit_native(parse_native(golden)) == golden and emit_native(parse_native(example)) == example
    rng = random.Random(SEED)
    targets = [(read_bytes(os.path.join(DATA, n)), fn) for n, fn in
               (("golden_top.gbr", parse_gerber), ("golden_bottom.gbr", parse_gerber), ("golden.drl", parse_excellon))]
    parsed = positioned = crashes = unpositioned = 0
    for k in range(10_000):
        data, fn = targets[k % len(targets)]
        try:
            fn(_mutate(rng, data))
            parsed += 1
        except ParseError as e:
            if e.line is None:
                unpositioned += 1
            else:
                positioned += 1
        except Exception:  # noqa: BLE001 - any other exception is a crash
            crashes += 1
    elapsed = time.perf_counter() - t0
    ok = round_trip and crashes == 0 and unpositioned == 0 and elapsed < 60.0
    record(8, ok, f"round-trip {'equal' if round_trip else 'differs'}; 10000 mutations: {parsed} parsed, "
                  f"{positioned} positioned errors, {unpositioned} unpositioned, {crashes} crashes, {elapsed:.1f} s")
    assert ok


def _analyze_subprocess(out, threads):
    env = dict(os.environ, OMP_NUM_THREADS=str(threads), OPENBLAS_NUM_THREADS=str(threads),
               MKL_NUM_THREADS=str(threads))
    subprocess.run([sys.executable, "-m", "pib.cli", "analyze", EXAMPLE, "--out", str(out), "--no-figures"],
                   check=True, env=env, capture_output=True)
    return (out / "report.json").read_bytes()


def test_criterion_9_determinism(record, tmp_path):
    runs = []
    for k in range(2):
        assert main(["analyze", EXAMPLE, "--out", str(tmp_path / f"run{k}")]) == 0
        runs.append((tmp_path / f"run{k}" / "report.json").read_bytes())
    runs.append(_analyze_subprocess(tmp_path / "t1", 1))
    runs.append(_analyze_subprocess(tmp_path / "t4", 4))
    same = all(r == runs[0] for r in runs)
    pngs = all((tmp_path / "run0" / n).read_bytes() == (tmp_path / "run1" / n).read_bytes()
               for n in os.listdir(tmp_path / "run0") if n.endswith(".png"))
    ok = same and pngs
    record(9, ok, f"report.json identical over 2 in-process runs and OMP threads 1/4: {same}; "
                  f"PNG figures identical: {pngs}")
    assert ok
