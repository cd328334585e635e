import json
import os
import subprocess
import sys
from dataclasses import replace

import jsonschema
import pytest

from boards import regulator_board
from conftest import DATA, EXAMPLE, PKG_DATA
from pib.board import Board, BudgetLine, CopperFeature, Layer, Net, Segment
from pib.cli import EXIT_ERROR, EXIT_FINDINGS, EXIT_OK, analyze, main
from pib.native import emit_native, parse_native
from pib.report import grid_csv, num

with open(os.path.join(PKG_DATA, "report.schema.json"), encoding="utf-8") as fh:
    SCHEMA = json.load(fh)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def write(tmp_path, name, board_or_text):
    p = tmp_path / name
    p.write_text(board_or_text if isinstance(board_or_text, str) else emit_native(board_or_text))
    return p


def gap_board(gap):
    layers = (Layer("top", "external-top", 1.0), Layer("bottom", "external-bottom", 1.0))
    copper = (CopperFeature("s1", "top", "A", Segment((0.0, 0.0), (5.0, 0.0), 0.5)),
              CopperFeature("s2", "top", "B", Segment((0.0, 0.5 + gap), (5.0, 0.5 + gap), 0.5)))
    return Board("gap", layers, (Net("A", "power", 5.0), Net("B", "power", 3.3)), copper)


def test_width_output(capsys):
    code, out, _ = run(capsys, "width", "2.0", "--rise", "10", "--oz", "2", "--external")
    assert code == EXIT_OK
    assert out == "15.4 mil (min 15 mil) / 0.39 mm\n"


def test_width_oz_one_doubles(capsys):
    _, two, _ = run(capsys, "width", "2.0", "--oz", "2", "--format", "json")
    _, one, _ = run(capsys, "width", "2.0", "--oz", "1", "--format", "json")
    assert json.loads(one)["width_mil"] == pytest.approx(2 * json.loads(two)["width_mil"])


def test_width_zero_is_usage_error(capsys):
    code, out, err = run(capsys, "width", "0")
    assert code == EXIT_ERROR and out == "" and "current" in err


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "analyze", tmp_path / "nope.pib.json")
    assert code == EXIT_ERROR and "cannot read" in err


def test_parse_error_exit(capsys, tmp_path):
    p = write(tmp_path, "bad.pib.json", '{"meta": ')
    code, _, err = run(capsys, "analyze", p)
    assert code == EXIT_ERROR and "line 1" in err


def test_bundled_board_passes(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", EXAMPLE, "--out", tmp_path, "--no-figures")
    assert code == EXIT_OK
    assert out.count("PASS") >= 12
    report = json.loads((tmp_path / "report.json").read_text())
    jsonschema.validate(report, SCHEMA)
    assert [r["pass_fail"] for r in report["loads"]] == ["PASS"] * 12


def test_unreachable_min_voltage_fails(capsys, tmp_path, example_board):
    loads = list(example_board.loads)
    loads[4] = replace(loads[4], min_voltage=13.0)
    p = write(tmp_path, "b.pib.json", replace(example_board, loads=tuple(loads)))
    code, out, err = run(capsys, "analyze", p, "--format", "json")
    assert code == EXIT_FINDINGS
    rows = {r["ref_des"]: r["pass_fail"] for r in json.loads(out)["loads"]}
    assert rows.pop("DV5") == "FAIL"
    assert set(rows.values()) == {"PASS"}
    assert "DV5" in err


def test_csv_format(capsys):
    code, out, _ = run(capsys, "analyze", EXAMPLE, "--format", "csv")
    assert code == EXIT_OK
    header, first = out.splitlines()[:2]
    assert header.startswith("id,ref_des,load_value_a")
    assert first.startswith("Load 1,DV1,1.3,")


def test_output_files(tmp_path):
    assert main(["analyze", EXAMPLE, "--out", str(tmp_path)]) == EXIT_OK
    names = sorted(os.listdir(tmp_path))
    for layer in ("top", "bottom"):
        assert f"density_{layer}.csv" in names and f"density_{layer}.png" in names
        assert f"voltage_{layer}.csv" in names and f"voltage_{layer}.png" in names
    lines = (tmp_path / "density_top.csv").read_text().splitlines()
    assert lines[0] == "# layer=top cell=0.5 units=A/mm2"
    assert lines[1].startswith("# origin=")
    widths = {len(line.split(",")) for line in lines[2:]}
    assert len(widths) == 1


def test_grid_csv_blank_cells():
    import numpy as np

    text = grid_csv(np.array([[1.0, np.nan], [0.5, 2.0]]), "top", 0.5, "V", (1.0, 2.0))
    assert text == "# layer=top cell=0.5 units=V\n# origin=1,2\n1.0,\n0.5,2.0\n"


def test_lint_exit_codes(capsys, tmp_path):
    clean = write(tmp_path, "clean.pib.json", gap_board(0.3))
    tight = write(tmp_path, "tight.pib.json", gap_board(0.10))
    assert run(capsys, "lint", clean)[0] == EXIT_OK
    code, out, _ = run(capsys, "lint", tight)
    assert code == EXIT_FINDINGS and "clearance" in out


def test_lint_profiles_differ(capsys, tmp_path):
    p = write(tmp_path, "b.pib.json", gap_board(0.2))
    assert run(capsys, "lint", p, "--profile", "dfm")[0] == EXIT_OK
    assert run(capsys, "lint", p, "--profile", "drc")[0] == EXIT_FINDINGS


def test_lint_rules_file(capsys, tmp_path):
    p = write(tmp_path, "b.pib.json", gap_board(0.2))
    rules = write(tmp_path, "rules.json", json.dumps({"rules": {"min_clearance": 0.25}}))
    assert run(capsys, "lint", p, "--rules", rules)[0] == EXIT_FINDINGS
    bad = write(tmp_path, "bad.json", json.dumps({"min_clearance": -1}))
    assert run(capsys, "lint", p, "--rules", bad)[0] == EXIT_ERROR


def test_lint_in_analyze_report(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", EXAMPLE, "--lint", "--format", "json",
                       "--drill", os.path.join(DATA, "golden.drl"))
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert code == EXIT_OK and doc["lint"] is not None


def test_budget_exit_codes(capsys, tmp_path, example_board):
    code, out, _ = run(capsys, "budget", EXAMPLE, "--format", "json")
    assert code == EXIT_OK
    assert json.loads(out)["margin_w"] == pytest.approx(240 - 187.416)

    empty = write(tmp_path, "empty.json", json.dumps({"budget": []}))
    code, out, _ = run(capsys, "budget", EXAMPLE, "--budget", empty, "--format", "json")
    assert code == EXIT_OK and json.loads(out)["total_w"] == pytest.approx(12 * 3 * 0.006)

    heavy = write(tmp_path, "heavy.json", json.dumps({"budget": [
        {"name": "heater", "rail": "HT", "voltage": 12.0, "current": 25.0}]}))
    assert run(capsys, "budget", EXAMPLE, "--budget", heavy)[0] == EXIT_FINDINGS


def test_budget_on_plain_supply(capsys, tmp_path):
    b = regulator_board(supply=12.0, set_voltage=5.0, iq=0.0)
    b = replace(b, sources=(replace(b.sources[0], max_current=20.0),),
                budget=(BudgetLine("VM", "VIN", 12.0, 1.3, 12),))
    code, out, _ = run(capsys, "budget", write(tmp_path, "b.pib.json", b), "--format", "json")
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["total_w"] == pytest.approx(187.2)
    assert doc["margin_w"] == pytest.approx(52.8)


def test_dropout_warns(capsys, tmp_path):
    p = write(tmp_path, "reg.pib.json", regulator_board(supply=10.5))
    code, out, err = run(capsys, "analyze", p, "--format", "json")
    doc = json.loads(out)
    jsonschema.validate(doc, SCHEMA)
    assert code == EXIT_FINDINGS
    assert "DropoutViolation" in err
    assert doc["regulators"][0]["in_dropout"] is True


def test_import_golden(capsys, tmp_path):
    out = tmp_path / "merged.pib.json"
    code, _, err = run(capsys, "import", "--skeleton", os.path.join(DATA, "golden_skeleton.pib.json"),
                       "--gerber", f"top={os.path.join(DATA, 'golden_top.gbr')}",
                       "--gerber", f"bottom={os.path.join(DATA, 'golden_bottom.gbr')}",
                       "--drill", os.path.join(DATA, "golden.drl"), "--out", out)
    assert code == EXIT_OK
    with open(os.path.join(DATA, "golden_board.pib.json"), encoding="utf-8") as fh:
        assert out.read_text() == fh.read()
    assert "unassigned" in err


def test_import_arcs(capsys, tmp_path):
    g = write(tmp_path, "arc.gbr", "%MOMM*%\n%FSLAX34Y34*%\n%ADD10C,0.5*%\nD10*\nX0Y0D02*\nG02*\nX1000Y0D01*\nM02*\n")
    code, _, err = run(capsys, "import", "--skeleton", os.path.join(DATA, "golden_skeleton.pib.json"),
                       "--gerber", f"top={g}")
    assert code == EXIT_ERROR and "G02" in err and "line 6" in err


def test_import_drill_only(capsys):
    code, out, err = run(capsys, "import", "--skeleton", os.path.join(DATA, "golden_skeleton.pib.json"),
                         "--drill", os.path.join(DATA, "golden.drl"))
    assert code == EXIT_OK
    assert "drill plan" in err
    assert parse_native(out, validate=False).copper == ()


def test_bad_gerber_spec(capsys):
    assert run(capsys, "import", "--gerber", "top")[0] == EXIT_ERROR


def test_argparse_errors_exit_two():
    with pytest.raises(SystemExit) as e:
        main(["analyze"])
    assert e.value.code == 2


def test_report_verdict_matches_errors(example_board):
    rep, _ = analyze(example_board)
    assert rep.verdict == "PASS" and rep.errors() == []
    jsonschema.validate(json.loads(rep.to_json()), SCHEMA)


def test_num_rounding():
    assert num(0.1 + 0.2) == 0.3
    assert num(float("nan")) is None and num(float("inf")) is None


def test_no_color_env(tmp_path):
    env = dict(os.environ, PIB_NO_COLOR="1")
    r = subprocess.run([sys.executable, "-m", "pib.cli", "analyze", EXAMPLE], capture_output=True, text=True,
                       env=env)
    assert r.returncode == 0 and "\x1b[" not in r.stdout
