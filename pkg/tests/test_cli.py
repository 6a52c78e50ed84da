import json
import re
import subprocess
import sys

import numpy as np
import pytest

from frackbench import cli, postproc, reference
from frackbench.fields import read_field
from frackbench.scenario import DATA_ENV, builtin_benchmark

ERROR_LINE = re.compile(r"^error: (E_[A-Z_]+): \S.*$")


def run_cli(argv, capsys):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_code(err):
    lines = err.strip().splitlines()
    assert len(lines) == 1, err
    m = ERROR_LINE.match(lines[0])
    assert m, lines[0]
    return m.group(1)


@pytest.fixture(scope="module")
def b2_runs(tmp_path_factory):
    """B2a runs: conforming on the shipped mesh, the same again, EDFM, and a coarse reference."""
    root = tmp_path_factory.mktemp("runs")
    argvs = {
        "cc": ["run", "--benchmark", "2a", "--method", "ccdfm", "--mesh", "b2_tri.fvmesh", "--report"],
        "cc_again": ["run", "--benchmark", "2a", "--method", "ccdfm", "--mesh", "b2_tri.fvmesh", "--report"],
        "ed": ["run", "--benchmark", "2a", "--method", "edfm", "--grid", "37x37", "--report"],
        "ref": ["run", "--benchmark", "2a", "--method", "reference", "--cells-across", "2"],
    }
    for name, argv in argvs.items():
        assert cli.main(argv + ["--out", str(root / name)]) == 0
    return root


def test_run_writes_all_artifacts(b2_runs):
    d = b2_runs / "cc"
    for f in ("solution.vtk", "fractures.vtk", "solution.field", "scenario.json", "summary.csv", "run.json",
              "line_horizontal.csv", "line_vertical.csv", "line_diagonal.csv"):
        assert (d / f).exists(), f
    row = postproc.read_summary_csv(d / "summary.csv")[0]
    assert row["method"] == "ccdfm"
    # the shipped triangulation gives about 1480 unknowns
    assert abs(int(row["dofs"]) - 1481) <= 10
    assert float(row["cond2"]) > 1 and 0 < float(row["nnz_density"]) < 0.01
    res = json.loads((d / "run.json").read_text())["result"]
    assert res["conservation_error"] <= 1e-10 and res["max_principle_violation"] <= 1e-12


def test_repeated_runs_are_bit_identical(b2_runs):
    a, b = b2_runs / "cc", b2_runs / "cc_again"
    names = sorted(p.name for p in a.iterdir())
    assert names == sorted(p.name for p in b.iterdir())
    for n in names:
        assert (a / n).read_bytes() == (b / n).read_bytes(), n


def test_reference_run_writes_a_field(b2_runs):
    ref = read_field(b2_runs / "ref" / "solution.field")
    assert ref.method == "reference"
    assert ref.info["scenario_digest"] == cli.scenario_digest(builtin_benchmark("2a"))
    assert not (b2_runs / "ref" / "fractures.vtk").exists()


def test_run_with_reference_reports_errors(b2_runs, tmp_path, capsys):
    code, out, _ = run_cli(["run", "--benchmark", "2a", "--method", "edfm", "--grid", "37x37",
                            "--reference", b2_runs / "ref" / "solution.field", "--out", tmp_path], capsys)
    assert code == 0 and "err_m=" in out
    rows = {(r["quantity"], r["fracture"]): float(r["value"])
            for r in postproc.read_summary_csv(tmp_path / "errors.csv")}
    assert 0 < rows[("err_m", "")] < 0.1
    assert ("err_f", "0") in rows


def test_compare_identical_runs_give_identical_rows(b2_runs, capsys):
    code, out, _ = run_cli(["compare", b2_runs / "cc", b2_runs / "cc_again"], capsys)
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == ",".join(postproc.SUMMARY_COLUMNS)
    assert lines[1] == lines[2]


def test_compare_recomputes_errors_against_a_reference(b2_runs, tmp_path, capsys):
    code, _, _ = run_cli(["compare", b2_runs / "cc", b2_runs / "ed", "--reference", b2_runs / "ref" / "solution.field",
                          "--out", tmp_path / "t.csv"], capsys)
    assert code == 0
    rows = postproc.read_summary_csv(tmp_path / "t.csv")
    assert [r["method"] for r in rows] == ["ccdfm", "edfm"]
    assert all(0 < float(r["err_m"]) < 0.1 for r in rows)


def test_compare_empty_gives_header(capsys):
    code, out, _ = run_cli(["compare"], capsys)
    assert code == 0 and out == ",".join(postproc.SUMMARY_COLUMNS) + "\n"


def test_compare_scenario_mismatch(b2_runs, tmp_path, capsys):
    assert cli.main(["run", "--benchmark", "2b", "--method", "ccdfm", "--mesh", "b2_tri.fvmesh",
                     "--out", str(tmp_path / "b")]) == 0
    capsys.readouterr()
    code, _, err = run_cli(["compare", b2_runs / "cc", tmp_path / "b"], capsys)
    assert code == 1 and error_code(err) == "E_SCENARIO_MISMATCH"
    code, _, err = run_cli(["run", "--benchmark", "2b", "--method", "edfm", "--reference",
                            b2_runs / "ref" / "solution.field", "--out", tmp_path / "c"], capsys)
    assert code == 1 and error_code(err) == "E_SCENARIO_MISMATCH"


def test_blocking_contrast_through_compare(tmp_path, capsys):
    for argv in (["--method", "ccdfm", "--grid", "36x36"], ["--method", "edfm", "--grid", "37x37"],
                 ["--method", "reference", "--cells-across", "4"]):
        name = argv[1]
        assert cli.main(["run", "--benchmark", "2b", *argv, "--out", str(tmp_path / name)]) == 0
    code, _, _ = run_cli(["compare", tmp_path / "ccdfm", tmp_path / "edfm", "--reference",
                          tmp_path / "reference" / "solution.field", "--out", tmp_path / "t.csv"], capsys)
    assert code == 0
    cc, ed = (float(r["err_m"]) for r in postproc.read_summary_csv(tmp_path / "t.csv"))
    assert ed >= 10 * cc


def test_slanted_network_pipeline_with_external_reference(tmp_path, capsys):
    # a reference produced outside the run command, e.g. a converted external file
    sc = builtin_benchmark("3a")
    ref = reference.solve_hybrid_reference(sc, 2e-4, 0.02)
    reference.write_reference(dataclasses_replace_info(ref, scenario_digest=cli.scenario_digest(sc)),
                              tmp_path / "b3a.field")
    code, out, _ = run_cli(["run", "--benchmark", "3a", "--method", "edfm", "--grid", "37x37",
                            "--reference", tmp_path / "b3a.field", "--out", tmp_path / "o"], capsys)
    assert code == 0
    assert (tmp_path / "o" / "errors.csv").exists()


def dataclasses_replace_info(sol, **extra):
    import dataclasses
    return dataclasses.replace(sol, info=dict(sol.info, **extra))


def test_config_file_with_flag_override(tmp_path, capsys):
    cfg = {"benchmark": "3b", "method": "ccdfm_star", "export_matrix": True, "out": str(tmp_path / "from_file")}
    (tmp_path / "run.json").write_text(json.dumps(cfg))
    code, _, _ = run_cli(["run", "--config", tmp_path / "run.json", "--method", "ccdfm", "--out", tmp_path / "o"],
                         capsys)
    assert code == 0
    meta = json.loads((tmp_path / "o" / "run.json").read_text())
    assert meta["config"]["method"] == "ccdfm" and meta["config"]["benchmark"] == "3b"
    assert (tmp_path / "o" / "matrix.mtx").exists()
    assert not (tmp_path / "from_file").exists()


def test_lines_file(tmp_path, capsys):
    (tmp_path / "lines.json").write_text(json.dumps([[[0, 0.5], [1, 0.5]], [[0.2, 0], [0.2, 1]]]))
    code, _, _ = run_cli(["run", "--benchmark", "3a", "--lines", tmp_path / "lines.json", "--out", tmp_path / "o"],
                         capsys)
    assert code == 0
    s = postproc.read_line_csv(tmp_path / "o" / "line_line1.csv")
    assert len(s.values) == 1000 and np.all(np.diff(s.arc_length) > 0)


def test_circumcenter_option(tmp_path, capsys):
    code, out, _ = run_cli(["run", "--benchmark", "3b", "--method", "ccdfm_star", "--centers", "circumcenter",
                            "--out", tmp_path], capsys)
    assert code == 0 and "ccdfm_star" in out


@pytest.mark.parametrize("argv, code, exit_status", [
    (["run"], "E_CONFIG", 2),
    (["run", "--benchmark", "9"], "E_CONFIG", 2),
    (["run", "--benchmark", "2a", "--scenario", "x.json"], "E_CONFIG", 2),
    (["run", "--benchmark", "2a", "--method", "magic"], "E_USAGE", 2),
    (["frobnicate"], "E_USAGE", 2),
    (["run", "--benchmark", "2a", "--grid", "ten"], "E_CONFIG", 2),
    (["run", "--benchmark", "2a", "--mesh", "missing.fvmesh"], "E_MESH", 1),
    (["run", "--scenario", "missing.json"], "E_SCENARIO", 1),
    (["run", "--benchmark", "3a", "--method", "reference"], "E_MESH", 1),
    (["run", "--benchmark", "2a", "--method", "edfm", "--grid", "2x2"], "E_MESH", 1),
    (["run", "--benchmark", "3a", "--grid", "10x10"], "E_MESH", 1),
    (["compare", "not-a-run-dir"], "E_IO", 1),
])
def test_error_paths(argv, code, exit_status, tmp_path, capsys, monkeypatch):
    monkeypatch.chdir(tmp_path)
    status, _, err = run_cli(argv, capsys)
    assert status == exit_status
    assert error_code(err) == code


def test_benchmark4_without_data_is_a_scenario_error(tmp_path, capsys, monkeypatch):
    monkeypatch.setenv(DATA_ENV, str(tmp_path))
    status, _, err = run_cli(["run", "--benchmark", "4", "--out", tmp_path / "o"], capsys)
    assert status == 1 and error_code(err) == "E_SCENARIO"


def test_bad_config_file(tmp_path, capsys):
    (tmp_path / "c.json").write_text('{"benchmark": "2a", "colour": "red"}')
    status, _, err = run_cli(["run", "--config", tmp_path / "c.json"], capsys)
    assert status == 2 and error_code(err) == "E_CONFIG"


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "frackbench", "run", "--benchmark", "9"], capture_output=True,
                       text=True)
    assert p.returncode == 2
    assert ERROR_LINE.match(p.stderr.strip())
