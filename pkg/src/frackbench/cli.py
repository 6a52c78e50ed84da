"""Command line: ``frackbench run`` solves one scenario, ``frackbench compare`` tabulates runs.

Errors are reported as one line ``error: E_CODE: message`` on stderr with a
nonzero exit status.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import ccdfm, edfm, grids, postproc, reference
from .fields import SolutionField, read_field, write_field
from .geometry import GeometryError
from .linalg import LinearSolveError, export_matrix_market, matrix_stats
from .mesh import Mesh, MeshError, read_mesh
from .scenario import (BENCHMARK_IDS, ScenarioError, builtin_benchmark, dumps_scenario, load_scenario,
                       resolve_data_path)
from .tpfa import TransmissibilityError
from .vtk import write_solution_vtk

log = logging.getLogger("frackbench")

METHODS = ("ccdfm", "ccdfm_star", "edfm", "reference")
SHIPPED_MESHES = {"1": "b1_tri.fvmesh", "2a": "b2_tri.fvmesh", "2b": "b2_tri.fvmesh", "3a": "b3_tri.fvmesh",
                  "3b": "b3_tri.fvmesh"}


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


@dataclass
class RunConfig:
    benchmark: Optional[str] = None
    scenario: Optional[str] = None
    method: str = "ccdfm"
    mesh: Optional[str] = None
    grid: Optional[str] = None
    cells_across: int = 10
    grading: float = 1.3
    reference: Optional[str] = None
    lines: Optional[str] = None
    out: str = "out"
    export_matrix: bool = False
    report: bool = False
    centers: str = "centroid"
    mixing: str = "harmonic"

    @classmethod
    def merged(cls, file_values: Optional[dict] = None, flags: Optional[dict] = None) -> "RunConfig":
        """Config file values first, then every flag that was actually given."""
        names = {f.name for f in dataclasses.fields(cls)}
        values = {}
        for src in (file_values or {}, {k: v for k, v in (flags or {}).items() if v is not None}):
            unknown = set(src) - names
            if unknown:
                raise CliError("E_CONFIG", f"unknown config keys: {', '.join(sorted(unknown))}")
            values.update(src)
        cfg = cls(**values)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        if (self.benchmark is None) == (self.scenario is None):
            raise CliError("E_CONFIG", "give exactly one of --benchmark and --scenario")
        if self.benchmark is not None and str(self.benchmark).lower() not in BENCHMARK_IDS:
            raise CliError("E_CONFIG", f"unknown benchmark {self.benchmark!r}; expected one of {', '.join(BENCHMARK_IDS)}")
        if self.method not in METHODS:
            raise CliError("E_CONFIG", f"unknown method {self.method!r}; expected one of {', '.join(METHODS)}")
        if self.mesh is not None and self.grid is not None:
            raise CliError("E_CONFIG", "--mesh and --grid are mutually exclusive")
        if self.method == "reference" and (self.mesh is not None or self.grid is not None):
            raise CliError("E_CONFIG", "the reference method builds its own grid; drop --mesh/--grid")
        if self.centers not in ("centroid", "circumcenter"):
            raise CliError("E_CONFIG", f"unknown cell centers {self.centers!r}")
        if self.centers == "circumcenter" and self.method not in ("ccdfm", "ccdfm_star"):
            raise CliError("E_CONFIG", "circumcenter cell points are only available for ccdfm and ccdfm_star")
        if self.mixing not in ("harmonic", "branch"):
            raise CliError("E_CONFIG", f"unknown intersection mixing {self.mixing!r}")
        if int(self.cells_across) < 1 or float(self.grading) < 1.0:
            raise CliError("E_CONFIG", "need cells_across >= 1 and grading >= 1")
        if self.grid is not None:
            try:
                grids.parse_grid(self.grid)
            except ValueError as exc:
                raise CliError("E_CONFIG", str(exc)) from None


# -- run ---------------------------------------------------------------------------------

def scenario_digest(sc) -> str:
    return hashlib.sha256(dumps_scenario(_expanded(sc)).encode()).hexdigest()[:16]


def _expanded(sc):
    """Copy with the fracture list written out instead of an external file reference."""
    return dataclasses.replace(sc, fracture_file=None, fracture_defaults=None)


def load_run_scenario(cfg: RunConfig):
    if cfg.benchmark is not None:
        bid = str(cfg.benchmark).lower()
        return builtin_benchmark(bid), bid
    path = resolve_data_path(cfg.scenario)
    if path is None:
        raise ScenarioError(f"scenario file not found: {cfg.scenario}")
    return load_scenario(path), None


def _read_mesh_arg(name: str) -> Mesh:
    path = resolve_data_path(name)
    if path is None:
        raise MeshError(f"mesh file not found: {name}")
    return read_mesh(path)


def build_mesh(cfg: RunConfig, scenario, bid: Optional[str]) -> Mesh:
    if cfg.mesh is not None:
        return _read_mesh_arg(cfg.mesh)
    if cfg.method == "edfm":
        if cfg.grid is not None:
            return grids.background_grid(scenario, *grids.parse_grid(cfg.grid))
        return grids.default_background(scenario, bid)
    if cfg.grid is not None:
        return grids.snapped_quads(scenario, *grids.parse_grid(cfg.grid))
    if cfg.centers == "circumcenter":
        return grids.default_triangulation(scenario, bid, delaunay=True)
    shipped = resolve_data_path(SHIPPED_MESHES[bid]) if bid in SHIPPED_MESHES else None
    if shipped is not None:
        return read_mesh(shipped)
    return grids.default_triangulation(scenario, bid)


def solve(cfg: RunConfig, scenario, bid: Optional[str]) -> SolutionField:
    if cfg.method == "reference":
        grid = reference.build_equidimensional_grid(scenario, int(cfg.cells_across), float(cfg.grading))
        sol = reference.solve_reference(scenario, grid)
        if cfg.report:
            sol = dataclasses.replace(sol, stats=matrix_stats(sol.system))
        return sol
    mesh = build_mesh(cfg, scenario, bid)
    if cfg.method == "edfm":
        return edfm.assemble_and_solve(scenario, mesh, stats=cfg.report)
    centers = None
    if cfg.centers == "circumcenter":
        if np.any(mesh.cell_sizes != 3):
            raise MeshError("circumcenter cell points need a triangle mesh")
        centers = mesh.circumcenters
    mode = "eliminate" if cfg.method == "ccdfm" else "keep_intersections"
    return ccdfm.assemble_and_solve(scenario, mesh, mode=mode, intersection_mixing=cfg.mixing, stats=cfg.report,
                                    centers=centers)


def load_lines(cfg: RunConfig, scenario) -> Dict[str, list]:
    """Named sampling segments from ``--lines`` or from the scenario metadata."""
    if cfg.lines is None:
        meta = scenario.metadata or {}
        lines = dict(meta.get("lines", {}))
        if "line_200m" in meta:
            lines["depth200"] = meta["line_200m"]
        return lines
    path = resolve_data_path(cfg.lines)
    if path is None:
        raise CliError("E_IO", f"lines file not found: {cfg.lines}")
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CliError("E_CONFIG", f"invalid JSON in {path}: {exc}") from None
    if isinstance(data, list):
        data = {f"line{k}": seg for k, seg in enumerate(data)}
    try:
        return {str(k): [[float(x) for x in p] for p in seg] for k, seg in data.items()}
    except (TypeError, ValueError):
        raise CliError("E_CONFIG", "lines must be segments [[x0, y0], [x1, y1]]") from None


def run(cfg: RunConfig) -> Dict[str, object]:
    """Solve and write all artifacts; returns a small summary."""
    scenario, bid = load_run_scenario(cfg)
    lines = load_lines(cfg, scenario)
    ref = None
    if cfg.reference is not None:
        path = resolve_data_path(cfg.reference)
        if path is None:
            raise CliError("E_IO", f"reference file not found: {cfg.reference}")
        ref = read_field(path)
        check_reference_scenario(ref, scenario)
    sol = solve(cfg, scenario, bid)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = scenario_digest(scenario)
    frac_vtk = out / "fractures.vtk" if len(sol.fractures) else None
    write_solution_vtk(sol, out / "solution.vtk", frac_vtk)
    write_field(sol, out / "solution.field", {"scenario": scenario.name, "scenario_digest": digest})
    (out / "scenario.json").write_text(dumps_scenario(_expanded(scenario)))

    report = postproc.compute_errors(sol, ref, scenario.network) if ref is not None else None
    if cfg.report or report is not None:
        postproc.write_summary_csv([postproc.summary_row(sol, report)], out / "summary.csv")
    if report is not None:
        write_error_csv(report, out / "errors.csv")
    for name, seg in sorted(lines.items()):
        postproc.write_line_csv(postproc.sample_line(sol, seg), out / f"line_{name}.csv")
    if cfg.export_matrix:
        export_matrix_market(sol.system, out / "matrix.mtx")

    summary = {"method": sol.method, "scenario": scenario.name, "scenario_digest": digest, "dofs": sol.n_dofs,
               "conservation_error": sol.conservation_error(),
               "max_principle_violation": sol.maximum_principle_violation()}
    if report is not None:
        summary.update(err_m=report.err_m, err_f=None if np.isnan(report.err_f) else report.err_f)
    if sol.stats is not None:
        summary.update(nnz_density=sol.stats.nnz_density, cond2=sol.stats.cond2_estimate,
                       cond2_status=sol.stats.status)
    (out / "run.json").write_text(json.dumps({"config": {k: v for k, v in dataclasses.asdict(cfg).items() if k != "out"}, "result": summary},
                                             indent=1, sort_keys=True) + "\n")
    return summary


def check_reference_scenario(ref: SolutionField, scenario) -> None:
    d = ref.info.get("scenario_digest")
    if d is not None and d != scenario_digest(scenario):
        raise CliError("E_SCENARIO_MISMATCH", "reference was computed for a different scenario")


def write_error_csv(report: postproc.ErrorReport, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["quantity", "fracture", "value"])
        for k in ("err_m", "err_f", "dp_ref", "omega", "gamma"):
            w.writerow([k, "", repr(float(getattr(report, k)))])
        for fid, e in sorted(report.per_fracture.items()):
            w.writerow(["err_f", fid, repr(float(e))])


# -- compare -----------------------------------------------------------------------------

def compare(run_dirs: Sequence[str], reference_file: Optional[str] = None) -> List[Dict[str, object]]:
    """One summary row per run directory, errors recomputed when a reference is given."""
    rows, digests = [], set()
    ref = None
    if reference_file is not None:
        path = resolve_data_path(reference_file)
        if path is None:
            raise CliError("E_IO", f"reference file not found: {reference_file}")
        ref = read_field(path)
    for d in run_dirs:
        d = Path(d)
        try:
            meta = json.loads((d / "run.json").read_text())
        except FileNotFoundError:
            raise CliError("E_IO", f"{d} is not a run directory (no run.json)") from None
        res = meta["result"]
        digests.add(res["scenario_digest"])
        if len(digests) > 1:
            raise CliError("E_SCENARIO_MISMATCH", f"run {d} solved a different scenario")
        old = postproc.read_summary_csv(d / "summary.csv")[0] if (d / "summary.csv").exists() else {}
        row = {c: (_num(old.get(c)) if c != "method" else res["method"]) for c in postproc.SUMMARY_COLUMNS}
        row["dofs"] = res["dofs"]
        if ref is not None:
            if ref.info.get("scenario_digest") not in (None, res["scenario_digest"]):
                raise CliError("E_SCENARIO_MISMATCH", "reference was computed for a different scenario")
            sol = read_field(d / "solution.field")
            sc = load_scenario(d / "scenario.json")
            rep = postproc.compute_errors(sol, ref, sc.network)
            row["err_m"] = rep.err_m
            row["err_f"] = None if np.isnan(rep.err_f) else rep.err_f
        rows.append(row)
    return rows


def _num(s):
    if s is None or s == "":
        return None
    return float(s)


# -- entry point -------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError("E_USAGE", message)


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="frackbench", description="2D discrete fracture-matrix flow benchmarks")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    r = sub.add_parser("run", help="solve one scenario with one method")
    r.add_argument("--config", help="JSON run file; flags override its values")
    r.add_argument("--benchmark", help="built-in benchmark id (1, 2a, 2b, 3a, 3b, 4)")
    r.add_argument("--scenario", help="scenario JSON file")
    r.add_argument("--method", choices=METHODS)
    r.add_argument("--mesh", help="mesh file (fvmesh or Gmsh v2 ASCII)")
    r.add_argument("--grid", help="structured grid NXxNY")
    r.add_argument("--cells-across", type=int, dest="cells_across", help="reference cells across each aperture")
    r.add_argument("--grading", type=float, help="reference grid growth ratio")
    r.add_argument("--reference", help="reference field file for error norms")
    r.add_argument("--lines", help="JSON list (or name map) of sampling segments")
    r.add_argument("--out", help="output directory (default: out)")
    r.add_argument("--export-matrix", action="store_const", const=True, dest="export_matrix",
                   help="write the system matrix in MatrixMarket format")
    r.add_argument("--report", action="store_const", const=True, help="write summary.csv with matrix statistics")
    r.add_argument("--centers", choices=("centroid", "circumcenter"), help="two-point cell locations (conforming)")
    r.add_argument("--mixing", choices=("harmonic", "branch"), help="intersection permeability rule for ccdfm_star")

    c = sub.add_parser("compare", help="combine run directories into one table")
    c.add_argument("runs", nargs="*", help="run output directories")
    c.add_argument("--reference", help="recompute errors against this reference field")
    c.add_argument("--out", help="CSV file (default: stdout)")
    return p


def _run_command(args) -> int:
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "verbose")}
    file_values = {}
    if args.config:
        try:
            file_values = json.loads(Path(args.config).read_text())
        except FileNotFoundError:
            raise CliError("E_IO", f"config file not found: {args.config}") from None
        except json.JSONDecodeError as exc:
            raise CliError("E_CONFIG", f"invalid JSON in {args.config}: {exc}") from None
        if not isinstance(file_values, dict):
            raise CliError("E_CONFIG", "config file must hold a JSON object")
    cfg = RunConfig.merged(file_values, flags)
    res = run(cfg)
    parts = [f"{res['method']}", f"dofs={res['dofs']}"]
    for k in ("err_m", "err_f", "cond2"):
        if res.get(k) is not None:
            parts.append(f"{k}={res[k]:.3e}")
    print(" ".join(parts) + f" -> {cfg.out}")
    return 0


def _compare_command(args) -> int:
    rows = compare(args.runs, args.reference)
    if args.out:
        postproc.write_summary_csv(rows, args.out)
    else:
        w = csv.writer(sys.stdout, lineterminator="\n")
        w.writerow(postproc.SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([r.get(c) if c == "method" else postproc._fmt(r.get(c)) for c in postproc.SUMMARY_COLUMNS])
    return 0


ERROR_CODES = (
    (CliError, None),
    (ScenarioError, "E_SCENARIO"),
    (MeshError, "E_MESH"),
    (GeometryError, "E_GEOMETRY"),
    (TransmissibilityError, "E_ASSEMBLY"),
    (postproc.ComparisonError, "E_COMPARE"),
    (LinearSolveError, "E_SOLVE"),
    (OSError, "E_IO"),
    (ValueError, "E_VALUE"),
    (RuntimeError, "E_SOLVE"),
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = make_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return _run_command(args) if args.command == "run" else _compare_command(args)
    except Exception as exc:  # noqa: BLE001 - every failure becomes one error line
        code = "E_INTERNAL"
        for cls, c in ERROR_CODES:
            if isinstance(exc, cls):
                code = exc.code if c is None else c
                break
        msg = " ".join(str(exc).split()) or type(exc).__name__
        print(f"error: {code}: {msg}", file=sys.stderr)
        return 2 if code in ("E_USAGE", "E_CONFIG") else 1


if __name__ == "__main__":
    sys.exit(main())
