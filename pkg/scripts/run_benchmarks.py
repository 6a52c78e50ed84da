"""Run the benchmark comparisons and write one summary table per case.

    python3 scripts/run_benchmarks.py [--out results] [--cases 2a 2b 3a 3b 1]

Benchmark 2 is compared against the equi-dimensional tensor-grid reference,
Benchmark 3 against a fine orthogonal hybrid solution, Benchmark 1 only
across methods along the 200 m depth line.
"""

import argparse
import logging
import time
from pathlib import Path

import numpy as np

from frackbench import ccdfm, edfm, grids, postproc, reference
from frackbench.mesh import read_mesh
from frackbench.scenario import builtin_benchmark, resolve_data_path


def method_solutions(bid, sc):
    tri = read_mesh(resolve_data_path({"2": "b2_tri.fvmesh", "3": "b3_tri.fvmesh"}[bid[0]]))
    out = {"ccdfm (triangles)": ccdfm.assemble_and_solve(sc, tri),
           "ccdfm_star (triangles)": ccdfm.assemble_and_solve(sc, tri, mode="keep_intersections")}
    if bid in grids.SNAPPED_SIZES:
        quads = grids.snapped_quads(sc, *grids.SNAPPED_SIZES[bid])
        out["ccdfm (snapped quads)"] = ccdfm.assemble_and_solve(sc, quads)
    out["edfm"] = edfm.assemble_and_solve(sc, grids.default_background(sc, bid))
    return out


def run_case(bid, out_dir):
    sc = builtin_benchmark(bid)
    t = time.time()
    if bid.startswith("2"):
        ref = reference.solve_reference(sc, reference.build_equidimensional_grid(sc, cells_across=10))
    else:
        ref = reference.solve_hybrid_reference(sc, *reference.HYBRID_REFERENCE_SIZES[bid])
    print(f"benchmark {bid}: reference with {ref.n_dofs} unknowns in {time.time() - t:.1f} s")
    rows = []
    for label, sol in method_solutions(bid, sc).items():
        rep = postproc.compute_errors(sol, ref, sc.network)
        row = postproc.summary_row(sol, rep)
        row["method"] = label
        rows.append(row)
        print(f"  {label:24s} dofs={sol.n_dofs:5d} err_m={rep.err_m:.2e} err_f={rep.err_f:.2e} "
              f"nnz/n^2={row['nnz_density']:.2e} cond={row['cond2']:.2e}")
    postproc.write_summary_csv(rows, out_dir / f"benchmark{bid}.csv")


def run_benchmark1(out_dir):
    sc = builtin_benchmark("1")
    line = sc.metadata["line_200m"]
    cc = ccdfm.assemble_and_solve(sc, read_mesh(resolve_data_path("b1_tri.fvmesh")))
    ed = edfm.assemble_and_solve(sc, grids.default_background(sc, "1"))
    a, b = postproc.sample_line(cc, line), postproc.sample_line(ed, line)
    postproc.write_line_csv(a, out_dir / "benchmark1_ccdfm_depth200.csv")
    postproc.write_line_csv(b, out_dir / "benchmark1_edfm_depth200.csv")
    span = float(np.ptp(cc.pressure_vector))
    d = np.abs(a.values - b.values) / span
    print(f"benchmark 1: head range {span:.2f}, max |ccdfm - edfm| on the 200 m line {np.nanmax(d):.1%} of it, "
          f"{np.mean(d <= 0.05):.0%} of points within 5%")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--cases", nargs="*", default=["2a", "2b", "3a", "3b", "1"])
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for bid in args.cases:
        if bid == "1":
            run_benchmark1(out)
        else:
            run_case(bid, out)


if __name__ == "__main__":
    main()
