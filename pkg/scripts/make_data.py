"""Regenerate the shipped scenario files and conforming benchmark meshes.

    python3 scripts/make_data.py [--data src/frackbench/data]
"""

import argparse
import json
from pathlib import Path

from frackbench.grids import TRIANGULATION_SIZES
from frackbench.meshing import conforming_triangulation
from frackbench.mesh import write_mesh
from frackbench.scenario import builtin_benchmark, save_scenario

MESHES = {"b1_tri.fvmesh": "1", "b2_tri.fvmesh": "2a", "b3_tri.fvmesh": "3a"}


def benchmark4_document():
    """Benchmark 4 scenario file; its fracture geometry stays in an external file."""
    dom = [[0.0, 0.0], [700.0, 0.0], [700.0, 600.0], [0.0, 600.0]]
    return {
        "name": "4", "field": "pressure", "domain": dom, "source": 0.0,
        "regions": [{"polygon": dom, "K": [[1e-14, 0.0], [0.0, 1e-14]]}],
        "bcs": [{"tag": "left", "kind": "dirichlet", "value": 1013250.0},
                {"tag": "right", "kind": "dirichlet", "value": 0.0},
                {"tag": "top", "kind": "neumann", "value": 0.0},
                {"tag": "bottom", "kind": "neumann", "value": 0.0}],
        "fracture_file": "benchmark4_fractures.csv",
        "fracture_defaults": {"aperture": 1e-2, "k_n": 1e-8, "k_t": 1e-8},
        "fractures": [],
        "metadata": {"lines": {"y500": [[0.0, 500.0], [700.0, 500.0]], "x625": [[625.0, 0.0], [625.0, 600.0]]}},
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", default=str(Path(__file__).resolve().parents[1] / "src" / "frackbench" / "data"))
    args = ap.parse_args()
    data = Path(args.data)
    (data / "scenarios").mkdir(parents=True, exist_ok=True)
    (data / "meshes").mkdir(parents=True, exist_ok=True)
    for bid in ("1", "2a", "2b", "3a", "3b"):
        save_scenario(builtin_benchmark(bid), data / "scenarios" / f"benchmark{bid}.json")
    (data / "scenarios" / "benchmark4.json").write_text(json.dumps(benchmark4_document(), indent=1) + "\n")
    for name, bid in MESHES.items():
        area, fh = TRIANGULATION_SIZES[bid]
        mesh = conforming_triangulation(builtin_benchmark(bid), area, fracture_h=fh)
        write_mesh(mesh, data / "meshes" / name)
        print(f"{name}: {mesh.n_cells} cells")


if __name__ == "__main__":
    main()
