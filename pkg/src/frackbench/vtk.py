"""Legacy ASCII VTK output (format version 3.0)."""

from __future__ import annotations

from typing import Dict, Optional

import numpy as np

from .fields import SolutionField
from .mesh import Mesh

VTK_TRIANGLE = 5
VTK_QUAD = 9
VTK_POLYGON = 7


def _r(x) -> str:
    return repr(float(x))


def _scalars(name: str, values, kind: str = "double"):
    fmt = (lambda v: str(int(v))) if kind == "int" else _r
    yield f"SCALARS {name} {kind} 1"
    yield "LOOKUP_TABLE default"
    for v in values:
        yield fmt(v)


def mesh_vtk_lines(mesh: Mesh, cell_data: Dict[str, np.ndarray], title: str):
    yield "# vtk DataFile Version 3.0"
    yield title.replace("\n", " ")[:255]
    yield "ASCII"
    yield "DATASET UNSTRUCTURED_GRID"
    yield f"POINTS {mesh.n_vertices} double"
    for x, y in mesh.vertices:
        yield f"{_r(x)} {_r(y)} 0.0"
    cells = mesh.cells
    yield f"CELLS {len(cells)} {sum(len(c) + 1 for c in cells)}"
    for c in cells:
        yield " ".join(map(str, (len(c),) + tuple(c)))
    yield f"CELL_TYPES {len(cells)}"
    for c in cells:
        yield str({3: VTK_TRIANGLE, 4: VTK_QUAD}.get(len(c), VTK_POLYGON))
    if cell_data:
        yield f"CELL_DATA {len(cells)}"
        for name, vals in cell_data.items():
            yield from _scalars(name, vals, "int" if np.issubdtype(np.asarray(vals).dtype, np.integer) else "double")


def write_mesh_vtk(mesh: Mesh, path, cell_data: Optional[Dict[str, np.ndarray]] = None,
                   title: str = "frackbench") -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(mesh_vtk_lines(mesh, cell_data or {}, title)) + "\n")


def write_fractures_vtk(sol: SolutionField, path, title: Optional[str] = None) -> None:
    """Fracture cells as polyline cells with pressure, fracture id and aperture."""
    fr = sol.fractures
    n = len(fr)
    lines = ["# vtk DataFile Version 3.0", title or f"frackbench {sol.method} fracture pressure", "ASCII",
             "DATASET POLYDATA", f"POINTS {2 * n} double"]
    for k in range(n):
        lines.append(f"{_r(fr.a[k, 0])} {_r(fr.a[k, 1])} 0.0")
        lines.append(f"{_r(fr.b[k, 0])} {_r(fr.b[k, 1])} 0.0")
    lines.append(f"LINES {n} {3 * n}")
    lines += [f"2 {2 * k} {2 * k + 1}" for k in range(n)]
    if n:
        lines.append(f"CELL_DATA {n}")
        lines += list(_scalars("pressure", sol.fracture_pressure))
        lines += list(_scalars("fracture_id", fr.fracture_id, "int"))
        lines += list(_scalars("aperture", fr.aperture))
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def write_solution_vtk(sol: SolutionField, path, fracture_path=None) -> None:
    """Matrix pressures on the cells; fracture pressures to a second file if given."""
    write_mesh_vtk(sol.mesh, path, {"pressure": np.asarray(sol.matrix_pressure, float)},
                   f"frackbench {sol.method} matrix pressure")
    if fracture_path is not None:
        write_fractures_vtk(sol, fracture_path)


def read_vtk_cell_scalars(path, name: str = "pressure") -> np.ndarray:
    """Read one CELL_DATA scalar array back from a file written here."""
    with open(path) as fh:
        tokens = fh.read().split("\n")
    for k, ln in enumerate(tokens):
        if ln.startswith("CELL_DATA"):
            n = int(ln.split()[1])
            for j in range(k + 1, len(tokens)):
                parts = tokens[j].split()
                if parts[:2] == ["SCALARS", name]:
                    return np.array([float(x) for x in tokens[j + 2:j + 2 + n]])
    raise KeyError(f"no cell scalar {name!r} in {path}")
