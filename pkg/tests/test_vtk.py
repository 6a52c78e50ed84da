import numpy as np
import pytest

from frackbench import ccdfm, vtk
from frackbench.fields import SolutionField
from frackbench.mesh import Mesh, build_structured_quads
from frackbench.scenario import FractureSegment

from conftest import unit_square_scenario


def mixed_mesh():
    v = [(0, 0), (1, 0), (2, 0), (0, 1), (1, 1), (2, 1)]
    return Mesh.from_cells(v, [(0, 1, 4, 3), (1, 2, 5), (1, 5, 4)])


def test_unstructured_grid_layout(tmp_path):
    mesh = mixed_mesh()
    vtk.write_mesh_vtk(mesh, tmp_path / "m.vtk", {"pressure": np.array([0.1, 0.2, 0.3]), "zone": np.arange(3)})
    lines = (tmp_path / "m.vtk").read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII" and lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert lines[4] == "POINTS 6 double"
    k = lines.index("CELLS 3 13")
    types = lines[lines.index("CELL_TYPES 3") + 1:][:3]
    assert types == [str(vtk.VTK_QUAD), str(vtk.VTK_TRIANGLE), str(vtk.VTK_TRIANGLE)]
    assert [int(s.split()[0]) for s in lines[k + 1:k + 4]] == [4, 3, 3]
    assert "CELL_DATA 3" in lines and "SCALARS zone int 1" in lines


def test_scalars_round_trip_exactly(tmp_path, rng):
    mesh = build_structured_quads((0, 0, 1, 1), 5, 4)
    p = rng.standard_normal(mesh.n_cells) * 1e7
    vtk.write_mesh_vtk(mesh, tmp_path / "m.vtk", {"a": np.ones(mesh.n_cells), "pressure": p})
    np.testing.assert_array_equal(vtk.read_vtk_cell_scalars(tmp_path / "m.vtk"), p)
    with pytest.raises(KeyError):
        vtk.read_vtk_cell_scalars(tmp_path / "m.vtk", "missing")


def test_solution_and_fracture_files(tmp_path):
    sc = unit_square_scenario(network=[FractureSegment((0.5, 0.0), (0.5, 1.0), 1e-3, 1e3, 1e3)])
    sol = ccdfm.assemble_and_solve(sc, build_structured_quads((0, 0, 1, 1), 4, 4), stats=False)
    vtk.write_solution_vtk(sol, tmp_path / "s.vtk", tmp_path / "f.vtk")
    np.testing.assert_array_equal(vtk.read_vtk_cell_scalars(tmp_path / "s.vtk"), sol.matrix_pressure)
    text = (tmp_path / "f.vtk").read_text().splitlines()
    n = len(sol.fractures)
    assert "DATASET POLYDATA" in text and f"LINES {n} {3 * n}" in text
    np.testing.assert_array_equal(vtk.read_vtk_cell_scalars(tmp_path / "f.vtk"), sol.fracture_pressure)
    np.testing.assert_array_equal(vtk.read_vtk_cell_scalars(tmp_path / "f.vtk", "fracture_id"), 0)


def test_solution_without_fractures(tmp_path):
    mesh = build_structured_quads((0, 0, 1, 1), 2, 2)
    sol = SolutionField("x", mesh, np.arange(4.0))
    vtk.write_solution_vtk(sol, tmp_path / "s.vtk")
    assert vtk.read_vtk_cell_scalars(tmp_path / "s.vtk").tolist() == [0.0, 1.0, 2.0, 3.0]
