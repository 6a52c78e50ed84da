import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from frackbench.grids import background_grid, snapped_quads
from frackbench.mesh import (Mesh, MeshError, NonConformingMeshError, build_column_quads, build_structured_quads,
                             mesh_to_text, read_mesh, tag_fracture_faces, write_mesh)
from frackbench.meshing import conforming_triangulation
from frackbench.scenario import FractureSegment, builtin_benchmark


def frac(a, b):
    return FractureSegment(a, b, 1e-4, 1.0, 1.0)


GMSH_TRIANGLE = """$MeshFormat
2.2 0 8
$EndMeshFormat
$Nodes
3
1 0 0 0
2 1 0 0
3 0 1 0
$EndNodes
$Elements
1
1 2 2 1 1 1 2 3
$EndElements
"""

GMSH_TWO_TRIANGLES = """$MeshFormat
2.2 0 8
$EndMeshFormat
$PhysicalNames
2
1 7 "fracture_0"
1 8 "left"
$EndPhysicalNames
$Nodes
4
1 0 0 0
2 1 0 0
3 1 1 0
4 0 1 0
$EndNodes
$Elements
4
1 1 2 7 1 1 3
2 1 2 8 2 4 1
3 2 2 1 1 1 2 3
4 2 2 1 1 1 3 4
$EndElements
"""


def test_structured_2x2_counts():
    m = build_structured_quads((0, 0, 1, 1), 2, 2)
    assert (m.n_cells, m.n_faces, m.n_vertices) == (4, 12, 9)


def test_structured_1x1_has_four_boundary_faces():
    m = build_structured_quads((0, 0, 1, 1), 1, 1)
    assert m.n_cells == 1 and len(m.boundary_faces) == 4


def test_snap_lines_are_inserted_exactly():
    m = build_structured_quads((0, 0, 1, 1), 10, 10, snap_x=[0.5 - 5e-5, 0.5 + 5e-5])
    xs = np.unique(m.vertices[:, 0])
    assert 0.5 - 5e-5 in xs and 0.5 + 5e-5 in xs
    vertical = np.isclose(m.face_normal[:, 1], 0.0)
    assert np.any(vertical & (m.face_centroid[:, 0] == 0.5 - 5e-5))


def test_snap_line_outside_domain_is_an_error():
    with pytest.raises(MeshError):
        build_structured_quads((0, 0, 1, 1), 2, 2, snap_x=[1.5])


def test_gmsh_single_triangle():
    m = read_mesh(io.StringIO(GMSH_TRIANGLE))
    assert m.n_cells == 1 and len(m.boundary_faces) == 3


def test_gmsh_physical_fracture_tag_maps_to_the_edge():
    m = read_mesh(io.StringIO(GMSH_TWO_TRIANGLES))
    assert m.n_cells == 2
    (edge,) = m.fracture_faces[0]
    f = m.face_index(*edge)
    assert f in m.interior_faces
    np.testing.assert_allclose(m.face_centroid[f], [0.5, 0.5])
    assert set(m.boundary_tags.values()) == {"left"}
    t = tag_fracture_faces(m, [frac((0, 0), (1, 1))])
    assert list(t.faces[0]) == [f]


@pytest.mark.parametrize("make", [
    lambda: build_structured_quads((0, 0, 2, 1), 5, 3),
    lambda: conforming_triangulation(builtin_benchmark("3a"), 5e-3, fracture_h=0.1),
    lambda: read_mesh(io.StringIO(GMSH_TWO_TRIANGLES)),
])
def test_native_round_trip_reproduces_connectivity(make, tmp_path):
    m = make()
    write_mesh(m, tmp_path / "m.fvmesh")
    m2 = read_mesh(tmp_path / "m.fvmesh")
    assert m.same_connectivity(m2)
    assert dict(m.boundary_tags) == dict(m2.boundary_tags)
    assert dict(m.fracture_faces) == dict(m2.fracture_faces)
    assert mesh_to_text(m) == mesh_to_text(m2)


@pytest.mark.parametrize("text, match", [
    ("fvmesh 1\nvertices 3\n0 0\n1 0\n2 0\ncells 1\n3 0 1 2\n", "zero area"),
    ("fvmesh 1\nvertices 3\n0 0\n1 0\n0 1\ncells 1\n3 0 1 5\n", "out of range"),
    ("nonsense\n", "header"),
])
def test_malformed_files_are_rejected(text, match):
    with pytest.raises(MeshError, match=match):
        read_mesh(io.StringIO(text))


def test_non_manifold_edge_is_rejected():
    v = [(0, 0), (1, 0), (0, 1), (0, -1), (1, 1)]
    with pytest.raises(MeshError):
        Mesh.from_cells(v, [(0, 1, 2), (0, 3, 1), (0, 1, 4)])


def test_tagging_on_2x2_grid():
    m = build_structured_quads((0, 0, 1, 1), 2, 2)
    t = tag_fracture_faces(m, [frac((0, 0.5), (1, 0.5))])
    assert len(t.faces[0]) == 2
    assert t.covered_length[0] == pytest.approx(1.0)


def test_empty_network_gives_empty_tagging():
    t = tag_fracture_faces(build_structured_quads((0, 0, 1, 1), 2, 2), [])
    assert t.faces == {}


def test_nonconforming_fracture_is_reported():
    with pytest.raises(NonConformingMeshError):
        tag_fracture_faces(build_structured_quads((0, 0, 1, 1), 2, 2), [frac((0, 0.3), (1, 0.3))])


MESHES = {
    "quads": lambda: build_structured_quads((0, 0, 1, 1), 7, 4),
    "graded": lambda: build_structured_quads((0, 0, 3, 2), 5, 5, [0.1, 0.11, 2.9], [1.0]),
    "columns": lambda: background_grid(builtin_benchmark("1"), 20, 15),
    "b2 snapped": lambda: snapped_quads(builtin_benchmark("2a"), 12, 12),
    "b3 triangles": lambda: conforming_triangulation(builtin_benchmark("3b"), 4e-3, fracture_h=0.08),
}


@pytest.mark.parametrize("name", list(MESHES))
def test_mesh_invariants(name):
    m = MESHES[name]()
    # cell areas add up to the area enclosed by the boundary faces
    bf = m.boundary_faces
    outward = np.where(m.face_cells[bf, 0] >= 0, 1.0, -1.0)
    boundary_area = 0.5 * np.sum(outward * np.einsum("ij,ij->i", m.face_centroid[bf], m.face_normal[bf])
                                 * m.face_length[bf])
    assert m.cell_area.sum() == pytest.approx(boundary_area, rel=1e-12)
    assert np.all(m.cell_area > 0)
    assert np.allclose(np.hypot(*m.face_normal.T), 1.0)
    # closed cells: sum of outward A n over each cell vanishes
    acc = np.zeros((m.n_cells, 2))
    for side, sign in ((0, 1.0), (1, -1.0)):
        c = m.face_cells[:, side]
        ok = c >= 0
        np.add.at(acc, c[ok], sign * (m.face_length[ok, None] * m.face_normal[ok]))
    assert np.abs(acc).max() <= 1e-12 * m.face_length.max()
    # each face has one or two cells and adjacency is symmetric
    assert np.all(m.face_cells[:, 0] >= 0)
    for f in m.interior_faces[:50]:
        l, r = m.face_cells[f]
        assert f in m.cell_faces[l] and f in m.cell_faces[r]


def test_tagged_lengths_match_fracture_lengths():
    sc = builtin_benchmark("3a")
    m = conforming_triangulation(sc, 4e-3, fracture_h=0.08)
    t = tag_fracture_faces(m, sc.network)
    for fid, f in enumerate(sc.network):
        assert m.face_length[t.faces[fid]].sum() == pytest.approx(f.length, rel=1e-12)


def test_column_quads_follow_top():
    m = build_column_quads([0, 1, 2], 0.0, [1.0, 2.0, 1.5], 3)
    assert m.n_cells == 6
    assert m.cell_area.sum() == pytest.approx(0.5 * (1 + 2) + 0.5 * (2 + 1.5))


@given(st.integers(1, 6), st.integers(1, 6))
def test_structured_counts(nx, ny):
    m = build_structured_quads((0, 0, 1, 1), nx, ny)
    assert m.n_cells == nx * ny
    assert m.n_faces == nx * (ny + 1) + ny * (nx + 1)
    assert len(m.boundary_faces) == 2 * (nx + ny)
