import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from frackbench import edfm, grids, postproc
from frackbench.geometry import ConvexPolygon, Segment
from frackbench.mesh import build_structured_quads
from frackbench.scenario import FractureSegment, builtin_benchmark

from conftest import linear_scenario, unit_square_scenario


def frac(a, b, eps=1e-4, k=1e4):
    return FractureSegment(a, b, eps, k, k)


GRID2 = build_structured_quads((0, 0, 1, 1), 2, 2)
UNIT = ConvexPolygon([(0, 0), (1, 0), (1, 1), (0, 1)])


def test_fracture_on_grid_line_is_rejected():
    with pytest.raises(edfm.EmbeddingError, match="collinear"):
        edfm.embed_network(GRID2, [frac((0, 0.5), (1, 0.5))])


def test_two_fragments_of_half_length():
    emb = edfm.embed_network(GRID2, [frac((0, 0.3), (1, 0.3))])
    np.testing.assert_allclose(emb.fragments.length, [0.5, 0.5], rtol=1e-15)
    assert sorted(emb.fragments.host) == [0, 1]


def test_sliver_is_merged_and_recorded():
    emb = edfm.embed_network(GRID2, [frac((0.1, 0.3), (0.5 + 1e-7, 0.3))])
    assert len(emb.fragments) == 1 and len(emb.merged) == 1
    assert emb.fragments.length[0] == pytest.approx(0.4 + 1e-7, rel=1e-12)


def test_fracture_leaving_the_grid_is_rejected():
    with pytest.raises(edfm.EmbeddingError, match="leaves"):
        edfm.embed_network(GRID2, [frac((0.2, 0.3), (1.5, 0.3))])


def test_matrix_fracture_T_examples():
    K = np.eye(2)
    assert edfm.matrix_fracture_T(UNIT, Segment((0.5, 0), (0.5, 1)), K) == pytest.approx(4.0, rel=1e-14)
    # half the fragment, same supporting line: A halves, d unchanged
    assert edfm.matrix_fracture_T(UNIT, Segment((0.5, 0), (0.5, 0.5)), K) == pytest.approx(2.0, rel=1e-14)


@given(st.floats(1e-6, 1e6))
def test_matrix_fracture_T_is_linear_in_K(c):
    K = np.array([[2.0, 0.4], [0.4, 1.0]])
    seg = Segment((0.1, 0.2), (0.9, 0.7))
    assert edfm.matrix_fracture_T(UNIT, seg, c * K) == pytest.approx(c * edfm.matrix_fracture_T(UNIT, seg, K),
                                                                     rel=1e-13)


def test_intersection_half_T_examples():
    assert edfm.intersection_half_T(1.0, 0.5, 1e-4, 1e4) == pytest.approx(4.0)
    t = edfm.intersection_half_T(0.3, 0.1, 2e-4, 5.0)
    d = (0.1 ** 2 + 0.2 ** 2) / (2 * 0.3)
    assert t == pytest.approx(5.0 * 2e-4 / d)


def test_identical_crossing_fragments_give_half_T():
    # one cell, two full bisectors crossing at their midpoints: T_i = 4 on each side
    sc = unit_square_scenario(network=[frac((0.5, 0.0), (0.5, 1.0)), frac((0.0, 0.5), (1.0, 0.5))])
    model, emb = edfm.assemble(sc, build_structured_quads((0, 0, 1, 1), 1, 1))
    (T,) = model.conn_T[model.conn_kind == "intersection"]
    assert T == pytest.approx(2.0)
    assert len(emb.intersections) == 1
    np.testing.assert_allclose(emb.intersections[0].point, [0.5, 0.5])


def test_fragment_count_on_benchmark3():
    sc = builtin_benchmark("3b")
    emb = edfm.embed_network(grids.default_background(sc, "3b"), sc.network)
    assert len(emb.fragments) == 203


segment_in_square = st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))


@settings(max_examples=80)
@given(st.integers(1, 12), st.integers(1, 12), st.lists(segment_in_square, min_size=1, max_size=4))
def test_embedding_is_complete(nx, ny, segs):
    net = []
    for x0, y0, x1, y1 in segs:
        assume(np.hypot(x1 - x0, y1 - y0) > 1e-2)
        # keep clear of grid lines when axis parallel
        assume(not (abs(x1 - x0) < 1e-9 and np.min(np.abs(x0 * nx - np.round(x0 * nx))) < 1e-6))
        assume(not (abs(y1 - y0) < 1e-9 and np.min(np.abs(y0 * ny - np.round(y0 * ny))) < 1e-6))
        net.append(frac((x0, y0), (x1, y1)))
    try:
        emb = edfm.embed_network(build_structured_quads((0, 0, 1, 1), nx, ny), net)
    except edfm.EmbeddingError as exc:
        assume("overlap" not in str(exc) and "collinear" not in str(exc))
        raise
    fr = emb.fragments
    for fid, f in enumerate(net):
        assert fr.length[fr.fracture_id == fid].sum() == pytest.approx(f.length, rel=1e-9)
    assert np.all(fr.length > 0)


def test_patch_test_without_fractures_is_exact():
    sc = linear_scenario()
    mesh = build_structured_quads((0, 0, 1, 1), 6, 9, [0.2, 0.25])
    sol = edfm.assemble_and_solve(sc, mesh, stats=False)
    c = mesh.cell_centroid
    exact = 0.7 * c[:, 0] - 1.3 * c[:, 1] + 0.25
    assert np.max(np.abs(np.asarray(sol.matrix_pressure, float) - exact)) <= 1e-12 * np.ptp(exact)


@pytest.mark.parametrize("bid", ["1", "2a", "2b", "3a", "3b"])
def test_conservation_and_maximum_principle(bid):
    sc = builtin_benchmark(bid)
    sol = edfm.assemble_and_solve(sc, grids.default_background(sc, bid), stats=False)
    m, x = sol.model, sol.pressure_vector
    assert np.max(np.abs(m.residual(x))) <= 1e-10 * m.max_face_flux(x)
    inflow, outflow = m.boundary_balance(x)
    assert inflow == pytest.approx(outflow, rel=1e-10)
    lo, hi = m.pressure_bounds(x)
    xf = np.asarray(x, float)
    assert lo - 1e-12 * (hi - lo) <= xf.min() and xf.max() <= hi + 1e-12 * (hi - lo)
    A = sol.system.A
    assert (A != A.T).nnz == 0


def test_refinement_decreases_error_for_conductive_fractures(b2a, b2a_reference):
    errs = []
    for n in (19, 37, 73):
        sol = edfm.assemble_and_solve(b2a, grids.background_grid(b2a, n, n), stats=False)
        errs.append(postproc.compute_errors(sol, b2a_reference, b2a.network).err_m)
    assert errs[0] > errs[1] > errs[2]
