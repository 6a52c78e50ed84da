import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from frackbench import ccdfm, grids, postproc, reference
from frackbench.fields import FractureCells, SolutionField
from frackbench.mesh import build_structured_quads
from frackbench.scenario import FractureSegment

from conftest import unit_square_scenario


def shifted(sol, scale=1.0, offset=0.0):
    f = lambda x: scale * np.asarray(x, float) + offset
    return dataclasses.replace(sol, matrix_pressure=f(sol.matrix_pressure), fracture_pressure=f(sol.fracture_pressure),
                               intersection_pressure=f(sol.intersection_pressure))


@pytest.fixture(scope="module")
def small_b2(b2a):
    sol = ccdfm.assemble_and_solve(b2a, grids.snapped_quads(b2a, 12, 12), stats=False)
    ref = reference.solve_reference(b2a, reference.build_equidimensional_grid(b2a, cells_across=2, h_max=0.05))
    return sol, ref


@pytest.fixture(scope="module")
def synthetic_equidim(b2a):
    """A tensor-grid field with constant value 0.3 inside every aperture band."""
    g = reference.build_equidimensional_grid(b2a, cells_across=1, h_max=0.1, grading=2.0)
    rng = np.random.default_rng(5)
    p = rng.uniform(-1.0, 2.0, g.mesh.n_cells)
    p[g.fracture_mask] = 0.3
    ref = SolutionField("reference", g.mesh, p)
    net = b2a.network
    n = len(net)
    fr = FractureCells(np.arange(n), np.array([f.a for f in net], float), np.array([f.b for f in net], float),
                       np.array([f.aperture for f in net]), np.zeros(n), np.ones(n), np.zeros(n, np.int64))
    return ref, fr


def test_identical_hybrid_fields_give_zero(small_b2, b2a):
    sol, _ = small_b2
    rep = postproc.compute_errors(sol, sol, b2a.network)
    assert rep.err_m == 0.0 and rep.err_f == 0.0


def test_identical_equidimensional_fields_give_zero(synthetic_equidim, b2a):
    ref, fr = synthetic_equidim
    sol = SolutionField("x", ref.mesh, ref.matrix_pressure, fr, np.full(len(fr), 0.3))
    rep = postproc.compute_errors(sol, ref, b2a.network)
    assert rep.err_m == 0.0 and rep.err_f == 0.0


@given(st.floats(-10, 10).filter(lambda c: abs(c) > 1e-6))
@settings(max_examples=20)
def test_constant_offset_gives_c_over_range_hybrid(small_b2, b2a, c):
    sol, _ = small_b2
    rep = postproc.compute_errors(shifted(sol, offset=c), sol, b2a.network)
    dp = postproc.reference_range(sol)
    assert rep.err_m == pytest.approx(abs(c) / dp, rel=1e-12)
    assert rep.err_f == pytest.approx(abs(c) / dp, rel=1e-12)


@given(st.floats(-10, 10).filter(lambda c: abs(c) > 1e-6))
@settings(max_examples=8)
def test_constant_offset_gives_c_over_range_equidimensional(synthetic_equidim, b2a, c):
    ref, fr = synthetic_equidim
    sol = SolutionField("x", ref.mesh, np.asarray(ref.matrix_pressure) + c, fr, np.full(len(fr), 0.3 + c))
    rep = postproc.compute_errors(sol, ref, b2a.network)
    dp = postproc.reference_range(ref)
    assert dp == pytest.approx(np.ptp(ref.matrix_pressure))
    assert rep.err_m == pytest.approx(abs(c) / dp, rel=1e-12)
    assert rep.err_f == pytest.approx(abs(c) / dp, rel=1e-12)


@given(st.floats(1e-3, 1e3), st.floats(-1e3, 1e3))
@settings(max_examples=5)
def test_errors_are_invariant_under_affine_rescaling(small_b2, b2a, a, b):
    sol, ref = small_b2
    base = postproc.compute_errors(sol, ref, b2a.network)
    rep = postproc.compute_errors(shifted(sol, a, b), shifted(ref, a, b), b2a.network)
    assert rep.err_m == pytest.approx(base.err_m, rel=1e-9)
    assert rep.err_f == pytest.approx(base.err_f, rel=1e-9)


def test_overlap_measures(small_b2, b2a):
    sol, ref = small_b2
    # hybrid against hybrid: the whole domain and every fracture
    rep = postproc.compute_errors(sol, sol, b2a.network)
    assert rep.omega == pytest.approx(1.0, rel=1e-12)
    assert rep.gamma == pytest.approx(sum(f.length for f in b2a.network), rel=1e-12)
    # against the tensor grid the aperture bands leave the matrix sum
    rep = postproc.compute_errors(sol, ref, b2a.network)
    band = ref.mesh.cell_area[postproc.in_fracture_bands(ref.mesh.cell_centroid, b2a.network)].sum()
    assert rep.omega == pytest.approx(1.0 - band, rel=1e-12)
    assert rep.gamma == pytest.approx(sum(f.length for f in b2a.network), rel=1e-9)
    assert set(rep.per_fracture) == set(range(len(b2a.network)))


def test_zero_reference_range_is_an_error():
    mesh = build_structured_quads((0, 0, 1, 1), 2, 2)
    flat = SolutionField("x", mesh, np.zeros(4))
    with pytest.raises(postproc.ComparisonError, match="range"):
        postproc.compute_errors(flat, flat, ())


def test_disjoint_meshes_are_an_error():
    a = SolutionField("x", build_structured_quads((0, 0, 1, 1), 2, 2), np.arange(4.0))
    b = SolutionField("x", build_structured_quads((5, 5, 6, 6), 2, 2), np.arange(4.0))
    with pytest.raises(postproc.ComparisonError, match="overlap"):
        postproc.compute_errors(a, b, ())


def test_line_sampling_constant_field():
    mesh = build_structured_quads((0, 0, 1, 1), 4, 3)
    s = postproc.sample_line(SolutionField("x", mesh, np.full(12, 2.5)), ((0, 0.1), (1, 0.9)), n=57)
    assert np.all(s.values == 2.5) and len(s.values) == 57
    assert s.arc_length[-1] == pytest.approx(np.hypot(1, 0.8))


def test_line_sampling_linear_staircase():
    mesh = build_structured_quads((0, 0, 1, 1), 10, 1)
    sol = SolutionField("x", mesh, mesh.cell_centroid[:, 0].copy())
    s = postproc.sample_line(sol, ((0.0, 0.5), (1.0, 0.5)), n=101)
    x = s.points[:, 0]
    inner = np.abs(x * 10 - np.round(x * 10)) > 1e-9
    np.testing.assert_allclose(s.values[inner], np.floor(x[inner] * 10) / 10 + 0.05, rtol=1e-14)


def test_line_sampling_outside_is_nan_and_fracture_wins():
    sc = unit_square_scenario(network=[FractureSegment((0.5, 0.0), (0.5, 1.0), 0.05, 1.0, 1.0)])
    sol = ccdfm.assemble_and_solve(sc, build_structured_quads((0, 0, 1, 1), 4, 4), stats=False)
    sol = dataclasses.replace(sol, fracture_pressure=np.full(len(sol.fractures), 9.0))
    s = postproc.sample_line(sol, ((-0.5, 0.3), (1.5, 0.3)), n=401)
    x = s.points[:, 0]
    assert np.all(np.isnan(s.values[(x < 0) | (x > 1)]))
    assert np.all(s.values[np.abs(x - 0.5) < 0.02] == 9.0)
    assert not np.any(s.values[(x > 0) & (x < 1) & (np.abs(x - 0.5) > 0.03)] == 9.0)


def test_line_csv_round_trip(tmp_path, rng):
    s = postproc.LineSample(np.zeros(2), np.array([2.0, 0.0]), np.linspace(0, 2, 9), rng.standard_normal(9))
    s.values[3] = np.nan
    postproc.write_line_csv(s, tmp_path / "l.csv")
    back = postproc.read_line_csv(tmp_path / "l.csv")
    np.testing.assert_array_equal(back.arc_length, s.arc_length)
    np.testing.assert_array_equal(back.values, s.values)


def test_summary_csv_round_trip(tmp_path, small_b2, b2a):
    sol, ref = small_b2
    rep = postproc.compute_errors(sol, ref, b2a.network)
    row = postproc.summary_row(sol, rep)
    postproc.write_summary_csv([row, postproc.summary_row(sol)], tmp_path / "s.csv")
    back = postproc.read_summary_csv(tmp_path / "s.csv")
    assert list(back[0]) == list(postproc.SUMMARY_COLUMNS)
    assert float(back[0]["err_m"]) == rep.err_m and float(back[0]["err_f"]) == rep.err_f
    assert int(back[0]["dofs"]) == sol.n_dofs
    assert back[1]["err_m"] == "" and back[1]["cond2"] == ""
