"""Error norms against a reference, line sampling and CSV reports."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np
import shapely

from .fields import SolutionField
from .mesh import Mesh

SUMMARY_COLUMNS = ("method", "err_m", "err_f", "nnz_density", "cond2", "dofs")


class ComparisonError(ValueError):
    pass


def mesh_polygons(mesh: Mesh) -> np.ndarray:
    """Shapely polygons of all cells, in cell order."""
    out = np.empty(mesh.n_cells, dtype=object)
    for k in np.unique(mesh.cell_sizes):
        rows = np.flatnonzero(mesh.cell_sizes == k)
        out[rows] = shapely.polygons(mesh.vertices[mesh.cell_nodes[rows, :k]])
    return out


def band_polygons(a, b, aperture) -> np.ndarray:
    """Rectangles of half width ``aperture / 2`` around segments a-b."""
    a = np.asarray(a, float).reshape(-1, 2)
    b = np.asarray(b, float).reshape(-1, 2)
    t = b - a
    t /= np.hypot(*t.T)[:, None]
    n = np.column_stack([-t[:, 1], t[:, 0]]) * (0.5 * np.asarray(aperture, float))[:, None]
    ring = np.stack([a - n, b - n, b + n, a + n], axis=1)
    return shapely.polygons(ring)


def in_fracture_bands(points, network) -> np.ndarray:
    """Which points lie inside some fracture's aperture band."""
    p = np.asarray(points, float).reshape(-1, 2)
    inside = np.zeros(len(p), dtype=bool)
    for f in network:
        a = np.asarray(f.a)
        d = np.asarray(f.b) - a
        L = float(np.hypot(*d))
        s = (p - a) @ d / L
        dist = np.abs((p - a) @ np.array([-d[1], d[0]])) / L
        inside |= (dist < 0.5 * f.aperture) & (s > 0) & (s < L)
    return inside


def _values(x) -> np.ndarray:
    return np.asarray(x, dtype=float)


@dataclass(frozen=True)
class ErrorReport:
    """Normalized L2 errors of a solution against a reference.

    ``omega`` and ``gamma`` are the total overlap measures entering the
    matrix and fracture sums, ``per_fracture`` maps a fracture id to its own
    normalized fracture error.
    """

    err_m: float
    err_f: float
    dp_ref: float
    omega: float
    gamma: float
    per_fracture: Dict[int, float] = field(default_factory=dict)
    n_overlaps: int = 0


def reference_range(ref: SolutionField) -> float:
    vals = np.concatenate([_values(ref.matrix_pressure), _values(ref.fracture_pressure),
                           _values(ref.intersection_pressure)])
    return float(vals.max() - vals.min())


def matrix_overlaps(sol_mesh: Mesh, ref_mesh: Mesh, ref_cells: Optional[np.ndarray] = None):
    """Pairs (solution cell, reference cell, overlap area) with positive area."""
    sp = mesh_polygons(sol_mesh)
    rp = mesh_polygons(ref_mesh)
    ref_ids = np.arange(ref_mesh.n_cells) if ref_cells is None else np.asarray(ref_cells)
    tree = shapely.STRtree(rp[ref_ids])
    i, j = tree.query(sp, predicate="intersects")
    j = ref_ids[j]
    area = shapely.area(shapely.intersection(sp[i], rp[j]))
    keep = area > 0
    return i[keep], j[keep], area[keep]


def _interval_overlaps(s0, s1, r0, r1):
    lo = np.maximum(s0[:, None], r0[None, :])
    hi = np.minimum(s1[:, None], r1[None, :])
    return np.clip(hi - lo, 0.0, None)


def compute_errors(sol: SolutionField, ref: SolutionField, network=None) -> ErrorReport:
    """Matrix and fracture errors normalized by the reference pressure range.

    Matrix overlaps are cell-cell polygon intersections. Against a reference
    that resolves fractures by full-dimensional cells, reference cells inside
    an aperture band are left out of the matrix sum, and each fracture cell
    is compared with the reference cells covering its aperture band, weighted
    by covered area over aperture so that the weights add up to the fracture
    length.
    """
    if network is None:
        sc = sol.scenario if sol.scenario is not None else ref.scenario
        if sc is None:
            raise ComparisonError("a fracture network is needed to compare solutions")
        network = sc.network
    dp = reference_range(ref)
    if not dp > 0:
        raise ComparisonError("reference pressure range is zero")
    pm, pr = _values(sol.matrix_pressure), _values(ref.matrix_pressure)

    ref_cells = None
    equidim = len(ref.fractures) == 0 and len(network) > 0
    if equidim:
        ref_cells = np.flatnonzero(~in_fracture_bands(ref.mesh.cell_centroid, network))
    i, j, area = matrix_overlaps(sol.mesh, ref.mesh, ref_cells)
    if area.size == 0:
        raise ComparisonError("solution and reference meshes do not overlap")
    omega = float(area.sum())
    err_m = float(np.sqrt(np.sum(area * (pm[i] - pr[j]) ** 2) / (omega * dp * dp)))

    fr = sol.fractures
    per: Dict[int, float] = {}
    if len(fr) == 0:
        return ErrorReport(err_m, float("nan"), dp, omega, 0.0, per, int(area.size))
    pf = _values(sol.fracture_pressure)
    rows_k, vals_r, weights = [], [], []
    if equidim:
        rects = band_polygons(fr.a, fr.b, fr.aperture)
        rp = mesh_polygons(ref.mesh)
        k, c = shapely.STRtree(rp).query(rects, predicate="intersects")
        w = shapely.area(shapely.intersection(rects[k], rp[c])) / fr.aperture[k]
        rows_k, vals_r, weights = k, pr[c], w
    else:
        rf = ref.fractures
        prf = _values(ref.fracture_pressure)
        ks, vs, ws = [], [], []
        for fid in np.unique(fr.fracture_id):
            L = network[int(fid)].length
            sk = np.flatnonzero(fr.fracture_id == fid)
            rk = np.flatnonzero(rf.fracture_id == fid)
            ov = _interval_overlaps(fr.t0[sk] * L, fr.t1[sk] * L, rf.t0[rk] * L, rf.t1[rk] * L)
            a, b = np.nonzero(ov)
            ks.append(sk[a]), vs.append(prf[rk[b]]), ws.append(ov[a, b])
        rows_k, vals_r, weights = (np.concatenate(x) if x else np.empty(0) for x in (ks, vs, ws))
        rows_k = rows_k.astype(np.int64)
    keep = weights > 0
    rows_k, vals_r, weights = rows_k[keep], vals_r[keep], weights[keep]
    if weights.size == 0:
        raise ComparisonError("no fracture overlaps between solution and reference")
    sq = weights * (pf[rows_k] - vals_r) ** 2
    gamma = float(weights.sum())
    err_f = float(np.sqrt(sq.sum() / (gamma * dp * dp)))
    fid_of = fr.fracture_id[rows_k]
    for fid in np.unique(fid_of):
        m = fid_of == fid
        per[int(fid)] = float(np.sqrt(sq[m].sum() / (weights[m].sum() * dp * dp)))
    return ErrorReport(err_m, err_f, dp, omega, gamma, per, int(area.size + weights.size))


# -- line sampling --------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class LineSample:
    """Values at equally spaced points of a segment; NaN marks points outside the domain."""

    a: np.ndarray
    b: np.ndarray
    arc_length: np.ndarray
    values: np.ndarray

    @property
    def points(self) -> np.ndarray:
        t = self.arc_length / float(np.hypot(*(self.b - self.a)))
        return self.a + t[:, None] * (self.b - self.a)


def locate_points(mesh: Mesh, points, polygons=None) -> np.ndarray:
    """Index of a cell containing each point (lowest index on shared edges), -1 outside."""
    p = shapely.points(np.asarray(points, float).reshape(-1, 2))
    polys = mesh_polygons(mesh) if polygons is None else polygons
    i, c = shapely.STRtree(polys).query(p, predicate="intersects")
    out = np.full(len(p), -1, dtype=np.int64)
    order = np.lexsort((c, i))
    i, c = i[order], c[order]
    first = np.unique(i, return_index=True)[1]
    out[i[first]] = c[first]
    return out


def sample_line(sol: SolutionField, line, n: int = 1000) -> LineSample:
    a, b = (np.asarray(x, float) for x in line)
    L = float(np.hypot(*(b - a)))
    if L <= 0:
        raise ValueError("sampling line has zero length")
    s = np.linspace(0.0, L, n)
    pts = a + (s / L)[:, None] * (b - a)
    cell = locate_points(sol.mesh, pts)
    vals = np.full(n, np.nan)
    inside = cell >= 0
    vals[inside] = _values(sol.matrix_pressure)[cell[inside]]
    fr = sol.fractures
    if len(fr):
        pf = _values(sol.fracture_pressure)
        d = fr.b - fr.a
        Lk = np.hypot(*d.T)
        rel = pts[:, None, :] - fr.a[None, :, :]
        t = np.einsum("pkj,kj->pk", rel, d) / (Lk * Lk)
        dist = np.abs(rel[..., 0] * d[:, 1] - rel[..., 1] * d[:, 0]) / Lk
        hit = (dist <= 0.5 * fr.aperture) & (t >= 0) & (t <= 1) & inside[:, None]
        rows = np.flatnonzero(hit.any(axis=1))
        vals[rows] = pf[np.argmax(hit[rows], axis=1)]
    return LineSample(a, b, s, vals)


# -- reports --------------------------------------------------------------------------

def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_line_csv(sample: LineSample, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["arc_length", "value"])
        for s, v in zip(sample.arc_length, sample.values):
            w.writerow([_fmt(s), "" if np.isnan(v) else _fmt(v)])


def read_line_csv(path) -> LineSample:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    s = np.array([float(r["arc_length"]) for r in rows])
    v = np.array([float(r["value"]) if r["value"] else np.nan for r in rows])
    return LineSample(np.zeros(2), np.array([s[-1] if len(s) else 0.0, 0.0]), s, v)


def summary_row(sol: SolutionField, report: Optional[ErrorReport] = None) -> Dict[str, object]:
    st = sol.stats
    return {
        "method": sol.method,
        "err_m": None if report is None else report.err_m,
        "err_f": None if report is None or np.isnan(report.err_f) else report.err_f,
        "nnz_density": None if st is None else st.nnz_density,
        "cond2": None if st is None else st.cond2_estimate,
        "dofs": sol.n_dofs,
    }


def write_summary_csv(rows: Iterable[Dict[str, object]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in rows:
            w.writerow([r.get(c) if c == "method" else _fmt(r.get(c)) for c in SUMMARY_COLUMNS])


def read_summary_csv(path) -> List[Dict[str, str]]:
    with open(path) as fh:
        return list(csv.DictReader(fh))


def check_conservation(sol: SolutionField, tol: float = 1e-10) -> bool:
    return sol.conservation_error() <= tol


def check_maximum_principle(sol: SolutionField, tol: float = 1e-12) -> bool:
    return sol.maximum_principle_violation() <= tol
