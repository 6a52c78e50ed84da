"""Equi-dimensional reference solutions on graded tensor grids.

Fractures are resolved as strips of full-dimensional cells. Grid lines are
snapped to every fracture wall, each strip gets a fixed number of uniform
cells across its aperture, and spacing grows geometrically away from the
walls. Only axis-aligned fractures on rectangular domains are supported.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .ccdfm import assemble_and_solve
from .fields import SolutionField, read_field, write_field
from .linalg import MATRIX
from .mesh import Mesh, MeshError, build_tensor_grid
from .meshing import conforming_triangulation
from .tpfa import ModelBuilder, add_matrix_sources, apply_matrix_boundary, matrix_couplings, solve_model

log = logging.getLogger(__name__)

MAX_ASPECT = 1e4


class ReferenceGridError(MeshError):
    pass


@dataclass(frozen=True, eq=False)
class EquiDimGrid:
    mesh: Mesh
    xs: np.ndarray
    ys: np.ndarray
    K: np.ndarray
    zones: List[np.ndarray]
    params: Dict[str, float] = field(default_factory=dict)

    @property
    def fracture_mask(self) -> np.ndarray:
        m = np.zeros(self.mesh.n_cells, dtype=bool)
        for z in self.zones:
            m[z] = True
        return m


def graded_fill(length: float, h_left: Optional[float], h_right: Optional[float], ratio: float,
                h_max: float) -> np.ndarray:
    """Cell sizes filling ``length``, growing by ``ratio`` away from each side that has a start size."""
    if length <= 0:
        return np.empty(0)
    left, right = [], []
    total = 0.0
    hl, hr = h_left, h_right
    while True:
        moved = False
        if hl is not None and hl < h_max and total + hl <= length:
            left.append(hl)
            total += hl
            hl *= ratio
            moved = True
        if hr is not None and hr < h_max and total + hr <= length:
            right.append(hr)
            total += hr
            hr *= ratio
            moved = True
        if not moved:
            break
    rem = length - total
    edge = max(left[-1:] + right[-1:], default=h_max)
    middle: List[float] = []
    if rem > 0.5 * min(edge * ratio, h_max):
        m = max(1, math.ceil(rem / h_max))
        middle = [rem / m] * m
        sizes = np.array(left + middle + right[::-1])
    else:
        sizes = np.array(left + right[::-1], dtype=float)
        if sizes.size == 0:
            return np.array([length])
        sizes *= length / sizes.sum()
    return sizes


def axis_nodes(lo: float, hi: float, strips: Sequence[Tuple[float, float]], points: Sequence[float],
               cells_across: int, ratio: float, h_max: float) -> np.ndarray:
    """Grid coordinates on [lo, hi] resolving strips and refining towards points."""
    span = hi - lo
    tol = 1e-12 * span
    merged: List[List[float]] = []
    for a, b in sorted((max(lo, a), min(hi, b)) for a, b in strips):
        if merged and a <= merged[-1][1] + tol:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    widths = [b - a for a, b in merged]
    h0 = min(widths) / cells_across if widths else None
    feats: List[Tuple[float, float, np.ndarray]] = []
    for a, b in merged:
        n = max(cells_across, int(round((b - a) / h0)))
        feats.append((a, b, np.linspace(a, b, n + 1)))
    inside = lambda p: any(a - tol <= p <= b + tol for a, b in merged)
    for p in sorted(set(float(p) for p in points)):
        if lo + tol < p < hi - tol and not inside(p):
            feats.append((p, p, np.array([p])))
    feats.sort(key=lambda f: f[0])
    h_pt = h0 if h0 is not None else span / 200.0
    nodes = [np.array([lo])]
    cur, cur_h = lo, None
    for a, b, fnodes in feats:
        nodes.append(cur + np.cumsum(graded_fill(a - cur, cur_h, h_pt, ratio, h_max)))
        nodes.append(fnodes)
        cur, cur_h = b, h_pt
    nodes.append(cur + np.cumsum(graded_fill(hi - cur, cur_h, None, ratio, h_max)))
    allc = np.sort(np.concatenate(nodes + [np.asarray([p for p in points if lo < p < hi], float)]))
    keep = np.ones(len(allc), dtype=bool)
    keep[1:] = np.diff(allc) > (h0 if h0 else span) * 1e-6
    out = allc[keep]
    out[0], out[-1] = lo, hi
    return out


def _rectangle(scenario) -> Tuple[float, float, float, float]:
    x0, y0, x1, y1 = scenario.bbox
    d = np.asarray(scenario.domain)
    on_edge = (np.isclose(d[:, 0], x0) | np.isclose(d[:, 0], x1)) & (np.isclose(d[:, 1], y0) | np.isclose(d[:, 1], y1))
    if not np.all(on_edge) or not math.isclose(scenario.area, (x1 - x0) * (y1 - y0), rel_tol=1e-12):
        raise ReferenceGridError("the tensor-grid reference needs a rectangular, axis-aligned domain")
    return x0, y0, x1, y1


def _orientation(frac, tol) -> str:
    (xa, ya), (xb, yb) = frac.a, frac.b
    if abs(xa - xb) <= tol:
        return "v"
    if abs(ya - yb) <= tol:
        return "h"
    raise ReferenceGridError(f"fracture {frac.a}-{frac.b} is not axis aligned; the tensor-grid reference "
                             "can not resolve it")


def build_equidimensional_grid(scenario, cells_across: int = 10, grading: float = 1.3,
                               h_max: Optional[float] = None) -> EquiDimGrid:
    if cells_across < 1:
        raise ValueError("cells_across must be >= 1")
    if grading < 1.0:
        raise ValueError("grading ratio must be >= 1")
    x0, y0, x1, y1 = _rectangle(scenario)
    tol = scenario.tol
    net = list(scenario.network)
    kinds = [_orientation(f, tol) for f in net]
    if h_max is None:
        h_max = max(x1 - x0, y1 - y0) / 200.0
    if net:
        h0 = min(f.aperture for f in net) / cells_across
        h_max = min(h_max, MAX_ASPECT * h0)
    xstrips = [(f.a[0] - f.aperture / 2, f.a[0] + f.aperture / 2) for f, k in zip(net, kinds) if k == "v"]
    ystrips = [(f.a[1] - f.aperture / 2, f.a[1] + f.aperture / 2) for f, k in zip(net, kinds) if k == "h"]
    xpts = [c for f, k in zip(net, kinds) if k == "h" for c in (f.a[0], f.b[0])]
    ypts = [c for f, k in zip(net, kinds) if k == "v" for c in (f.a[1], f.b[1])]
    xs = axis_nodes(x0, x1, xstrips, xpts, cells_across, grading, h_max)
    ys = axis_nodes(y0, y1, ystrips, ypts, cells_across, grading, h_max)
    return _grid_on_nodes(scenario, xs, ys, {"cells_across": cells_across, "grading": grading, "h_max": h_max})


def _grid_on_nodes(scenario, xs, ys, params) -> EquiDimGrid:
    net = list(scenario.network)
    kinds = [_orientation(f, scenario.tol) for f in net]
    mesh = build_tensor_grid(xs, ys)
    c = mesh.cell_centroid
    K = scenario.permeability(c)
    inv_sum = np.zeros((mesh.n_cells, 2))
    count = np.zeros(mesh.n_cells)
    zones = []
    for f, k in zip(net, kinds):
        if k == "v":
            lo, hi = sorted((f.a[1], f.b[1]))
            m = (np.abs(c[:, 0] - f.a[0]) < f.aperture / 2) & (c[:, 1] > lo) & (c[:, 1] < hi)
            kz = (f.k_n, f.k_t)
        else:
            lo, hi = sorted((f.a[0], f.b[0]))
            m = (np.abs(c[:, 1] - f.a[1]) < f.aperture / 2) & (c[:, 0] > lo) & (c[:, 0] < hi)
            kz = (f.k_t, f.k_n)
        zones.append(np.flatnonzero(m))
        inv_sum[m] += 1.0 / np.asarray(kz)
        count[m] += 1
    z = count > 0
    K[z] = 0.0
    K[z, 0, 0] = count[z] / inv_sum[z, 0]
    K[z, 1, 1] = count[z] / inv_sum[z, 1]
    log.info("reference grid %d x %d = %d cells", len(xs) - 1, len(ys) - 1, mesh.n_cells)
    return EquiDimGrid(mesh, np.asarray(xs), np.asarray(ys), K, zones, dict(params))


def refine_grid(scenario, grid: EquiDimGrid) -> EquiDimGrid:
    """Nested refinement: every interval of both axes is bisected."""
    def bisect(x):
        x = np.asarray(x)
        out = np.empty(2 * len(x) - 1)
        out[0::2] = x
        out[1::2] = 0.5 * (x[:-1] + x[1:])
        return out

    params = dict(grid.params)
    params["cells_across"] = 2 * params.get("cells_across", 1)
    params["h_max"] = 0.5 * params.get("h_max", np.inf)
    params["level"] = params.get("level", 0) + 1
    return _grid_on_nodes(scenario, bisect(grid.xs), bisect(grid.ys), params)


def nested_difference(coarse: EquiDimGrid, p_coarse, fine: EquiDimGrid, p_fine) -> float:
    """L2 difference of two nested tensor-grid fields, normalized by the fine-field range.

    Every fine cell lies inside exactly one coarse cell, so the overlap
    integral reduces to a lookup by axis interval.
    """
    def axis_index(g, pts):
        i = np.searchsorted(g.xs, pts[:, 0], side="right") - 1
        j = np.searchsorted(g.ys, pts[:, 1], side="right") - 1
        return i, j

    ci, cj = axis_index(coarse, coarse.mesh.cell_centroid)
    lut = np.full((len(coarse.xs) - 1, len(coarse.ys) - 1), -1, dtype=np.int64)
    lut[ci, cj] = np.arange(coarse.mesh.n_cells)
    fi, fj = axis_index(coarse, fine.mesh.cell_centroid)
    owner = lut[fi, fj]
    if np.any(owner < 0):
        raise ReferenceGridError("grids are not nested")
    pf = np.asarray(p_fine, float)
    pc = np.asarray(p_coarse, float)[owner]
    area = fine.mesh.cell_area
    return float(np.sqrt(np.sum(area * (pf - pc) ** 2) / area.sum()) / np.ptp(pf))


def solve_reference(scenario, grid: EquiDimGrid, tol: float = 1e-10) -> SolutionField:
    mesh = grid.mesh
    B = ModelBuilder()
    dof = B.add_dofs(MATRIX, mesh.n_cells)
    i, j, T = matrix_couplings(mesh, grid.K, mesh.interior_faces)
    B.couple(dof[i], dof[j], T, "matrix-matrix")
    apply_matrix_boundary(B, mesh, scenario, grid.K, dof)
    add_matrix_sources(B, mesh, scenario, dof)
    model = B.build()
    system, p, _, res = solve_model(model, stats=False, tol=min(tol, 1e-14))
    if res > tol:
        raise RuntimeError(f"reference solve residual {res:.2e} above {tol:.0e}")
    info = dict(grid.params)
    info.update({"scenario": scenario.name, "n_cells": mesh.n_cells, "nx": len(grid.xs) - 1, "ny": len(grid.ys) - 1,
                 "fracture_cells": int(grid.fracture_mask.sum()), "relative_residual": res})
    return SolutionField("reference", mesh, p, scenario=scenario, model=model, system=system, info=info)


def write_reference(ref: SolutionField, path) -> None:
    meta = {k: v for k, v in ref.info.items() if isinstance(v, (int, float, str))}
    write_field(ref, path, meta)


def read_reference(path) -> SolutionField:
    """Read a reference field file (our own or an externally converted one)."""
    return read_field(path)


# -- hybrid-dimensional reference for slanted networks -------------------------------------

# (max triangle area, fracture segment length) of the fine conforming Delaunay meshes
HYBRID_REFERENCE_SIZES = {"3a": (1.6e-5, 0.005), "3b": (1.6e-5, 0.005)}


def solve_hybrid_reference(scenario, max_area: float, fracture_h: float,
                           intersection_mixing: str = "harmonic") -> SolutionField:
    """Fine-mesh hybrid solution for networks the tensor grid can not resolve.

    Uses the conforming scheme with explicit intersection cells on a
    conforming Delaunay triangulation with circumcenters as cell points,
    which makes the two-point fluxes consistent. It shares the hybrid
    fracture model with the methods it is compared against, so it measures
    discretization error only.
    """
    mesh = conforming_triangulation(scenario, max_area, fracture_h=fracture_h, delaunay=True)
    sol = assemble_and_solve(scenario, mesh, mode="keep_intersections", intersection_mixing=intersection_mixing,
                             stats=False, centers=mesh.circumcenters)
    info = dict(sol.info, scenario=scenario.name, n_cells=mesh.n_cells, max_area=max_area, fracture_h=fracture_h)
    return dataclasses.replace(sol, method="hybrid_reference", info=info)
