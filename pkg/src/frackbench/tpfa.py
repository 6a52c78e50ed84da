"""Two-point flux building blocks shared by the DFM, EDFM and reference solvers."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from .linalg import (FRACTURE, INTERSECTION, MATRIX, Factorization, MatrixStats, SparseSystem, TripletBuffer,
                     matrix_stats, refine_extended, relative_residual)
from .mesh import Mesh


class TransmissibilityError(ValueError):
    pass


def half_transmissibility(area, normal, K, d) -> np.ndarray:
    """``A n^T K d / (d^T d)`` for arrays of faces.

    ``normal`` is the unit normal pointing away from the cell, ``d`` the
    vector from the cell center to the face centroid, ``K`` of shape
    ``(..., 2, 2)``.
    """
    area = np.asarray(area, dtype=float)
    n = np.asarray(normal, dtype=float)
    d = np.asarray(d, dtype=float)
    K = np.asarray(K, dtype=float)
    Kd = np.einsum("...ij,...j->...i", K, d)
    return area * np.einsum("...i,...i->...", n, Kd) / np.einsum("...i,...i->...", d, d)


def harmonic(a, b) -> np.ndarray:
    """Series combination ``a b / (a + b)`` of two half transmissibilities."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(over="ignore", invalid="ignore"):
        out = a * b / (a + b)
    # an infinite half transmissibility leaves the other one
    out = np.where(np.isinf(a), b, out)
    out = np.where(np.isinf(b), a, out)
    return out


def star_delta(alpha) -> List[Tuple[int, int, float]]:
    """Pairwise transmissibilities ``a_i a_j / sum(a)`` replacing a sourceless hub."""
    alpha = np.asarray(alpha, dtype=float)
    if len(alpha) < 2:
        raise ValueError("star-delta elimination needs at least two branches")
    s = alpha.sum()
    return [(i, j, float(alpha[i] * alpha[j] / s)) for i in range(len(alpha)) for j in range(i + 1, len(alpha))]


@dataclass
class FlowModel:
    """Discrete two-point flow problem on a set of unknowns.

    Couplings carry flux ``T (p_i - p_j)`` from i to j. Dirichlet terms carry
    ``alpha (p_i - value)`` out of unknown i; Neumann terms a fixed outward
    flux. ``source`` is the integrated source per unknown.
    """

    entity_kind: np.ndarray
    entity_index: np.ndarray
    conn_i: np.ndarray
    conn_j: np.ndarray
    conn_T: np.ndarray
    conn_kind: np.ndarray
    dir_dof: np.ndarray
    dir_alpha: np.ndarray
    dir_value: np.ndarray
    neu_dof: np.ndarray
    neu_flux: np.ndarray
    source: np.ndarray

    @property
    def n(self) -> int:
        return len(self.entity_kind)

    def system(self) -> SparseSystem:
        buf = TripletBuffer(self.n)
        buf.add_couplings(self.conn_i, self.conn_j, self.conn_T)
        if len(self.dir_dof):
            if np.any(self.dir_alpha <= 0):
                raise TransmissibilityError("non-positive boundary transmissibility")
            buf.add_diagonal(self.dir_dof, self.dir_alpha)
            buf.add_rhs(self.dir_dof, self.dir_alpha * self.dir_value)
        buf.add_rhs(self.neu_dof, -self.neu_flux)
        buf.rhs += self.source
        return SparseSystem(buf.matrix(), buf.rhs, self.entity_kind.copy(), self.entity_index.copy())

    def fluxes(self, p) -> np.ndarray:
        return self.conn_T * (p[self.conn_i] - p[self.conn_j])

    def dirichlet_fluxes(self, p) -> np.ndarray:
        return self.dir_alpha * (p[self.dir_dof] - self.dir_value)

    def residual(self, p) -> np.ndarray:
        """Net outflow minus source for each unknown."""
        f = self.fluxes(p)
        r = np.zeros(self.n, dtype=f.dtype)
        np.add.at(r, self.conn_i, f)
        np.add.at(r, self.conn_j, -f)
        np.add.at(r, self.dir_dof, self.dirichlet_fluxes(p))
        np.add.at(r, self.neu_dof, self.neu_flux)
        return r - self.source

    def max_face_flux(self, p) -> float:
        parts = [np.abs(self.fluxes(p)), np.abs(self.dirichlet_fluxes(p)), np.abs(self.neu_flux)]
        return float(max((x.max() for x in parts if x.size), default=0.0))

    def boundary_balance(self, p) -> Tuple[float, float]:
        """Total (inflow, outflow) across the domain boundary."""
        out = np.concatenate([self.dirichlet_fluxes(p), self.neu_flux])
        return float(-out[out < 0].sum()), float(out[out > 0].sum())

    def pressure_bounds(self, p) -> Tuple[float, float]:
        """Bounds implied by the discrete maximum principle.

        Extremes of a sourceless solution are attained at Dirichlet data or
        at unknowns receiving a prescribed nonzero Neumann flux.
        """
        vals = [self.dir_value]
        active = self.neu_dof[self.neu_flux != 0]
        if active.size:
            vals.append(p[active])
        v = np.concatenate(vals)
        return float(v.min()), float(v.max())


class ModelBuilder:
    def __init__(self):
        self.kind: List[int] = []
        self.index: List[int] = []
        self._c: List[Tuple[np.ndarray, np.ndarray, np.ndarray, str]] = []
        self._d: List[Tuple[np.ndarray, np.ndarray, np.ndarray]] = []
        self._n: List[Tuple[np.ndarray, np.ndarray]] = []
        self._s: List[Tuple[np.ndarray, np.ndarray]] = []

    def add_dofs(self, kind: int, count: int) -> np.ndarray:
        start = len(self.kind)
        self.kind += [kind] * count
        self.index += list(range(count))
        return np.arange(start, start + count)

    def couple(self, i, j, T, kind: str) -> None:
        i = np.atleast_1d(np.asarray(i, dtype=np.int64))
        j = np.atleast_1d(np.asarray(j, dtype=np.int64))
        T = np.broadcast_to(np.asarray(T, dtype=float), i.shape)
        if i.size:
            self._c.append((i, j, T.copy(), kind))

    def dirichlet(self, dof, alpha, value) -> None:
        dof = np.atleast_1d(np.asarray(dof, dtype=np.int64))
        if dof.size:
            self._d.append((dof, np.broadcast_to(np.asarray(alpha, float), dof.shape).copy(),
                            np.broadcast_to(np.asarray(value, float), dof.shape).copy()))

    def neumann(self, dof, flux) -> None:
        dof = np.atleast_1d(np.asarray(dof, dtype=np.int64))
        if dof.size:
            self._n.append((dof, np.broadcast_to(np.asarray(flux, float), dof.shape).copy()))

    def add_source(self, dof, q) -> None:
        dof = np.atleast_1d(np.asarray(dof, dtype=np.int64))
        if dof.size:
            self._s.append((dof, np.broadcast_to(np.asarray(q, float), dof.shape).copy()))

    def build(self) -> FlowModel:
        n = len(self.kind)

        def cat(parts, k, dtype=float):
            return np.concatenate([p[k] for p in parts]).astype(dtype) if parts else np.empty(0, dtype=dtype)

        src = np.zeros(n)
        for d, q in self._s:
            np.add.at(src, d, q)
        kinds = np.concatenate([np.full(len(c[0]), c[3], dtype=object) for c in self._c]) if self._c else np.empty(0, object)
        return FlowModel(
            entity_kind=np.asarray(self.kind, dtype=np.int64),
            entity_index=np.asarray(self.index, dtype=np.int64),
            conn_i=cat(self._c, 0, np.int64), conn_j=cat(self._c, 1, np.int64), conn_T=cat(self._c, 2),
            conn_kind=kinds,
            dir_dof=cat(self._d, 0, np.int64), dir_alpha=cat(self._d, 1), dir_value=cat(self._d, 2),
            neu_dof=cat(self._n, 0, np.int64), neu_flux=cat(self._n, 1),
            source=src,
        )


def solve_model(model: FlowModel, stats: bool = True, tol: float = 1e-14
                ) -> Tuple[SparseSystem, np.ndarray, Optional[MatrixStats], float]:
    """Factorize, solve with extended-precision refinement and optionally estimate conditioning.

    The returned pressures are long double.
    """
    system = model.system()
    fac = Factorization(system.A)
    p = refine_extended(system.A, system.b, fac, tol=tol, residual=lambda x: -model.residual(x))
    ms = matrix_stats(system, factorization=fac) if stats else None
    # measured on the flux form; the assembled A carries rounded diagonal sums
    nb = float(np.linalg.norm(system.b)) or 1.0
    return system, p, ms, float(np.linalg.norm(model.residual(p))) / nb


# -- matrix-grid helpers --------------------------------------------------------------

def cell_half_transmissibilities(mesh: Mesh, K: np.ndarray, faces: np.ndarray, side: int,
                                 centers: Optional[np.ndarray] = None, check: bool = True) -> np.ndarray:
    """Half transmissibility of cell ``face_cells[f, side]`` towards face ``f``.

    Cell points default to centroids; ``centers`` overrides them (e.g. with
    circumcenters of a Delaunay mesh, for which a half may be negative while
    the pair sum stays positive, so pass ``check=False``).
    """
    cells = mesh.face_cells[faces, side]
    pts = mesh.cell_centroid if centers is None else centers
    n = mesh.face_normal[faces] * (1.0 if side == 0 else -1.0)
    d = mesh.face_centroid[faces] - pts[cells]
    alpha = half_transmissibility(mesh.face_length[faces], n, K[cells], d)
    bad = np.flatnonzero(~(alpha > 0)) if check else np.empty(0, dtype=np.int64)
    if bad.size:
        f = int(faces[bad[0]])
        raise TransmissibilityError(f"non-positive half transmissibility {alpha[bad[0]]:.3e} at face {f} "
                                    f"(cell {int(cells[bad[0]])}); grid too far from K-orthogonal")
    return alpha


def matrix_couplings(mesh: Mesh, K: np.ndarray, faces: np.ndarray, centers: Optional[np.ndarray] = None
                     ) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Matrix-matrix transmissibilities of the given interior faces.

    With ``centers`` given the cell points are assumed to lie on the face
    normals (orthogonal grid), and ``T = A / (d_L / k_L + d_R / k_R)`` with
    signed normal distances, which tolerates a point on or beyond its face.
    """
    faces = np.asarray(faces, dtype=np.int64)
    if centers is None:
        aL = cell_half_transmissibilities(mesh, K, faces, 0)
        aR = cell_half_transmissibilities(mesh, K, faces, 1)
        T = 1.0 / (1.0 / aL + 1.0 / aR)
    else:
        n = mesh.face_normal[faces]
        fc = mesh.face_centroid[faces]
        L, R = mesh.face_cells[faces, 0], mesh.face_cells[faces, 1]
        dL = np.einsum("ij,ij->i", n, fc - centers[L])
        dR = np.einsum("ij,ij->i", -n, fc - centers[R])
        kL = np.einsum("ij,ijk,ik->i", n, K[L], n)
        kR = np.einsum("ij,ijk,ik->i", n, K[R], n)
        res = dL / kL + dR / kR
        # co-circular neighbours share a point; couple them strongly but finitely
        floor = 1e-8 * mesh.face_length[faces] / np.maximum(kL, kR)
        near = np.abs(res) <= floor
        res[near] = floor[near]
        with np.errstate(divide="ignore", invalid="ignore"):
            T = mesh.face_length[faces] / res
    bad = np.flatnonzero(~(T > 0) | ~np.isfinite(T))
    if bad.size:
        raise TransmissibilityError(f"non-positive transmissibility at face {int(faces[bad[0]])}; "
                                    "cell points are not ordered across it")
    return mesh.face_cells[faces, 0], mesh.face_cells[faces, 1], T


def boundary_face_tags(mesh: Mesh, scenario) -> Dict[int, str]:
    """Boundary tag per boundary face, from the mesh file when usable, else by geometry."""
    bfaces = mesh.boundary_faces
    stored = mesh.face_tags()
    if stored and all(t in scenario.boundary for t in stored.values()) and set(stored) >= set(bfaces.tolist()):
        return {int(f): stored[int(f)] for f in bfaces}
    tags = scenario.classify_boundary(mesh.face_centroid[bfaces])
    return {int(f): t for f, t in zip(bfaces, tags)}


def apply_matrix_boundary(builder: ModelBuilder, mesh: Mesh, scenario, K: np.ndarray, dof_of_cell: np.ndarray,
                          centers: Optional[np.ndarray] = None) -> None:
    tags = boundary_face_tags(mesh, scenario)
    bfaces = np.array(sorted(tags), dtype=np.int64)
    if bfaces.size == 0:
        return
    bc_of = {bc.tag: bc for bc in scenario.bcs}
    kinds = np.array([bc_of[tags[int(f)]].kind for f in bfaces])
    dfaces = bfaces[kinds == "dirichlet"]
    nfaces = bfaces[kinds == "neumann"]
    if dfaces.size:
        alpha = cell_half_transmissibilities(mesh, K, dfaces, 0, centers)
        values = np.empty(len(dfaces))
        for tag in set(tags[int(f)] for f in dfaces):
            m = np.array([tags[int(f)] == tag for f in dfaces])
            values[m] = bc_of[tag].evaluate(mesh.face_centroid[dfaces[m]])
        builder.dirichlet(dof_of_cell[mesh.face_cells[dfaces, 0]], alpha, values)
    if nfaces.size:
        flux = np.array([bc_of[tags[int(f)]].value for f in nfaces]) * mesh.face_length[nfaces]
        nz = flux != 0
        builder.neumann(dof_of_cell[mesh.face_cells[nfaces[nz], 0]], flux[nz])


def apply_fracture_end_condition(builder: ModelBuilder, scenario, dof: int, point, aperture: float,
                                 k_t: float, half_length: float) -> None:
    """Boundary connection of a fracture cell whose end lies on the domain boundary."""
    tag = scenario.classify_boundary([point])[0]
    bc = scenario.bc(tag)
    if bc.kind == "dirichlet":
        builder.dirichlet(dof, aperture * k_t / half_length, bc.evaluate([point])[0])
    elif bc.value != 0.0:
        builder.neumann(dof, bc.value * aperture)


def add_matrix_sources(builder: ModelBuilder, mesh: Mesh, scenario, dof_of_cell) -> None:
    if scenario.source != 0.0:
        builder.add_source(dof_of_cell, scenario.source * mesh.cell_area)


__all__ = [
    "FlowModel", "ModelBuilder", "TransmissibilityError", "half_transmissibility", "harmonic", "star_delta",
    "matrix_couplings", "cell_half_transmissibilities", "apply_matrix_boundary", "apply_fracture_end_condition",
    "boundary_face_tags", "solve_model", "MATRIX", "FRACTURE", "INTERSECTION",
]
