"""Conforming cell-centered DFM with hybrid fracture faces.

Fractures coincide with mesh faces. Each tagged face carries a fracture
cell of volume ``length * aperture`` whose two sides are hybrid faces shifted
half an aperture into the adjacent matrix cells, so pressure may jump across
the fracture. Fracture cells meeting at a vertex of two or more fractures are
either coupled directly by star-delta elimination of the (sourceless)
intersection cell, or through an explicit intersection cell.
"""

from __future__ import annotations

import logging
from typing import Dict, List, Optional, Tuple

import numpy as np

from .fields import FractureCells, SolutionField
from .linalg import FRACTURE, INTERSECTION, MATRIX
from .mesh import Mesh, MeshError, tag_fracture_faces
from .tpfa import (ModelBuilder, TransmissibilityError, add_matrix_sources, apply_fracture_end_condition,
                   apply_matrix_boundary, half_transmissibility, harmonic, matrix_couplings, solve_model, star_delta)

log = logging.getLogger(__name__)

MODES = ("eliminate", "keep_intersections")


class ConformityError(MeshError):
    pass


def matrix_matrix_transmissibility(alpha_l, alpha_r):
    return harmonic(alpha_l, alpha_r)


def fracture_half_transmissibility(face_length, aperture, k_n):
    """Normal half transmissibility of a fracture cell towards one hybrid face."""
    return np.asarray(face_length, float) * np.asarray(k_n, float) / (0.5 * np.asarray(aperture, float))


def matrix_fracture_transmissibility(face_length, normal_out, face_centroid, cell_centroid, K, aperture, k_n,
                                     clamp: bool = False):
    """Matrix cell to fracture cell through a hybrid face.

    ``normal_out`` points from the matrix cell into the fracture. The matrix
    half transmissibility is taken to the hybrid face, i.e. the fracture face
    moved half an aperture towards the cell. A cell point within half an
    aperture of the face is an error unless ``clamp`` is set, in which case
    the matrix resistance is taken as zero.
    """
    n = np.asarray(normal_out, float)
    fc = np.asarray(face_centroid, float)
    cc = np.asarray(cell_centroid, float)
    eps = np.asarray(aperture, float)
    gap = np.einsum("...i,...i->...", n, fc - cc)
    close = np.atleast_1d(gap <= 0.5 * eps)
    bad = np.flatnonzero(close & (not clamp or np.atleast_1d(gap <= 0)))
    if bad.size:
        raise ConformityError(f"aperture {np.atleast_1d(eps)[bad[0]]:.3g} too large for the mesh: cell centroid lies "
                              f"{np.atleast_1d(gap)[bad[0]]:.3g} from the fracture face")
    d = fc - 0.5 * eps[..., None] * n - cc
    am = np.atleast_1d(half_transmissibility(face_length, n, K, d)).astype(float)
    am[close] = np.inf
    if np.any(am <= 0):
        raise TransmissibilityError("non-positive matrix half transmissibility at a hybrid face")
    return harmonic(am, fracture_half_transmissibility(face_length, eps, k_n))


def fracture_end_transmissibility(length, aperture, k_t):
    """Tangential half transmissibility from a fracture-cell center to either end."""
    return np.asarray(aperture, float) * np.asarray(k_t, float) / (0.5 * np.asarray(length, float))


def fracture_fracture_transmissibility(length_1, length_2, aperture_1, aperture_2, k_t_1, k_t_2):
    return harmonic(fracture_end_transmissibility(length_1, aperture_1, k_t_1),
                    fracture_end_transmissibility(length_2, aperture_2, k_t_2))


def star_delta_eliminate(alpha) -> List[Tuple[int, int, float]]:
    """Pairwise ``T_ij = a_i a_j / sum_k a_k`` for a removed intersection cell."""
    return star_delta(alpha)


def _fracture_cells(mesh: Mesh, network, tagging) -> Tuple[FractureCells, np.ndarray]:
    ids, aa, bb, eps, t0, t1, faces = [], [], [], [], [], [], []
    owner: Dict[int, int] = {}
    for fid, frac in enumerate(network):
        a = np.asarray(frac.a)
        d = np.asarray(frac.b) - a
        dd = float(d @ d)
        for f in tagging.faces[fid]:
            f = int(f)
            if f in owner:
                raise ConformityError(f"face {f} lies on fractures {owner[f]} and {fid}; overlapping fractures")
            owner[f] = fid
            if mesh.face_cells[f, 1] < 0:
                raise ConformityError(f"fracture {fid} runs along the domain boundary (face {f})")
            p, q = mesh.vertices[mesh.face_nodes[f]]
            s, u = (p - a) @ d / dd, (q - a) @ d / dd
            if s > u:
                p, q, s, u = q, p, u, s
            ids.append(fid), aa.append(p), bb.append(q), eps.append(frac.aperture)
            t0.append(s), t1.append(u), faces.append(f)
    faces = np.asarray(faces, np.int64)
    fc = FractureCells(np.asarray(ids, np.int64), np.asarray(aa).reshape(-1, 2), np.asarray(bb).reshape(-1, 2),
                       np.asarray(eps, float), np.asarray(t0, float), np.asarray(t1, float), faces)
    return fc, faces


def assemble(scenario, mesh: Mesh, mode: str = "eliminate", intersection_mixing: str = "harmonic",
             centers: Optional[np.ndarray] = None):
    """Build the discrete model. Returns (FlowModel, FractureCells, intersection points).

    ``centers`` replaces the cell centroids as two-point cell locations; with
    circumcenters of a Delaunay triangulation the scheme is consistent.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    if intersection_mixing not in ("harmonic", "branch"):
        raise ValueError(f"unknown intersection mixing {intersection_mixing!r}")
    network = scenario.network
    tagging = tag_fracture_faces(mesh, network, tol=scenario.tol)
    fr, ffaces = _fracture_cells(mesh, network, tagging)
    nf = len(fr)
    k_n = np.array([network[i].k_n for i in fr.fracture_id]) if nf else np.empty(0)
    k_t = np.array([network[i].k_t for i in fr.fracture_id]) if nf else np.empty(0)

    B = ModelBuilder()
    mdof = B.add_dofs(MATRIX, mesh.n_cells)
    fdof = B.add_dofs(FRACTURE, nf)
    K = scenario.permeability(mesh.cell_centroid)

    # matrix-matrix
    inner = np.setdiff1d(mesh.interior_faces, ffaces)
    i, j, T = matrix_couplings(mesh, K, inner, centers)
    B.couple(mdof[i], mdof[j], T, "matrix-matrix")

    # matrix-fracture through the two hybrid faces
    pts = mesh.cell_centroid if centers is None else centers
    if nf:
        for side, sign in ((0, 1.0), (1, -1.0)):
            cells = mesh.face_cells[ffaces, side]
            T = matrix_fracture_transmissibility(mesh.face_length[ffaces], sign * mesh.face_normal[ffaces],
                                                 mesh.face_centroid[ffaces], pts[cells], K[cells],
                                                 fr.aperture, k_n, clamp=centers is not None)
            B.couple(mdof[cells], fdof, T, "matrix-fracture")

    # fracture-fracture through shared vertices
    length = fr.length
    alpha_end = fracture_end_transmissibility(length, fr.aperture, k_t)
    at_vertex: Dict[int, List[int]] = {}
    for k, f in enumerate(ffaces):
        for v in mesh.face_nodes[f]:
            at_vertex.setdefault(int(v), []).append(k)
    xpoints, xinfo = [], []
    for v in sorted(at_vertex):
        ks = at_vertex[v]
        point = mesh.vertices[v]
        if mesh.boundary_vertex_mask[v]:
            for k in ks:
                apply_fracture_end_condition(B, scenario, fdof[k], point, fr.aperture[k], k_t[k], 0.5 * length[k])
        if len(ks) == 1:
            continue  # immersed tip
        fids = {int(fr.fracture_id[k]) for k in ks}
        if len(fids) == 1:
            if len(ks) != 2:
                raise ConformityError(f"fracture {fids.pop()} visits vertex {v} more than once")
            k1, k2 = ks
            B.couple(fdof[k1], fdof[k2], harmonic(alpha_end[k1], alpha_end[k2]), "fracture-fracture")
        elif mode == "eliminate":
            for a, b, t in star_delta([alpha_end[k] for k in ks]):
                B.couple(fdof[ks[a]], fdof[ks[b]], t, "fracture-fracture")
        else:
            xpoints.append(point)
            xinfo.append(ks)
    if xinfo:
        xdof = B.add_dofs(INTERSECTION, len(xinfo))
        for x, ks in zip(xdof, xinfo):
            eps = fr.aperture[ks]
            eps_bar = float(eps.mean())
            if intersection_mixing == "harmonic":
                k_x = np.full(len(ks), len(ks) / float(np.sum(1.0 / k_t[ks])))
            else:
                k_x = k_t[ks]
            alpha_x = eps * k_x / (0.5 * eps_bar)
            B.couple(fdof[ks], np.full(len(ks), x), harmonic(alpha_end[ks], alpha_x), "fracture-intersection")

    apply_matrix_boundary(B, mesh, scenario, K, mdof, centers)
    add_matrix_sources(B, mesh, scenario, mdof)
    return B.build(), fr, np.asarray(xpoints, float).reshape(-1, 2)


def assemble_and_solve(scenario, mesh: Mesh, mode: str = "eliminate", intersection_mixing: str = "harmonic",
                       stats: bool = True, tol: float = 1e-14, centers: Optional[np.ndarray] = None) -> SolutionField:
    model, fr, xpoints = assemble(scenario, mesh, mode, intersection_mixing, centers)
    system, p, ms, res = solve_model(model, stats, tol)
    nc, nf = mesh.n_cells, len(fr)
    method = "ccdfm" if mode == "eliminate" else "ccdfm_star"
    info = {"mode": mode, "intersection_mixing": intersection_mixing, "n_dofs": system.n,
            "relative_residual": res}
    log.info("%s: %d dofs, residual %.2e", method, system.n, info["relative_residual"])
    return SolutionField(method, mesh, p[:nc], fr, p[nc:nc + nf], xpoints, p[nc + nf:], scenario, model, system, ms,
                         info)
