"""Embedded DFM on a non-conforming background grid.

Each fracture is cut by the background cells into fragments, one per
(fracture, cell) pair. Fragments exchange with their host cell, with the
neighbouring fragments of the same fracture, and with fragments of other
fractures at crossing points. Pressure is single valued in each matrix cell,
so a fracture can not hold a pressure jump.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .fields import FractureCells, SolutionField
from .geometry import (GeometryError, Segment, clip_segment_to_polygon, mean_distance_along_segment,
                       mean_distance_cell_to_segment, segment_intersection)
from .linalg import FRACTURE, MATRIX
from .mesh import Mesh, MeshError
from .tpfa import (ModelBuilder, add_matrix_sources, apply_fracture_end_condition, apply_matrix_boundary, harmonic,
                   matrix_couplings, solve_model)

log = logging.getLogger(__name__)

MERGE_REL = 1e-6


class EmbeddingError(MeshError):
    pass


@dataclass(frozen=True)
class IntersectionRecord:
    """Crossing of two fractures, with the incident fragment on each."""

    fractures: Tuple[int, int]
    fragments: Tuple[int, int]
    point: Tuple[float, float]
    host: int


@dataclass(frozen=True, eq=False)
class Embedding:
    fragments: FractureCells
    k_n: np.ndarray
    k_t: np.ndarray
    intersections: List[IntersectionRecord]
    merged: List[Tuple[int, float]] = field(default_factory=list)

    def fragments_of(self, fid: int) -> np.ndarray:
        return np.flatnonzero(self.fragments.fracture_id == fid)


def _cell_bboxes(mesh: Mesh) -> np.ndarray:
    cn = np.where(mesh.cell_nodes >= 0, mesh.cell_nodes, mesh.cell_nodes[:, :1])
    p = mesh.vertices[cn]
    return np.concatenate([p.min(axis=1), p.max(axis=1)], axis=1)


def _check_collinear(mesh: Mesh, fid: int, seg: Segment, tol: float) -> None:
    v = mesh.vertices
    d = seg.direction
    L = seg.length
    dist = np.abs((v - seg.a) @ seg.normal)
    t = (v - seg.a) @ d / (L * L)
    fa, fb = mesh.face_nodes[:, 0], mesh.face_nodes[:, 1]
    on = (dist[fa] <= tol) & (dist[fb] <= tol)
    lo = np.clip(np.minimum(t[fa], t[fb]), 0.0, 1.0)
    hi = np.clip(np.maximum(t[fa], t[fb]), 0.0, 1.0)
    bad = np.flatnonzero(on & ((hi - lo) * L > tol))
    if bad.size:
        raise EmbeddingError(f"fracture {fid} runs along mesh face {int(bad[0])}; collinear fracture/edge overlaps "
                             "are not supported by the embedded method")


def embed_network(mesh: Mesh, network, tol: Optional[float] = None) -> Embedding:
    """Split every fracture into per-cell fragments and locate all crossings."""
    diag = float(np.hypot(*np.ptp(mesh.vertices, axis=0)))
    tol = 1e-9 * diag if tol is None else tol
    min_len = MERGE_REL * diag
    boxes = _cell_bboxes(mesh)
    ids, t0s, t1s, hosts, merged = [], [], [], [], []
    for fid, frac in enumerate(network):
        seg = frac.segment
        _check_collinear(mesh, fid, seg, tol)
        lo = np.minimum(seg.a, seg.b) - tol
        hi = np.maximum(seg.a, seg.b) + tol
        cand = np.flatnonzero(np.all(boxes[:, :2] <= hi, axis=1) & np.all(boxes[:, 2:] >= lo, axis=1))
        pieces = []
        L2 = seg.length ** 2
        for c in cand:
            poly = mesh.convex_cell(int(c))
            sd = (poly.vertices - seg.a) @ seg.normal
            if sd.min() > tol or sd.max() < -tol:
                continue
            piece = clip_segment_to_polygon(seg, poly, tol)
            if piece is None:
                continue
            s = float((piece.a - seg.a) @ seg.direction) / L2
            u = float((piece.b - seg.a) @ seg.direction) / L2
            pieces.append([min(s, u), max(s, u), int(c)])
        pieces.sort()
        # merge slivers into a neighbour on the same fracture
        out: List[list] = []
        for k, p in enumerate(pieces):
            if (p[1] - p[0]) * seg.length < min_len and len(pieces) > 1:
                merged.append((fid, (p[1] - p[0]) * seg.length))
                if out:
                    out[-1][1] = max(out[-1][1], p[1])
                else:
                    pieces[k + 1][0] = min(pieces[k + 1][0], p[0])
                continue
            out.append(p)
        cur = 0.0
        for s, u, _ in out:
            if (s - cur) * seg.length > tol:
                raise EmbeddingError(f"fracture {fid} leaves the background mesh near t={cur:.6g}")
            cur = max(cur, u)
        if (1.0 - cur) * seg.length > tol:
            raise EmbeddingError(f"fracture {fid} leaves the background mesh near t={cur:.6g}")
        for s, u, c in out:
            ids.append(fid), t0s.append(s), t1s.append(u), hosts.append(c)

    ids = np.asarray(ids, np.int64)
    t0s, t1s = np.asarray(t0s, float), np.asarray(t1s, float)
    A = np.array([network[i].a for i in ids], float).reshape(-1, 2)
    D = np.array([np.subtract(network[i].b, network[i].a) for i in ids], float).reshape(-1, 2)
    frags = FractureCells(ids, A + t0s[:, None] * D, A + t1s[:, None] * D,
                          np.array([network[i].aperture for i in ids], float), t0s, t1s, np.asarray(hosts, np.int64))
    k_n = np.array([network[i].k_n for i in ids], float)
    k_t = np.array([network[i].k_t for i in ids], float)

    crossings = []
    for i in range(len(network)):
        for j in range(i + 1, len(network)):
            x = segment_intersection(network[i].segment, network[j].segment, tol)
            if x is None:
                continue
            if x.kind == "overlap":
                raise EmbeddingError(f"fractures {i} and {j} overlap")
            fi = _fragment_at(frags, ids, i, x.t1)
            fj = _fragment_at(frags, ids, j, x.t2)
            crossings.append(IntersectionRecord((i, j), (fi, fj), tuple(float(c) for c in x.point), int(hosts[fi])))
    return Embedding(frags, k_n, k_t, crossings, merged)


def _fragment_at(frags: FractureCells, ids, fid: int, t: float) -> int:
    rows = np.flatnonzero(ids == fid)
    k = np.searchsorted(frags.t1[rows], t, side="left")
    return int(rows[min(k, len(rows) - 1)])


def matrix_fracture_T(cell, seg: Segment, K, tol: float = 0.0) -> float:
    """``A n^T K n / d`` with d the mean distance of the cell to the fragment's line."""
    d = mean_distance_cell_to_segment(cell, seg)
    if d <= tol:
        raise GeometryError("mean cell-to-fracture distance vanishes")
    n = seg.normal
    return seg.length * float(n @ np.asarray(K, float) @ n) / d


def intersection_half_T(length: float, position: float, aperture: float, k: float, s: float = 1.0) -> float:
    """``s k eps / d`` with d the mean distance along the fragment to the crossing point at ``position``."""
    d = mean_distance_along_segment(length, position)
    if d <= 0:
        raise GeometryError("crossing point leaves no fragment length")
    return s * k * aperture / d


def assemble(scenario, mesh: Mesh, embedding: Optional[Embedding] = None):
    emb = embedding or embed_network(mesh, scenario.network, tol=scenario.tol)
    fr = emb.fragments
    nf = len(fr)
    B = ModelBuilder()
    mdof = B.add_dofs(MATRIX, mesh.n_cells)
    fdof = B.add_dofs(FRACTURE, nf)
    K = scenario.permeability(mesh.cell_centroid)

    i, j, T = matrix_couplings(mesh, K, mesh.interior_faces)
    B.couple(mdof[i], mdof[j], T, "matrix-matrix")

    L = fr.length
    tfm = np.array([matrix_fracture_T(mesh.convex_cell(int(fr.host[k])), Segment(fr.a[k], fr.b[k]), K[fr.host[k]])
                    for k in range(nf)])
    B.couple(mdof[fr.host], fdof, tfm, "matrix-fracture")

    alpha = emb.k_t * fr.aperture / (0.5 * L)
    same = np.flatnonzero(fr.fracture_id[1:] == fr.fracture_id[:-1])
    B.couple(fdof[same], fdof[same + 1], harmonic(alpha[same], alpha[same + 1]), "fracture-fracture")

    for rec in emb.intersections:
        ti = []
        for f in rec.fragments:
            pos = float(np.hypot(*(np.asarray(rec.point) - fr.a[f])))
            ti.append(intersection_half_T(L[f], pos, fr.aperture[f], emb.k_t[f]))
        B.couple(fdof[rec.fragments[0]], fdof[rec.fragments[1]], harmonic(*ti), "intersection")

    network = scenario.network
    for fid in range(len(network)):
        rows = emb.fragments_of(fid)
        for k, end in ((rows[0], network[fid].a), (rows[-1], network[fid].b)):
            if scenario.on_boundary([end])[0]:
                apply_fracture_end_condition(B, scenario, fdof[k], np.asarray(end), fr.aperture[k], emb.k_t[k],
                                             0.5 * L[k])

    apply_matrix_boundary(B, mesh, scenario, K, mdof)
    add_matrix_sources(B, mesh, scenario, mdof)
    return B.build(), emb


def assemble_and_solve(scenario, mesh: Mesh, stats: bool = True, tol: float = 1e-14) -> SolutionField:
    model, emb = assemble(scenario, mesh)
    system, p, ms, res = solve_model(model, stats, tol)
    nc = mesh.n_cells
    info = {"n_dofs": system.n, "n_fragments": len(emb.fragments), "n_intersections": len(emb.intersections),
            "merged_fragments": len(emb.merged), "relative_residual": res}
    log.info("edfm: %d dofs, %d fragments", system.n, len(emb.fragments))
    return SolutionField("edfm", mesh, p[:nc], emb.fragments, p[nc:], scenario=scenario, model=model, system=system,
                         stats=ms, info=info)
