"""Fracture-conforming triangulations via the ``triangle`` package."""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple

import numpy as np
import triangle

from .geometry import cross2, segment_intersection
from .mesh import Mesh, MeshError, tag_fracture_faces


class _Points:
    """Vertex pool merging points closer than ``tol``."""

    def __init__(self, tol: float):
        self.tol = tol
        self.xy: List[np.ndarray] = []

    def add(self, p) -> int:
        p = np.asarray(p, float)
        for k, q in enumerate(self.xy):
            if np.hypot(*(p - q)) <= self.tol:
                return k
        self.xy.append(p)
        return len(self.xy) - 1


def fracture_pslg(scenario, fracture_h: Optional[float] = None):
    """Planar straight-line graph of domain boundary and fractures.

    Fractures are split at their mutual crossings and, if ``fracture_h`` is
    given, into pieces no longer than it. Returns (vertices, segments,
    markers) with marker 1 on the boundary and ``2 + fid`` on fracture ``fid``.
    """
    tol = scenario.tol
    pool = _Points(tol)
    net = list(scenario.network)
    cuts: Dict[int, List[float]] = {i: [0.0, 1.0] for i in range(len(net))}
    for i in range(len(net)):
        for j in range(i + 1, len(net)):
            x = segment_intersection(net[i].segment, net[j].segment, tol)
            if x is None:
                continue
            if x.kind == "overlap":
                raise MeshError(f"fractures {i} and {j} overlap")
            cuts[i].append(x.t1)
            cuts[j].append(x.t2)
    segs: List[Tuple[int, int, int]] = []
    on_edge: Dict[int, List[int]] = {e: [] for e in range(len(scenario.domain))}
    edges = scenario.domain_edges()
    corner = [pool.add(p) for p in scenario.domain]
    for i, f in enumerate(net):
        ts = np.unique(np.asarray(cuts[i]))
        if fracture_h:
            fine = [ts[:1]]
            for s, u in zip(ts[:-1], ts[1:]):
                m = max(1, int(np.ceil((u - s) * f.length / fracture_h - 1e-9)))
                fine.append(np.linspace(s, u, m + 1)[1:])
            ts = np.concatenate(fine)
        ids = [pool.add(f.segment.point_at(t)) for t in ts]
        for a, b in zip(ids[:-1], ids[1:]):
            if a != b:
                segs.append((a, b, 2 + i))
        for k in (ids[0], ids[-1]):
            p = pool.xy[k]
            for e, (q0, q1) in enumerate(edges):
                q0, q1 = np.asarray(q0), np.asarray(q1)
                d = q1 - q0
                t = float((p - q0) @ d / (d @ d))
                if 0 < t < 1 and abs(float(cross2(d, p - q0))) / np.hypot(*d) <= tol:
                    on_edge[e].append(k)
    for e, (q0, q1) in enumerate(edges):
        q0 = np.asarray(q0)
        d = np.asarray(q1) - q0
        inner = sorted(set(on_edge[e]), key=lambda k: float((pool.xy[k] - q0) @ d))
        chain = [corner[e]] + inner + [corner[(e + 1) % len(corner)]]
        segs += [(a, b, 1) for a, b in zip(chain[:-1], chain[1:])]
    v = np.asarray(pool.xy)
    s = np.asarray([(a, b) for a, b, _ in segs], dtype=np.int32)
    m = np.asarray([c for _, _, c in segs], dtype=np.int32)
    return v, s, m


def conforming_triangulation(scenario, max_area: float, min_angle: float = 30.0,
                             fracture_h: Optional[float] = None, delaunay: bool = False) -> Mesh:
    """Quality triangulation whose edges cover every fracture.

    ``delaunay=True`` asks for a conforming Delaunay mesh, whose circumcenters
    give an orthogonal two-point scheme.
    """
    v, s, m = fracture_pslg(scenario, fracture_h)
    flags = f"pq{min_angle:g}a{max_area:.15f}{'D' if delaunay else ''}Q"
    out = triangle.triangulate({"vertices": v, "segments": s, "segment_markers": m}, flags)
    mesh = Mesh.from_cells(out["vertices"], out["triangles"])
    tags = tag_fracture_faces(mesh, scenario.network, tol=scenario.tol)
    ff = {fid: tuple(tuple(int(x) for x in mesh.face_nodes[f]) for f in faces) for fid, faces in tags.faces.items()}
    bt = {}
    tags_b = scenario.classify_boundary(mesh.face_centroid[mesh.boundary_faces])
    for f, t in zip(mesh.boundary_faces, tags_b):
        bt[tuple(int(x) for x in mesh.face_nodes[f])] = t
    return mesh.with_tags(bt, ff)
