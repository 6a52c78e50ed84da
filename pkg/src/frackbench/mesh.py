"""2D cell complexes (triangles and quads), builders, file I/O and fracture tagging."""

from __future__ import annotations

import io
import os
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .geometry import REL_TOL, ConvexPolygon, polygon_area


class MeshError(ValueError):
    pass


class NonConformingMeshError(MeshError):
    def __init__(self, gaps: Dict[int, List[Tuple[float, float]]]):
        self.gaps = gaps
        parts = []
        for fid, g in gaps.items():
            spans = ", ".join(f"[{a:.6g}, {b:.6g}]" for a, b in g)
            parts.append(f"fracture {fid}: uncovered parameter spans {spans}")
        super().__init__("mesh does not conform to the fracture network; " + "; ".join(parts))


def _edge_key(a, b, nv):
    lo = np.minimum(a, b).astype(np.int64)
    hi = np.maximum(a, b).astype(np.int64)
    return lo * np.int64(nv) + hi


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable polygonal mesh.

    ``cell_nodes`` is padded with -1 for cells with fewer vertices than the
    widest cell. Cells are stored counter-clockwise. ``boundary_tags`` maps a
    sorted vertex pair to a tag name and ``fracture_faces`` maps a fracture id
    to vertex pairs; both are carried through file I/O.
    """

    vertices: np.ndarray
    cell_nodes: np.ndarray
    boundary_tags: Mapping[Tuple[int, int], str] = field(default_factory=dict)
    fracture_faces: Mapping[int, Tuple[Tuple[int, int], ...]] = field(default_factory=dict)

    @classmethod
    def from_cells(cls, vertices, cells: Iterable[Sequence[int]], boundary_tags=None,
                   fracture_faces=None, reorient: bool = True) -> "Mesh":
        v = np.asarray(vertices, dtype=float).reshape(-1, 2)
        cells = [tuple(int(i) for i in c) for c in cells]
        if not cells:
            raise MeshError("mesh has no cells")
        width = max(len(c) for c in cells)
        if min(len(c) for c in cells) < 3 or width > 4:
            raise MeshError("only triangles and quadrilaterals are supported")
        cn = np.full((len(cells), width), -1, dtype=np.int64)
        for i, c in enumerate(cells):
            cn[i, : len(c)] = c
        return cls._build(v, cn, boundary_tags or {}, fracture_faces or {}, reorient)

    @classmethod
    def _build(cls, v, cn, boundary_tags, fracture_faces, reorient=True) -> "Mesh":
        if not np.all(np.isfinite(v)):
            raise MeshError("non-finite vertex coordinates")
        used = cn[cn >= 0]
        if used.size and (used.min() < 0 or used.max() >= len(v)):
            raise MeshError("vertex index out of range")
        sizes = (cn >= 0).sum(axis=1)
        area = _signed_areas(v, cn, sizes)
        scale = float(np.ptp(v, axis=0).max()) if len(v) else 1.0
        if np.any(np.abs(area) <= (REL_TOL * scale) ** 2):
            bad = int(np.argmin(np.abs(area)))
            raise MeshError(f"cell {bad} has zero area")
        if np.any(area < 0):
            if not reorient:
                raise MeshError("cells must be counter-clockwise")
            cn = cn.copy()
            for i in np.flatnonzero(area < 0):
                k = sizes[i]
                cn[i, :k] = cn[i, :k][::-1]
        bt = {tuple(sorted((int(a), int(b)))): str(t) for (a, b), t in dict(boundary_tags).items()}
        ff = {int(f): tuple(tuple(int(x) for x in e) for e in es) for f, es in dict(fracture_faces).items()}
        mesh = cls(v, cn, bt, ff)
        mesh.faces  # validate connectivity eagerly
        return mesh

    # -- basic sizes -----------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cell_nodes)

    @cached_property
    def cell_sizes(self) -> np.ndarray:
        return (self.cell_nodes >= 0).sum(axis=1)

    @property
    def cells(self) -> List[Tuple[int, ...]]:
        return [tuple(int(x) for x in row[: k]) for row, k in zip(self.cell_nodes, self.cell_sizes)]

    def cell_polygon(self, i: int) -> np.ndarray:
        return self.vertices[self.cell_nodes[i, : self.cell_sizes[i]]]

    def convex_cell(self, i: int) -> ConvexPolygon:
        return ConvexPolygon(self.cell_polygon(i))

    # -- cell geometry ---------------------------------------------------
    @cached_property
    def cell_area(self) -> np.ndarray:
        return _signed_areas(self.vertices, self.cell_nodes, self.cell_sizes)

    @cached_property
    def cell_centroid(self) -> np.ndarray:
        v, cn, sizes = self.vertices, self.cell_nodes, self.cell_sizes
        out = np.empty((len(cn), 2))
        for k in np.unique(sizes):
            rows = np.flatnonzero(sizes == k)
            p = v[cn[rows, :k]]
            o = p[:, :1, :]
            p = p - o
            q = np.roll(p, -1, axis=1)
            c = p[..., 0] * q[..., 1] - q[..., 0] * p[..., 1]
            a = 0.5 * c.sum(axis=1)
            cx = ((p[..., 0] + q[..., 0]) * c).sum(axis=1) / (6 * a)
            cy = ((p[..., 1] + q[..., 1]) * c).sum(axis=1) / (6 * a)
            out[rows] = np.column_stack([cx, cy]) + o[:, 0, :]
        return out

    @cached_property
    def circumcenters(self) -> np.ndarray:
        """Circumcenters of triangular cells (NaN for other cells)."""
        out = np.full((self.n_cells, 2), np.nan)
        rows = np.flatnonzero(self.cell_sizes == 3)
        p = self.vertices[self.cell_nodes[rows, :3]]
        o = p[:, 0]
        b, c = p[:, 1] - o, p[:, 2] - o
        d = 2.0 * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
        bb, cc = (b * b).sum(axis=1), (c * c).sum(axis=1)
        ux = (c[:, 1] * bb - b[:, 1] * cc) / d
        uy = (b[:, 0] * cc - c[:, 0] * bb) / d
        out[rows] = o + np.column_stack([ux, uy])
        return out

    # -- faces -----------------------------------------------------------
    @cached_property
    def faces(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(face_nodes, face_cells, cell_faces).

        ``face_nodes[f]`` is ordered counter-clockwise for the left cell
        ``face_cells[f, 0]``; ``face_cells[f, 1]`` is the right cell or -1.
        """
        cn, sizes, nv = self.cell_nodes, self.cell_sizes, self.n_vertices
        ea, eb, ec, el = [], [], [], []
        for k in np.unique(sizes):
            rows = np.flatnonzero(sizes == k)
            a = cn[rows, :k]
            b = np.roll(a, -1, axis=1)
            ea.append(a.ravel())
            eb.append(b.ravel())
            ec.append(np.repeat(rows, k))
            el.append(np.tile(np.arange(k), len(rows)))
        ea, eb, ec, el = map(np.concatenate, (ea, eb, ec, el))
        keys = _edge_key(ea, eb, nv)
        uniq, inv, counts = np.unique(keys, return_inverse=True, return_counts=True)
        if np.any(counts > 2):
            f = int(np.flatnonzero(counts > 2)[0])
            raise MeshError(f"non-manifold edge {divmod(int(uniq[f]), nv)} shared by {counts[f]} cells")
        order = np.lexsort((ec, inv))
        inv_s = inv[order]
        first = np.ones(len(order), dtype=bool)
        first[1:] = inv_s[1:] != inv_s[:-1]
        occ1 = order[first]
        second_mask = ~first
        occ2 = order[second_mask]
        nf = len(uniq)
        face_nodes = np.column_stack([ea[occ1], eb[occ1]])
        face_cells = np.full((nf, 2), -1, dtype=np.int64)
        face_cells[:, 0] = ec[occ1]
        f2 = inv[occ2]
        if np.any(ea[occ2] != face_nodes[f2, 1]):
            raise MeshError("inconsistent cell orientation or overlapping cells")
        face_cells[f2, 1] = ec[occ2]
        cell_faces = np.full(cn.shape, -1, dtype=np.int64)
        cell_faces[ec, el] = inv
        return face_nodes, face_cells, cell_faces

    @property
    def face_nodes(self) -> np.ndarray:
        return self.faces[0]

    @property
    def face_cells(self) -> np.ndarray:
        return self.faces[1]

    @property
    def cell_faces(self) -> np.ndarray:
        return self.faces[2]

    @property
    def n_faces(self) -> int:
        return len(self.face_nodes)

    @cached_property
    def face_length(self) -> np.ndarray:
        d = self.vertices[self.face_nodes[:, 1]] - self.vertices[self.face_nodes[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @cached_property
    def face_normal(self) -> np.ndarray:
        """Unit normal pointing from the left cell to the right cell (outward on the boundary)."""
        d = self.vertices[self.face_nodes[:, 1]] - self.vertices[self.face_nodes[:, 0]]
        return np.column_stack([d[:, 1], -d[:, 0]]) / self.face_length[:, None]

    @cached_property
    def face_centroid(self) -> np.ndarray:
        return 0.5 * (self.vertices[self.face_nodes[:, 0]] + self.vertices[self.face_nodes[:, 1]])

    @cached_property
    def boundary_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] < 0)

    @cached_property
    def interior_faces(self) -> np.ndarray:
        return np.flatnonzero(self.face_cells[:, 1] >= 0)

    @cached_property
    def _face_lookup(self) -> Dict[int, int]:
        keys = _edge_key(self.face_nodes[:, 0], self.face_nodes[:, 1], self.n_vertices)
        return {int(k): i for i, k in enumerate(keys)}

    def face_index(self, va: int, vb: int) -> int:
        key = int(_edge_key(np.array([va]), np.array([vb]), self.n_vertices)[0])
        try:
            return self._face_lookup[key]
        except KeyError:
            raise MeshError(f"no face between vertices {va} and {vb}") from None

    @cached_property
    def boundary_vertex_mask(self) -> np.ndarray:
        m = np.zeros(self.n_vertices, dtype=bool)
        m[self.face_nodes[self.boundary_faces].ravel()] = True
        return m

    def face_tags(self) -> Dict[int, str]:
        return {self.face_index(a, b): t for (a, b), t in self.boundary_tags.items()}

    def with_tags(self, boundary_tags=None, fracture_faces=None) -> "Mesh":
        return Mesh._build(self.vertices, self.cell_nodes,
                           self.boundary_tags if boundary_tags is None else boundary_tags,
                           self.fracture_faces if fracture_faces is None else fracture_faces)

    def same_connectivity(self, other: "Mesh") -> bool:
        return (self.cell_nodes.shape == other.cell_nodes.shape
                and np.array_equal(self.cell_nodes, other.cell_nodes)
                and np.array_equal(self.vertices, other.vertices))


def _signed_areas(v, cn, sizes) -> np.ndarray:
    out = np.empty(len(cn))
    for k in np.unique(sizes):
        rows = np.flatnonzero(sizes == k)
        p = v[cn[rows, :k]]
        p = p - p[:, :1, :]
        q = np.roll(p, -1, axis=1)
        out[rows] = 0.5 * (p[..., 0] * q[..., 1] - q[..., 0] * p[..., 1]).sum(axis=1)
    return out


# -- builders ----------------------------------------------------------------

def build_tensor_grid(xs, ys) -> Mesh:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
        raise MeshError("grid coordinates must be strictly increasing")
    nx, ny = len(xs) - 1, len(ys) - 1
    if nx < 1 or ny < 1:
        raise MeshError("need at least one cell per direction")
    X, Y = np.meshgrid(xs, ys)
    v = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    i, j = i.ravel(), j.ravel()
    v0 = j * (nx + 1) + i
    cn = np.column_stack([v0, v0 + 1, v0 + nx + 2, v0 + nx + 1]).astype(np.int64)
    return Mesh._build(v, cn, {}, {})


def _insert_lines(nodes: np.ndarray, lines: Iterable[float], lo: float, hi: float, tol: float) -> np.ndarray:
    lines = np.asarray(list(lines), dtype=float)
    if lines.size and (lines.min() < lo - tol or lines.max() > hi + tol):
        raise MeshError("snap line outside the domain")
    allc = np.sort(np.concatenate([nodes, lines]))
    keep = np.ones(len(allc), dtype=bool)
    keep[1:] = np.diff(allc) > tol
    out = allc[keep]
    out[0], out[-1] = lo, hi
    return out


def build_structured_quads(bounds, nx: int, ny: int, snap_x=(), snap_y=()) -> Mesh:
    """Tensor-product quad mesh on ``bounds = (xmin, ymin, xmax, ymax)``.

    Grid lines at ``snap_x``/``snap_y`` are inserted exactly; coordinates
    closer than the geometric tolerance to an existing line replace nothing.
    """
    if nx < 1 or ny < 1:
        raise MeshError("nx and ny must be >= 1")
    x0, y0, x1, y1 = map(float, bounds)
    tol = REL_TOL * np.hypot(x1 - x0, y1 - y0)
    xs = _insert_lines(np.linspace(x0, x1, nx + 1), snap_x, x0, x1, tol)
    ys = _insert_lines(np.linspace(y0, y1, ny + 1), snap_y, y0, y1, tol)
    return build_tensor_grid(xs, ys)


def build_column_quads(x_nodes, y_bottom, y_top, ny: int) -> Mesh:
    """Quads in vertical columns between a bottom and a top polyline.

    Each column ``[x_i, x_{i+1}]`` is divided uniformly in the vertical
    direction; used for background grids on domains with a non-flat top.
    """
    xs = np.asarray(x_nodes, dtype=float)
    yb = np.broadcast_to(np.asarray(y_bottom, dtype=float), xs.shape)
    yt = np.broadcast_to(np.asarray(y_top, dtype=float), xs.shape)
    if np.any(yt <= yb):
        raise MeshError("top must lie above bottom")
    nx = len(xs) - 1
    s = np.linspace(0.0, 1.0, ny + 1)
    Y = yb[None, :] + s[:, None] * (yt - yb)[None, :]
    X = np.broadcast_to(xs[None, :], Y.shape)
    v = np.column_stack([X.ravel(), Y.ravel()])
    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    v0 = (j * (nx + 1) + i).ravel()
    cn = np.column_stack([v0, v0 + 1, v0 + nx + 2, v0 + nx + 1]).astype(np.int64)
    return Mesh._build(v, cn, {}, {})


# -- fracture tagging ----------------------------------------------------------

@dataclass(frozen=True)
class FractureFaceTagging:
    """Mesh faces lying on each fracture, ordered from endpoint a to b."""

    faces: Dict[int, np.ndarray]
    covered_length: Dict[int, float]

    def all_faces(self) -> np.ndarray:
        if not self.faces:
            return np.empty(0, dtype=np.int64)
        return np.concatenate(list(self.faces.values()))

    def fracture_of_face(self) -> Dict[int, int]:
        return {int(f): fid for fid, fs in self.faces.items() for f in fs}


def tag_fracture_faces(mesh: Mesh, network, tol: Optional[float] = None) -> FractureFaceTagging:
    """Find the faces covering each fracture segment of ``network``.

    Raises NonConformingMeshError if part of any fracture is not covered.
    """
    fractures = list(getattr(network, "fractures", network))
    if tol is None:
        tol = REL_TOL * float(np.hypot(*np.ptp(mesh.vertices, axis=0)))
    v = mesh.vertices
    fa, fb = mesh.face_nodes[:, 0], mesh.face_nodes[:, 1]
    faces: Dict[int, np.ndarray] = {}
    covered: Dict[int, float] = {}
    gaps: Dict[int, List[Tuple[float, float]]] = {}
    for fid, frac in enumerate(fractures):
        a = np.asarray(frac.a, dtype=float)
        d = np.asarray(frac.b, dtype=float) - a
        L = float(np.hypot(*d))
        t = (v - a) @ d / (L * L)
        dist = np.abs((v - a) @ np.array([-d[1], d[0]])) / L
        on = (dist <= tol) & (t >= -tol / L) & (t <= 1 + tol / L)
        sel = np.flatnonzero(on[fa] & on[fb])
        tm = 0.5 * (t[fa[sel]] + t[fb[sel]])
        sel = sel[np.argsort(tm, kind="stable")]
        faces[fid] = sel
        covered[fid] = float(mesh.face_length[sel].sum())
        spans = np.sort(np.column_stack([t[fa[sel]], t[fb[sel]]]), axis=1)
        missing = []
        cur = 0.0
        for lo, hi in spans:
            if (lo - cur) * L > tol:
                missing.append((cur, float(lo)))
            cur = max(cur, float(hi))
        if (1.0 - cur) * L > tol:
            missing.append((cur, 1.0))
        if missing:
            gaps[fid] = missing
    if gaps:
        raise NonConformingMeshError(gaps)
    return FractureFaceTagging(faces, covered)


# -- I/O ---------------------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def _mesh_lines(mesh: Mesh) -> List[str]:
    out = ["fvmesh 1", f"vertices {mesh.n_vertices}"]
    out += [f"{_fmt(x)} {_fmt(y)}" for x, y in mesh.vertices]
    out.append(f"cells {mesh.n_cells}")
    out += [" ".join([str(len(c))] + [str(i) for i in c]) for c in mesh.cells]
    ff = [(fid, a, b) for fid in sorted(mesh.fracture_faces) for a, b in mesh.fracture_faces[fid]]
    out.append(f"fracture_faces {len(ff)}")
    out += [f"{fid} {a} {b}" for fid, a, b in ff]
    bt = sorted(mesh.boundary_tags.items())
    out.append(f"boundary_tags {len(bt)}")
    out += [f"{t} {a} {b}" for (a, b), t in bt]
    return out


def mesh_to_text(mesh: Mesh, extra_blocks: Sequence[Tuple[str, Sequence[str]]] = ()) -> str:
    lines = _mesh_lines(mesh)
    for name, rows in extra_blocks:
        lines.append(f"{name} {len(rows)}")
        lines.extend(rows)
    return "\n".join(lines) + "\n"


def write_mesh(mesh: Mesh, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(mesh_to_text(mesh))


def parse_blocks(text: str) -> Tuple[str, Dict[str, List[List[str]]]]:
    """Split a native-format file into its header and counted blocks."""
    rows = [ln.split() for ln in text.splitlines()]
    rows = [r for r in rows if r and not r[0].startswith("#")]
    if not rows:
        raise MeshError("empty mesh file")
    header = " ".join(rows[0])
    blocks: Dict[str, List[List[str]]] = {}
    i = 1
    while i < len(rows):
        r = rows[i]
        if len(r) != 2 or not r[1].isdigit():
            raise MeshError(f"malformed block header {' '.join(r)!r}")
        name, n = r[0], int(r[1])
        if i + 1 + n > len(rows):
            raise MeshError(f"block {name!r} truncated")
        blocks[name] = rows[i + 1: i + 1 + n]
        i += 1 + n
    return header, blocks


def mesh_from_blocks(blocks: Dict[str, List[List[str]]]) -> Mesh:
    try:
        verts = np.array([[float(x), float(y)] for x, y in blocks["vertices"]])
        cells = []
        for r in blocks["cells"]:
            k = int(r[0])
            if len(r) != k + 1:
                raise MeshError("cell row length mismatch")
            cells.append([int(x) for x in r[1:]])
        ff: Dict[int, List[Tuple[int, int]]] = {}
        for fid, a, b in blocks.get("fracture_faces", []):
            ff.setdefault(int(fid), []).append((int(a), int(b)))
        bt = {(int(a), int(b)): t for t, a, b in blocks.get("boundary_tags", [])}
    except (KeyError, ValueError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"malformed mesh file: {exc}") from None
    mesh = Mesh.from_cells(verts, cells, bt, ff)
    for fid, es in mesh.fracture_faces.items():
        for a, b in es:
            mesh.face_index(a, b)
    for a, b in mesh.boundary_tags:
        mesh.face_index(a, b)
    return mesh


def _read_gmsh2(text: str) -> Mesh:
    sections: Dict[str, List[str]] = {}
    cur = None
    for ln in text.splitlines():
        s = ln.strip()
        if s.startswith("$End"):
            cur = None
        elif s.startswith("$"):
            cur = s[1:]
            sections[cur] = []
        elif cur is not None and s:
            sections[cur].append(s)
    try:
        fmt = sections["MeshFormat"][0].split()
        if not fmt[0].startswith("2"):
            raise MeshError(f"unsupported Gmsh version {fmt[0]}")
        names = {}
        for r in sections.get("PhysicalNames", [])[1:]:
            dim, tag, name = r.split(maxsplit=2)
            names[(int(dim), int(tag))] = name.strip('"')
        nodes = sections["Nodes"]
        n = int(nodes[0])
        ids, xy = [], []
        for r in nodes[1: n + 1]:
            p = r.split()
            ids.append(int(p[0]))
            xy.append((float(p[1]), float(p[2])))
        index = {nid: i for i, nid in enumerate(ids)}
        elems = sections["Elements"]
        ne = int(elems[0])
        cells, lines = [], []
        for r in elems[1: ne + 1]:
            p = [int(x) for x in r.split()]
            etype, ntags = p[1], p[2]
            phys = p[3] if ntags > 0 else 0
            conn = [index[q] for q in p[3 + ntags:]]
            if etype in (2, 3):
                cells.append(conn)
            elif etype == 1:
                lines.append((phys, conn))
    except (KeyError, IndexError, ValueError) as exc:
        raise MeshError(f"malformed Gmsh file: {exc}") from None
    ff: Dict[int, List[Tuple[int, int]]] = {}
    bt: Dict[Tuple[int, int], str] = {}
    for phys, (a, b) in lines:
        name = names.get((1, phys), str(phys))
        m = re.fullmatch(r"fracture[_ ]?(\d+)", name)
        if m:
            ff.setdefault(int(m.group(1)), []).append((a, b))
        else:
            bt[(a, b)] = name
    # drop unused vertices (e.g. geometry points)
    used = np.unique(np.concatenate([np.asarray(c) for c in cells]))
    remap = -np.ones(len(xy), dtype=np.int64)
    remap[used] = np.arange(len(used))
    verts = np.asarray(xy)[used]
    cells = [[int(remap[i]) for i in c] for c in cells]
    ff = {k: [(int(remap[a]), int(remap[b])) for a, b in v] for k, v in ff.items()}
    bt = {(int(remap[a]), int(remap[b])): t for (a, b), t in bt.items()}
    return Mesh.from_cells(verts, cells, bt, ff)


def read_mesh(source) -> Mesh:
    """Read a native ``fvmesh 1`` file or a Gmsh v2 ASCII file."""
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source) as fh:
            text = fh.read()
    elif isinstance(source, io.IOBase) or hasattr(source, "read"):
        text = source.read()
    else:
        raise MeshError(f"mesh file not found: {source}")
    stripped = text.lstrip()
    if stripped.startswith("$MeshFormat"):
        return _read_gmsh2(text)
    header, blocks = parse_blocks(text)
    if header != "fvmesh 1":
        raise MeshError(f"unknown mesh header {header!r}")
    return mesh_from_blocks(blocks)
