"""Discrete solutions: per-cell pressures on matrix, fracture and intersection cells."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from .linalg import MatrixStats, SparseSystem
from .mesh import Mesh, MeshError, mesh_from_blocks, mesh_to_text, parse_blocks


@dataclass(frozen=True, eq=False)
class FractureCells:
    """Lower-dimensional fracture cells, each a piece of one input fracture.

    ``t0 < t1`` are the parameters of the piece along its parent fracture and
    ``host`` is the owning mesh entity (a face for conforming methods, a cell
    for embedded ones, -1 if none).
    """

    fracture_id: np.ndarray
    a: np.ndarray
    b: np.ndarray
    aperture: np.ndarray
    t0: np.ndarray
    t1: np.ndarray
    host: np.ndarray

    @classmethod
    def empty(cls) -> "FractureCells":
        z = np.empty(0)
        return cls(np.empty(0, np.int64), np.empty((0, 2)), np.empty((0, 2)), z, z, z, np.empty(0, np.int64))

    def __len__(self) -> int:
        return len(self.fracture_id)

    @property
    def length(self) -> np.ndarray:
        return np.hypot(*(self.b - self.a).T)

    @property
    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.a + self.b)


@dataclass(frozen=True, eq=False)
class SolutionField:
    """Solution of one method on one scenario.

    ``matrix_pressure`` is indexed by mesh cell, ``fracture_pressure`` by the
    rows of ``fractures``, ``intersection_pressure`` by the rows of
    ``intersection_points``.
    """

    method: str
    mesh: Mesh
    matrix_pressure: np.ndarray
    fractures: FractureCells = field(default_factory=FractureCells.empty)
    fracture_pressure: np.ndarray = field(default_factory=lambda: np.empty(0))
    intersection_points: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    intersection_pressure: np.ndarray = field(default_factory=lambda: np.empty(0))
    scenario: Optional[object] = None
    model: Optional[object] = None
    system: Optional[SparseSystem] = None
    stats: Optional[MatrixStats] = None
    info: Dict[str, object] = field(default_factory=dict)

    @property
    def n_dofs(self) -> int:
        return len(self.matrix_pressure) + len(self.fracture_pressure) + len(self.intersection_pressure)

    @property
    def pressure_vector(self) -> np.ndarray:
        return np.concatenate([self.matrix_pressure, self.fracture_pressure, self.intersection_pressure])

    def all_values(self) -> np.ndarray:
        return self.pressure_vector

    def residual(self) -> np.ndarray:
        if self.model is None:
            raise ValueError("solution carries no discrete model")
        return self.model.residual(self.pressure_vector)

    def conservation_error(self) -> float:
        """Largest per-cell mass imbalance relative to the largest face flux."""
        p = self.pressure_vector
        scale = self.model.max_face_flux(p)
        r = np.abs(self.residual())
        return float(r.max() / scale) if scale > 0 else float(r.max())

    def maximum_principle_violation(self) -> float:
        """Overshoot beyond the discrete bounds, relative to the bound range."""
        p = self.pressure_vector
        lo, hi = self.model.pressure_bounds(p)
        span = max(hi - lo, np.finfo(float).tiny)
        return float(max(lo - p.min(), p.max() - hi, 0.0) / span)


# -- field files ----------------------------------------------------------------------

def _r(x) -> str:
    return repr(float(x))


def write_field(sol: SolutionField, path, metadata: Optional[dict] = None) -> None:
    """Mesh plus pressures in the native text format."""
    meta = {"method": sol.method}
    meta.update(metadata or {})
    fr = sol.fractures
    blocks = [
        ("cell_pressures", [_r(p) for p in sol.matrix_pressure]),
        ("fracture_pressures", [" ".join([str(int(fr.fracture_id[k]))]
                                          + [_r(x) for x in (*fr.a[k], *fr.b[k], fr.aperture[k], fr.t0[k], fr.t1[k],
                                                             sol.fracture_pressure[k])])
                                for k in range(len(fr))]),
        ("intersection_pressures", [" ".join(_r(x) for x in (*sol.intersection_points[k], sol.intersection_pressure[k]))
                                    for k in range(len(sol.intersection_pressure))]),
        ("metadata", [f"{k} {json.dumps(v, separators=(',', ':'), sort_keys=True)}" for k, v in sorted(meta.items())]),
    ]
    with open(path, "w", newline="\n") as fh:
        fh.write(mesh_to_text(sol.mesh, blocks))


def read_field(path) -> SolutionField:
    with open(path) as fh:
        header, blocks = parse_blocks(fh.read())
    if header != "fvmesh 1":
        raise MeshError(f"unknown field file header {header!r}")
    mesh = mesh_from_blocks(blocks)
    try:
        pm = np.array([float(r[0]) for r in blocks["cell_pressures"]])
    except KeyError:
        raise MeshError("field file has no cell_pressures block") from None
    if len(pm) != mesh.n_cells:
        raise MeshError(f"{len(pm)} cell pressures for {mesh.n_cells} cells")
    rows = blocks.get("fracture_pressures", [])
    if rows:
        arr = np.array([[float(x) for x in r] for r in rows])
        fr = FractureCells(arr[:, 0].astype(np.int64), arr[:, 1:3], arr[:, 3:5], arr[:, 5], arr[:, 6], arr[:, 7],
                           -np.ones(len(arr), np.int64))
        pf = arr[:, 8]
    else:
        fr, pf = FractureCells.empty(), np.empty(0)
    rows = blocks.get("intersection_pressures", [])
    ip = np.array([[float(x) for x in r] for r in rows]).reshape(-1, 3)
    meta = {r[0]: json.loads(" ".join(r[1:])) for r in blocks.get("metadata", [])}
    return SolutionField(str(meta.get("method", "reference")), mesh, pm, fr, pf, ip[:, :2], ip[:, 2], info=meta)
