"""Standard method grids for the shipped scenarios.

Conforming grids are either tensor grids snapped to axis-aligned fractures
or constrained triangulations; embedded methods run on plain background
grids, with vertical columns when the top of the domain is not flat.
"""

from __future__ import annotations

from typing import Optional, Tuple

import numpy as np

from .mesh import Mesh, MeshError, build_column_quads, build_structured_quads
from .meshing import conforming_triangulation

# (max triangle area, fracture segment length) per benchmark
TRIANGULATION_SIZES = {
    "1": (2000.0, 40.0),
    "2a": (1.12e-3, 0.045),
    "2b": (1.12e-3, 0.045),
    "3a": (1e-3, 0.04),
    "3b": (1e-3, 0.04),
    "4": (400.0, 10.0),
}

# background grid (nx, ny) per benchmark
BACKGROUND_SIZES = {"1": (40, 30), "2a": (37, 37), "2b": (37, 37), "3a": (37, 37), "3b": (37, 37), "4": (70, 60)}

# snapped tensor grid for the conforming method on benchmark 2
SNAPPED_SIZES = {"2a": (36, 36), "2b": (36, 36)}


def parse_grid(text: str) -> Tuple[int, int]:
    """``"37x37"`` -> (37, 37)."""
    try:
        nx, ny = (int(s) for s in str(text).lower().split("x"))
    except ValueError:
        raise ValueError(f"grid must look like NXxNY, got {text!r}") from None
    if nx < 1 or ny < 1:
        raise ValueError(f"grid counts must be positive, got {text!r}")
    return nx, ny


def is_rectangle(scenario) -> bool:
    x0, y0, x1, y1 = scenario.bbox
    d = np.asarray(scenario.domain)
    corner = (np.isclose(d[:, 0], x0) | np.isclose(d[:, 0], x1)) & (np.isclose(d[:, 1], y0) | np.isclose(d[:, 1], y1))
    return bool(np.all(corner)) and np.isclose(scenario.area, (x1 - x0) * (y1 - y0), rtol=1e-12)


def snapped_quads(scenario, nx: int, ny: int) -> Mesh:
    """Tensor grid with lines through every axis-aligned fracture and fracture endpoint."""
    if not is_rectangle(scenario):
        raise MeshError("snapped tensor grids need a rectangular domain")
    tol = scenario.tol
    sx, sy = [], []
    for f in scenario.network:
        (xa, ya), (xb, yb) = f.a, f.b
        if abs(xa - xb) <= tol:
            sx.append(xa)
            sy += [ya, yb]
        elif abs(ya - yb) <= tol:
            sy.append(ya)
            sx += [xa, xb]
        else:
            raise MeshError(f"fracture {f.a}-{f.b} is not axis aligned; use a triangulation")
    return build_structured_quads(scenario.bbox, nx, ny, sx, sy)


def _top_profile(scenario):
    """Bottom height and top polyline of a domain with a flat bottom and x-monotone top."""
    d = np.asarray(scenario.domain, float)
    y0 = d[:, 1].min()
    bottom = np.isclose(d[:, 1], y0)
    if bottom.sum() != 2:
        raise MeshError("column grids need a domain with one flat bottom edge")
    top = d[~bottom]
    order = np.argsort(top[:, 0], kind="stable")
    top = top[order]
    xb = np.sort(d[bottom, 0])
    if np.any(np.diff(top[:, 0]) <= 0) or not (np.isclose(top[0, 0], xb[0]) and np.isclose(top[-1, 0], xb[1])):
        raise MeshError("column grids need vertical side edges and an x-monotone top")
    return y0, top


def background_grid(scenario, nx: int, ny: int) -> Mesh:
    """Background grid for embedded methods.

    Rectangles get a uniform tensor grid. Domains with a flat bottom and a
    piecewise-linear top get columns whose x-nodes include the top kinks.
    """
    if is_rectangle(scenario):
        return build_structured_quads(scenario.bbox, nx, ny)
    y0, top = _top_profile(scenario)
    xs = np.unique(np.concatenate([np.linspace(top[0, 0], top[-1, 0], nx + 1), top[:, 0]]))
    return build_column_quads(xs, y0, np.interp(xs, top[:, 0], top[:, 1]), ny)


def default_triangulation(scenario, bid: Optional[str] = None, delaunay: bool = False) -> Mesh:
    if bid in TRIANGULATION_SIZES:
        area, fh = TRIANGULATION_SIZES[bid]
    else:
        area, fh = scenario.area / 1000.0, scenario.diameter / 30.0
    return conforming_triangulation(scenario, area, fracture_h=fh, delaunay=delaunay)


def default_background(scenario, bid: Optional[str] = None) -> Mesh:
    return background_grid(scenario, *BACKGROUND_SIZES.get(bid, (40, 40)))
