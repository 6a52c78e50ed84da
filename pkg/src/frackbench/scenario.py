"""Benchmark problem definitions and their JSON representation."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from importlib import resources
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .geometry import REL_TOL, Segment, polygon_area, point_segment_distance, points_in_polygon

DATA_ENV = "FRACKBENCH_DATA"
BENCHMARK_IDS = ("1", "2a", "2b", "3a", "3b", "4")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class FractureSegment:
    a: Tuple[float, float]
    b: Tuple[float, float]
    aperture: float
    k_n: float
    k_t: float

    def __post_init__(self):
        object.__setattr__(self, "a", tuple(float(x) for x in self.a))
        object.__setattr__(self, "b", tuple(float(x) for x in self.b))
        if not (self.aperture > 0 and self.k_n > 0 and self.k_t > 0):
            raise ScenarioError("fracture aperture and permeabilities must be positive")
        if self.a == self.b:
            raise ScenarioError("zero-length fracture")

    @property
    def segment(self) -> Segment:
        return Segment(self.a, self.b)

    @property
    def length(self) -> float:
        return float(np.hypot(self.b[0] - self.a[0], self.b[1] - self.a[1]))


@dataclass(frozen=True)
class FractureNetwork:
    fractures: Tuple[FractureSegment, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "fractures", tuple(self.fractures))

    def __len__(self):
        return len(self.fractures)

    def __iter__(self):
        return iter(self.fractures)

    def __getitem__(self, i) -> FractureSegment:
        return self.fractures[i]

    @property
    def total_length(self) -> float:
        return float(sum(f.length for f in self.fractures))


@dataclass(frozen=True)
class BoundaryCondition:
    """Condition on one boundary tag.

    Neumann values are the outward normal flux ``u . n`` (negative for inflow).
    A Dirichlet condition is either constant (``value``) or linear in
    position (``linear = (a, b, c)`` meaning ``a*x + b*y + c``).
    """

    tag: str
    kind: str
    value: float = 0.0
    linear: Optional[Tuple[float, float, float]] = None

    def __post_init__(self):
        if self.kind not in ("dirichlet", "neumann"):
            raise ScenarioError(f"unknown boundary condition kind {self.kind!r}")
        if self.linear is not None:
            if self.kind != "dirichlet":
                raise ScenarioError("linear data only supported for Dirichlet conditions")
            object.__setattr__(self, "linear", tuple(float(x) for x in self.linear))

    def evaluate(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.linear is None:
            return np.full(len(p), float(self.value))
        a, b, c = self.linear
        return a * p[:, 0] + b * p[:, 1] + c

    def scaled(self, factor: float) -> "BoundaryCondition":
        lin = None if self.linear is None else tuple(factor * x for x in self.linear)
        return replace(self, value=factor * self.value, linear=lin)


@dataclass(frozen=True)
class Region:
    polygon: Tuple[Tuple[float, float], ...]
    K: Tuple[Tuple[float, float], Tuple[float, float]]

    def __post_init__(self):
        object.__setattr__(self, "polygon", tuple(tuple(float(c) for c in p) for p in self.polygon))
        K = np.asarray(self.K, dtype=float)
        if K.shape != (2, 2):
            raise ScenarioError("permeability must be a 2x2 tensor")
        if K[0, 1] != K[1, 0]:
            raise ScenarioError("permeability tensor must be symmetric")
        if not np.all(np.linalg.eigvalsh(K) > 0):
            raise ScenarioError("permeability tensor must be positive definite")
        object.__setattr__(self, "K", tuple(tuple(float(c) for c in r) for r in K))


def _default_edge_tag(p, q) -> str:
    d = np.asarray(q) - np.asarray(p)
    nx, ny = d[1], -d[0]  # outward normal of a CCW edge
    if abs(ny) >= abs(nx):
        return "top" if ny > 0 else "bottom"
    return "right" if nx > 0 else "left"


@dataclass(frozen=True)
class Scenario:
    """A complete flow problem: domain, materials, fractures and boundary data.

    ``boundary`` maps tag names to edge indices of ``domain`` (edge ``i`` runs
    from vertex ``i`` to ``i+1``). When not given, edges are tagged
    bottom/right/top/left by the direction of their outward normal.
    """

    domain: Tuple[Tuple[float, float], ...]
    regions: Tuple[Region, ...]
    network: FractureNetwork
    bcs: Tuple[BoundaryCondition, ...]
    field: str = "pressure"
    source: float = 0.0
    name: str = ""
    boundary: Optional[Mapping[str, Tuple[int, ...]]] = None
    metadata: Mapping[str, object] = dc_field(default_factory=dict)
    fracture_file: Optional[str] = None
    fracture_defaults: Optional[Mapping[str, float]] = None

    def __post_init__(self):
        dom = tuple(tuple(float(c) for c in p) for p in self.domain)
        if polygon_area(np.asarray(dom)) < 0:
            dom = dom[::-1]
        object.__setattr__(self, "domain", dom)
        object.__setattr__(self, "regions", tuple(self.regions))
        object.__setattr__(self, "bcs", tuple(self.bcs))
        if self.boundary is None:
            tags: Dict[str, List[int]] = {}
            for i, (p, q) in enumerate(self.domain_edges()):
                tags.setdefault(_default_edge_tag(p, q), []).append(i)
            object.__setattr__(self, "boundary", {k: tuple(v) for k, v in tags.items()})
        else:
            object.__setattr__(self, "boundary", {str(k): tuple(int(i) for i in v) for k, v in self.boundary.items()})
        self.validate()

    # -- geometry ----------------------------------------------------------
    def domain_edges(self):
        d = self.domain
        return [(d[i], d[(i + 1) % len(d)]) for i in range(len(d))]

    @property
    def area(self) -> float:
        return polygon_area(np.asarray(self.domain))

    @property
    def bbox(self) -> Tuple[float, float, float, float]:
        d = np.asarray(self.domain)
        return (*d.min(axis=0), *d.max(axis=0))

    @property
    def diameter(self) -> float:
        x0, y0, x1, y1 = self.bbox
        return float(np.hypot(x1 - x0, y1 - y0))

    @property
    def tol(self) -> float:
        return REL_TOL * self.diameter

    def validate(self) -> None:
        if self.field not in ("pressure", "head"):
            raise ScenarioError(f"unknown field kind {self.field!r}")
        if len(self.domain) < 3 or self.area <= 0:
            raise ScenarioError("domain polygon is degenerate")
        if not self.regions:
            raise ScenarioError("at least one region is required")
        total = sum(abs(polygon_area(np.asarray(r.polygon))) for r in self.regions)
        if abs(total - self.area) > 1e-9 * self.area:
            raise ScenarioError("regions do not partition the domain")
        n_edges = len(self.domain)
        seen: Dict[int, str] = {}
        for tag, edges in self.boundary.items():
            for e in edges:
                if not 0 <= e < n_edges:
                    raise ScenarioError(f"boundary tag {tag!r} references edge {e}")
                if e in seen:
                    raise ScenarioError(f"edge {e} tagged twice")
                seen[e] = tag
        if len(seen) != n_edges:
            raise ScenarioError("boundary tags do not cover every domain edge")
        bc_tags = [bc.tag for bc in self.bcs]
        if len(set(bc_tags)) != len(bc_tags):
            raise ScenarioError("boundary tag with more than one condition")
        missing = set(self.boundary) - set(bc_tags)
        if missing:
            raise ScenarioError(f"uncovered boundary tags {sorted(missing)}")
        unknown = set(bc_tags) - set(self.boundary)
        if unknown:
            raise ScenarioError(f"conditions for unknown tags {sorted(unknown)}")
        if not any(bc.kind == "dirichlet" for bc in self.bcs):
            raise ScenarioError("at least one Dirichlet boundary is required")
        poly = np.asarray(self.domain)
        for i, f in enumerate(self.network):
            for p in (f.a, f.b):
                if not (points_in_polygon([p], poly)[0] or self.distance_to_boundary([p])[0] <= self.tol):
                    raise ScenarioError(f"fracture {i} leaves the domain")

    def bc(self, tag: str) -> BoundaryCondition:
        for bc in self.bcs:
            if bc.tag == tag:
                return bc
        raise ScenarioError(f"no condition for boundary tag {tag!r}")

    def edge_tags(self) -> List[str]:
        out = [""] * len(self.domain)
        for tag, edges in self.boundary.items():
            for e in edges:
                out[e] = tag
        return out

    def distance_to_boundary(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return np.min([point_segment_distance(p, a, b) for a, b in self.domain_edges()], axis=0)

    def classify_boundary(self, points) -> List[str]:
        """Tag of the nearest domain edge for each boundary point."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        d = np.array([point_segment_distance(p, a, b) for a, b in self.domain_edges()])
        tags = self.edge_tags()
        return [tags[i] for i in np.argmin(d, axis=0)]

    def on_boundary(self, points) -> np.ndarray:
        return self.distance_to_boundary(points) <= self.tol

    def permeability(self, points) -> np.ndarray:
        """Matrix permeability tensors (n, 2, 2) at the given points."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.empty((len(p), 2, 2))
        if len(self.regions) == 1:
            out[:] = np.asarray(self.regions[0].K)
            return out
        done = np.zeros(len(p), dtype=bool)
        for r in self.regions:
            m = ~done & points_in_polygon(p, np.asarray(r.polygon))
            out[m] = np.asarray(r.K)
            done |= m
        if not np.all(done):
            # points on region boundaries: take the nearest region
            for i in np.flatnonzero(~done):
                dists = [min(point_segment_distance([p[i]], a, b)[0]
                             for a, b in zip(r.polygon, r.polygon[1:] + r.polygon[:1])) for r in self.regions]
                out[i] = np.asarray(self.regions[int(np.argmin(dists))].K)
        return out

    @property
    def dirichlet_range(self) -> Tuple[float, float]:
        vals = []
        for tag, edges in self.boundary.items():
            bc = self.bc(tag)
            if bc.kind != "dirichlet":
                continue
            for e in edges:
                p, q = self.domain_edges()[e]
                vals.extend(bc.evaluate([p, q]))
        return float(min(vals)), float(max(vals))

    def scaled(self, factor: float) -> "Scenario":
        """Scenario with all boundary data multiplied by ``factor``."""
        return replace(self, bcs=tuple(bc.scaled(factor) for bc in self.bcs), source=self.source * factor)

    def with_network(self, network: FractureNetwork) -> "Scenario":
        return replace(self, network=network)


# -- JSON ----------------------------------------------------------------------------

def scenario_to_dict(sc: Scenario) -> dict:
    d = {
        "name": sc.name,
        "field": sc.field,
        "domain": [list(p) for p in sc.domain],
        "boundary": {k: list(v) for k, v in sc.boundary.items()},
        "regions": [{"polygon": [list(p) for p in r.polygon], "K": [list(row) for row in r.K]} for r in sc.regions],
        "source": sc.source,
        "bcs": [],
    }
    for bc in sc.bcs:
        item = {"tag": bc.tag, "kind": bc.kind}
        if bc.linear is not None:
            item["linear"] = dict(zip("abc", bc.linear))
        else:
            item["value"] = bc.value
        d["bcs"].append(item)
    if sc.fracture_file is not None:
        d["fracture_file"] = sc.fracture_file
        d["fracture_defaults"] = dict(sc.fracture_defaults or {})
        d["fractures"] = []
    else:
        d["fractures"] = [{"a": list(f.a), "b": list(f.b), "aperture": f.aperture, "k_n": f.k_n, "k_t": f.k_t}
                          for f in sc.network]
    if sc.metadata:
        d["metadata"] = _jsonable(sc.metadata)
    return d


def _jsonable(obj):
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def dumps_scenario(sc: Scenario) -> str:
    # json writes floats with repr(): shortest string that round-trips exactly
    return json.dumps(scenario_to_dict(sc), indent=1) + "\n"


def save_scenario(sc: Scenario, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_scenario(sc))


def read_fracture_file(path, defaults: Mapping[str, float]) -> FractureNetwork:
    """Read ``xA yA xB yB`` rows (comma or whitespace separated, ``#`` comments)."""
    fr = []
    with open(path) as fh:
        for ln in fh:
            ln = ln.split("#")[0].strip()
            if not ln:
                continue
            parts = ln.replace(",", " ").split()
            try:
                xa, ya, xb, yb = map(float, parts[:4])
            except ValueError:
                continue  # header row
            fr.append(FractureSegment((xa, ya), (xb, yb), float(defaults["aperture"]),
                                      float(defaults["k_n"]), float(defaults["k_t"])))
    return FractureNetwork(tuple(fr))


def scenario_from_dict(d: Mapping, base_dir=None) -> Scenario:
    try:
        regions = tuple(Region(tuple(map(tuple, r["polygon"])), tuple(map(tuple, r["K"]))) for r in d["regions"])
        bcs = []
        for b in d["bcs"]:
            lin = b.get("linear")
            if lin is not None:
                lin = (lin["a"], lin["b"], lin["c"]) if isinstance(lin, Mapping) else tuple(lin)
            bcs.append(BoundaryCondition(str(b["tag"]), b["kind"], float(b.get("value", 0.0)), lin))
        fracture_file = d.get("fracture_file")
        defaults = d.get("fracture_defaults")
        if fracture_file is not None:
            path = resolve_data_path(fracture_file, base_dir)
            if path is None:
                raise ScenarioError(f"fracture geometry file {fracture_file!r} not found "
                                    f"(set {DATA_ENV} to the benchmark-data directory)")
            network = read_fracture_file(path, defaults)
        else:
            network = FractureNetwork(tuple(
                FractureSegment(tuple(f["a"]), tuple(f["b"]), float(f["aperture"]), float(f["k_n"]), float(f["k_t"]))
                for f in d.get("fractures", [])))
        return Scenario(
            domain=tuple(map(tuple, d["domain"])),
            regions=regions,
            network=network,
            bcs=tuple(bcs),
            field=d.get("field", "pressure"),
            source=float(d.get("source", 0.0)),
            name=d.get("name", ""),
            boundary=d.get("boundary"),
            metadata=d.get("metadata", {}),
            fracture_file=fracture_file,
            fracture_defaults=defaults,
        )
    except (KeyError, TypeError) as exc:
        raise ScenarioError(f"scenario schema violation: {exc!r}") from None


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        d = json.loads(path.read_text())
    except FileNotFoundError:
        raise ScenarioError(f"scenario file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON in {path}: {exc}") from None
    return scenario_from_dict(d, base_dir=path.parent)


# -- shipped data ---------------------------------------------------------------

def package_data_dir() -> Path:
    return Path(str(resources.files("frackbench") / "data"))


def data_dirs(base_dir=None) -> List[Path]:
    dirs = []
    if base_dir is not None:
        dirs.append(Path(base_dir))
    env = os.environ.get(DATA_ENV)
    if env:
        dirs.append(Path(env))
    dirs.append(package_data_dir())
    return dirs


def resolve_data_path(name, base_dir=None) -> Optional[Path]:
    """Locate a data file: as given, then in base_dir, $FRACKBENCH_DATA and the package data."""
    p = Path(name)
    if p.is_absolute() or p.exists():
        return p if p.exists() else None
    for d in data_dirs(base_dir):
        for cand in (d / p, d / "scenarios" / p, d / "meshes" / p):
            if cand.exists():
                return cand
    return None


# -- built-in benchmarks ---------------------------------------------------------

def _iso(k: float):
    return ((k, 0.0), (0.0, k))


# Hydrocoin points (x, z) after the hybrid-model modifications.
HYDROCOIN_NODES = {
    "1": (0.0, 150.0), "2'": (394.285714286, 100.714285714), "3'": (400.0, 100.0),
    "4'": (404.444444444, 100.555555556), "5": (800.0, 150.0), "6'": (1192.66666667, 100.916666667),
    "7'": (1200.0, 100.0), "8'": (1207.6744186, 100.959302326), "9": (1600.0, 150.0),
    "10": (1600.0, -1000.0), "11": (1505.0, -1000.0), "12": (1495.0, -1000.0),
    "13": (1007.5, -1000.0), "14": (992.5, -1000.0), "15": (0.0, -1000.0),
    "16": (1071.34615385, -566.346153846), "17": (1084.03846154, -579.038461538),
    "18": (1082.5, -587.5), "19": (1069.80769231, -574.807692308),
}

BENCHMARK3_FRACTURES = (
    (0.0500, 0.4160, 0.2200, 0.0624),
    (0.0500, 0.2750, 0.2500, 0.1350),
    (0.1500, 0.6300, 0.4500, 0.0900),
    (0.1500, 0.9167, 0.4000, 0.5000),
    (0.6500, 0.8333, 0.8500, 0.1667),
    (0.7000, 0.2350, 0.8500, 0.1675),
    (0.6000, 0.3800, 0.8500, 0.2675),
    (0.3500, 0.9714, 0.8000, 0.7143),
    (0.7500, 0.9574, 0.9500, 0.8155),
    (0.1500, 0.8363, 0.4000, 0.9727),
)

BENCHMARK2_FRACTURES = (
    ((0.0, 0.5), (1.0, 0.5)),
    ((0.5, 0.0), (0.5, 1.0)),
    ((0.5, 0.75), (1.0, 0.75)),
    ((0.75, 0.5), (0.75, 1.0)),
    ((0.5, 0.625), (0.75, 0.625)),
    ((0.625, 0.5), (0.625, 0.75)),
)


def _zone_width(top_a, top_b, bottom_a, bottom_b) -> float:
    """Perpendicular width of a straight zone from its bottom edge nodes and centerline."""
    top = 0.5 * (np.asarray(top_a) + np.asarray(top_b))
    bot_mid = 0.5 * (np.asarray(bottom_a) + np.asarray(bottom_b))
    t = (bot_mid - top) / np.hypot(*(bot_mid - top))
    n = np.array([-t[1], t[0]])
    return float(abs(np.dot(np.asarray(bottom_a) - np.asarray(bottom_b), n)))


def _benchmark1() -> Scenario:
    N = HYDROCOIN_NODES
    top = [N["1"], N["3'"], N["5"], N["7'"], N["9"]]
    domain = (N["15"], N["10"]) + tuple(reversed(top))
    # zone from 3' down to 11/12 and from 7' down to 13/14; widths from the bottom nodes
    end_a = tuple(0.5 * (np.asarray(N["11"]) + np.asarray(N["12"])))
    end_b = tuple(0.5 * (np.asarray(N["13"]) + np.asarray(N["14"])))
    w_a = _zone_width(N["3'"], N["3'"], N["11"], N["12"])
    w_b = _zone_width(N["7'"], N["7'"], N["13"], N["14"])
    kf = 1e-6
    network = FractureNetwork((
        FractureSegment(N["3'"], end_a, w_a, kf, kf),
        FractureSegment(N["7'"], end_b, w_b, kf, kf),
    ))
    bcs = (
        BoundaryCondition("top", "dirichlet", linear=(0.0, 1.0, 0.0)),
        BoundaryCondition("bottom", "neumann", 0.0),
        BoundaryCondition("left", "neumann", 0.0),
        BoundaryCondition("right", "neumann", 0.0),
    )
    return Scenario(domain, (Region(domain, _iso(1e-8)),), network, bcs, field="head", name="1",
                    boundary={"bottom": (0,), "right": (1,), "top": (2, 3, 4, 5), "left": (6,)},
                    metadata={"nodes": {k: list(v) for k, v in N.items()},
                              "line_200m": [[0.0, -200.0], [1600.0, -200.0]]})


def _unit_square():
    return ((0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0))


def _benchmark2(kf: float, name: str) -> Scenario:
    dom = _unit_square()
    network = FractureNetwork(tuple(FractureSegment(a, b, 1e-4, kf, kf) for a, b in BENCHMARK2_FRACTURES))
    bcs = (
        BoundaryCondition("left", "neumann", -1.0),
        BoundaryCondition("right", "dirichlet", 1.0),
        BoundaryCondition("top", "neumann", 0.0),
        BoundaryCondition("bottom", "neumann", 0.0),
    )
    return Scenario(dom, (Region(dom, _iso(1.0)),), network, bcs, name=name,
                    metadata={"lines": {"horizontal": [[0.0, 0.7], [1.0, 0.7]],
                                        "vertical": [[0.5, 0.0], [0.5, 1.0]],
                                        "diagonal": [[0.0, 0.1], [0.9, 1.0]]}})


def _benchmark3(case: str) -> Scenario:
    dom = _unit_square()
    fr = []
    for i, (xa, ya, xb, yb) in enumerate(BENCHMARK3_FRACTURES):
        k = 1e-4 if i in (3, 4) else 1e4
        fr.append(FractureSegment((xa, ya), (xb, yb), 1e-4, k, k))
    inlet, outlet, walls = ("top", "bottom", ("left", "right")) if case == "a" else ("left", "right", ("top", "bottom"))
    bcs = (BoundaryCondition(inlet, "dirichlet", 1.0), BoundaryCondition(outlet, "dirichlet", 0.0)) + tuple(
        BoundaryCondition(w, "neumann", 0.0) for w in walls)
    return Scenario(dom, (Region(dom, _iso(1.0)),), FractureNetwork(tuple(fr)), bcs, name="3" + case)


def _benchmark4(data_dir=None) -> Scenario:
    dom = ((0.0, 0.0), (700.0, 0.0), (700.0, 600.0), (0.0, 600.0))
    defaults = {"aperture": 1e-2, "k_n": 1e-8, "k_t": 1e-8}
    d = {
        "name": "4", "field": "pressure", "domain": [list(p) for p in dom],
        "regions": [{"polygon": [list(p) for p in dom], "K": [[1e-14, 0.0], [0.0, 1e-14]]}],
        "bcs": [{"tag": "left", "kind": "dirichlet", "value": 1013250.0},
                {"tag": "right", "kind": "dirichlet", "value": 0.0},
                {"tag": "top", "kind": "neumann", "value": 0.0},
                {"tag": "bottom", "kind": "neumann", "value": 0.0}],
        "fracture_file": "benchmark4_fractures.csv",
        "fracture_defaults": defaults,
        "metadata": {"lines": {"y500": [[0.0, 500.0], [700.0, 500.0]], "x625": [[625.0, 0.0], [625.0, 600.0]]}},
    }
    return scenario_from_dict(d, base_dir=data_dir)


def builtin_benchmark(bid, data_dir=None) -> Scenario:
    """Scenario for benchmark ``1``, ``2a``, ``2b``, ``3a``, ``3b`` or ``4``.

    Benchmark 4 needs ``benchmark4_fractures.csv`` in ``data_dir`` or
    ``$FRACKBENCH_DATA``.
    """
    bid = str(bid).lower()
    if bid == "1":
        return _benchmark1()
    if bid == "2a":
        return _benchmark2(1e4, "2a")
    if bid == "2b":
        return _benchmark2(1e-4, "2b")
    if bid in ("3a", "3b"):
        return _benchmark3(bid[1])
    if bid == "4":
        return _benchmark4(data_dir)
    raise ScenarioError(f"unknown benchmark id {bid!r}; expected one of {', '.join(BENCHMARK_IDS)}")
