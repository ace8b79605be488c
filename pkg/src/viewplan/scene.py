"""Synthetic urban scenes and the dilated safe-flying zone.

The safe zone is a conservative voxel occupancy grid: a voxel is forbidden
when its center lies within the dilation margin of the proxy surface, or
inside a closed proxy volume.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, MemoryBudgetError, ValidationError
from .mesh import TriMesh

log = logging.getLogger(__name__)

DEFAULT_MARGIN = 20.0
DEFAULT_CELL = 2.0
DEFAULT_GROUND_FLOOR = 5.0
DEFAULT_GRID_BUDGET = 512 * 1024 * 1024


@dataclass(frozen=True)
class Building:
    """Axis-aligned box building standing on the ground plane."""

    x0: float
    y0: float
    x1: float
    y1: float
    height: float
    name: str = ""

    def footprint_overlaps(self, other: "Building") -> bool:
        return (
            self.x0 < other.x1 and other.x0 < self.x1
            and self.y0 < other.y1 and other.y0 < self.y1
        )


@dataclass
class SceneSpec:
    """Parameters of a synthetic box-city scene."""

    ground_x: float
    ground_y: float
    buildings: list[Building] = field(default_factory=list)
    seed: int = 0

    def validate(self) -> None:
        if self.ground_x <= 0 or self.ground_y <= 0:
            raise ValidationError("ground extent must be positive")
        for b in self.buildings:
            if b.height <= 0:
                raise ValidationError(f"building {b.name or '?'} has nonpositive height")
            if b.x1 <= b.x0 or b.y1 <= b.y0:
                raise ValidationError(f"building {b.name or '?'} has an empty footprint")
            if b.x0 < 0 or b.y0 < 0 or b.x1 > self.ground_x or b.y1 > self.ground_y:
                raise ValidationError(f"building {b.name or '?'} extends outside the ground plane")
        for i, a in enumerate(self.buildings):
            for b in self.buildings[i + 1:]:
                if a.footprint_overlaps(b):
                    raise ValidationError(
                        f"building footprints overlap: {a.name or i} and {b.name or '?'}"
                    )

    def to_json(self) -> dict:
        return {
            "schema": "scene_spec/1",
            "ground": [self.ground_x, self.ground_y],
            "seed": self.seed,
            "buildings": [
                {"min": [b.x0, b.y0], "max": [b.x1, b.y1], "height": b.height, "name": b.name}
                for b in self.buildings
            ],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "SceneSpec":
        try:
            if doc.get("schema", "scene_spec/1") != "scene_spec/1":
                raise InputError(f"unknown scene spec schema: {doc['schema']}")
            buildings = [
                Building(
                    x0=float(b["min"][0]), y0=float(b["min"][1]),
                    x1=float(b["max"][0]), y1=float(b["max"][1]),
                    height=float(b["height"]), name=str(b.get("name", "")),
                )
                for b in doc.get("buildings", [])
            ]
            spec = cls(
                ground_x=float(doc["ground"][0]),
                ground_y=float(doc["ground"][1]),
                buildings=buildings,
                seed=int(doc.get("seed", 0)),
            )
        except (KeyError, TypeError, IndexError) as exc:
            raise InputError(f"malformed scene spec: {exc}") from exc
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "SceneSpec":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"failed to read scene spec {path}: {exc}") from exc
        return cls.from_json(doc)


def generate_scene(spec: SceneSpec) -> TriMesh:
    """Build the ground plane plus open-bottomed box buildings as one mesh."""
    spec.validate()
    vertices: list[list[float]] = []
    triangles: list[list[int]] = []

    def add_quad(a, b, c, d):
        # Two triangles, counter-clockwise as seen from the outward side.
        base = len(vertices)
        vertices.extend([a, b, c, d])
        triangles.append([base, base + 1, base + 2])
        triangles.append([base, base + 2, base + 3])

    gx, gy = spec.ground_x, spec.ground_y
    add_quad([0, 0, 0], [gx, 0, 0], [gx, gy, 0], [0, gy, 0])

    for b in spec.buildings:
        x0, y0, x1, y1, h = b.x0, b.y0, b.x1, b.y1, b.height
        # No bottom face: it would be buried in the ground plane and only
        # produce unobservable downward samples.
        add_quad([x0, y0, h], [x1, y0, h], [x1, y1, h], [x0, y1, h])   # roof (+z)
        add_quad([x0, y0, 0], [x1, y0, 0], [x1, y0, h], [x0, y0, h])   # -y wall
        add_quad([x1, y1, 0], [x0, y1, 0], [x0, y1, h], [x1, y1, h])   # +y wall
        add_quad([x0, y1, 0], [x0, y0, 0], [x0, y0, h], [x0, y1, h])   # -x wall
        add_quad([x1, y0, 0], [x1, y1, 0], [x1, y1, h], [x1, y0, h])   # +x wall

    return TriMesh(np.array(vertices, dtype=np.float64), np.array(triangles))


def random_scene(n_buildings: int, ground: float, seed: int,
                 min_side: float = 10.0, max_side: float = 30.0,
                 min_height: float = 10.0, max_height: float = 60.0) -> SceneSpec:
    """Draw non-overlapping random box buildings on a square ground plane."""
    rng = np.random.default_rng(seed)
    buildings: list[Building] = []
    attempts = 0
    while len(buildings) < n_buildings and attempts < 1000 * n_buildings:
        attempts += 1
        sx = rng.uniform(min_side, max_side)
        sy = rng.uniform(min_side, max_side)
        x0 = rng.uniform(0, ground - sx)
        y0 = rng.uniform(0, ground - sy)
        cand = Building(x0, y0, x0 + sx, y0 + sy, rng.uniform(min_height, max_height),
                        name=f"b{len(buildings)}")
        if not any(cand.footprint_overlaps(b) for b in buildings):
            buildings.append(cand)
    return SceneSpec(ground, ground, buildings, seed=seed)


class SafeZone:
    """Forbidden-airspace voxel grid derived from a proxy mesh by dilation."""

    def __init__(self, source: TriMesh, margin: float, cell: float,
                 origin, occupancy, ground_floor: float):
        self.source = source
        self.margin = float(margin)
        self.cell = float(cell)
        self.origin = np.asarray(origin, dtype=np.float64)
        self.occupancy = occupancy  # (nx, ny, nz) bool
        self.ground_floor = float(ground_floor)

    def is_free(self, points) -> np.ndarray:
        """Vectorized free-airspace query; points outside the grid are free
        above the ground floor."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        free = points[:, 2] >= self.ground_floor
        idx = np.floor((points - self.origin) / self.cell).astype(np.int64)
        inside = np.all((idx >= 0) & (idx < self.occupancy.shape), axis=1)
        sel = inside & free
        if np.any(sel):
            i = idx[sel]
            free[sel] &= ~self.occupancy[i[:, 0], i[:, 1], i[:, 2]]
        return free

    def max_forbidden_altitude(self) -> float:
        """Top of the highest occupied voxel; ground floor if none."""
        occupied_k = np.nonzero(self.occupancy.any(axis=(0, 1)))[0]
        if len(occupied_k) == 0:
            return self.ground_floor
        return float(self.origin[2] + (occupied_k[-1] + 1) * self.cell)

    def occupied_centers(self) -> np.ndarray:
        idx = np.argwhere(self.occupancy)
        return self.origin + (idx + 0.5) * self.cell


def dilate(mesh: TriMesh, margin: float = DEFAULT_MARGIN, cell: float = DEFAULT_CELL,
           ground_floor: float = DEFAULT_GROUND_FLOOR,
           memory_budget: int = DEFAULT_GRID_BUDGET) -> SafeZone:
    """Dilate the proxy mesh into a forbidden-airspace occupancy grid."""
    if margin <= 0:
        raise ValidationError("dilation margin must be positive")
    if cell > margin / 2:
        raise ValidationError(f"cell size {cell} must be <= margin/2 = {margin / 2}")

    lo, hi = mesh.bounds()
    pad = margin + 2 * cell
    origin = lo - pad
    shape = np.ceil((hi + pad - origin) / cell).astype(np.int64)
    required = int(np.prod(shape))
    if required > memory_budget:
        raise MemoryBudgetError(
            f"occupancy grid of {shape} voxels ({required} bytes) exceeds budget",
            required_bytes=required, budget_bytes=memory_budget,
        )
    occ = np.zeros(tuple(shape), dtype=bool)

    corners = mesh.corners()
    for t in range(mesh.n_triangles):
        tri = corners[t]
        tlo = np.floor((tri.min(axis=0) - margin - cell - origin) / cell).astype(np.int64)
        thi = np.ceil((tri.max(axis=0) + margin + cell - origin) / cell).astype(np.int64)
        tlo = np.maximum(tlo, 0)
        thi = np.minimum(thi, shape)
        if np.any(thi <= tlo):
            continue
        ii, jj, kk = np.meshgrid(*(np.arange(tlo[d], thi[d]) for d in range(3)), indexing="ij")
        centers = origin + (np.stack([ii, jj, kk], axis=-1) + 0.5) * cell
        pts = centers.reshape(-1, 3)
        d = point_triangle_distance(pts, tri[0], tri[1], tri[2])
        near = (d <= margin).reshape(ii.shape)
        occ[tlo[0]:thi[0], tlo[1]:thi[1], tlo[2]:thi[2]] |= near

    if mesh.is_watertight():
        _fill_interior(mesh, origin, cell, occ)
    else:
        log.warning("mesh is not watertight; safe zone uses surface-band dilation only")

    return SafeZone(mesh, margin, cell, origin, occ, ground_floor)


def _fill_interior(mesh: TriMesh, origin, cell, occ) -> None:
    """Scanline parity fill per voxel column (vertical ray crossings)."""
    nx, ny, nz = occ.shape
    # Tiny irrational-ish offset keeps column centers off shared triangle edges.
    cx = origin[0] + (np.arange(nx) + 0.5) * cell + 1.9371e-7
    cy = origin[1] + (np.arange(ny) + 0.5) * cell + 2.7193e-7
    crossings: dict[tuple[int, int], list[float]] = {}
    corners = mesh.corners()
    for tri in corners:
        a, b, c = tri
        det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
        if abs(det) < 1e-12:
            continue  # vertical triangle: no column crossing
        xs = np.searchsorted(cx, [tri[:, 0].min(), tri[:, 0].max()])
        ys = np.searchsorted(cy, [tri[:, 1].min(), tri[:, 1].max()])
        for i in range(xs[0], xs[1]):
            for j in range(ys[0], ys[1]):
                px, py = cx[i], cy[j]
                u = ((b[0] - px) * (c[1] - py) - (c[0] - px) * (b[1] - py)) / det
                v = ((c[0] - px) * (a[1] - py) - (a[0] - px) * (c[1] - py)) / det
                w = 1.0 - u - v
                if u < 0 or v < 0 or w < 0:
                    continue
                z = u * a[2] + v * b[2] + w * c[2]
                crossings.setdefault((i, j), []).append(z)
    kz = origin[2] + (np.arange(nz) + 0.5) * cell
    for (i, j), zs in crossings.items():
        zs.sort()
        for lo, hi in zip(zs[::2], zs[1::2]):
            occ[i, j, (kz >= lo) & (kz <= hi)] = True


def point_triangle_distance(points, a, b, c) -> np.ndarray:
    """Exact unsigned distance from each point to triangle (a, b, c)."""
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    ab = b - a
    ac = c - a
    ap = points - a
    d1 = ap @ ab
    d2 = ap @ ac
    bp = points - b
    d3 = bp @ ab
    d4 = bp @ ac
    cp = points - c
    d5 = cp @ ab
    d6 = cp @ ac

    closest = np.empty_like(points)
    done = np.zeros(len(points), dtype=bool)

    def settle(mask, value):
        m = mask & ~done
        closest[m] = value[m] if value.ndim == 2 else value
        done[m] = True

    settle((d1 <= 0) & (d2 <= 0), np.broadcast_to(a, points.shape))
    settle((d3 >= 0) & (d4 <= d3), np.broadcast_to(b, points.shape))
    settle((d6 >= 0) & (d5 <= d6), np.broadcast_to(c, points.shape))

    vc = d1 * d4 - d3 * d2
    mask = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    t = np.divide(d1, d1 - d3, out=np.zeros_like(d1), where=(d1 - d3) != 0)
    settle(mask, a + t[:, None] * ab)

    vb = d5 * d2 - d1 * d6
    mask = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    t = np.divide(d2, d2 - d6, out=np.zeros_like(d2), where=(d2 - d6) != 0)
    settle(mask, a + t[:, None] * ac)

    va = d3 * d6 - d5 * d4
    mask = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    denom = (d4 - d3) + (d5 - d6)
    t = np.divide(d4 - d3, denom, out=np.zeros_like(denom), where=denom != 0)
    settle(mask, b + t[:, None] * (c - b))

    denom = va + vb + vc
    u = np.divide(vb, denom, out=np.zeros_like(denom), where=denom != 0)
    v = np.divide(vc, denom, out=np.zeros_like(denom), where=denom != 0)
    settle(np.ones(len(points), dtype=bool), a + u[:, None] * ab + v[:, None] * ac)

    return np.linalg.norm(points - closest, axis=1)
