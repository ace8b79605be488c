"""Poisson-disk surface sampling at a density set by image overlap.

The disk radius follows from the camera footprint at the standoff distance:
footprint = 2 * view_distance * tan(fov / 2), radius = footprint * (1 - overlap).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .mesh import TriMesh

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CameraModel:
    """Camera/visibility parameters used throughout the pipeline.

    fov is the full field of view across the image's long side (radians);
    view_distance is the standoff realizing the target ground sampling
    distance; max_range caps usable imaging distance; max_incidence caps
    the angle between the view ray and the surface normal.
    """

    fov: float
    view_distance: float
    max_range: float
    max_incidence: float = math.radians(85.0)

    def __post_init__(self):
        if not 0 < self.fov < math.pi:
            raise ValidationError(f"fov must be in (0, pi), got {self.fov}")
        if not 0 < self.view_distance <= self.max_range:
            raise ValidationError("view_distance must be in (0, max_range]")
        if not 0 < self.max_incidence <= math.pi / 2:
            raise ValidationError("max_incidence must be in (0, pi/2]")

    @property
    def footprint(self) -> float:
        """Projected footprint edge at the standoff distance (meters)."""
        return 2.0 * self.view_distance * math.tan(self.fov / 2.0)


@dataclass(frozen=True)
class SamplingParams:
    overlap: float
    footprint: float
    disk_radius: float


def disk_radius(camera: CameraModel, overlap: float) -> SamplingParams:
    """Disk radius realizing the requested image overlap fraction."""
    if not 0 <= overlap < 1:
        raise ValidationError(f"overlap must be in [0, 1), got {overlap}")
    footprint = camera.footprint
    return SamplingParams(overlap=overlap, footprint=footprint,
                          disk_radius=footprint * (1.0 - overlap))


@dataclass
class SurfaceSamples:
    """Poisson-disk samples on the proxy surface, flat-triangle normals."""

    positions: np.ndarray   # (n, 3)
    normals: np.ndarray     # (n, 3) unit
    triangle_ids: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.positions)


def poisson_sample(mesh: TriMesh, radius: float, seed: int,
                   batch: int = 1024, stall_batches: int = 8) -> SurfaceSamples:
    """Area-weighted dart throwing with minimum-distance rejection.

    Darts are drawn in fixed-size batches; sampling stops after
    ``stall_batches`` consecutive batches without an accepted dart, which
    makes the result maximal to high probability. Deterministic per seed.
    """
    if radius <= 0:
        raise ValidationError("sampling radius must be positive")
    if mesh.area <= 0:
        raise ValidationError("mesh has zero surface area")
    lo, hi = mesh.bounds()
    if radius > np.linalg.norm(hi - lo):
        log.warning("sampling radius %.3g exceeds mesh diameter; expect a single sample", radius)

    rng = np.random.default_rng(seed)
    cum_area = np.cumsum(mesh.areas)
    corners = mesh.corners()

    cell = radius
    grid: dict[tuple[int, int, int], list[int]] = {}
    positions: list[np.ndarray] = []
    tri_ids: list[int] = []
    r2 = radius * radius

    def cell_of(p):
        return (int(p[0] // cell), int(p[1] // cell), int(p[2] // cell))

    def far_enough(p) -> bool:
        ci, cj, ck = cell_of(p)
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                for dk in (-1, 0, 1):
                    for idx in grid.get((ci + di, cj + dj, ck + dk), ()):
                        d = positions[idx] - p
                        if d @ d < r2:
                            return False
        return True

    stall = 0
    while stall < stall_batches:
        tri = np.searchsorted(cum_area, rng.random(batch) * cum_area[-1])
        u = rng.random((batch, 2))
        flip = u.sum(axis=1) > 1.0
        u[flip] = 1.0 - u[flip]
        pts = (
            corners[tri, 0]
            + u[:, :1] * (corners[tri, 1] - corners[tri, 0])
            + u[:, 1:] * (corners[tri, 2] - corners[tri, 0])
        )
        accepted_any = False
        for p, t in zip(pts, tri):
            if far_enough(p):
                idx = len(positions)
                positions.append(p)
                tri_ids.append(int(t))
                grid.setdefault(cell_of(p), []).append(idx)
                accepted_any = True
        stall = 0 if accepted_any else stall + 1

    tri_ids_arr = np.array(tri_ids, dtype=np.int64)
    return SurfaceSamples(
        positions=np.array(positions),
        normals=mesh.normals[tri_ids_arr],
        triangle_ids=tri_ids_arr,
    )
