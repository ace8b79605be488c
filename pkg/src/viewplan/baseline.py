"""Classical fixed-height oblique (penta-view) grid planner.

Serves as the comparison arm: one nadir plus four tilted cameras at each
exposure station of a serpentine grid, with spacings derived from the
ground footprint and the configured overlaps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .sampling import CameraModel
from .visibility import STATE_KEPT, ViewSet


@dataclass
class ObliqueConfig:
    height: float                 # flight height AGL, meters
    forward_overlap: float = 0.85
    side_overlap: float = 0.85
    tilt: float = math.radians(45.0)
    camera: CameraModel | None = None

    def validate(self, scene_max_height: float = 0.0) -> None:
        if self.camera is None:
            raise ValidationError("oblique config needs a camera model")
        if self.height <= scene_max_height:
            raise ValidationError(
                f"flight height {self.height} must exceed scene height {scene_max_height}")
        for name, ov in (("forward", self.forward_overlap), ("side", self.side_overlap)):
            if not 0 <= ov < 1:
                raise ValidationError(f"{name} overlap must be in [0, 1)")
        if not 0 < self.tilt < math.pi / 2:
            raise ValidationError("tilt must be in (0, pi/2)")


def plan_oblique(bounds_min, bounds_max, cfg: ObliqueConfig,
                 scene_max_height: float = 0.0) -> ViewSet:
    """Serpentine penta-view grid over the given ground bounds."""
    cfg.validate(scene_max_height)
    footprint = 2.0 * cfg.height * math.tan(cfg.camera.fov / 2.0)
    along = footprint * (1.0 - cfg.forward_overlap)
    across = footprint * (1.0 - cfg.side_overlap)
    if along <= 0 or across <= 0:
        raise ValidationError("overlap configuration yields nonpositive spacing")

    x0, y0 = float(bounds_min[0]), float(bounds_min[1])
    x1, y1 = float(bounds_max[0]), float(bounds_max[1])
    n_lines = int(math.ceil(max(y1 - y0, 0.0) / across)) + 1
    n_stations = int(math.ceil(max(x1 - x0, 0.0) / along)) + 1

    t = cfg.tilt
    dirs5 = np.array([
        [0.0, 0.0, -1.0],
        [math.sin(t), 0.0, -math.cos(t)],
        [-math.sin(t), 0.0, -math.cos(t)],
        [0.0, math.sin(t), -math.cos(t)],
        [0.0, -math.sin(t), -math.cos(t)],
    ])

    positions = []
    directions = []
    for line in range(n_lines):
        y = y0 + line * across
        xs = range(n_stations) if line % 2 == 0 else range(n_stations - 1, -1, -1)
        for sx in xs:
            p = np.array([x0 + sx * along, y, cfg.height])
            for d in dirs5:
                positions.append(p)
                directions.append(d)
    return ViewSet(np.array(positions), np.array(directions),
                   [STATE_KEPT] * len(positions))
