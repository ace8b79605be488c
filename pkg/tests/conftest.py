import warnings
from pathlib import Path

import numpy as np
import pytest

import viewplan as vp

# The TBB runtime in this image is older than numba wants; the fallback
# threading layer is functionally identical.
warnings.filterwarnings("ignore", message=".*TBB.*")

REPO = Path(__file__).resolve().parents[1]
CONFIGS = REPO / "configs"


@pytest.fixture(scope="session")
def reference_config():
    return vp.RunConfig.load(CONFIGS / "reference.json")


@pytest.fixture(scope="session")
def reference_scene():
    return vp.SceneSpec.load(CONFIGS / "reference_scene.json")


@pytest.fixture(scope="session")
def reference_mesh(reference_scene):
    return vp.generate_scene(reference_scene)


@pytest.fixture(scope="session")
def two_building_mesh():
    spec = vp.SceneSpec(100.0, 100.0, [
        vp.Building(20, 20, 40, 45, 25, "a"),
        vp.Building(55, 50, 80, 80, 40, "b"),
    ])
    return vp.generate_scene(spec)


@pytest.fixture(scope="session")
def flat_zone():
    """A safe zone over a bare ground plane: everything above 5 m is free."""
    mesh = vp.TriMesh(
        np.array([[0, 0, 0], [200, 0, 0], [200, 200, 0], [0, 200, 0]], dtype=float),
        np.array([[0, 1, 2], [0, 2, 3]]),
    )
    return vp.dilate(mesh, margin=20.0, cell=2.0)
