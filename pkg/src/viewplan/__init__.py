"""Optimized-view UAV flight planning for urban 3D reconstruction.

Pipeline: proxy mesh -> safe-flying zone -> Poisson-disk surface samples
-> initial viewpoints -> redundancy-minimizing view-set optimization ->
clustered GA-TSP trajectories split into endurance-feasible sorties.
"""

from .baseline import ObliqueConfig, plan_oblique
from .config import RunConfig
from .errors import (
    InfeasiblePlanError, InputError, MemoryBudgetError, ValidationError,
    ViewplanError,
)
from .mesh import TriMesh, load_mesh
from .planner import PlannerConfig, PlanResult, initial_viewpoints, optimize
from .recon import (
    PairGeometry, ReconReport, ReconWeights, evaluate, pair_q, quantize_levels,
    sample_h, view_redundancy,
)
from .sampling import CameraModel, SamplingParams, SurfaceSamples, disk_radius, poisson_sample
from .scene import Building, SafeZone, SceneSpec, dilate, generate_scene, random_scene
from .trajectory import (
    ClusterSpec, EdgeCost, FlightParams, FlightPlan, GaParams, cluster,
    edge_cost, plan_flight, solve_tour, split_and_interpolate,
)
from .visibility import Bvh, ViewSet, VisibilityMatrix, build_matrix, is_visible

__version__ = "0.1.0"

__all__ = [
    "Building", "Bvh", "CameraModel", "ClusterSpec", "EdgeCost", "FlightParams",
    "FlightPlan", "GaParams", "InfeasiblePlanError", "InputError",
    "MemoryBudgetError", "ObliqueConfig", "PairGeometry", "PlanResult",
    "PlannerConfig", "ReconReport", "ReconWeights", "RunConfig", "SafeZone",
    "SamplingParams", "SceneSpec", "SurfaceSamples", "TriMesh", "ValidationError",
    "ViewSet", "ViewplanError", "VisibilityMatrix", "build_matrix", "cluster",
    "dilate", "disk_radius", "edge_cost", "evaluate", "generate_scene",
    "initial_viewpoints", "is_visible", "load_mesh", "optimize", "pair_q",
    "plan_flight", "plan_oblique", "poisson_sample", "quantize_levels",
    "random_scene", "sample_h", "solve_tour", "split_and_interpolate",
    "view_redundancy",
]
