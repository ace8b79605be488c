"""End-to-end orchestration: proxy mesh in, flight plan and reports out."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass

import numpy as np

from . import io
from .baseline import ObliqueConfig, plan_oblique
from .config import RunConfig
from .mesh import TriMesh, load_mesh
from .planner import InitialPlacement, PlanResult, initial_viewpoints, optimize
from .recon import ReconReport, evaluate
from .sampling import SurfaceSamples, disk_radius, poisson_sample
from .scene import SafeZone, SceneSpec, dilate, generate_scene
from .trajectory import FlightPlan, plan_flight
from .visibility import Bvh, VisibilityMatrix, ViewSet, build_matrix

log = logging.getLogger(__name__)


@dataclass
class PlanArtifacts:
    mesh: TriMesh
    zone: SafeZone
    samples: SurfaceSamples
    placement: InitialPlacement
    vis: VisibilityMatrix
    plan: PlanResult
    flight: FlightPlan
    report: ReconReport
    timings: dict


class _Stopwatch:
    def __init__(self):
        self.timings = {}
        self._last = time.perf_counter()

    def lap(self, name: str) -> None:
        now = time.perf_counter()
        self.timings[name] = now - self._last
        log.info("stage %-22s %.2f s", name, self.timings[name])
        self._last = now


def load_scene(cfg: RunConfig) -> TriMesh:
    if cfg.mesh_path is not None:
        return load_mesh(cfg.mesh_path)
    return generate_scene(SceneSpec.load(cfg.scene_spec_path))


def run_plan(cfg: RunConfig, threads: int | None = None) -> PlanArtifacts:
    """Run the five-stage pipeline: safe zone, sampling, initial views,
    optimization, trajectory generation."""
    watch = _Stopwatch()
    mesh = load_scene(cfg)
    watch.lap("load_scene")

    zone = dilate(mesh, cfg.margin, cfg.cell, cfg.ground_floor)
    watch.lap("safe_zone")

    params = disk_radius(cfg.camera, cfg.overlap)
    samples = poisson_sample(mesh, params.disk_radius, cfg.seed)
    watch.lap("sampling")

    planner_cfg = cfg.planner
    if planner_cfg.neighbor_radius is None:
        planner_cfg.neighbor_radius = 2.0 * params.disk_radius
    placement = initial_viewpoints(samples, cfg.camera, zone, planner_cfg)
    watch.lap("initial_viewpoints")

    accel = Bvh(mesh)
    vis = build_matrix(samples, placement.views, cfg.camera, accel, threads=threads)
    watch.lap("visibility")

    plan = optimize(placement, samples, vis, cfg.weights, planner_cfg)
    watch.lap("optimize")

    flight = plan_flight(plan.views, plan.kept_ids, cfg.cluster, cfg.flight,
                         zone, cfg.seed, cfg.ga)
    watch.lap("trajectory")

    kept_vis = VisibilityMatrix(vis.dense[:, plan.kept_ids])
    kept_views = plan.views.subset(plan.kept_ids)
    report = evaluate(samples, kept_views, kept_vis, cfg.weights, planner_cfg.t_h)
    watch.lap("evaluate")

    return PlanArtifacts(mesh=mesh, zone=zone, samples=samples, placement=placement,
                         vis=vis, plan=plan, flight=flight, report=report,
                         timings=watch.timings)


def write_plan_artifacts(art: PlanArtifacts, out_dir) -> dict:
    """Write all plan outputs; returns the run summary document."""
    out = io.ensure_dir(out_dir)
    io.save_viewpoints(art.plan.views, out / "viewpoints.json")
    kept = art.plan.views.subset(art.plan.kept_ids)
    io.write_ply_points(out / "viewpoints_kept.ply", kept.positions,
                        normals=kept.directions)
    io.save_flightplan_json(art.flight, out / "flightplan.json")
    io.save_flightplan_csv(art.flight, out / "flightplan.csv")
    io.save_flightplan_ply(art.flight, out / "flightplan.ply")
    io.save_recon_csv(art.report, out / "recon.csv")
    io.save_recon_histogram_csv(art.report, out / "recon_histogram.csv")
    io.save_recon_ply(art.report, art.samples.positions, out / "recon.ply")
    io.write_ply_points(out / "samples.ply", art.samples.positions,
                        normals=art.samples.normals)

    triggered = sum(
        1 for s in art.flight.sorties for w in s.waypoints
        if w.kind == "view_point" and w.trigger
    )
    summary = {
        "schema": "viewplan/summary/1",
        "counts": dict(art.plan.counts),
        "samples": len(art.samples),
        "infeasible_samples": [int(i) for i in art.plan.infeasible_samples],
        "sorties": len(art.flight.sorties),
        "triggered_viewpoints": triggered,
        "view_images": art.flight.n_view_images,
        "interpolated_images": art.flight.n_interpolated_images,
        "total_length_m": art.flight.total_length,
        "level_counts": [int(c) for c in art.report.counts],
        "level_percentages": [float(p) for p in art.report.percentages],
        "mean_h": float(np.mean(art.report.h)) if len(art.report.h) else 0.0,
    }
    io.save_summary(summary, out / "summary.json")
    return summary


def evaluate_views(mesh: TriMesh, views: ViewSet, cfg: RunConfig,
                   threads: int | None = None) -> tuple[ReconReport, SurfaceSamples]:
    """Reconstructability report for an arbitrary viewpoint file (kept poses
    only), using the config's sampling so competing plans share sample ids."""
    kept_ids = [i for i, st in enumerate(views.states) if st == "kept"] or list(range(len(views)))
    kept = views.subset(kept_ids)
    params = disk_radius(cfg.camera, cfg.overlap)
    samples = poisson_sample(mesh, params.disk_radius, cfg.seed)
    accel = Bvh(mesh)
    vis = build_matrix(samples, kept, cfg.camera, accel, threads=threads)
    report = evaluate(samples, kept, vis, cfg.weights, cfg.planner.t_h)
    return report, samples


def run_baseline(mesh: TriMesh, cfg: RunConfig, oblique: ObliqueConfig) -> ViewSet:
    lo, hi = mesh.bounds()
    return plan_oblique(lo[:2], hi[:2], oblique, scene_max_height=float(hi[2]))
