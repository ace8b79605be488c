"""Run configuration: one versioned JSON document drives a whole run."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InputError, ValidationError
from .planner import PlannerConfig
from .recon import ReconWeights
from .sampling import CameraModel
from .trajectory import ClusterSpec, FlightParams, GaParams

CONFIG_SCHEMA = "viewplan/run_config/1"


@dataclass
class RunConfig:
    camera: CameraModel
    weights: ReconWeights
    planner: PlannerConfig
    cluster: ClusterSpec
    flight: FlightParams
    ga: GaParams
    mesh_path: Path | None = None
    scene_spec_path: Path | None = None
    overlap: float = 0.85
    margin: float = 20.0
    cell: float = 2.0
    ground_floor: float = 5.0
    seed: int = 0
    raw: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise InputError(f"failed to read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
        cfg = cls.from_json(doc, base_dir=path.parent)
        return cfg

    @classmethod
    def from_json(cls, doc: dict, base_dir: Path | None = None) -> "RunConfig":
        if doc.get("schema") != CONFIG_SCHEMA:
            raise ValidationError(f"unexpected config schema: {doc.get('schema')!r}")
        base = base_dir or Path(".")

        def section(name):
            val = doc.get(name, {})
            if not isinstance(val, dict):
                raise ValidationError(f"config section {name!r} must be an object")
            return val

        cam = section("camera")
        camera = CameraModel(
            fov=math.radians(float(cam.get("fov_deg", 60.0))),
            view_distance=float(cam.get("view_distance", 80.0)),
            max_range=float(cam.get("max_range", 2.0 * float(cam.get("view_distance", 80.0)))),
            max_incidence=math.radians(float(cam.get("max_incidence_deg", 85.0))),
        )
        ws = section("weights")
        weights = ReconWeights(
            k1=float(ws.get("k1", 32.0)),
            alpha1=math.radians(float(ws.get("alpha1_deg", 11.25))),
            k3=float(ws.get("k3", 8.0)),
            alpha3=math.radians(float(ws.get("alpha3_deg", 45.0))),
            d_max=float(ws.get("d_max", 2.0 * camera.view_distance)),
        )
        pl = section("planner")
        planner = PlannerConfig(
            t_h=float(pl.get("t_h", 0.2)),
            rotation_step=math.radians(float(pl.get("rotation_step_deg", 10.0))),
            neighbor_radius=(None if pl.get("neighbor_radius") is None
                             else float(pl["neighbor_radius"])),
            neighbor_angle=math.radians(float(pl.get("neighbor_angle_deg", 30.0))),
            max_substitution_rounds=int(pl.get("max_substitution_rounds", 3)),
        )
        planner.validate()
        cl = section("cluster")
        cluster = ClusterSpec(
            strategy=str(cl.get("strategy", "hybrid")),
            capacity=int(cl.get("capacity", 60)),
            direction_bins=int(cl.get("direction_bins", 4)),
            height_band=float(cl.get("height_band", 40.0)),
        )
        cluster.validate()
        fl = section("flight")
        flight = FlightParams(
            speed=float(fl.get("speed", 5.0)),
            trigger_interval=float(fl.get("trigger_interval", 3.0)),
            endurance=60.0 * float(fl.get("endurance_min", 25.0)),
            hover_overhead=float(fl.get("hover_overhead", 2.0)),
            launch_point=tuple(float(x) for x in fl.get("launch", (0.0, 0.0, 0.0))),
        )
        flight.validate()
        ga_doc = section("ga")
        ga = GaParams(
            population=int(ga_doc.get("population", 100)),
            generations=int(ga_doc.get("generations", 500)),
            tournament=int(ga_doc.get("tournament", 4)),
            mutation=float(ga_doc.get("mutation", 0.5)),
            elites=int(ga_doc.get("elites", 2)),
            stall_generations=int(ga_doc.get("stall_generations", 80)),
        )

        sampling = section("sampling")
        overlap = float(sampling.get("overlap", 0.85))
        if not 0 <= overlap < 1:
            raise ValidationError(f"sampling overlap must be in [0, 1), got {overlap}")
        sz = section("safe_zone")
        margin = float(sz.get("margin", 20.0))
        cell = float(sz.get("cell", 2.0))
        ground_floor = float(sz.get("ground_floor", 5.0))
        if margin <= 0 or cell <= 0 or cell > margin / 2:
            raise ValidationError("safe zone needs margin > 0 and cell <= margin/2")

        mesh_path = doc.get("mesh")
        scene_spec_path = doc.get("scene_spec")
        if (mesh_path is None) == (scene_spec_path is None):
            raise ValidationError("config must name exactly one of 'mesh' or 'scene_spec'")
        if mesh_path is not None:
            mesh_path = (base / mesh_path).resolve()
            if not mesh_path.is_file():
                raise ValidationError(f"mesh file not found: {mesh_path}")
        if scene_spec_path is not None:
            scene_spec_path = (base / scene_spec_path).resolve()
            if not scene_spec_path.is_file():
                raise ValidationError(f"scene spec not found: {scene_spec_path}")

        return cls(
            camera=camera, weights=weights, planner=planner, cluster=cluster,
            flight=flight, ga=ga,
            mesh_path=mesh_path, scene_spec_path=scene_spec_path,
            overlap=overlap, margin=margin, cell=cell, ground_floor=ground_floor,
            seed=int(doc.get("seed", 0)), raw=doc,
        )
