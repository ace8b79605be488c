"""Stable on-disk artifact formats: viewpoint JSON, flight-plan JSON/CSV,
reconstructability CSV, and PLY point-cloud debug exports.

All writers emit deterministic bytes for identical inputs: keys are
explicitly ordered and floats use Python's shortest round-trip repr.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import InputError
from .recon import LEVEL_COLORS, ReconReport
from .trajectory import FlightPlan
from .visibility import ViewSet

VIEWPOINTS_SCHEMA = "viewplan/viewpoints/1"
FLIGHTPLAN_SCHEMA = "viewplan/flightplan/1"


def write_ply_points(path, points, normals=None, colors=None) -> None:
    """ASCII PLY point cloud, optional per-point normals and uchar colors."""
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    header = ["ply", "format ascii 1.0", f"element vertex {len(points)}",
              "property double x", "property double y", "property double z"]
    if normals is not None:
        header += ["property double nx", "property double ny", "property double nz"]
    if colors is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header += ["end_header"]
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("\n".join(header) + "\n")
        for i, p in enumerate(points):
            row = [repr(float(x)) for x in p]
            if normals is not None:
                row += [repr(float(x)) for x in normals[i]]
            if colors is not None:
                row += [str(int(x)) for x in colors[i]]
            fh.write(" ".join(row) + "\n")


def _dump_json(doc, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def save_viewpoints(views: ViewSet, path) -> None:
    doc = {
        "schema": VIEWPOINTS_SCHEMA,
        "viewpoints": [
            {
                "id": i,
                "position": [float(x) for x in views.positions[i]],
                "direction": [float(x) for x in views.directions[i]],
                "state": views.states[i],
            }
            for i in range(len(views))
        ],
    }
    _dump_json(doc, path)


def load_viewpoints(path) -> ViewSet:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"failed to read viewpoints {path}: {exc}") from exc
    if doc.get("schema") != VIEWPOINTS_SCHEMA:
        raise InputError(f"unexpected viewpoint schema: {doc.get('schema')!r}")
    try:
        rows = doc["viewpoints"]
        positions = np.array([r["position"] for r in rows], dtype=float).reshape(-1, 3)
        directions = np.array([r["direction"] for r in rows], dtype=float).reshape(-1, 3)
        states = [str(r.get("state", "kept")) for r in rows]
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"malformed viewpoint file {path}: {exc}") from exc
    return ViewSet(positions, directions, states or [])


def save_flightplan_json(plan: FlightPlan, path) -> None:
    doc = {
        "schema": FLIGHTPLAN_SCHEMA,
        "params": {
            "speed": plan.params.speed,
            "trigger_interval": plan.params.trigger_interval,
            "endurance": plan.params.endurance,
            "hover_overhead": plan.params.hover_overhead,
        },
        "sorties": [
            {
                "length": s.length,
                "time": s.time,
                "n_view_images": s.n_view_images,
                "n_interpolated_images": s.n_interpolated_images,
                "waypoints": [
                    {
                        "position": [float(x) for x in w.position],
                        "direction": [float(x) for x in w.direction],
                        "trigger": w.trigger,
                        "kind": w.kind,
                        "view_id": w.view_id,
                    }
                    for w in s.waypoints
                ],
            }
            for s in plan.sorties
        ],
    }
    _dump_json(doc, path)


def save_flightplan_csv(plan: FlightPlan, path) -> None:
    """One row per waypoint: sortie, seq, x, y, z, yaw_deg, pitch_deg, trigger."""
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("sortie,seq,x,y,z,yaw_deg,pitch_deg,trigger\n")
        for si, s in enumerate(plan.sorties):
            for wi, w in enumerate(s.waypoints):
                yaw = float(np.degrees(np.arctan2(w.direction[1], w.direction[0])))
                pitch = float(np.degrees(np.arcsin(np.clip(-w.direction[2], -1.0, 1.0))))
                x, y, z = (float(c) for c in w.position)
                fh.write(f"{si},{wi},{x!r},{y!r},{z!r},{yaw!r},{pitch!r},{int(w.trigger)}\n")


def save_flightplan_ply(plan: FlightPlan, path) -> None:
    pts = [w.position for s in plan.sorties for w in s.waypoints]
    write_ply_points(path, np.array(pts).reshape(-1, 3))


def save_recon_csv(report: ReconReport, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in report.to_csv_rows():
            fh.write(row + "\n")


def save_recon_histogram_csv(report: ReconReport, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        for row in report.histogram_csv_rows():
            fh.write(row + "\n")


def save_recon_ply(report: ReconReport, positions, path) -> None:
    colors = np.array([LEVEL_COLORS[int(lv)] for lv in report.levels], dtype=int)
    write_ply_points(path, positions, colors=colors)


def save_summary(summary: dict, path) -> None:
    _dump_json(summary, path)


def ensure_dir(path) -> Path:
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path
