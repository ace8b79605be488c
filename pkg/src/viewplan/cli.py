"""Command-line entry point.

Subcommands: ``synth`` (scene spec to mesh), ``plan`` (full pipeline),
``baseline`` (oblique grid), ``evaluate`` (reconstructability report for a
viewpoint file). Exit codes: 0 success, 1 I/O, 2 validation, 3 infeasible.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

from . import io
from .baseline import ObliqueConfig
from .config import RunConfig
from .errors import InfeasiblePlanError, InputError, ValidationError
from .pipeline import (
    evaluate_views, load_scene, run_baseline, run_plan, write_plan_artifacts,
)
from .scene import SceneSpec, generate_scene

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3

log = logging.getLogger("viewplan")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viewplan",
        description="Optimized-view UAV flight planning for urban 3D reconstruction",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic city mesh from a scene spec")
    p.add_argument("--spec", required=True, help="scene spec JSON")
    p.add_argument("--out", required=True, help="output mesh path (.obj or .ply)")

    p = sub.add_parser("plan", help="run the full planning pipeline")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--seed", type=int, default=None, help="override the config seed")

    p = sub.add_parser("baseline", help="generate a fixed-height oblique grid plan")
    p.add_argument("--config", required=True, help="run config JSON (camera + oblique section)")
    p.add_argument("--out", required=True, help="output viewpoint JSON path")

    p = sub.add_parser("evaluate", help="reconstructability report for a viewpoint file")
    p.add_argument("--config", required=True, help="run config JSON")
    p.add_argument("--views", required=True, help="viewpoint JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--threads", type=int, default=None)

    return parser


def cmd_synth(args) -> int:
    spec = SceneSpec.load(args.spec)
    mesh = generate_scene(spec)
    mesh.save(args.out)
    log.info("wrote %s: %d vertices, %d triangles",
             args.out, mesh.n_vertices, mesh.n_triangles)
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = RunConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    artifacts = run_plan(cfg, threads=args.threads)
    summary = write_plan_artifacts(artifacts, args.out)
    log.info("plan complete: kept %d viewpoints, %d sorties",
             summary["counts"]["kept"], summary["sorties"])
    return EXIT_OK


def cmd_baseline(args) -> int:
    cfg = RunConfig.load(args.config)
    ob = cfg.raw.get("oblique", {})
    oblique = ObliqueConfig(
        height=float(ob.get("height", 100.0)),
        forward_overlap=float(ob.get("forward_overlap", 0.85)),
        side_overlap=float(ob.get("side_overlap", 0.85)),
        tilt=math.radians(float(ob.get("tilt_deg", 45.0))),
        camera=cfg.camera,
    )
    mesh = load_scene(cfg)
    views = run_baseline(mesh, cfg, oblique)
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    io.save_viewpoints(views, out)
    log.info("wrote %d oblique viewpoints to %s", len(views), out)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    cfg = RunConfig.load(args.config)
    mesh = load_scene(cfg)
    views = io.load_viewpoints(args.views)
    report, samples = evaluate_views(mesh, views, cfg, threads=args.threads)
    out = io.ensure_dir(args.out)
    io.save_recon_csv(report, out / "recon.csv")
    io.save_recon_histogram_csv(report, out / "recon_histogram.csv")
    io.save_recon_ply(report, samples.positions, out / "recon.ply")
    log.info("evaluated %d samples against %d viewpoints", len(samples), len(views))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    handlers = {
        "synth": cmd_synth,
        "plan": cmd_plan,
        "baseline": cmd_baseline,
        "evaluate": cmd_evaluate,
    }
    try:
        return handlers[args.command](args)
    except ValidationError as exc:
        log.error("validation error: %s", exc)
        return EXIT_VALIDATION
    except InfeasiblePlanError as exc:
        log.error("plan infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except (InputError, OSError) as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
