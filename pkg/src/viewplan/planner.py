"""Initial viewpoint placement and two-step view-set optimization.

Step 1 repeatedly removes the most redundant viewpoint while every
feasible sample keeps its reconstructability above the threshold; step 2
tries to substitute kept viewpoints with nearby, similarly oriented
candidates whenever that strictly raises total reconstructability.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .recon import ReconWeights, SampleViewGeometry, SEES_NOTHING
from .sampling import CameraModel, SurfaceSamples
from .scene import SafeZone
from .visibility import (
    STATE_INITIAL, STATE_KEPT, STATE_REPLACED, VisibilityMatrix, ViewSet,
)

log = logging.getLogger(__name__)

UP = np.array([0.0, 0.0, 1.0])


@dataclass
class PlannerConfig:
    t_h: float = 0.2
    rotation_step: float = math.radians(10.0)
    neighbor_radius: float | None = None   # defaults to 2 * disk radius upstream
    neighbor_angle: float = math.radians(30.0)
    max_substitution_rounds: int = 3

    def validate(self) -> None:
        if self.t_h <= 0:
            raise ValidationError("t_h must be positive")
        if not 0 < self.rotation_step <= math.pi / 4:
            raise ValidationError("rotation_step must be in (0, pi/4]")
        if self.neighbor_radius is not None and self.neighbor_radius <= 0:
            raise ValidationError("neighbor_radius must be positive")
        if not 0 < self.neighbor_angle <= math.pi / 2:
            raise ValidationError("neighbor_angle must be in (0, pi/2]")
        if self.max_substitution_rounds < 0:
            raise ValidationError("max_substitution_rounds must be >= 0")


@dataclass
class InitialPlacement:
    """Placed candidate viewpoints, one per sample that admitted one."""

    views: ViewSet
    source_samples: np.ndarray  # sample id behind each placed view
    dropped_samples: list[int]  # samples whose sweep found no free pose


def initial_viewpoints(samples: SurfaceSamples, camera: CameraModel,
                       zone: SafeZone, cfg: PlannerConfig) -> InitialPlacement:
    """Place one candidate per sample at standoff distance along its normal.

    A pose inside forbidden airspace is swept toward vertical (rotating the
    offset in the normal/up plane, re-aiming at the sample) until it is
    free, capped at the camera's incidence limit; samples with no free pose
    in the sweep are dropped.
    """
    cfg.validate()
    if len(samples) == 0:
        raise ValidationError("no samples to plan from")
    d = camera.view_distance
    positions = []
    directions = []
    source = []
    dropped = []
    for i in range(len(samples)):
        s = samples.positions[i]
        n = samples.normals[i]
        axis_raw = np.cross(n, UP)
        axis_norm = np.linalg.norm(axis_raw)
        if axis_norm < 1e-9:
            sweep = [0.0]  # normal already vertical: nothing to rotate toward
        else:
            n_steps = int(math.floor(camera.max_incidence / cfg.rotation_step))
            sweep = [k * cfg.rotation_step for k in range(n_steps + 1)]
            if sweep[-1] < camera.max_incidence - 1e-12:
                sweep.append(camera.max_incidence)
        placed = False
        for phi in sweep:
            if axis_norm < 1e-9 or phi == 0.0:
                offset = n
            else:
                u_perp = (UP - n * (n @ UP))
                u_perp = u_perp / np.linalg.norm(u_perp)
                offset = n * math.cos(phi) + u_perp * math.sin(phi)
            v = s + d * offset
            if zone.is_free(v)[0]:
                positions.append(v)
                directions.append(-offset)
                source.append(i)
                placed = True
                break
        if not placed:
            dropped.append(i)
    if dropped:
        log.info("dropped %d of %d candidate viewpoints (no free pose)",
                 len(dropped), len(samples))
    if not positions:
        raise ValidationError("no viewpoint could be placed in free airspace")
    views = ViewSet(np.array(positions), np.array(directions))
    return InitialPlacement(views=views, source_samples=np.array(source, dtype=np.int64),
                            dropped_samples=dropped)


@dataclass
class PlanResult:
    views: ViewSet                 # all placed candidates with final states
    kept_ids: np.ndarray
    h: np.ndarray                  # per-sample h under the kept set
    feasible: np.ndarray           # per-sample bool (reachable under full set)
    infeasible_samples: np.ndarray
    audit_log: list[dict] = field(default_factory=list)
    counts: dict = field(default_factory=dict)


class _State:
    """Mutable optimization state with incremental h bookkeeping."""

    def __init__(self, samples, views, vis, w, t_h):
        self.vis = vis
        self.w = w
        self.geom = SampleViewGeometry(samples, views, vis)
        self.n_s = vis.n_samples
        self.n_v = vis.n_views
        self.kept = np.ones(self.n_v, dtype=bool)
        # Per sample: bool mask over its visible-view list.
        self.kept_local = [np.ones(len(r), dtype=bool) for r in vis.rows]
        # view id -> [(sample, local index)] occurrences.
        self.occ: list[list[tuple[int, int]]] = [[] for _ in range(self.n_v)]
        for s, ids in enumerate(vis.rows):
            for li, v in enumerate(ids):
                self.occ[v].append((s, li))
        self.h = np.array([
            self.geom.h_of_subset(s, np.nonzero(self.kept_local[s])[0], w)
            for s in range(self.n_s)
        ])
        self.feasible = self.h > t_h

    def redundancy(self, v: int) -> float:
        seen = self.vis.cols[v]
        if len(seen) == 0:
            return SEES_NOTHING
        return float(self.h[seen].min())

    def removal_deltas(self, v: int):
        """(sample, local index, h decrease) for every sample seeing v."""
        out = []
        for s, li in self.occ[v]:
            mask = self.kept_local[s]
            others = np.nonzero(mask)[0]
            others = others[others != li]
            delta = float(self.geom.q_against(s, li, others, self.w).sum()) if len(others) else 0.0
            out.append((s, li, delta))
        return out

    def apply_removal(self, v: int, deltas) -> None:
        self.kept[v] = False
        for s, li, delta in deltas:
            self.h[s] -= delta
            self.kept_local[s][li] = False

    def h_with_swap(self, s: int, out_view: int | None, in_view: int | None) -> float:
        mask = self.kept_local[s].copy()
        ids = self.vis.rows[s]
        if out_view is not None:
            where = np.nonzero(ids == out_view)[0]
            if len(where):
                mask[where[0]] = False
        if in_view is not None:
            where = np.nonzero(ids == in_view)[0]
            if len(where):
                mask[where[0]] = True
        return self.geom.h_of_subset(s, np.nonzero(mask)[0], self.w)

    def commit_swap(self, out_view: int, in_view: int, new_h: dict[int, float]) -> None:
        self.kept[out_view] = False
        self.kept[in_view] = True
        for s, li in self.occ[out_view]:
            self.kept_local[s][li] = False
        for s, li in self.occ[in_view]:
            self.kept_local[s][li] = True
        for s, hv in new_h.items():
            self.h[s] = hv


def optimize(placement: InitialPlacement, samples: SurfaceSamples,
             vis: VisibilityMatrix, w: ReconWeights, cfg: PlannerConfig) -> PlanResult:
    """Two-step reduction and substitution over the placed candidates."""
    cfg.validate()
    views = placement.views
    if vis.n_views != len(views) or vis.n_samples != len(samples):
        raise ValidationError("visibility matrix does not match samples/views")
    state = _State(samples, views, vis, w, cfg.t_h)
    log_entries: list[dict] = []
    infeasible = np.nonzero(~state.feasible)[0]

    # Step 1: redundancy reduction.
    unremovable = np.zeros(state.n_v, dtype=bool)
    removed = 0
    while True:
        candidates = np.nonzero(state.kept & ~unremovable)[0]
        if len(candidates) == 0:
            break
        r = np.array([state.redundancy(v) for v in candidates])
        v = int(candidates[int(np.argmax(r))])  # argmax ties -> lowest id
        deltas = state.removal_deltas(v)
        violates = any(
            state.feasible[s] and state.h[s] - delta <= cfg.t_h
            for s, _, delta in deltas
        )
        if violates:
            unremovable[v] = True
            log_entries.append({"op": "rollback", "view": v})
        else:
            state.apply_removal(v, deltas)
            removed += 1
            log_entries.append({"op": "remove", "view": v})

    # Step 2: substitution among nearby, similarly oriented candidates.
    cos_beta = math.cos(cfg.neighbor_angle)
    rho = cfg.neighbor_radius if cfg.neighbor_radius is not None else np.inf
    substituted = 0
    for _ in range(cfg.max_substitution_rounds):
        changed = False
        for vi in [int(v) for v in np.nonzero(state.kept)[0]]:
            if not state.kept[vi]:
                continue
            dist = np.linalg.norm(views.positions - views.positions[vi], axis=1)
            ang_ok = views.directions @ views.directions[vi] >= cos_beta - 1e-12
            omega = np.nonzero(~state.kept & (dist <= rho) & ang_ok)[0]
            best = None
            for c in omega:
                c = int(c)
                affected = sorted(set(vis.cols[vi]) | set(vis.cols[c]))
                new_h = {s: state.h_with_swap(s, vi, c) for s in affected}
                if any(state.feasible[s] and new_h[s] <= cfg.t_h for s in affected):
                    continue
                gain = sum(new_h[s] - state.h[s] for s in affected)
                if gain > 1e-12 and (best is None or gain > best[0] + 1e-15):
                    best = (gain, c, new_h)
            if best is not None:
                _, c, new_h = best
                state.commit_swap(vi, c, new_h)
                log_entries.append({"op": "substitute", "out": vi, "in": c})
                substituted += 1
                changed = True
        if not changed:
            break

    kept_ids = np.nonzero(state.kept)[0]
    replaced = {e["out"] for e in log_entries if e["op"] == "substitute"}
    states = []
    for v in range(state.n_v):
        if state.kept[v]:
            states.append(STATE_KEPT)
        elif v in replaced:
            states.append(STATE_REPLACED)
        else:
            states.append(STATE_INITIAL)
    final_views = ViewSet(views.positions, views.directions, states)
    counts = {
        "initial": state.n_v,
        "removed": removed,
        "substituted": substituted,
        "kept": int(len(kept_ids)),
        "dropped_infeasible_samples": int(len(infeasible)),
        "dropped_viewpoints": len(placement.dropped_samples),
    }
    return PlanResult(
        views=final_views, kept_ids=kept_ids, h=state.h.copy(),
        feasible=state.feasible, infeasible_samples=infeasible,
        audit_log=log_entries, counts=counts,
    )


def replay_audit(n_views: int, audit_log: list[dict]) -> np.ndarray:
    """Kept-view ids obtained by replaying the audit log from scratch."""
    kept = np.ones(n_views, dtype=bool)
    for e in audit_log:
        if e["op"] == "remove":
            kept[e["view"]] = False
        elif e["op"] == "substitute":
            kept[e["out"]] = False
            kept[e["in"]] = True
    return np.nonzero(kept)[0]
