"""Ordering kept viewpoints into endurance-feasible UAV sorties.

Viewpoints are clustered (by view direction, altitude band, or both),
each cluster is ordered by a genetic-algorithm TSP over the
length-times-exp(angle/length) edge cost, and tours are cut into sorties
that fit the battery endurance, with camera triggers interpolated along
the legs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InfeasiblePlanError, ValidationError
from .scene import SafeZone
from .visibility import ViewSet

L_FLOOR = 1.0  # meters; guards the angle/length exponent


@dataclass(frozen=True)
class EdgeCost:
    length: float
    angle: float
    cost: float


def edge_cost(pos_a, pos_b, dir_a, dir_b) -> EdgeCost:
    """Symmetric travel cost between two camera poses."""
    length = float(np.linalg.norm(np.asarray(pos_b, dtype=float) - np.asarray(pos_a, dtype=float)))
    angle = float(np.arccos(np.clip(np.dot(dir_a, dir_b), -1.0, 1.0)))
    cost = length * math.exp(angle / max(length, L_FLOOR))
    return EdgeCost(length=length, angle=angle, cost=cost)


def cost_matrix(positions, directions) -> np.ndarray:
    """All-pairs edge costs for one cluster."""
    positions = np.asarray(positions, dtype=float)
    directions = np.asarray(directions, dtype=float)
    diff = positions[:, None, :] - positions[None, :, :]
    length = np.linalg.norm(diff, axis=2)
    angle = np.arccos(np.clip(directions @ directions.T, -1.0, 1.0))
    np.fill_diagonal(angle, 0.0)
    return length * np.exp(angle / np.maximum(length, L_FLOOR))


@dataclass
class ClusterSpec:
    strategy: str = "hybrid"           # direction | height | hybrid
    capacity: int = 60
    direction_bins: int = 4
    height_band: float = 40.0

    def validate(self) -> None:
        if self.strategy not in ("direction", "height", "hybrid"):
            raise ValidationError(f"unknown cluster strategy: {self.strategy}")
        if self.capacity <= 1:
            raise ValidationError("cluster capacity must exceed 1")
        if self.direction_bins < 1:
            raise ValidationError("need at least one direction bin")
        if self.height_band <= 0:
            raise ValidationError("height band must be positive")


def _fibonacci_directions(k: int) -> np.ndarray:
    i = np.arange(k) + 0.5
    phi = math.pi * (1.0 + math.sqrt(5.0)) * i
    z = 1.0 - 2.0 * i / k
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def _direction_groups(directions: np.ndarray, k: int, iters: int = 20):
    """Spherical k-means with uniformly placed prototypes."""
    protos = _fibonacci_directions(k)
    assign = np.argmax(directions @ protos.T, axis=1)
    for _ in range(iters):
        for j in range(k):
            members = directions[assign == j]
            if len(members):
                mean = members.sum(axis=0)
                norm = np.linalg.norm(mean)
                if norm > 1e-12:
                    protos[j] = mean / norm
        new_assign = np.argmax(directions @ protos.T, axis=1)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return assign


def _split_by_capacity(ids: np.ndarray, positions: np.ndarray, capacity: int):
    """Recursive deterministic 2-means until every group fits capacity."""
    if len(ids) <= capacity:
        return [ids]
    pts = positions[ids]
    spread = pts.max(axis=0) - pts.min(axis=0)
    axis = int(np.argmax(spread))
    c0 = pts[np.argmin(pts[:, axis])]
    c1 = pts[np.argmax(pts[:, axis])]
    assign = np.zeros(len(ids), dtype=np.int64)
    for it in range(20):
        d0 = np.linalg.norm(pts - c0, axis=1)
        d1 = np.linalg.norm(pts - c1, axis=1)
        new_assign = (d1 < d0).astype(np.int64)
        if np.array_equal(new_assign, assign) and it > 0:
            break
        assign = new_assign
        if assign.all() or not assign.any():
            half = len(ids) // 2
            order = np.argsort(pts[:, axis], kind="stable")
            assign = np.zeros(len(ids), dtype=np.int64)
            assign[order[half:]] = 1
            break
        c0 = pts[assign == 0].mean(axis=0)
        c1 = pts[assign == 1].mean(axis=0)
    out = []
    for j in (0, 1):
        out.extend(_split_by_capacity(ids[assign == j], positions, capacity))
    return out


def cluster(views: ViewSet, ids, spec: ClusterSpec) -> list[np.ndarray]:
    """Partition the given view ids into flight groups."""
    spec.validate()
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) == 0:
        raise ValidationError("no viewpoints to cluster")
    positions = views.positions
    directions = views.directions

    if spec.strategy == "direction":
        assign = _direction_groups(directions[ids], spec.direction_bins)
        groups = [ids[assign == j] for j in range(spec.direction_bins)]
    elif spec.strategy == "height":
        z = positions[ids, 2]
        band = ((z - z.min()) // spec.height_band).astype(np.int64)
        groups = [ids[band == b] for b in np.unique(band)]
    else:  # hybrid: direction groups subdivided by altitude bands
        assign = _direction_groups(directions[ids], spec.direction_bins)
        groups = []
        for j in range(spec.direction_bins):
            sub = ids[assign == j]
            if len(sub) == 0:
                continue
            z = positions[sub, 2]
            band = ((z - z.min()) // spec.height_band).astype(np.int64)
            groups.extend(sub[band == b] for b in np.unique(band))

    out: list[np.ndarray] = []
    for g in groups:
        if len(g):
            out.extend(_split_by_capacity(g, positions, spec.capacity))
    return out


@dataclass
class GaParams:
    population: int = 100
    generations: int = 500
    tournament: int = 4
    mutation: float = 0.5
    elites: int = 2
    stall_generations: int = 80


def solve_tour(views: ViewSet, ids, seed: int, launch_point=(0.0, 0.0, 0.0),
               params: GaParams | None = None):
    """Open-path tour over one cluster, starting nearest the launch point.

    Returns (ordered view ids, total edge cost).
    """
    ids = np.asarray(ids, dtype=np.int64)
    if len(ids) == 0:
        raise ValidationError("empty cluster")
    if len(ids) == 1:
        return ids.copy(), 0.0
    params = params or GaParams()
    pos = views.positions[ids]
    costs = cost_matrix(pos, views.directions[ids])
    start = int(np.argmin(np.linalg.norm(pos - np.asarray(launch_point, dtype=float), axis=1)))
    free = np.array([i for i in range(len(ids)) if i != start])
    if len(free) == 1:
        order = np.array([start, free[0]])
        return ids[order], float(costs[start, free[0]])

    rng = np.random.default_rng(seed)
    n = len(free)

    def path_cost(perm) -> float:
        total = costs[start, free[perm[0]]]
        for k in range(n - 1):
            total += costs[free[perm[k]], free[perm[k + 1]]]
        return float(total)

    # Seed one greedy nearest-neighbor individual; elitism keeps it alive
    # until the crossover search finds something better.
    nn = _nearest_neighbor_perm(costs, start, free)
    population = [nn] + [rng.permutation(n) for _ in range(params.population - 1)]
    fitness = np.array([path_cost(p) for p in population])
    best_idx = int(np.argmin(fitness))
    best = (fitness[best_idx], population[best_idx].copy())
    stall = 0

    for _ in range(params.generations):
        order = np.argsort(fitness, kind="stable")
        new_pop = [population[i].copy() for i in order[:params.elites]]
        while len(new_pop) < params.population:
            parents = []
            for _k in range(2):
                contenders = rng.integers(0, params.population, params.tournament)
                parents.append(population[int(contenders[np.argmin(fitness[contenders])])])
            child = _order_crossover(parents[0], parents[1], rng)
            if rng.random() < params.mutation:
                a, b = rng.integers(0, n, 2)
                child[a], child[b] = child[b], child[a]
            new_pop.append(child)
        population = new_pop
        fitness = np.array([path_cost(p) for p in population])
        gen_best = int(np.argmin(fitness))
        if fitness[gen_best] < best[0] - 1e-12:
            best = (fitness[gen_best], population[gen_best].copy())
            stall = 0
        else:
            stall += 1
            if stall >= params.stall_generations:
                break

    order = np.concatenate([[start], free[best[1]]])
    return ids[order], float(best[0])


def _nearest_neighbor_perm(costs, start, free):
    """Greedy tour over `free` (as positions into `free`), from `start`."""
    remaining = list(range(len(free)))
    perm = []
    cur = start
    while remaining:
        nxt = min(remaining, key=lambda k: costs[cur, free[k]])
        perm.append(nxt)
        remaining.remove(nxt)
        cur = free[nxt]
    return np.array(perm, dtype=np.int64)


def _order_crossover(p1, p2, rng):
    n = len(p1)
    a, b = sorted(rng.integers(0, n + 1, 2))
    child = np.full(n, -1, dtype=p1.dtype)
    child[a:b] = p1[a:b]
    taken = set(child[a:b].tolist())
    fill = [x for x in p2 if x not in taken]
    j = 0
    for i in range(n):
        if child[i] < 0:
            child[i] = fill[j]
            j += 1
    return child


@dataclass
class Waypoint:
    position: np.ndarray
    direction: np.ndarray
    trigger: bool
    kind: str        # view_point | interpolated
    view_id: int = -1


@dataclass
class Sortie:
    waypoints: list[Waypoint]
    length: float
    time: float
    n_view_images: int
    n_interpolated_images: int


@dataclass
class FlightParams:
    speed: float = 5.0             # m/s
    trigger_interval: float = 3.0  # s
    endurance: float = 1500.0      # s (25 min)
    hover_overhead: float = 2.0    # s per planned viewpoint
    launch_point: tuple = (0.0, 0.0, 0.0)

    def validate(self) -> None:
        if min(self.speed, self.trigger_interval, self.endurance) <= 0:
            raise ValidationError("speed, trigger interval and endurance must be positive")
        if self.hover_overhead < 0:
            raise ValidationError("hover overhead must be >= 0")


@dataclass
class FlightPlan:
    sorties: list[Sortie]
    params: FlightParams

    @property
    def total_length(self) -> float:
        return sum(s.length for s in self.sorties)

    @property
    def n_view_images(self) -> int:
        return sum(s.n_view_images for s in self.sorties)

    @property
    def n_interpolated_images(self) -> int:
        return sum(s.n_interpolated_images for s in self.sorties)


def _slerp(a, b, t):
    dot = float(np.clip(np.dot(a, b), -1.0, 1.0))
    omega = math.acos(dot)
    if omega < 1e-9:
        return a
    return (math.sin((1 - t) * omega) * a + math.sin(t * omega) * b) / math.sin(omega)


def _leg_polyline(p0, p1, zone: SafeZone, probe_step: float = 0.5):
    """Straight leg, or a climb-traverse-descend detour when blocked."""
    if _segment_free(p0, p1, zone, probe_step):
        return [p0, p1], False
    z_top = zone.max_forbidden_altitude() + zone.cell
    a = np.array([p0[0], p0[1], max(z_top, p0[2])])
    b = np.array([p1[0], p1[1], max(z_top, p1[2])])
    for seg in ((p0, a), (a, b), (b, p1)):
        if not _segment_free(seg[0], seg[1], zone, probe_step):
            raise InfeasiblePlanError("vertical detour still collides with the safe zone")
    return [p0, a, b, p1], True


def _segment_free(p0, p1, zone: SafeZone, step: float) -> bool:
    length = float(np.linalg.norm(p1 - p0))
    n = max(2, int(math.ceil(length / step)) + 1)
    t = np.linspace(0.0, 1.0, n)
    pts = p0[None, :] + t[:, None] * (p1 - p0)[None, :]
    return bool(zone.is_free(pts).all())


def split_and_interpolate(views: ViewSet, tour, params: FlightParams,
                          zone: SafeZone) -> list[Sortie]:
    """Cut one tour into endurance-feasible sorties with trigger waypoints.

    Interior trigger points are spaced evenly along each straight leg,
    floor(length / (speed * interval)) of them per leg; detour legs carry
    no triggers.
    """
    params.validate()
    tour = np.asarray(tour, dtype=np.int64)
    step = params.speed * params.trigger_interval

    # Per-leg expanded waypoints (excluding the leading viewpoint).
    legs: list[tuple[list[Waypoint], float]] = []
    for a, b in zip(tour[:-1], tour[1:]):
        p0 = views.positions[a]
        p1 = views.positions[b]
        d0 = views.directions[a]
        d1 = views.directions[b]
        polyline, detoured = _leg_polyline(p0, p1, zone)
        leg_wps: list[Waypoint] = []
        length = sum(float(np.linalg.norm(q - p)) for p, q in zip(polyline[:-1], polyline[1:]))
        if detoured:
            for corner in polyline[1:-1]:
                leg_wps.append(Waypoint(np.asarray(corner, dtype=float),
                                        _slerp(d0, d1, 0.5), False, "interpolated"))
        else:
            n_interior = int(math.floor((length + 1e-9) / step)) if length > 1e-9 else 0
            for k in range(1, n_interior + 1):
                t = k / (n_interior + 1)
                leg_wps.append(Waypoint(p0 + t * (p1 - p0), _slerp(d0, d1, t),
                                        True, "interpolated"))
        leg_wps.append(Waypoint(np.asarray(p1, dtype=float), np.asarray(d1, dtype=float),
                                True, "view_point", view_id=int(b)))
        legs.append((leg_wps, length))

    def leg_time(length: float) -> float:
        return length / params.speed + params.hover_overhead

    single = params.hover_overhead
    sorties: list[Sortie] = []
    cur: list[Waypoint] = [Waypoint(np.asarray(views.positions[tour[0]], dtype=float),
                                    np.asarray(views.directions[tour[0]], dtype=float),
                                    True, "view_point", view_id=int(tour[0]))]
    cur_len = 0.0
    cur_time = single
    for leg_wps, length in legs:
        if leg_time(length) + single > params.endurance:
            raise InfeasiblePlanError(
                f"a single leg of {length:.1f} m exceeds the endurance budget")
        if cur_time + leg_time(length) > params.endurance:
            sorties.append(_finish_sortie(cur, cur_len, cur_time))
            head = leg_wps[-1]
            cur = [Waypoint(head.position, head.direction, True, "view_point",
                            view_id=head.view_id)]
            cur_len = 0.0
            cur_time = single
        else:
            cur.extend(leg_wps)
            cur_len += length
            cur_time += leg_time(length)
    sorties.append(_finish_sortie(cur, cur_len, cur_time))
    return sorties


def _finish_sortie(wps, length, time) -> Sortie:
    n_view = sum(1 for w in wps if w.kind == "view_point" and w.trigger)
    n_interp = sum(1 for w in wps if w.kind == "interpolated" and w.trigger)
    return Sortie(waypoints=wps, length=length, time=time,
                  n_view_images=n_view, n_interpolated_images=n_interp)


def plan_flight(views: ViewSet, kept_ids, cluster_spec: ClusterSpec,
                params: FlightParams, zone: SafeZone, seed: int,
                ga_params: GaParams | None = None) -> FlightPlan:
    """Cluster, order, and split the kept viewpoints into a full plan."""
    groups = cluster(views, kept_ids, cluster_spec)
    sorties: list[Sortie] = []
    for gi, group in enumerate(groups):
        tour, _ = solve_tour(views, group, seed + gi,
                             launch_point=params.launch_point, params=ga_params)
        sorties.extend(split_and_interpolate(views, tour, params, zone))
    return FlightPlan(sorties=sorties, params=params)
