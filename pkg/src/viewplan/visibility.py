"""Sample-to-viewpoint visibility via BVH-accelerated ray casting.

A sample is visible from a viewpoint when it is in range, inside the
circular view cone, front-facing within the incidence cap, and the ray
from the viewpoint reaches it unoccluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
from numba import njit, prange

from .errors import ValidationError
from .mesh import TriMesh
from .sampling import CameraModel, SurfaceSamples

EPS_OCC = 1e-3  # ray-endpoint clearance, meters

STATE_INITIAL = "initial"
STATE_KEPT = "kept"
STATE_REPLACED = "replaced"
STATE_DROPPED = "dropped"


@dataclass
class ViewSet:
    """Dense set of candidate camera poses with lifecycle states."""

    positions: np.ndarray    # (m, 3)
    directions: np.ndarray   # (m, 3) unit
    states: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        self.directions = np.asarray(self.directions, dtype=np.float64).reshape(-1, 3)
        if not self.states:
            self.states = [STATE_INITIAL] * len(self.positions)
        norms = np.linalg.norm(self.directions, axis=1)
        if len(norms) and not np.allclose(norms, 1.0, atol=1e-6):
            raise ValidationError("view directions must be unit vectors")

    def __len__(self) -> int:
        return len(self.positions)

    def subset(self, ids) -> "ViewSet":
        ids = np.asarray(ids, dtype=np.int64)
        return ViewSet(self.positions[ids], self.directions[ids],
                       [self.states[i] for i in ids])


class Bvh:
    """Median-split bounding volume hierarchy over mesh triangles."""

    LEAF_SIZE = 4

    def __init__(self, mesh: TriMesh):
        if mesh.n_triangles == 0:
            raise ValidationError("cannot build a BVH over an empty mesh")
        self.mesh = mesh
        corners = mesh.corners()
        self.v0 = np.ascontiguousarray(corners[:, 0])
        self.e1 = np.ascontiguousarray(corners[:, 1] - corners[:, 0])
        self.e2 = np.ascontiguousarray(corners[:, 2] - corners[:, 0])
        tri_lo = corners.min(axis=1)
        tri_hi = corners.max(axis=1)
        centroids = corners.mean(axis=1)

        node_min, node_max, node_left, node_start, node_count = [], [], [], [], []
        order = np.arange(mesh.n_triangles)

        def new_node(idx):
            node_min.append(tri_lo[idx].min(axis=0))
            node_max.append(tri_hi[idx].max(axis=0))
            node_left.append(-1)
            node_start.append(0)
            node_count.append(0)
            return len(node_min) - 1

        # Iterative build; stack holds (node_id, lo, hi) ranges into `order`.
        root = new_node(order)
        stack = [(root, 0, len(order))]
        while stack:
            node, lo, hi = stack.pop()
            idx = order[lo:hi]
            if len(idx) <= self.LEAF_SIZE:
                node_start[node] = lo
                node_count[node] = hi - lo
                continue
            cent = centroids[idx]
            axis = int(np.argmax(cent.max(axis=0) - cent.min(axis=0)))
            mid = len(idx) // 2
            part = np.argsort(cent[:, axis], kind="stable")
            order[lo:hi] = idx[part]
            left = new_node(order[lo:lo + mid])
            right = new_node(order[lo + mid:hi])
            node_left[node] = left
            stack.append((left, lo, lo + mid))
            stack.append((right, lo + mid, hi))

        self.node_min = np.array(node_min)
        self.node_max = np.array(node_max)
        self.node_left = np.array(node_left, dtype=np.int64)
        self.node_start = np.array(node_start, dtype=np.int64)
        self.node_count = np.array(node_count, dtype=np.int64)
        self.tri_order = order.astype(np.int64)

    def _arrays(self):
        return (self.node_min, self.node_max, self.node_left,
                self.node_start, self.node_count, self.tri_order,
                self.v0, self.e1, self.e2)

    def first_hit(self, origins, dirs):
        """First intersection along each ray: (t, triangle_id); -1 for miss."""
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        t = np.empty(len(origins))
        tri = np.empty(len(origins), dtype=np.int64)
        _first_hit_batch(origins, dirs, *self._arrays(), t, tri)
        return t, tri

    def any_hit(self, origins, dirs, t_min, t_max):
        """Whether each ray hits any triangle with t in (t_min, t_max)."""
        origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
        dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        t_min = np.broadcast_to(np.asarray(t_min, dtype=np.float64), len(origins))
        t_max = np.broadcast_to(np.asarray(t_max, dtype=np.float64), len(origins))
        out = np.empty(len(origins), dtype=np.uint8)
        _any_hit_batch(origins, dirs, t_min, t_max, *self._arrays(), out)
        return out.astype(bool)


class VisibilityMatrix:
    """Sparse boolean sample-by-view visibility relation."""

    def __init__(self, dense: np.ndarray):
        dense = np.asarray(dense, dtype=bool)
        self.n_samples, self.n_views = dense.shape
        self.dense = dense
        self.rows = [np.nonzero(dense[s])[0] for s in range(self.n_samples)]
        self.cols = [np.nonzero(dense[:, v])[0] for v in range(self.n_views)]

    def check_transpose(self) -> bool:
        back = np.zeros((self.n_samples, self.n_views), dtype=bool)
        for v, samples in enumerate(self.cols):
            back[samples, v] = True
        return bool(np.array_equal(back, self.dense))

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="ascii", newline="\n") as fh:
            fh.write("sample_id,view_id\n")
            for s, views in enumerate(self.rows):
                for v in views:
                    fh.write(f"{s},{v}\n")


def set_num_threads(n: int | None) -> int:
    """Clamp and apply the numba thread count; returns the effective value."""
    limit = numba.config.NUMBA_NUM_THREADS
    eff = limit if n is None else max(1, min(int(n), limit))
    numba.set_num_threads(eff)
    return eff


def is_visible(sample_pos, sample_normal, view_pos, view_dir,
               camera: CameraModel, accel: Bvh) -> bool:
    """Single-pair visibility decision (range, cone, incidence, occlusion)."""
    out = np.empty((1, 1), dtype=np.uint8)
    _visibility_kernel(
        np.asarray(sample_pos, dtype=np.float64).reshape(1, 3),
        np.asarray(sample_normal, dtype=np.float64).reshape(1, 3),
        np.asarray(view_pos, dtype=np.float64).reshape(1, 3),
        np.asarray(view_dir, dtype=np.float64).reshape(1, 3),
        np.cos(camera.fov / 2.0), camera.max_range,
        np.cos(camera.max_incidence), EPS_OCC,
        *accel._arrays(), out,
    )
    return bool(out[0, 0])


def build_matrix(samples: SurfaceSamples, views: ViewSet, camera: CameraModel,
                 accel: Bvh, threads: int | None = None) -> VisibilityMatrix:
    """Full sample-by-view visibility matrix (parallel over samples)."""
    if len(samples) == 0:
        raise ValidationError("no samples")
    set_num_threads(threads)
    out = np.empty((len(samples), len(views)), dtype=np.uint8)
    if len(views):
        _visibility_kernel(
            np.ascontiguousarray(samples.positions),
            np.ascontiguousarray(samples.normals),
            np.ascontiguousarray(views.positions),
            np.ascontiguousarray(views.directions),
            np.cos(camera.fov / 2.0), camera.max_range,
            np.cos(camera.max_incidence), EPS_OCC,
            *accel._arrays(), out,
        )
    return VisibilityMatrix(out)


@njit(cache=True, inline="always")
def _ray_box(ox, oy, oz, ix, iy, iz, bmin, bmax, t_max):
    tx1 = (bmin[0] - ox) * ix
    tx2 = (bmax[0] - ox) * ix
    tlo = min(tx1, tx2)
    thi = max(tx1, tx2)
    ty1 = (bmin[1] - oy) * iy
    ty2 = (bmax[1] - oy) * iy
    tlo = max(tlo, min(ty1, ty2))
    thi = min(thi, max(ty1, ty2))
    tz1 = (bmin[2] - oz) * iz
    tz2 = (bmax[2] - oz) * iz
    tlo = max(tlo, min(tz1, tz2))
    thi = min(thi, max(tz1, tz2))
    return thi >= max(tlo, 0.0) and tlo <= t_max


@njit(cache=True, inline="always")
def _ray_tri(ox, oy, oz, dx, dy, dz, v0, e1, e2):
    # Moller-Trumbore; returns hit parameter t or -1.0.
    px = dy * e2[2] - dz * e2[1]
    py = dz * e2[0] - dx * e2[2]
    pz = dx * e2[1] - dy * e2[0]
    det = e1[0] * px + e1[1] * py + e1[2] * pz
    if -1e-12 < det < 1e-12:
        return -1.0
    inv = 1.0 / det
    sx = ox - v0[0]
    sy = oy - v0[1]
    sz = oz - v0[2]
    u = (sx * px + sy * py + sz * pz) * inv
    if u < 0.0 or u > 1.0:
        return -1.0
    qx = sy * e1[2] - sz * e1[1]
    qy = sz * e1[0] - sx * e1[2]
    qz = sx * e1[1] - sy * e1[0]
    v = (dx * qx + dy * qy + dz * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return -1.0
    t = (e2[0] * qx + e2[1] * qy + e2[2] * qz) * inv
    if t < 0.0:
        return -1.0
    return t


@njit(cache=True)
def _traverse_first(ox, oy, oz, dx, dy, dz,
                    node_min, node_max, node_left, node_start, node_count,
                    tri_order, v0, e1, e2):
    ix = 1.0 / dx if dx != 0.0 else 1e300
    iy = 1.0 / dy if dy != 0.0 else 1e300
    iz = 1.0 / dz if dz != 0.0 else 1e300
    best_t = 1e300
    best_tri = -1
    stack = np.empty(128, dtype=np.int64)
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _ray_box(ox, oy, oz, ix, iy, iz, node_min[node], node_max[node], best_t):
            continue
        left = node_left[node]
        if left < 0:
            for k in range(node_start[node], node_start[node] + node_count[node]):
                tri = tri_order[k]
                t = _ray_tri(ox, oy, oz, dx, dy, dz, v0[tri], e1[tri], e2[tri])
                if 0.0 <= t < best_t:
                    best_t = t
                    best_tri = tri
        else:
            stack[top] = left
            top += 1
            stack[top] = left + 1
            top += 1
    return best_t, best_tri


@njit(cache=True)
def _traverse_any(ox, oy, oz, dx, dy, dz, t_lo, t_hi,
                  node_min, node_max, node_left, node_start, node_count,
                  tri_order, v0, e1, e2):
    ix = 1.0 / dx if dx != 0.0 else 1e300
    iy = 1.0 / dy if dy != 0.0 else 1e300
    iz = 1.0 / dz if dz != 0.0 else 1e300
    stack = np.empty(128, dtype=np.int64)
    top = 0
    stack[top] = 0
    top += 1
    while top > 0:
        top -= 1
        node = stack[top]
        if not _ray_box(ox, oy, oz, ix, iy, iz, node_min[node], node_max[node], t_hi):
            continue
        left = node_left[node]
        if left < 0:
            for k in range(node_start[node], node_start[node] + node_count[node]):
                tri = tri_order[k]
                t = _ray_tri(ox, oy, oz, dx, dy, dz, v0[tri], e1[tri], e2[tri])
                if t_lo < t < t_hi:
                    return True
        else:
            stack[top] = left
            top += 1
            stack[top] = left + 1
            top += 1
    return False


@njit(cache=True)
def _first_hit_batch(origins, dirs, node_min, node_max, node_left, node_start,
                     node_count, tri_order, v0, e1, e2, out_t, out_tri):
    for i in range(len(origins)):
        t, tri = _traverse_first(
            origins[i, 0], origins[i, 1], origins[i, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2],
            node_min, node_max, node_left, node_start, node_count,
            tri_order, v0, e1, e2)
        out_t[i] = t
        out_tri[i] = tri


@njit(cache=True)
def _any_hit_batch(origins, dirs, t_min, t_max, node_min, node_max, node_left,
                   node_start, node_count, tri_order, v0, e1, e2, out):
    for i in range(len(origins)):
        out[i] = _traverse_any(
            origins[i, 0], origins[i, 1], origins[i, 2],
            dirs[i, 0], dirs[i, 1], dirs[i, 2],
            t_min[i], t_max[i],
            node_min, node_max, node_left, node_start, node_count,
            tri_order, v0, e1, e2)


@njit(cache=True, parallel=True)
def _visibility_kernel(spos, snorm, vpos, vdir, cos_half_fov, max_range,
                       cos_max_inc, eps_occ,
                       node_min, node_max, node_left, node_start, node_count,
                       tri_order, v0, e1, e2, out):
    n_s = spos.shape[0]
    n_v = vpos.shape[0]
    for s in prange(n_s):
        sx, sy, sz = spos[s, 0], spos[s, 1], spos[s, 2]
        nx, ny, nz = snorm[s, 0], snorm[s, 1], snorm[s, 2]
        for v in range(n_v):
            out[s, v] = 0
            dx = sx - vpos[v, 0]
            dy = sy - vpos[v, 1]
            dz = sz - vpos[v, 2]
            dist = (dx * dx + dy * dy + dz * dz) ** 0.5
            if dist > max_range or dist < 1e-9:
                continue
            inv = 1.0 / dist
            ux = dx * inv
            uy = dy * inv
            uz = dz * inv
            # In the circular view cone?
            if ux * vdir[v, 0] + uy * vdir[v, 1] + uz * vdir[v, 2] < cos_half_fov:
                continue
            # Front-facing within the incidence cap?
            if -(ux * nx + uy * ny + uz * nz) < cos_max_inc:
                continue
            if _traverse_any(vpos[v, 0], vpos[v, 1], vpos[v, 2], ux, uy, uz,
                             eps_occ, dist - eps_occ,
                             node_min, node_max, node_left, node_start,
                             node_count, tri_order, v0, e1, e2):
                continue
            out[s, v] = 1
