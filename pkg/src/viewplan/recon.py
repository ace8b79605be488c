"""Reconstructability scoring of surface samples under view sets.

Pairwise quality q combines a logistic reward for usable triangulation
baselines, a linear imaging-distance falloff, a logistic penalty for
overly wide baselines, and the worse of the two incidence cosines.
Per-sample reconstructability h sums q over all visible view pairs; a
view's redundancy r is the weakest h among the samples it observes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .sampling import SurfaceSamples
from .visibility import ViewSet, VisibilityMatrix

SEES_NOTHING = math.inf  # redundancy sentinel: removable for free

# Level palette for point-cloud exports (levels 1..6).
LEVEL_COLORS = {
    1: (0, 0, 255),      # blue
    2: (0, 255, 255),    # cyan
    3: (0, 255, 0),      # green
    4: (255, 255, 0),    # yellow
    5: (255, 0, 0),      # red
    6: (128, 128, 128),  # gray
}


@dataclass(frozen=True)
class ReconWeights:
    """Closed-form weight shapes; the logistic/linear constants are
    conventions satisfying the qualitative preference for medium baseline
    angles and near imaging distances."""

    k1: float = 32.0
    alpha1: float = math.pi / 16.0
    k3: float = 8.0
    alpha3: float = math.pi / 4.0
    d_max: float = 160.0

    def __post_init__(self):
        if self.k1 <= 0 or self.k3 <= 0:
            raise ValidationError("logistic steepness must be positive")
        if not 0 < self.alpha1 < self.alpha3 < math.pi:
            raise ValidationError("need 0 < alpha1 < alpha3 < pi")
        if self.d_max <= 0:
            raise ValidationError("d_max must be positive")

    def w1(self, alpha):
        return 1.0 / (1.0 + np.exp(-self.k1 * (np.asarray(alpha) - self.alpha1)))

    def w2(self, d):
        return np.maximum(0.0, 1.0 - np.asarray(d) / self.d_max)

    def w3(self, alpha):
        return 1.0 - 1.0 / (1.0 + np.exp(-self.k3 * (np.asarray(alpha) - self.alpha3)))


@dataclass(frozen=True)
class PairGeometry:
    """Geometry of one (sample, view pair) triple."""

    alpha: float    # triangulation angle at the sample
    d_m: float      # larger of the two view distances
    theta_m: float  # larger of the two incidence angles

    def __post_init__(self):
        if not 0 <= self.alpha <= math.pi:
            raise ValidationError("alpha outside [0, pi]")
        if self.d_m <= 0:
            raise ValidationError("d_m must be positive")
        if not 0 <= self.theta_m <= math.pi:
            raise ValidationError("theta_m outside [0, pi]")

    @classmethod
    def from_points(cls, s, n, vi, vj) -> "PairGeometry":
        s = np.asarray(s, dtype=float)
        n = np.asarray(n, dtype=float)
        ri = np.asarray(vi, dtype=float) - s
        rj = np.asarray(vj, dtype=float) - s
        di = float(np.linalg.norm(ri))
        dj = float(np.linalg.norm(rj))
        ui = ri / di
        uj = rj / dj
        alpha = float(np.arccos(np.clip(ui @ uj, -1.0, 1.0)))
        nn = n / np.linalg.norm(n)
        ti = float(np.arccos(np.clip(ui @ nn, -1.0, 1.0)))
        tj = float(np.arccos(np.clip(uj @ nn, -1.0, 1.0)))
        return cls(alpha=alpha, d_m=max(di, dj), theta_m=max(ti, tj))


def pair_q(geom: PairGeometry, w: ReconWeights) -> float:
    """Pairwise reconstructability in [0, 1]."""
    return float(
        w.w1(geom.alpha) * w.w2(geom.d_m) * w.w3(geom.alpha)
        * max(math.cos(geom.theta_m), 0.0)
    )


def pair_q_arrays(alpha, d_m, theta_m, w: ReconWeights):
    """Vectorized pair quality for arrays of pair geometries."""
    return (w.w1(alpha) * w.w2(d_m) * w.w3(alpha)
            * np.maximum(np.cos(theta_m), 0.0))


class SampleViewGeometry:
    """Precomputed per-(sample, visible view) ray geometry.

    For sample s with visible views ``vis.rows[s]`` this caches the unit
    rays sample-to-view, distances, and incidence angles, from which any
    pair quality is a cheap vectorized lookup.
    """

    def __init__(self, samples: SurfaceSamples, views: ViewSet, vis: VisibilityMatrix):
        if vis.n_samples != len(samples) or vis.n_views != len(views):
            raise ValidationError("visibility matrix does not match samples/views")
        self.vis = vis
        self.rays = []    # (k, 3) unit rays per sample
        self.dists = []   # (k,)
        self.thetas = []  # (k,) incidence angles
        for s in range(len(samples)):
            ids = vis.rows[s]
            d = views.positions[ids] - samples.positions[s]
            dist = np.linalg.norm(d, axis=1)
            rays = d / dist[:, None] if len(ids) else d.reshape(0, 3)
            cosi = rays @ samples.normals[s] if len(ids) else np.zeros(0)
            self.rays.append(rays)
            self.dists.append(dist)
            self.thetas.append(np.arccos(np.clip(cosi, -1.0, 1.0)))

    def pair_q_matrix(self, s: int, local_idx, w: ReconWeights):
        """(k, k) symmetric pair-quality matrix over a subset of the
        sample's visible views (local indices into ``vis.rows[s]``)."""
        rays = self.rays[s][local_idx]
        dist = self.dists[s][local_idx]
        theta = self.thetas[s][local_idx]
        alpha = np.arccos(np.clip(rays @ rays.T, -1.0, 1.0))
        d_m = np.maximum.outer(dist, dist)
        theta_m = np.maximum.outer(theta, theta)
        return pair_q_arrays(alpha, d_m, theta_m, w)

    def h_of_subset(self, s: int, local_idx, w: ReconWeights) -> float:
        k = len(local_idx)
        if k < 2:
            return 0.0
        q = self.pair_q_matrix(s, local_idx, w)
        iu = np.triu_indices(k, 1)
        return float(q[iu].sum())

    def q_against(self, s: int, local_one: int, local_rest, w: ReconWeights):
        """Pair qualities between one visible view and several others."""
        rays = self.rays[s]
        dist = self.dists[s]
        theta = self.thetas[s]
        alpha = np.arccos(np.clip(rays[local_rest] @ rays[local_one], -1.0, 1.0))
        d_m = np.maximum(dist[local_rest], dist[local_one])
        theta_m = np.maximum(theta[local_rest], theta[local_one])
        return pair_q_arrays(alpha, d_m, theta_m, w)


def sample_h(sample_id: int, view_ids, samples: SurfaceSamples, views: ViewSet,
             vis: VisibilityMatrix, w: ReconWeights) -> float:
    """Reconstructability of one sample under an arbitrary view-id set."""
    view_ids = np.asarray(sorted(set(int(v) for v in view_ids)), dtype=np.int64)
    if len(view_ids) and (view_ids.min() < 0 or view_ids.max() >= vis.n_views):
        raise ValidationError("view id out of range")
    visible = view_ids[vis.dense[sample_id, view_ids]]
    if len(visible) < 2:
        return 0.0
    d = views.positions[visible] - samples.positions[sample_id]
    dist = np.linalg.norm(d, axis=1)
    rays = d / dist[:, None]
    theta = np.arccos(np.clip(rays @ samples.normals[sample_id], -1.0, 1.0))
    alpha = np.arccos(np.clip(rays @ rays.T, -1.0, 1.0))
    q = pair_q_arrays(alpha, np.maximum.outer(dist, dist),
                      np.maximum.outer(theta, theta), w)
    iu = np.triu_indices(len(visible), 1)
    return float(q[iu].sum())


def set_h(samples: SurfaceSamples, views: ViewSet, vis: VisibilityMatrix,
          w: ReconWeights, view_ids=None) -> np.ndarray:
    """h for every sample under the given view-id set (default: all views)."""
    if view_ids is None:
        view_ids = range(vis.n_views)
    return np.array([
        sample_h(s, view_ids, samples, views, vis, w) for s in range(vis.n_samples)
    ])


def view_redundancy(view_id: int, view_ids, samples: SurfaceSamples, views: ViewSet,
                    vis: VisibilityMatrix, w: ReconWeights) -> float:
    """Minimum h among the samples this view observes; infinity if none."""
    view_ids = set(int(v) for v in view_ids)
    if int(view_id) not in view_ids:
        raise ValidationError("view_id must belong to the view set")
    seen = vis.cols[int(view_id)]
    if len(seen) == 0:
        return SEES_NOTHING
    return min(sample_h(int(s), view_ids, samples, views, vis, w) for s in seen)


@dataclass
class ReconReport:
    """Per-sample reconstructability, six-level quantization, and the
    level histogram."""

    h: np.ndarray
    observed: np.ndarray       # per-sample bool: visible from >= 1 view
    levels: np.ndarray         # 1..6
    t_h: float
    counts: np.ndarray = field(init=False)
    percentages: np.ndarray = field(init=False)

    def __post_init__(self):
        self.counts = np.array([(self.levels == lv).sum() for lv in range(1, 7)])
        self.percentages = 100.0 * self.counts / max(len(self.levels), 1)

    def to_csv_rows(self):
        yield "sample_id,h,level"
        for i, (hv, lv) in enumerate(zip(self.h, self.levels)):
            yield f"{i},{float(hv)!r},{lv}"

    def histogram_csv_rows(self):
        yield "level,count,percent"
        for lv in range(1, 7):
            yield f"{lv},{self.counts[lv - 1]},{float(self.percentages[lv - 1])!r}"


def quantize_levels(h, observed, t_h: float) -> ReconReport:
    """Six-level quantization anchored at multiples of t_h.

    Level 6 is reserved for unobserved samples; among observed ones the
    cut points are 4*t_h, 3*t_h, 2*t_h, and t_h.
    """
    if t_h <= 0:
        raise ValidationError("t_h must be positive")
    h = np.asarray(h, dtype=float)
    observed = np.asarray(observed, dtype=bool)
    levels = np.full(len(h), 5, dtype=np.int64)
    levels[h >= t_h] = 4
    levels[h >= 2 * t_h] = 3
    levels[h >= 3 * t_h] = 2
    levels[h >= 4 * t_h] = 1
    levels[~observed] = 6
    return ReconReport(h=h, observed=observed, levels=levels, t_h=t_h)


def evaluate(samples: SurfaceSamples, views: ViewSet, vis: VisibilityMatrix,
             w: ReconWeights, t_h: float) -> ReconReport:
    """Full-set reconstructability report for an arbitrary view set."""
    h = set_h(samples, views, vis, w)
    observed = np.array([len(r) > 0 for r in vis.rows])
    return quantize_levels(h, observed, t_h)
