"""Surface and cell quality metrics."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .geometry import closest_points_triangles, triangle_angles_many, triangle_quality_many


@dataclass
class QualityReport:
    frac_angle_below_30: float
    frac_angle_above_90: float
    q_min: float
    rho_max: float
    hausdorff: float  # normalized by the input bounding-box diagonal
    n_surface_seeds: int
    n_volume_seeds: int
    non_convex_cells: int
    euler_characteristic: int
    timings: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float) and not math.isfinite(v):
                d[k] = None
        return d


def angle_stats(tris):
    """Fractions of triangles with a minimum angle below 30 degrees or a maximum angle above 90."""
    if len(tris) == 0:
        return 0.0, 0.0
    ang = np.degrees(triangle_angles_many(tris))
    return float(np.mean(ang.min(axis=1) < 30.0)), float(np.mean(ang.max(axis=1) > 90.0))


def sample_triangles_uniform(tris, n, rng):
    """``n`` points uniform by area on a triangle soup ``(m, 3, 3)``."""
    area = 0.5 * np.linalg.norm(np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]), axis=1)
    k = rng.choice(len(tris), size=n, p=area / area.sum())
    u = rng.random((n, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    t = tris[k]
    return t[:, 0] + u[:, :1] * (t[:, 1] - t[:, 0]) + u[:, 1:] * (t[:, 2] - t[:, 0])


def point_mesh_distance(X, tris, block=4096):
    """Exact distance from each point to a triangle soup.

    The nearest centroid gives an upper bound ``d0``; only triangles whose
    centroid lies within ``d0`` plus the largest centroid-to-vertex radius
    can do better.
    """
    X = np.atleast_2d(X)
    cen = tris.mean(axis=1)
    rad = float(np.linalg.norm(tris - cen[:, None, :], axis=2).max())
    tree = cKDTree(cen)
    d0, _ = tree.query(X)
    out = np.empty(len(X))
    for s in range(0, len(X), block):
        xs = X[s : s + block]
        hits = tree.query_ball_point(xs, d0[s : s + block] + rad * (1 + 1e-12) + 1e-300)
        lens = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(xs))
        rows = np.repeat(np.arange(len(xs)), lens)
        cols = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits])
        t = tris[cols]
        q = closest_points_triangles(xs[rows], t[:, 0], t[:, 1], t[:, 2])
        d = np.linalg.norm(q - xs[rows], axis=1)
        best = np.full(len(xs), np.inf)
        np.minimum.at(best, rows, d)
        out[s : s + block] = best
    return out


def hausdorff(tris_a, tris_b, n=10**5, rng=None):
    """Symmetric Hausdorff distance estimated from ``n`` samples per side, exact point-to-mesh."""
    rng = np.random.default_rng(0) if rng is None else rng
    xa = np.concatenate([sample_triangles_uniform(tris_a, n, rng), tris_a.reshape(-1, 3)])
    xb = np.concatenate([sample_triangles_uniform(tris_b, n, rng), tris_b.reshape(-1, 3)])
    return max(float(point_mesh_distance(xa, tris_b).max()), float(point_mesh_distance(xb, tris_a).max()))


def quality_report(surface, cells, mesh, labels, seeds_kinds=None, timings=None, n_hausdorff=10**5, rng=None,
                   points=None):
    """Surface-triangle and interior-cell metrics for one run."""
    from .voronoi import cell_aspect_ratios, verify_convexity

    tri_idx = surface.triangles()
    tris = surface.vertices[tri_idx]
    below, above = angle_stats(tris)
    q = triangle_quality_many(tris) if len(tris) else np.array([np.nan])
    labels = np.asarray(labels)
    rho = cell_aspect_ratios(cells, select=lambda c: labels[c.seed] == 1)
    rho_max = float(np.nanmax(rho)) if len(rho) and np.isfinite(rho).any() else float("nan")
    diag = float(np.linalg.norm(mesh.bbox[1] - mesh.bbox[0]))
    d_h = hausdorff(tris, mesh.vertices[mesh.triangles], n_hausdorff, rng) / diag if len(tris) else float("nan")
    kinds = np.zeros(len(labels), dtype=int) if seeds_kinds is None else np.asarray(seeds_kinds)
    return QualityReport(
        frac_angle_below_30=below,
        frac_angle_above_90=above,
        q_min=float(np.min(q)),
        rho_max=rho_max,
        hausdorff=d_h,
        n_surface_seeds=int(np.sum(kinds == 0)),
        n_volume_seeds=int(np.sum(kinds == 1)),
        non_convex_cells=verify_convexity(cells, mesh.scale, points=points),
        euler_characteristic=surface.euler_characteristic(),
        timings=dict(timings or {}),
    )
