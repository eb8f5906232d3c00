"""Recursive maximal Poisson-disk sampling of protection and coverage balls.

Corner balls sit on sharp corners, edge balls protect creases, surface balls
cover patches. Each stratum is refined with dart throwing over an active
pool of subfaces; whenever refinement shrinks a ball of a lower phase, the
affected strata are refined again.
"""
from __future__ import annotations

import logging
import math

import numpy as np
from scipy.spatial import cKDTree

from .balls import CORNER_BALL, EDGE_BALL, SURFACE_BALL, BallSet
from .cosmooth import cosmooth
from .features import Strata
from .geometry import closest_points_segments, closest_points_triangles
from .params import Parameters
from .rng import stream
from .spatial import BoundaryIndex

log = logging.getLogger(__name__)

SIZING_FACTOR = 0.49
DISCARD_SAFETY = 1.0  # vertex test is exact for a convex ball


class RefinementError(RuntimeError):
    pass


def is_deep_covered(x, center, radius, alpha):
    """``|x - center| <= (1 - alpha) * radius`` (closed)."""
    return float(np.linalg.norm(np.asarray(x, float) - np.asarray(center, float))) <= (1 - alpha) * radius


def lipschitz_fixpoint(centers, radii, L):
    """``r_p' = min_q (r_q + L |p - q|)``, the fixpoint of pairwise relaxation.

    The direct distance never exceeds a path through other balls, so one
    minimum over all pairs equals the fixpoint.
    """
    centers = np.asarray(centers, dtype=float)
    radii = np.asarray(radii, dtype=float)
    n = len(radii)
    out = radii.copy()
    if n < 2:
        return out
    if n <= 4096:
        block = 512
        for s in range(0, n, block):
            d = np.linalg.norm(centers[s : s + block, None, :] - centers[None, :, :], axis=2)
            out[s : s + block] = np.minimum(radii[s : s + block], (radii[None, :] + L * d).min(axis=1))
        return out
    # large sets: only balls within (r_p - r_min) / L can bind
    tree = cKDTree(centers)
    rmin = radii.min()
    for i in range(n):
        if radii[i] <= rmin:
            continue
        cand = tree.query_ball_point(centers[i], (radii[i] - rmin) / L)
        d = np.linalg.norm(centers[cand] - centers[i], axis=1)
        out[i] = min(radii[i], float((radii[cand] + L * d).min()))
    return out


class Pool:
    """Active subfaces of one stratum: ``pts`` is ``(n, k, 3)`` with k = 2 or 3."""

    def __init__(self, pts, parent):
        self.pts = pts
        self.parent = parent
        self.depth = 0
        self._table()

    def _table(self):
        p = self.pts
        if len(p) == 0:
            self.measure = np.zeros(0)
        elif p.shape[1] == 2:
            self.measure = np.linalg.norm(p[:, 1] - p[:, 0], axis=1)
        else:
            self.measure = 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)
        self.cum = np.cumsum(self.measure)

    def __len__(self):
        return len(self.pts)

    def keep(self, mask):
        self.pts = self.pts[mask]
        self.parent = self.parent[mask]
        self._table()

    def subdivide(self):
        p = self.pts
        if p.shape[1] == 2:
            m = 0.5 * (p[:, 0] + p[:, 1])
            new = np.concatenate([np.stack([p[:, 0], m], 1), np.stack([m, p[:, 1]], 1)])
            parent = np.concatenate([self.parent, self.parent])
        else:
            a, b, c = p[:, 0], p[:, 1], p[:, 2]
            ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
            new = np.concatenate(
                [np.stack(x, 1) for x in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
            )
            parent = np.tile(self.parent, 4)
        self.pts = new
        self.parent = parent
        self.depth += 1
        self._table()

    def dart(self, rng):
        total = self.cum[-1]
        k = int(np.searchsorted(self.cum, rng.random() * total, side="right"))
        k = min(k, len(self.pts) - 1)
        p = self.pts[k]
        if p.shape[0] == 2:
            t = rng.random()
            return p[0] + t * (p[1] - p[0]), k
        u, v = rng.random(2)
        if u + v > 1:
            u, v = 1 - u, 1 - v
        return p[0] + u * (p[1] - p[0]) + v * (p[2] - p[0]), k


class Refiner:
    """Owns the ball set and runs the three refinement phases."""

    def __init__(self, strata: Strata, params: Parameters, boundary: BoundaryIndex = None, balls=None):
        self.strata = strata
        self.params = params
        self.mesh = strata.mesh
        self.scale = self.mesh.scale
        self.tol = 1e-12 * self.scale
        self.alpha = params.alpha
        self.cov_alpha = params.alpha  # halved in safe mode; separation keeps alpha
        self.L = params.lipschitz
        self.theta = params.theta_sharp
        if boundary is None:
            boundary = BoundaryIndex(
                strata, stream(params.rng_seed, "boundary"), params.crease_samples, params.surface_samples
            )
        self.boundary = boundary
        self.balls = balls if balls is not None else BallSet()
        self.rng = stream(params.rng_seed, "rmps")
        self.bboxes = strata.stratum_bboxes()
        self.stats = {"darts": 0, "misses": 0, "rejected_density": 0, "subdivisions": 0, "mps_runs": 0}
        self._label_normals()

    # -- stratum data ------------------------------------------------------------

    def _label_normals(self):
        mesh = self.mesh
        vn = np.zeros_like(mesh.vertices)
        w = mesh.normals * mesh.areas[:, None]
        for k in range(3):
            np.add.at(vn, mesh.triangles[:, k], w)
        self.vertex_normals = vn / np.maximum(np.linalg.norm(vn, axis=1), 1e-300)[:, None]
        en = np.zeros((len(mesh.edges), 3))
        for e, fs in enumerate(mesh.edge_faces):
            en[e] = w[fs].sum(axis=0)
        self.edge_normals = en / np.maximum(np.linalg.norm(en, axis=1), 1e-300)[:, None]

    def stratum_pool(self, sid):
        s = self.strata
        mesh = self.mesh
        dim = s.dims[sid]
        k = s.local_index(sid)
        if dim == 1:
            edges = s.creases[k].edges
            pts = mesh.vertices[mesh.edges[edges]]
            return Pool(pts, edges.copy())
        facets = s.patches[k]
        return Pool(mesh.vertices[mesh.triangles[facets]], facets.copy())

    def face_vec(self, dim, face):
        if dim == 1:
            return self.strata.edge_dir[face]
        return self.mesh.normals[face]

    # -- sizing --------------------------------------------------------------------

    def initial_radius(self, p, sid, dim, vec, btype):
        r = float(self.params.sizing_at(p)[0])
        hit = self.boundary.nearest_non_cosmooth(p, sid, dim, vec)
        if hit is not None:
            r = min(r, SIZING_FACTOR * hit[1])
        q, dq = self.balls.nearest(p, btype)
        if q >= 0:
            r = min(r, self.balls.radii[q] + self.L * dq)
        return r

    # -- corner phase --------------------------------------------------------------

    def init_corners(self):
        s = self.strata
        for i, v in enumerate(s.corners):
            p = self.mesh.vertices[v]
            r = self.initial_radius(p, i, 0, np.zeros(3), CORNER_BALL)
            if not math.isfinite(r):
                r = self.scale
            self.balls.add(p, r, CORNER_BALL, i, 0, np.zeros(3), face=int(v), label=self.vertex_normals[v])
        self.enforce_lipschitz(CORNER_BALL)

    # -- C3 ------------------------------------------------------------------------

    def enforce_lipschitz(self, btype):
        """Shrink balls of one type until no pair violates C3; returns shrunk ids."""
        ids = self.balls.ids_of_type(btype)
        shrunk = []
        if len(ids) >= 2:
            new = lipschitz_fixpoint(self.balls.centers[ids], self.balls.radii[ids], self.L)
            for i, r in zip(ids, new):
                if self.balls.shrink(int(i), float(r), "lipschitz"):
                    shrunk.append(int(i))
        self.balls.certified[btype] = True
        return shrunk

    # -- pool filtering -------------------------------------------------------------

    def _pairs(self, pool):
        """Candidate (subface, ball) pairs whose ball may touch the subface."""
        pts = pool.pts
        cen = pts.mean(axis=1)
        rad = np.linalg.norm(pts - cen[:, None, :], axis=2).max(axis=1)
        b = self.balls
        if b.n == 0 or len(pts) == 0:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        # few balls, many subfaces: query the subface tree once per ball
        tree = cKDTree(cen)
        reach = b.radii * (1 + 1e-12) + rad.max() + self.tol
        hits = tree.query_ball_point(b.centers, reach)
        rows, cols = [], []
        for j, h in enumerate(hits):
            if h:
                rows.append(np.asarray(h, dtype=np.int64))
                cols.append(np.full(len(h), j, dtype=np.int64))
        if not rows:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        order = np.lexsort((cols, rows))
        return rows[order], cols[order]

    def _closest(self, sub, x):
        if sub.shape[1] == 2:
            return closest_points_segments(x, sub[:, 0], sub[:, 1])
        return closest_points_triangles(x, sub[:, 0], sub[:, 1], sub[:, 2])

    def detect_violations(self, pool, sid, rows=None, cols=None):
        """Shrink balls that reach a subface without being co-smooth with it.

        Returns (rows, cols, closest points, co-smooth mask) for reuse.
        """
        dim = self.strata.dims[sid]
        if rows is None:
            rows, cols = self._pairs(pool)
        if len(rows) == 0:
            return rows, cols, np.zeros((0, 3)), np.zeros(0, dtype=bool)
        b = self.balls
        sub = pool.pts[rows]
        c = b.centers[cols]
        q = self._closest(sub, c)
        d = np.linalg.norm(c - q, axis=1)
        vec = self.face_vec(dim, pool.parent[rows])
        cs = cosmooth(
            self.theta, self.strata.incident,
            sid, dim, vec, q,
            b.sids[cols], b.dims[cols], b.vecs[cols], c,
            self.tol,
        )
        bad = (d < b.radii[cols]) & ~cs & (d > self.tol)
        if bad.any():
            target = np.full(b.n, np.inf)
            np.minimum.at(target, cols[bad], SIZING_FACTOR * d[bad])
            for i in np.unique(cols[bad]):
                b.shrink(int(i), float(target[i]), "violation")
        return rows, cols, q, cs

    def filter_pool(self, pool, sid):
        """Detect violations, then drop covered or protected subfaces."""
        if len(pool) == 0:
            return
        dim = self.strata.dims[sid]
        rows, cols, q, cs = self.detect_violations(pool, sid)
        if len(rows) == 0:
            return
        b = self.balls
        r = b.radii[cols]
        vd = np.linalg.norm(pool.pts[rows] - b.centers[cols][:, None, :], axis=2).max(axis=1)
        deep = cs & (vd <= DISCARD_SAFETY * (1 - self.cov_alpha) * r)
        inside_lower = (b.types[cols] < dim) & (vd < r)
        drop = np.zeros(len(pool), dtype=bool)
        drop[rows[deep | inside_lower]] = True
        pool.keep(~drop)

    # -- darts ---------------------------------------------------------------------

    def _dart_status(self, x, dim):
        """0 accepted, 1 deep-covered, 2 inside a lower-dimensional ball."""
        b = self.balls
        for t in range(3):
            idx = b.index[t]
            if len(idx) == 0:
                continue
            cand = idx.within(x, idx.rmax)
            if len(cand) == 0:
                continue
            d = np.linalg.norm(b.centers[cand] - x, axis=1)
            r = b.radii[cand]
            if np.any(d <= (1 - self.cov_alpha) * r):
                return 1
            if t < dim and np.any(d < r):
                return 2
        return 0

    def _separation_radius(self, x, r):
        """Largest radius <= r keeping every center out of the deep part; None if no conflict."""
        b = self.balls
        lim = r * (1 - self.alpha)
        worst = math.inf
        conflict = False
        for t in range(3):
            idx = b.index[t]
            if len(idx) == 0:
                continue
            cand = idx.within(x, lim)
            if len(cand) == 0:
                continue
            d = np.linalg.norm(b.centers[cand] - x, axis=1)
            m = d < lim
            if m.any():
                conflict = True
                worst = min(worst, float(d[m].min()))
        if not conflict:
            return None
        return worst / (1 - self.alpha)

    def mps_stratum(self, sid):
        """Refine one crease or patch until its pool is empty.

        Returns True if a ball of a lower phase shrank (the caller recurses).
        """
        self.stats["mps_runs"] += 1
        s = self.strata
        dim = int(s.dims[sid])
        btype = EDGE_BALL if dim == 1 else SURFACE_BALL
        pool = self.stratum_pool(sid)
        first_shrink = len(self.balls.shrinks)

        def lower_shrunk():
            return any(self.balls.types[e[0]] < dim for e in self.balls.shrinks[first_shrink:])

        self.filter_pool(pool, sid)
        if lower_shrunk():
            return True
        misses = 0
        while len(pool):
            if misses >= self.params.miss_limit:
                pool.subdivide()
                self.stats["subdivisions"] += 1
                if pool.depth > self.params.max_pool_depth:
                    raise RefinementError("refinement not converging")
                self.filter_pool(pool, sid)
                if lower_shrunk():
                    return True
                misses = 0
                continue
            x, k = pool.dart(self.rng)
            self.stats["darts"] += 1
            if self._dart_status(x, dim):
                misses += 1
                self.stats["misses"] += 1
                continue
            face = int(pool.parent[k])
            vec = self.face_vec(dim, face)
            r = self.initial_radius(x, sid, dim, vec, btype)
            if not math.isfinite(r):
                r = self.scale
            sep = self._separation_radius(x, r)
            if sep is not None:
                if self.rng.random() < self.params.density_rejection_prob:
                    misses += 1
                    self.stats["rejected_density"] += 1
                    continue
                r = min(r, sep)
            if not r > self.tol:
                misses += 1
                continue
            label = self.edge_normals[face] if dim == 1 else self.mesh.normals[face]
            self.balls.add(x, r, btype, sid, dim, vec, face=face, label=label)
            misses = 0
        return False

    # -- driver --------------------------------------------------------------------

    def mark_dirty(self, shrinks, dirty):
        """Strata touched by the old extent of shrunk balls (same or higher dimension)."""
        if not shrinks:
            return
        b = self.balls
        dims = self.strata.dims
        lo = self.bboxes[:, 0]
        hi = self.bboxes[:, 1]
        for bid, old, _new, _why in shrinks:
            c = b.centers[bid]
            t = b.types[bid]
            hit = np.all((lo <= c + old) & (hi >= c - old), axis=1) & (dims >= max(t, 1))
            dirty.update(int(x) for x in np.flatnonzero(hit))
            if t >= 1:
                dirty.add(int(b.sids[bid]))

    def run(self, dirty=None, max_rounds=500):
        """Refine dirty strata phase by phase until nothing is dirty."""
        s = self.strata
        if dirty is None:
            dirty = set(int(x) for x in np.flatnonzero(s.dims > 0))
        rounds = 0
        while dirty:
            rounds += 1
            if rounds > max_rounds:
                raise RefinementError("refinement not converging")
            restart = False
            for phase in (1, 2):
                todo = sorted(x for x in dirty if s.dims[x] == phase)
                for sid in todo:
                    mark = len(self.balls.shrinks)
                    recurse = self.mps_stratum(sid)
                    dirty.discard(sid)
                    self.mark_dirty(self.balls.shrinks[mark:], dirty)
                    if recurse:
                        mark = len(self.balls.shrinks)
                        for t in range(phase):
                            self.enforce_lipschitz(t)
                        self.mark_dirty(self.balls.shrinks[mark:], dirty)
                        restart = True
                        break
                if restart:
                    break
                mark = len(self.balls.shrinks)
                self.enforce_lipschitz(phase)
                self.mark_dirty(self.balls.shrinks[mark:], dirty)
                if any(s.dims[x] <= phase for x in dirty):
                    restart = True
                    break
        self.balls.rebuild()
        return self.balls

    def rmps(self):
        self.init_corners()
        return self.run()

    def restart(self, coverage_alpha=None):
        """Discard all balls and refine again, optionally with a shallower coverage depth."""
        if coverage_alpha is not None:
            self.cov_alpha = coverage_alpha
        self.balls = BallSet()
        self.rng = stream(self.params.rng_seed, "rmps-restart")
        return self.rmps()


def rmps(strata, params, boundary=None):
    """Protection and coverage balls for ``strata``; returns the refiner (balls in ``.balls``)."""
    ref = Refiner(strata, params, boundary)
    ref.rmps()
    return ref
