"""Supersampled boundary index with co-smoothness filtered nearest queries."""
from __future__ import annotations

import heapq
import math

import numpy as np

from .cosmooth import cosmooth
from .features import Strata


class FilteredKDTree:
    """Median-split k-d tree whose nearest query skips rejected points.

    ``accept(idx)`` receives an array of point indices and returns a boolean
    mask; rejected points never update the distance estimate, but subtrees
    are still pruned by their bounding boxes.
    """

    def __init__(self, points, leafsize=16):
        pts = np.asarray(points, dtype=float).reshape(-1, 3)
        self.points = pts
        n = len(pts)
        self.perm = np.arange(n)
        self.lo, self.hi, self.left, self.right, self.start, self.end = [], [], [], [], [], []
        if n == 0:
            return
        stack = [(self._new_node(0, n), 0, n)]
        while stack:
            node, s, e = stack.pop()
            idx = self.perm[s:e]
            p = pts[idx]
            lo, hi = p.min(axis=0), p.max(axis=0)
            self.lo[node] = tuple(lo.tolist())
            self.hi[node] = tuple(hi.tolist())
            if e - s <= leafsize:
                continue
            dim = int(np.argmax(hi - lo))
            mid = (e - s) // 2
            part = np.argpartition(p[:, dim], mid, kind="introselect")
            self.perm[s:e] = idx[part]
            left = self._new_node(s, s + mid)
            right = self._new_node(s + mid, e)
            self.left[node], self.right[node] = left, right
            stack.append((left, s, s + mid))
            stack.append((right, s + mid, e))
        self.sorted_points = pts[self.perm]

    def _new_node(self, s, e):
        self.lo.append(None)
        self.hi.append(None)
        self.left.append(-1)
        self.right.append(-1)
        self.start.append(s)
        self.end.append(e)
        return len(self.lo) - 1

    def __len__(self):
        return len(self.points)

    def _box_d2(self, node, x):
        lo, hi = self.lo[node], self.hi[node]
        d2 = 0.0
        for k in range(3):
            v = x[k]
            if v < lo[k]:
                d2 += (lo[k] - v) ** 2
            elif v > hi[k]:
                d2 += (v - hi[k]) ** 2
        return d2

    def nearest(self, x, accept=None, dmax=math.inf, batch=64):
        """Return ``(index, distance)`` of the nearest accepted point, or ``(-1, inf)``."""
        if len(self.points) == 0:
            return -1, math.inf
        xt = tuple(float(v) for v in x)
        xa = np.asarray(x, dtype=float)
        best2 = dmax * dmax
        best_i = -1
        heap = [(self._box_d2(0, xt), 0)]
        while heap:
            ranges = []
            while heap and len(ranges) < batch:
                d2, node = heapq.heappop(heap)
                if d2 >= best2:
                    heap = []
                    break
                if self.left[node] < 0:
                    ranges.append((self.start[node], self.end[node]))
                else:
                    for ch in (self.left[node], self.right[node]):
                        heapq.heappush(heap, (self._box_d2(ch, xt), ch))
            if not ranges:
                continue
            pos = np.concatenate([np.arange(s, e) for s, e in ranges])
            diff = self.sorted_points[pos] - xa
            d2 = np.einsum("ij,ij->i", diff, diff)
            m = d2 < best2
            if not m.any():
                continue
            pos, d2 = pos[m], d2[m]
            idx = self.perm[pos]
            if accept is not None:
                ok = accept(idx)
                if not ok.any():
                    continue
                idx, d2 = idx[ok], d2[ok]
            k = np.lexsort((idx, d2))[0]
            if d2[k] < best2 or (d2[k] == best2 and idx[k] < best_i):
                best2, best_i = float(d2[k]), int(idx[k])
        if best_i < 0:
            return -1, math.inf
        return best_i, math.sqrt(best2)


class BoundarySamples:
    """Points on one stratum type with their stratum ids, vectors and source faces."""

    def __init__(self, pos, sid, dim, vec, face):
        self.pos = np.asarray(pos, dtype=float).reshape(-1, 3)
        self.sid = np.asarray(sid, dtype=np.int64)
        self.dim = np.asarray(dim, dtype=np.int64)
        self.vec = np.asarray(vec, dtype=float).reshape(-1, 3)
        self.face = np.asarray(face, dtype=np.int64)
        self.tree = FilteredKDTree(self.pos)

    def __len__(self):
        return len(self.pos)


def allocate_samples(measures, total, rng):
    """One sample per element plus a multinomial split of the rest by measure."""
    measures = np.asarray(measures, dtype=float)
    m = len(measures)
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    extra = max(int(total) - m, 0)
    counts = np.ones(m, dtype=np.int64)
    if extra and measures.sum() > 0:
        counts += rng.multinomial(extra, measures / measures.sum())
    return counts


def sample_edges(a, b, counts, rng):
    rep = np.repeat(np.arange(len(a)), counts)
    t = rng.random(len(rep))
    return a[rep] + t[:, None] * (b[rep] - a[rep]), rep


def sample_triangles(tri, counts, rng):
    rep = np.repeat(np.arange(len(tri)), counts)
    u = rng.random((len(rep), 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    t = tri[rep]
    pts = t[:, 0] + u[:, :1] * (t[:, 1] - t[:, 0]) + u[:, 1:] * (t[:, 2] - t[:, 0])
    return pts, rep


class BoundaryIndex:
    """Three filtered k-d trees: sharp corners, crease supersamples, patch supersamples."""

    def __init__(self, strata: Strata, rng, n_crease=10**5, n_surface=10**6):
        self.strata = strata
        mesh = strata.mesh
        self.theta = strata.theta_sharp
        self.incident = strata.incident
        self.tol = 1e-12 * mesh.scale
        nc = strata.n_corners
        self.corners = BoundarySamples(
            mesh.vertices[strata.corners],
            np.arange(nc),
            np.zeros(nc, dtype=np.int64),
            np.zeros((nc, 3)),
            strata.corners,
        )
        sharp_ids = np.flatnonzero(strata.sharp)
        if len(sharp_ids):
            a = mesh.vertices[mesh.edges[sharp_ids, 0]]
            b = mesh.vertices[mesh.edges[sharp_ids, 1]]
            counts = allocate_samples(np.linalg.norm(b - a, axis=1), n_crease, rng)
            pos, rep = sample_edges(a, b, counts, rng)
            e = sharp_ids[rep]
            self.creases = BoundarySamples(
                pos, strata.sharp_edge_sid()[e], np.ones(len(e), dtype=np.int64), strata.edge_dir[e], e
            )
        else:
            self.creases = BoundarySamples(np.zeros((0, 3)), [], [], np.zeros((0, 3)), [])
        if strata.n_patches:
            tri = mesh.vertices[mesh.triangles]
            counts = allocate_samples(mesh.areas, n_surface, rng)
            pos, rep = sample_triangles(tri, counts, rng)
            self.surface = BoundarySamples(
                pos, strata.facet_sid()[rep], np.full(len(rep), 2), mesh.normals[rep], rep
            )
        else:
            self.surface = BoundarySamples(np.zeros((0, 3)), [], [], np.zeros((0, 3)), [])
        self.sets = (self.corners, self.creases, self.surface)

    def not_cosmooth_filter(self, samples, p, sid, dim, vec):
        def accept(idx):
            ok = cosmooth(
                self.theta,
                self.incident,
                samples.sid[idx],
                samples.dim[idx],
                samples.vec[idx],
                samples.pos[idx],
                sid,
                dim,
                vec,
                p,
                self.tol,
            )
            return ~ok

        return accept

    def nearest_non_cosmooth(self, p, sid, dim, vec):
        """Nearest supersample that is not co-smooth with ``p``.

        Returns ``(q_star, distance, (tree, index))`` or None.
        """
        p = np.asarray(p, dtype=float)
        vec = np.asarray(vec, dtype=float)
        best = None
        dmax = math.inf
        for k, s in enumerate(self.sets):
            if len(s) == 0:
                continue
            i, d = s.tree.nearest(p, self.not_cosmooth_filter(s, p, sid, dim, vec), dmax=dmax)
            if i >= 0 and d < dmax:
                dmax = d
                best = (s.pos[i].copy(), d, (k, i))
        return best

    def brute_nearest_non_cosmooth(self, p, sid, dim, vec):
        """Linear-scan reference for :meth:`nearest_non_cosmooth`."""
        p = np.asarray(p, dtype=float)
        best = None
        for k, s in enumerate(self.sets):
            if len(s) == 0:
                continue
            idx = np.arange(len(s))
            ok = self.not_cosmooth_filter(s, p, sid, dim, vec)(idx)
            if not ok.any():
                continue
            d = np.linalg.norm(s.pos[ok] - p, axis=1)
            j = int(np.argmin(d))
            if best is None or d[j] < best[1]:
                best = (s.pos[ok][j].copy(), float(d[j]), (k, int(idx[ok][j])))
        return best


def build_boundary_index(strata, rng, n_crease=10**5, n_surface=10**6):
    return BoundaryIndex(strata, rng, n_crease, n_surface)
