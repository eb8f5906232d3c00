"""Voronoi seeds: mirrored pairs on the boundary and graded seeds in the interior."""
from __future__ import annotations

import collections
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .balls import BallSet
from .refinement import lipschitz_fixpoint
from .slivers import triplet_points

log = logging.getLogger(__name__)

EXTERIOR, INTERIOR = 0, 1
SURFACE, VOLUME = 0, 1
LABEL_NAMES = ("exterior", "interior")
KIND_NAMES = ("surface", "volume")
MISS_LIMIT = 100


class SeedingError(RuntimeError):
    pass


@dataclass
class SeedSet:
    """Seed positions with guidance radii, side labels and kinds.

    Surface seeds keep the ids of their three generating balls; volume
    seeds store ``-1`` there.
    """

    points: np.ndarray
    radii: np.ndarray
    labels: np.ndarray
    kinds: np.ndarray
    triplets: np.ndarray
    _trees: dict = field(default_factory=dict, repr=False)

    @classmethod
    def empty(cls, dim=3):
        return cls(np.zeros((0, dim)), np.zeros(0), np.zeros(0, int), np.zeros(0, int), np.zeros((0, 3), int))

    def __len__(self):
        return len(self.points)

    @property
    def dim(self):
        return self.points.shape[1]

    def subset(self, mask):
        return SeedSet(self.points[mask], self.radii[mask], self.labels[mask], self.kinds[mask], self.triplets[mask])

    def surface(self):
        return self.subset(self.kinds == SURFACE)

    def volume(self):
        return self.subset(self.kinds == VOLUME)

    def extend(self, other: "SeedSet"):
        return SeedSet(
            np.concatenate([self.points, other.points]),
            np.concatenate([self.radii, other.radii]),
            np.concatenate([self.labels, other.labels]),
            np.concatenate([self.kinds, other.kinds]),
            np.concatenate([self.triplets, other.triplets]),
        )

    def tree(self, kind):
        """k-d tree over the seeds of one kind; returns (tree, ids) or (None, ids)."""
        if kind not in self._trees:
            ids = np.flatnonzero(self.kinds == kind)
            self._trees[kind] = (cKDTree(self.points[ids]) if len(ids) else None, ids)
        return self._trees[kind]

    def to_csv(self, path):
        """``x,y,z,r,label,kind`` with 17 significant digits."""
        with open(path, "w") as fh:
            fh.write("x,y,z,r,label,kind\n")
            for p, r, lab, k in zip(self.points, self.radii, self.labels, self.kinds):
                xyz = list(p) + [0.0] * (3 - len(p))
                fh.write("%.17g,%.17g,%.17g,%.17g,%s,%s\n" % (*xyz, r, LABEL_NAMES[lab], KIND_NAMES[k]))

    @classmethod
    def from_csv(cls, path, dim=3):
        import csv

        with open(path) as fh:
            rows = list(csv.DictReader(fh))
        if not rows:
            return cls.empty(dim)
        keys = "xyz"[:dim]
        pts = np.array([[float(r[k]) for k in keys] for r in rows])
        radii = np.array([float(r["r"]) for r in rows])
        labels = np.array([LABEL_NAMES.index(r["label"]) for r in rows])
        kinds = np.array([KIND_NAMES.index(r["kind"]) for r in rows])
        return cls(pts, radii, labels, kinds, np.full((len(rows), 3), -1))


# -- point in mesh ----------------------------------------------------------------


def inside_mesh(points, vertices, triangles, direction=(0.5773502691896258, 0.5773502713, 0.5773502669)):
    """Ray-casting parity for a closed triangle mesh; True means inside."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.asarray(direction, dtype=float)
    d = d / np.linalg.norm(d)
    a = vertices[triangles[:, 0]]
    e1 = vertices[triangles[:, 1]] - a
    e2 = vertices[triangles[:, 2]] - a
    h = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, h)
    ok = np.abs(det) > 1e-14
    a, e1, e2, h, det = a[ok], e1[ok], e2[ok], h[ok], det[ok]
    inv = 1.0 / det
    out = np.zeros(len(points), dtype=bool)
    chunk = max(1, 2_000_000 // max(len(a), 1))
    for s in range(0, len(points), chunk):
        p = points[s : s + chunk]
        sv = p[:, None, :] - a[None]
        u = np.einsum("pij,ij->pi", sv, h) * inv
        q = np.cross(sv, e1[None])
        v = np.einsum("j,pij->pi", d, q) * inv
        t = np.einsum("ij,pij->pi", e2, q) * inv
        hit = (u >= 0) & (v >= 0) & (u + v <= 1) & (t > 0)
        out[s : s + chunk] = hit.sum(axis=1) % 2 == 1
    return out


# -- surface seeds --------------------------------------------------------------


def _merge_close(points, tol):
    """Index of the representative (lowest index) for every point within ``tol``."""
    rep = np.arange(len(points))
    if len(points) < 2 or tol <= 0:
        return rep
    pairs = cKDTree(points).query_pairs(tol, output_type="ndarray")
    if len(pairs) == 0:
        return rep

    def find(x):
        while rep[x] != x:
            rep[x] = rep[rep[x]]
            x = rep[x]
        return x

    for i, j in pairs:
        a, b = find(i), find(j)
        if a != b:
            rep[max(a, b)] = min(a, b)
    return np.array([find(i) for i in range(len(points))])


def surface_seeds(balls: BallSet, strata=None, scale=None, mesh=None) -> SeedSet:
    """One seed at each triplet intersection point not inside a fourth ball.

    The side label comes from the averaged outward normal of the three
    generators. Triplets spanning several strata, and triplets whose center
    plane is nearly parallel to that normal, are labelled by ray casting
    against ``mesh`` instead.
    """
    if mesh is None and strata is not None:
        mesh = strata.mesh
    if scale is None:
        scale = mesh.scale if mesh is not None else 1.0
    tp = triplet_points(balls)
    if tp.half_covered.any():
        raise SeedingError("sliver escaped elimination")
    nv = int(tp.valid.sum())
    if nv == 0:
        return SeedSet.empty()
    tv = tp.triplets[tp.valid]
    pts = np.concatenate([tp.up[tp.valid], tp.down[tp.valid]])
    trip = np.concatenate([tv, tv])
    keep = ~np.concatenate([tp.covered_up, tp.covered_down])
    pts, trip = pts[keep], trip[keep]
    centroid = balls.centers[trip].mean(axis=1)
    normal = balls.labels[trip].sum(axis=1)
    nlen = np.maximum(np.linalg.norm(normal, axis=1), 1e-300)
    offset = pts - centroid
    side = np.einsum("ij,ij->i", offset, normal) / nlen
    labels = np.where(side > 0, EXTERIOR, INTERIOR)
    olen = np.maximum(np.linalg.norm(offset, axis=1), 1e-300)
    sids = balls.sids[trip]
    types = balls.types[trip]
    mixed = (types.min(axis=1) != types.max(axis=1)) | (sids.min(axis=1) != sids.max(axis=1))
    unsure = (np.abs(side) < 1e-9 * scale) | (np.abs(side) < 0.5 * olen) | mixed
    if unsure.any() and mesh is not None:
        inside = inside_mesh(pts[unsure], mesh.vertices, mesh.triangles)
        labels[unsure] = np.where(inside, INTERIOR, EXTERIOR)
    radii = balls.radii[trip].mean(axis=1)
    rep = _merge_close(pts, 1e-9 * scale)
    first = rep == np.arange(len(pts))
    return SeedSet(pts[first], radii[first], labels[first], np.full(int(first.sum()), SURFACE), trip[first])


# -- interior seeds ---------------------------------------------------------------


class _GrowingTree:
    """Nearest and containment queries over a growing point set of guidance balls."""

    def __init__(self, dim):
        self.dim = dim
        self._buf = np.zeros((64, dim))
        self._rad = np.zeros(64)
        self.n = 0
        self.tree = None
        self.n_tree = 0
        self.rmax = 0.0

    @property
    def points(self):
        return self._buf[: self.n]

    @property
    def radii(self):
        return self._rad[: self.n]

    @radii.setter
    def radii(self, value):
        self._rad[: self.n] = value

    def add(self, p, r):
        if self.n == len(self._buf):
            self._buf = np.concatenate([self._buf, np.zeros_like(self._buf)])
            self._rad = np.concatenate([self._rad, np.zeros_like(self._rad)])
        self._buf[self.n] = p
        self._rad[self.n] = r
        self.n += 1
        self.rmax = max(self.rmax, r)
        if self.n - self.n_tree > 32 + self.n_tree // 4:
            self.rebuild()

    def rebuild(self):
        self.n_tree = self.n
        self.tree = cKDTree(self.points.copy()) if self.n_tree else None
        self.rmax = float(self.radii.max()) if len(self.radii) else 0.0

    def near(self, x, R):
        out = []
        if self.tree is not None:
            out.extend(self.tree.query_ball_point(x, R))
        if len(self.points) > self.n_tree:
            tail = np.arange(self.n_tree, len(self.points))
            d = np.linalg.norm(self.points[tail] - x, axis=1)
            out.extend(tail[d <= R].tolist())
        return np.array(sorted(out), dtype=np.int64)

    def contains(self, x):
        """True if ``x`` lies strictly inside one of the balls."""
        if len(self.points) == 0:
            return False
        ids = self.near(x, self.rmax)
        if len(ids) == 0:
            return False
        return bool(np.any(np.linalg.norm(self.points[ids] - x, axis=1) < self.radii[ids]))


class _Obstacles:
    """Fixed balls (protection balls and surface-seed guidance balls)."""

    def __init__(self, centers, radii):
        self.centers = np.asarray(centers, dtype=float)
        self.radii = np.asarray(radii, dtype=float)
        self.tree = cKDTree(self.centers) if len(self.centers) else None
        self.rmax = float(self.radii.max()) if len(self.radii) else 0.0

    def near(self, x, R):
        if self.tree is None:
            return np.zeros(0, dtype=np.int64)
        return np.asarray(self.tree.query_ball_point(x, R, return_sorted=True), dtype=np.int64)

    def contains(self, x):
        ids = self.near(x, self.rmax)
        return bool(len(ids)) and bool(np.any(np.linalg.norm(self.centers[ids] - x, axis=1) < self.radii[ids]))


def _random_direction(rng, dim):
    while True:
        v = rng.normal(size=dim)
        n = np.linalg.norm(v)
        if n > 1e-12:
            return v / n


def _segment_hits(z, u, length, centers, radii):
    """Entry/exit parameters of the ray ``z + t u`` through each ball; NaN when missed."""
    w = z - centers
    b = w @ u
    c = np.einsum("ij,ij->i", w, w) - radii**2
    disc = b * b - c
    with np.errstate(invalid="ignore"):
        s = np.sqrt(disc)
    t_in = np.where(disc > 0, -b - s, np.nan)
    t_out = np.where(disc > 0, -b + s, np.nan)
    return t_in, t_out


@dataclass
class InteriorStats:
    darts: int = 0
    dart_seeds: int = 0
    spoke_seeds: int = 0
    lipschitz_rounds: int = 0


def interior_seeds_random(seeds: SeedSet, balls: BallSet, lipschitz, rng, lo, hi, label_fn=None,
                          miss_limit=MISS_LIMIT, keep_exterior=False, inner_box=None, max_seeds=10**6):
    """Dart throwing followed by spoke darts inside the box ``[lo, hi]``.

    Each candidate ``z`` takes the label of its nearest surface seed ``s``
    (or ``label_fn(z)``) and radius ``r_s + L |z - s|``; it is rejected inside
    any surface-seed guidance ball, any protection ball or any interior ball.
    Both sides are sampled; exterior seeds are dropped at the end unless
    ``keep_exterior``. ``inner_box`` adds a second dart pass over a tighter
    box so that pockets enclosed by the boundary balls, which spokes cannot
    reach, still get seeded.
    """
    surf = seeds.surface()
    dim = seeds.dim
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    stats = InteriorStats()
    if len(surf) == 0:
        return SeedSet.empty(dim), stats
    s_tree = cKDTree(surf.points)
    if balls is not None and balls.n:
        fixed = _Obstacles(np.vstack([surf.points, balls.centers[:, :dim]]), np.concatenate([surf.radii, balls.radii]))
    else:
        fixed = _Obstacles(surf.points, surf.radii)
    inner = _GrowingTree(dim)
    labels = []

    def admissible(z):
        if fixed.contains(z) or inner.contains(z):
            return None
        d, k = s_tree.query(z)
        lab = int(surf.labels[k]) if label_fn is None else int(label_fn(z))
        return lab, float(surf.radii[k] + lipschitz * d)

    def darts(a, b):
        misses = 0
        while misses < miss_limit and len(inner.points) < max_seeds:
            z = a + rng.random(dim) * (b - a)
            stats.darts += 1
            got = admissible(z)
            if got is None:
                misses += 1
                continue
            inner.add(z, got[1])
            labels.append(got[0])
            stats.dart_seeds += 1
            misses = 0

    def spokes(queue):
        while queue and len(inner.points) < max_seeds:
            i = queue.popleft()
            misses = 0
            while misses < miss_limit:
                zp = _spoke(i)
                if zp is None:
                    misses += 1
                    continue
                got = admissible(zp)
                if got is None:
                    misses += 1
                    continue
                inner.add(zp, got[1])
                labels.append(got[0])
                queue.append(len(inner.points) - 1)
                stats.spoke_seeds += 1
                misses = 0

    def _spoke(i):
        """A point on a random spoke of length ``2 r_z`` beyond ``b_z``, trimmed at the first ball."""
        z, rz = inner.points[i], inner.radii[i]
        u = _random_direction(rng, dim)
        t_lo, t_hi = rz, 2.0 * rz
        sources = [(fixed.centers, fixed.radii, fixed.near(z, 2 * rz + fixed.rmax))]
        ids = inner.near(z, 2 * rz + inner.rmax)
        sources.append((inner.points, inner.radii, ids[ids != i]))
        for centers, radii, ids in sources:
            if len(ids) == 0:
                continue
            t_in, t_out = _segment_hits(z, u, t_hi, centers[ids], radii[ids])
            if np.any((t_in <= t_lo) & (t_out > t_lo)):
                return None
            ahead = t_in[t_in > t_lo]
            if len(ahead):
                t_hi = min(t_hi, float(ahead.min()))
        if t_hi <= t_lo * (1 + 1e-12):
            return None
        zp = z + u * (t_lo + rng.random() * (t_hi - t_lo))
        if np.any(zp < lo) or np.any(zp > hi):
            return None
        return zp

    darts(lo, hi)
    if inner_box is not None:
        darts(np.asarray(inner_box[0], dtype=float), np.asarray(inner_box[1], dtype=float))
    queue = collections.deque(range(len(inner.points)))
    while True:
        spokes(queue)
        if len(inner.points) < 2:
            break
        new = lipschitz_fixpoint(inner.points, inner.radii, lipschitz)
        stats.lipschitz_rounds += 1
        changed = np.flatnonzero(new != inner.radii)
        if len(changed) == 0:
            break
        inner.radii = new
        inner.rebuild()
        queue = collections.deque(changed.tolist())  # only shrunk balls free new space
    labels = np.array(labels, dtype=int).reshape(-1)
    keep = np.ones(len(labels), dtype=bool) if keep_exterior else labels == INTERIOR
    n = int(keep.sum())
    out = SeedSet(inner.points[keep].copy(), inner.radii[keep].copy(), labels[keep],
                  np.full(n, VOLUME), np.full((n, 3), -1))
    return out, stats


def interior_seeds_lattice(seeds: SeedSet, balls: BallSet, spacing, lipschitz, lo, hi, label_fn=None):
    """Cubic lattice points of the box strictly outside every ball, labelled interior."""
    if not spacing > 0:
        raise ValueError("lattice spacing must be positive")
    surf = seeds.surface()
    dim = seeds.dim
    if len(surf) == 0:
        return SeedSet.empty(dim)
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    axes = [lo[k] + spacing * np.arange(int(np.floor((hi[k] - lo[k]) / spacing + 1e-9)) + 1) for k in range(dim)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim)
    keep = lattice_filter(grid, surf, balls)
    grid = grid[keep]
    d, k = cKDTree(surf.points).query(grid) if len(grid) else (np.zeros(0), np.zeros(0, int))
    labels = surf.labels[k] if label_fn is None else np.array([label_fn(z) for z in grid], dtype=int)
    grid, d, k = grid[labels == INTERIOR], d[labels == INTERIOR], k[labels == INTERIOR]
    radii = surf.radii[k] + lipschitz * d
    n = len(grid)
    return SeedSet(grid, radii, np.full(n, INTERIOR), np.full(n, VOLUME), np.full((n, 3), -1))


def lattice_filter(points, surf: SeedSet, balls: BallSet):
    """True for points strictly outside all guidance balls and all protection balls."""
    dim = points.shape[1]
    ok = np.ones(len(points), dtype=bool)
    for c, r in ((surf.points, surf.radii), (balls.centers[:, :dim], balls.radii) if balls is not None else (None, None)):
        if c is None or len(c) == 0:
            continue
        hits = cKDTree(c).query_ball_point(points, float(r.max()))
        for i, h in enumerate(hits):
            if h and np.any(np.linalg.norm(c[h] - points[i], axis=1) <= r[h]):
                ok[i] = False
    return ok
