"""Planar meshing: a straight-line graph embedded at z = 0 and protected as a set of creases.

The 3D refinement engine runs unchanged on the embedded graph (corner and
crease phases only). Protection disks are the balls cut by the plane; seed
pairs sit at the two intersection points of consecutive disks along each
crease, and cells come from clipping a rectangle by bisector lines.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .balls import CORNER_BALL, EDGE_BALL
from .features import build_strata
from .params import Parameters
from .refinement import Refiner
from .rng import stream
from .seeding import EXTERIOR, INTERIOR, SURFACE, SeedSet, interior_seeds_lattice, interior_seeds_random
from .voronoi import expanded_box

log = logging.getLogger(__name__)


class PlanarError(ValueError):
    pass


# -- input -------------------------------------------------------------------------


@dataclass
class Pslg:
    vertices: np.ndarray  # (n, 2)
    segments: np.ndarray  # (m, 2) vertex index pairs

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 2)
        self.segments = np.ascontiguousarray(self.segments, dtype=np.int64).reshape(-1, 2)
        if len(self.segments) == 0:
            raise PlanarError("no segments")
        if self.segments.min() < 0 or self.segments.max() >= len(self.vertices):
            raise PlanarError("segment index out of range")
        if not np.all(np.isfinite(self.vertices)):
            raise PlanarError("non-finite vertex coordinates")
        if np.any(self.segments[:, 0] == self.segments[:, 1]):
            raise PlanarError("degenerate segment")
        key = np.sort(self.segments, axis=1)
        if len(np.unique(key, axis=0)) != len(key):
            raise PlanarError("repeated segment")
        bad = crossing_segments(self.vertices, self.segments)
        if bad:
            raise PlanarError("segments %d and %d intersect away from a shared vertex" % bad[0])

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def diagonal(self):
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    def degrees(self):
        return np.bincount(self.segments.reshape(-1), minlength=len(self.vertices))

    def is_closed(self):
        """Every used vertex has even degree, so the segments bound a region."""
        d = self.degrees()
        return bool(np.all(d[d > 0] % 2 == 0))

    def inside(self, points):
        """Even-odd point-in-region test by a horizontal ray (vectorized over segments)."""
        P = np.atleast_2d(points)
        a = self.vertices[self.segments[:, 0]]
        b = self.vertices[self.segments[:, 1]]
        out = np.zeros(len(P), dtype=bool)
        for s in range(0, len(P), 4096):
            x = P[s : s + 4096, None, 0]
            y = P[s : s + 4096, None, 1]
            straddle = (a[None, :, 1] > y) != (b[None, :, 1] > y)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = (y - a[None, :, 1]) / (b[None, :, 1] - a[None, :, 1])
            xc = a[None, :, 0] + t * (b[None, :, 0] - a[None, :, 0])
            out[s : s + 4096] = (np.sum(straddle & (xc > x), axis=1) % 2) == 1
        return out


def _cross2(u, v):
    return u[..., 0] * v[..., 1] - u[..., 1] * v[..., 0]


def crossing_segments(vertices, segments, tol=1e-12):
    """Pairs of segments that meet anywhere other than a shared endpoint."""
    a = vertices[segments[:, 0]]
    b = vertices[segments[:, 1]]
    lo = np.minimum(a, b)
    hi = np.maximum(a, b)
    scale = max(1.0, float(np.abs(vertices).max()))
    out = []
    for i in range(len(segments)):
        j = np.arange(i + 1, len(segments))
        j = j[np.all(lo[j] <= hi[i] + tol * scale, axis=1) & np.all(hi[j] >= lo[i] - tol * scale, axis=1)]
        for k in j:
            shared = set(segments[i].tolist()) & set(segments[k].tolist())
            p, r = a[i], b[i] - a[i]
            q, s = a[k], b[k] - a[k]
            den = _cross2(r, s)
            if abs(den) <= tol * np.linalg.norm(r) * np.linalg.norm(s):
                # parallel: collinear overlap is a crossing unless they only touch at a shared endpoint
                if abs(_cross2(q - p, r)) > tol * scale * np.linalg.norm(r):
                    continue
                rr = r @ r
                t0, t1 = sorted(((q - p) @ r / rr, (q + s - p) @ r / rr))
                overlap = min(t1, 1.0) - max(t0, 0.0)
                if overlap > tol or (overlap >= -tol and not shared):
                    out.append((i, int(k)))
                continue
            t = _cross2(q - p, s) / den
            u = _cross2(q - p, r) / den
            if -tol <= t <= 1 + tol and -tol <= u <= 1 + tol:
                at_end = min(t, 1 - t) <= tol and min(u, 1 - u) <= tol
                if not (shared and at_end):
                    out.append((i, int(k)))
    return out


def read_pslg(text):
    """Parse a straight-line graph.

    Blank lines and ``#`` comments are ignored. The first line gives the
    vertex count, followed by one ``x y`` line per vertex; then a segment
    count and one ``i j`` line per segment. Triangle-style ``.poly`` files,
    where every row starts with an id and headers and rows may carry extra
    fields, are also accepted; the first vertex id sets the index base.
    """
    rows = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            rows.append(line.split())
    try:
        nv = int(rows[0][0])
        vrows = rows[1 : 1 + nv]
        ns = int(rows[1 + nv][0])
        srows = rows[2 + nv : 2 + nv + ns]
    except (IndexError, ValueError) as exc:
        raise PlanarError("malformed graph file") from exc
    if len(vrows) != nv or len(srows) != ns:
        raise PlanarError("malformed graph file: truncated")
    numbered = all(len(r) >= 3 for r in vrows)
    base = int(float(vrows[0][0])) if numbered and vrows else 0
    col = 1 if numbered else 0
    try:
        verts = [[float(r[col]), float(r[col + 1])] for r in vrows]
        segs = [[int(r[col]) - base, int(r[col + 1]) - base] for r in srows]
    except (IndexError, ValueError) as exc:
        raise PlanarError("malformed graph file") from exc
    return Pslg(np.array(verts), np.array(segs))


def load_pslg(path):
    with open(path) as fh:
        return read_pslg(fh.read())


def write_pslg(path, pslg: Pslg):
    with open(path, "w") as fh:
        fh.write("%d\n" % len(pslg.vertices))
        for x, y in pslg.vertices:
            fh.write("%.17g %.17g\n" % (x, y))
        fh.write("%d\n" % len(pslg.segments))
        for i, j in pslg.segments:
            fh.write("%d %d\n" % (i, j))


# -- embedding ---------------------------------------------------------------------


class WireComplex:
    """Segments at z = 0 posing as a triangle-free input complex."""

    def __init__(self, pslg: Pslg):
        self.pslg = pslg
        self.vertices = np.column_stack([pslg.vertices, np.zeros(len(pslg.vertices))])
        self.triangles = np.zeros((0, 3), dtype=np.int64)
        self.edges = np.sort(pslg.segments, axis=1)
        self.face_edges = np.zeros((0, 3), dtype=np.int64)
        self.edge_faces = [np.zeros(0, dtype=np.int64) for _ in range(len(self.edges))]
        self.normals = np.zeros((0, 3))
        self.areas = np.zeros(0)

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def scale(self):
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    def dihedral_angles(self):
        return np.full(len(self.edges), np.nan)

    def euler_characteristic(self):
        used = np.unique(self.edges)
        return len(used) - len(self.edges)


def planar_corners(pslg: Pslg, theta_sharp):
    """Vertices of degree other than two, or where the boundary turns by more than ``theta_sharp``."""
    deg = pslg.degrees()
    flags = (deg != 2) & (deg > 0)
    nbr = [[] for _ in range(len(pslg.vertices))]
    for a, b in pslg.segments:
        nbr[a].append(b)
        nbr[b].append(a)
    for v in np.flatnonzero(deg == 2):
        u = pslg.vertices[nbr[v][0]] - pslg.vertices[v]
        w = pslg.vertices[nbr[v][1]] - pslg.vertices[v]
        cosang = u @ w / (np.linalg.norm(u) * np.linalg.norm(w))
        if math.acos(min(1.0, max(-1.0, cosang))) < math.pi - theta_sharp:
            flags[v] = True
    return flags


def embed(pslg: Pslg, theta_sharp):
    """Strata of the embedded graph: corners and creases, no patches."""
    mesh = WireComplex(pslg)
    flags = planar_corners(pslg, theta_sharp)
    return build_strata(mesh, np.ones(len(mesh.edges), dtype=bool), flags, theta_sharp)


# -- circles and seed pairs --------------------------------------------------------


def crease_order(strata, balls):
    """Per crease, ball ids sorted by arc length, with the end corner balls attached.

    Returns a list of ``(ids, cyclic)``; corner balls appear first and last
    when the crease ends at corners.
    """
    mesh = strata.mesh
    corner_ball = {int(balls.sids[i]): i for i in np.flatnonzero(balls.types == CORNER_BALL)}
    corner_of_vertex = {int(v): k for k, v in enumerate(strata.corners)}
    out = []
    for k, cr in enumerate(strata.creases):
        sid = strata.crease_sid(k)
        pts = mesh.vertices[cr.vertices]
        seg_len = np.linalg.norm(np.diff(pts, axis=0), axis=1)
        start = np.concatenate([[0.0], np.cumsum(seg_len)])
        pos_of_edge = {int(e): j for j, e in enumerate(cr.edges)}
        ids = np.flatnonzero((balls.types == EDGE_BALL) & (balls.sids == sid))
        arc = np.array(
            [start[pos_of_edge[int(balls.faces[i])]] + np.linalg.norm(balls.centers[i] - pts[pos_of_edge[int(balls.faces[i])]])
             for i in ids]
        )
        chain = ids[np.argsort(arc, kind="stable")].tolist()
        if not cr.cycle:
            head = corner_of_vertex.get(int(cr.vertices[0]))
            tail = corner_of_vertex.get(int(cr.vertices[-1]))
            if head is not None and head in corner_ball:
                chain.insert(0, corner_ball[head])
            if tail is not None and tail in corner_ball:
                chain.append(corner_ball[tail])
        elif int(cr.vertices[0]) in corner_of_vertex:
            c = corner_ball.get(corner_of_vertex[int(cr.vertices[0])])
            if c is not None:
                chain.insert(0, c)
        out.append((chain, bool(cr.cycle)))
    return out


def consecutive_pairs(order):
    pairs = []
    for chain, cyclic in order:
        for a, b in zip(chain[:-1], chain[1:]):
            pairs.append((a, b))
        if cyclic and len(chain) > 2:
            pairs.append((chain[-1], chain[0]))
    return pairs


def circle_overlaps(centers, radii):
    """All pairs of overlapping disks (strictly intersecting interiors)."""
    if len(centers) < 2:
        return set()
    tree = cKDTree(centers)
    cand = tree.query_pairs(2 * float(radii.max()))
    return {(min(a, b), max(a, b)) for a, b in cand if np.linalg.norm(centers[a] - centers[b]) < radii[a] + radii[b]}


def nonconsecutive_overlaps(strata, balls):
    """Overlapping disk pairs that are not neighbors along a crease."""
    allowed = {(min(a, b), max(a, b)) for a, b in consecutive_pairs(crease_order(strata, balls))}
    c = balls.centers[:, :2]
    return sorted(circle_overlaps(c, balls.radii) - allowed)


def separate_nonconsecutive(refiner, max_iterations=100):
    """Shrink disks until only crease neighbors overlap, refilling coverage after each pass.

    Crease balls may sit as close as ``(1 - alpha) r`` apart, so a ball can
    reach past its neighbor. Each offending pair loses radius on its larger
    disk until the two are disjoint; refinement then restores coverage.
    Returns the number of passes.
    """
    strata, balls = refiner.strata, refiner.balls
    for it in range(max_iterations + 1):
        bad = nonconsecutive_overlaps(strata, balls)
        if not bad:
            return it
        if it == max_iterations:
            break
        mark = len(balls.shrinks)
        for a, b in bad:
            d = float(np.linalg.norm(balls.centers[a] - balls.centers[b]))
            ra, rb = balls.radii[a], balls.radii[b]
            excess = ra + rb - d
            if excess <= 0:
                continue  # an earlier shrink in this pass already separated them
            big = a if (ra, -a) > (rb, -b) else b
            balls.shrink(big, (balls.radii[big] - excess) - 1e-9 * d, "separation-2d")
        for t in range(2):
            refiner.enforce_lipschitz(t)
        dirty = set()
        refiner.mark_dirty(balls.shrinks[mark:], dirty)
        refiner.run(dirty)
        balls = refiner.balls
    raise PlanarError("non-consecutive disk overlaps persist after %d passes" % max_iterations)


def circle_intersections(c0, r0, c1, r1):
    """Both intersection points of two circles, ordered left then right of ``c0 -> c1``."""
    d = c1 - c0
    L = float(np.linalg.norm(d))
    if L == 0 or L >= r0 + r1 or L <= abs(r0 - r1):
        return None
    a = (r0 * r0 - r1 * r1 + L * L) / (2 * L)
    h = math.sqrt(max(r0 * r0 - a * a, 0.0))
    u = d / L
    m = c0 + a * u
    n = np.array([-u[1], u[0]])
    return m + h * n, m - h * n


def planar_surface_seeds(strata, balls, pslg: Pslg):
    """Seed pairs at consecutive-disk intersections, labelled by point-in-region parity."""
    order = crease_order(strata, balls)
    pts, rad, trip = [], [], []
    c2 = balls.centers[:, :2]
    for a, b in consecutive_pairs(order):
        got = circle_intersections(c2[a], balls.radii[a], c2[b], balls.radii[b])
        if got is None:
            continue
        for p in got:
            pts.append(p)
            rad.append(0.5 * (balls.radii[a] + balls.radii[b]))
            trip.append((a, b, -1))
    if not pts:
        return SeedSet.empty(2)
    pts = np.array(pts)
    labels = np.where(pslg.inside(pts), INTERIOR, EXTERIOR)
    return SeedSet(pts, np.array(rad), labels, np.full(len(pts), SURFACE), np.array(trip, dtype=np.int64))


# -- cells ---------------------------------------------------------------------------


@dataclass
class PlanarCell:
    seed: int
    vertices: np.ndarray  # counter-clockwise
    tags: np.ndarray  # per edge i -> i+1: neighbor seed or -1 for the box

    @property
    def area(self):
        v = self.vertices
        return 0.5 * float(np.sum(_cross2(v, np.roll(v, -1, axis=0))))

    def edges(self):
        v = self.vertices
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)


def clip_polygon(verts, tags, n, o, tag, eps=0.0):
    """Keep the part with ``n . x <= o``; new edge along the line gets ``tag``."""
    s = verts @ n - o
    if np.all(s <= eps):
        return verts, tags
    if np.all(s > -eps):
        return None, None
    out_v, out_t = [], []
    m = len(verts)
    for i in range(m):
        j = (i + 1) % m
        si, sj = s[i], s[j]
        if si <= eps:
            out_v.append(verts[i])
            if sj <= eps:
                out_t.append(tags[i])
            else:
                t = si / (si - sj)
                out_t.append(tags[i])
                out_v.append(verts[i] + t * (verts[j] - verts[i]))
                out_t.append(tag)
        elif sj <= eps:
            t = si / (si - sj)
            out_v.append(verts[i] + t * (verts[j] - verts[i]))
            out_t.append(tags[i])
    v = np.array(out_v)
    t = np.array(out_t, dtype=np.int64)
    keep = np.linalg.norm(v - np.roll(v, -1, axis=0), axis=1) > eps
    if keep.sum() < 3:
        return None, None
    return v[keep], t[keep]


def _box(lo, hi):
    return np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]], float), np.full(4, -1)


def _bisector(p, q):
    n = q - p
    return n, 0.5 * float(n @ (p + q))


def compute_cells_2d(points, lo, hi):
    """Convex cell per seed, neighbors visited by distance until none can cut (security radius)."""
    points = np.asarray(points, dtype=float)
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    scale = float(np.linalg.norm(hi - lo))
    tree = cKDTree(points)
    if len(points) > 1 and tree.query(points, k=2)[0][:, 1].min() < 1e-12 * scale:
        raise PlanarError("duplicate seeds")
    eps = 1e-12 * max(1.0, float(np.abs(np.concatenate([lo, hi])).max()))
    cells = []
    n = len(points)
    for i, p in enumerate(points):
        v, t = _box(lo, hi)
        k, done = min(16, n), 1
        finished = False
        while not finished:
            dist, idx = tree.query(p, k=k)
            dist, idx = np.atleast_1d(dist), np.atleast_1d(idx)
            for d, j in zip(dist[done:], idx[done:]):
                reach = float(np.sqrt(np.max(np.sum((v - p) ** 2, axis=1))))
                if d > 2.0 * reach:
                    finished = True
                    break
                nrm, off = _bisector(p, points[j])
                v, t = clip_polygon(v, t, nrm, off, int(j), eps * float(np.linalg.norm(nrm)))
                if v is None:
                    raise PlanarError("empty cell for seed %d" % i)
            done = len(idx)
            if k >= n:
                break
            k = min(2 * k, n)
        cells.append(PlanarCell(i, v, t))
    return cells


def brute_force_cells_2d(points, lo, hi):
    points = np.asarray(points, dtype=float)
    out = []
    for i, p in enumerate(points):
        v, t = _box(np.asarray(lo, float), np.asarray(hi, float))
        for j, q in enumerate(points):
            if j != i:
                nrm, off = _bisector(p, q)
                v, t = clip_polygon(v, t, nrm, off, j)
        out.append(PlanarCell(i, v, t))
    return out


def non_convex_cells_2d(cells, scale=1.0, tol=1e-9):
    """Cells with a reflex turn or clockwise orientation beyond ``tol * scale``."""
    bad = 0
    for c in cells:
        v = c.vertices
        e = np.roll(v, -1, axis=0) - v
        turn = _cross2(e, np.roll(e, -1, axis=0)) / np.maximum(
            np.linalg.norm(e, axis=1) * np.linalg.norm(np.roll(e, -1, axis=0), axis=1), 1e-300
        )
        if np.any(turn < -tol * scale) or c.area <= 0:
            bad += 1
    return bad


def boundary_edges(cells, labels):
    """Cell edges separating an interior seed from an exterior one, each emitted once."""
    labels = np.asarray(labels)
    out, pairs = [], []
    for c in cells:
        if labels[c.seed] != INTERIOR:
            continue
        for e, j in zip(c.edges(), c.tags):
            if j >= 0 and labels[j] != INTERIOR:
                out.append(e)
                pairs.append((c.seed, int(j)))
    return np.array(out).reshape(-1, 2, 2), np.array(pairs, dtype=np.int64).reshape(-1, 2)


def _point_segments_distance(X, a, b, block=2048):
    out = np.empty(len(X))
    ab = b - a
    ll = np.maximum(np.einsum("ij,ij->i", ab, ab), 1e-300)
    for s in range(0, len(X), block):
        x = X[s : s + block, None, :]
        t = np.clip(np.einsum("kij,ij->ki", x - a[None], ab) / ll, 0.0, 1.0)
        q = a[None] + t[..., None] * ab[None]
        out[s : s + block] = np.sqrt(np.min(np.sum((x - q) ** 2, axis=2), axis=1))
    return out


def polyline_hausdorff(segs_a, segs_b, n, rng):
    """Symmetric Hausdorff distance between two segment soups from ``n`` length-uniform samples per side."""

    def sample(segs):
        ln = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1)
        k = rng.choice(len(segs), size=n, p=ln / ln.sum())
        t = rng.random(n)[:, None]
        return np.concatenate([segs[k, 0] + t * (segs[k, 1] - segs[k, 0]), segs.reshape(-1, 2)])

    xa, xb = sample(segs_a), sample(segs_b)
    return max(
        float(_point_segments_distance(xa, segs_b[:, 0], segs_b[:, 1]).max()),
        float(_point_segments_distance(xb, segs_a[:, 0], segs_a[:, 1]).max()),
    )


# -- driver --------------------------------------------------------------------------


@dataclass
class PlanarResult:
    pslg: Pslg
    strata: object
    refiner: object
    seeds: SeedSet
    cells: list
    box: tuple
    report: dict = field(default_factory=dict)

    @property
    def balls(self):
        return self.refiner.balls


def mesh_2d(pslg: Pslg, params: Parameters, interior="random", n_hausdorff=10**4):
    """Protect, seed and mesh a planar straight-line graph; returns a :class:`PlanarResult`."""
    from .pipeline import parse_interior

    mode, spacing = parse_interior(interior)
    if mode != "none" and not pslg.is_closed():
        raise PlanarError("unbounded interior")
    timings = {}
    t0 = time.perf_counter()
    strata = embed(pslg, params.theta_sharp)
    refiner = Refiner(strata, params)
    refiner.rmps()
    passes = separate_nonconsecutive(refiner)
    balls = refiner.balls
    bad = nonconsecutive_overlaps(strata, balls)
    if bad:
        raise PlanarError("disks %d and %d overlap without being consecutive along a crease" % bad[0])
    seeds = planar_surface_seeds(strata, balls, pslg)
    timings["surface"] = time.perf_counter() - t0
    lo, hi = expanded_box(*pslg.bbox)
    t1 = time.perf_counter()
    inside = lambda z: int(pslg.inside(z[None])[0])  # noqa: E731
    if mode == "random":
        vol, _ = interior_seeds_random(seeds, balls, params.lipschitz, stream(params.rng_seed, "interior-2d"), lo, hi,
                                       label_fn=inside, inner_box=pslg.bbox)
        seeds = seeds.extend(vol)
    elif mode == "lattice":
        vol = interior_seeds_lattice(seeds, balls, spacing, params.lipschitz, *pslg.bbox, label_fn=inside)
        seeds = seeds.extend(vol)
    timings["volume"] = time.perf_counter() - t1
    t2 = time.perf_counter()
    cells = compute_cells_2d(seeds.points, lo, hi)
    timings["cells"] = time.perf_counter() - t2
    res = PlanarResult(pslg, strata, refiner, seeds, cells, (lo, hi))
    res.report = planar_report(res, n_hausdorff, stream(params.rng_seed, "hausdorff-2d"))
    res.report["separation_passes"] = passes
    res.report["timings"] = timings
    res.report["parameters"] = params.to_dict()
    return res


def planar_report(res: PlanarResult, n_hausdorff=10**4, rng=None):
    rng = np.random.default_rng(0) if rng is None else rng
    lo, hi = res.box
    box_area = float(np.prod(hi - lo))
    total = float(sum(c.area for c in res.cells))
    segs, _ = boundary_edges(res.cells, res.seeds.labels)
    pv = res.pslg.vertices
    input_segs = np.stack([pv[res.pslg.segments[:, 0]], pv[res.pslg.segments[:, 1]]], axis=1)
    d_h = polyline_hausdorff(segs, input_segs, n_hausdorff, rng) / res.pslg.diagonal if len(segs) else None
    lengths = np.linalg.norm(segs[:, 1] - segs[:, 0], axis=1) if len(segs) else np.zeros(0)
    b = res.balls
    return {
        "balls": int(b.n),
        "corners": int(res.strata.n_corners),
        "creases": int(res.strata.n_creases),
        "n_surface_seeds": int(np.sum(res.seeds.kinds == SURFACE)),
        "n_volume_seeds": int(np.sum(res.seeds.kinds != SURFACE)),
        "non_convex_cells": non_convex_cells_2d(res.cells),
        "area_relative_error": abs(total - box_area) / box_area,
        "hausdorff": d_h,
        "boundary_edges": int(len(segs)),
        "edge_length_ratio": float(lengths.min() / lengths.max()) if len(lengths) else None,
    }


def write_svg(path, res: PlanarResult, size=800):
    """Cells filled by label, the input graph in black and seeds as dots."""
    lo, hi = res.pslg.bbox
    pad = 0.1 * (hi - lo).max()
    lo, hi = lo - pad, hi + pad
    s = size / float((hi - lo).max())

    def xy(p):
        return "%.6f,%.6f" % ((p[0] - lo[0]) * s, (hi[1] - p[1]) * s)

    w, h = (hi - lo) * s
    parts = ['<svg xmlns="http://www.w3.org/2000/svg" width="%.0f" height="%.0f">' % (w, h)]
    for c in res.cells:
        fill = "#9ecae1" if res.seeds.labels[c.seed] == INTERIOR else "#f0f0f0"
        parts.append('<polygon points="%s" fill="%s" stroke="#555" stroke-width="0.5"/>' % (" ".join(xy(p) for p in c.vertices), fill))
    v = res.pslg.vertices
    for a, b in res.pslg.segments:
        parts.append('<polyline points="%s %s" stroke="black" stroke-width="1.5" fill="none"/>' % (xy(v[a]), xy(v[b])))
    for p, k in zip(res.seeds.points, res.seeds.kinds):
        parts.append('<circle cx="%s" cy="%s" r="1.5" fill="%s"/>' % (*xy(p).split(","), "#d62728" if k == SURFACE else "#2ca02c"))
    parts.append("</svg>\n")
    with open(path, "w") as fh:
        fh.write("\n".join(parts))
