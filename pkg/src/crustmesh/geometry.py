"""Geometric kernel: distances, sphere triplets, convex polyhedra and element quality.

Everything here works in model units. Tolerances are passed in explicitly by
callers; the defaults are relative to the magnitudes of the inputs.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

SQRT3 = np.sqrt(3.0)


class GeometryError(ValueError):
    """Raised for degenerate geometric configurations."""


# ---------------------------------------------------------------------------
# small vector helpers


def norm(v):
    return np.sqrt(np.einsum("...i,...i->...", v, v))


def unit(v):
    v = np.asarray(v, dtype=float)
    n = norm(v)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = v / np.expand_dims(n, -1)
    return np.where(np.expand_dims(n, -1) > 0, out, 0.0)


def angle_between(a, b):
    """Unsigned angle in radians between vectors (broadcasts over leading axes)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    cross = np.cross(a, b)
    return np.arctan2(norm(cross), np.einsum("...i,...i->...", a, b))


# ---------------------------------------------------------------------------
# triangle quality


def triangle_quality(a, b, c) -> float:
    """Return 6S / (sqrt(3) h P): 1 for equilateral, 0 for degenerate triangles."""
    q = triangle_quality_many(np.array([[a, b, c]], dtype=float))
    return float(q[0])


def triangle_quality_many(tris):
    """Vectorized quality for an ``(m, 3, 3)`` array of triangles."""
    tris = np.asarray(tris, dtype=float)
    e0 = norm(tris[:, 1] - tris[:, 0])
    e1 = norm(tris[:, 2] - tris[:, 1])
    e2 = norm(tris[:, 0] - tris[:, 2])
    area = 0.5 * norm(np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]))
    h = np.maximum(np.maximum(e0, e1), e2)
    half_perim = 0.5 * (e0 + e1 + e2)
    denom = SQRT3 * h * half_perim
    with np.errstate(invalid="ignore", divide="ignore"):
        q = 6.0 * area / denom
    q = np.where(denom > 0, q, 0.0)
    return np.clip(q, 0.0, 1.0)


def triangle_angles_many(tris):
    """Interior angles (radians) of an ``(m, 3, 3)`` triangle array, shape ``(m, 3)``."""
    tris = np.asarray(tris, dtype=float)
    out = np.empty(tris.shape[:2])
    for k in range(3):
        p = tris[:, k]
        out[:, k] = angle_between(tris[:, (k + 1) % 3] - p, tris[:, (k + 2) % 3] - p)
    return out


def triangle_areas(tris):
    tris = np.asarray(tris, dtype=float)
    return 0.5 * norm(np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0]))


# ---------------------------------------------------------------------------
# point-simplex distances


def closest_points_segments(p, a, b):
    """Closest points on segments ``[a, b]`` to points ``p`` (all ``(m, 3)``)."""
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    ab = b - a
    ll = np.einsum("...i,...i->...", ab, ab)
    with np.errstate(invalid="ignore", divide="ignore"):
        t = np.einsum("...i,...i->...", p - a, ab) / ll
    t = np.where(ll > 0, np.clip(t, 0.0, 1.0), 0.0)
    return a + ab * t[..., None]


def distance_point_segment(p, seg):
    """Distance from ``p`` to the segment ``seg = (a, b)`` and the closest point."""
    a, b = np.asarray(seg[0], dtype=float), np.asarray(seg[1], dtype=float)
    q = closest_points_segments(np.asarray(p, float)[None], a[None], b[None])[0]
    return float(norm(np.asarray(p, float) - q)), q


def closest_points_triangles(p, a, b, c):
    """Closest points on triangles ``(a, b, c)`` to points ``p``.

    Vectorized region test (vertex, edge, face regions). Degenerate triangles
    fall back to the closest of their three edges.
    """
    p, a, b, c = (np.atleast_2d(np.asarray(x, dtype=float)) for x in (p, a, b, c))
    p, a, b, c = np.broadcast_arrays(p, a, b, c)
    dot = lambda u, v: np.einsum("ij,ij->i", u, v)  # noqa: E731
    ab = b - a
    ac = c - a
    ap = p - a
    d1, d2 = dot(ab, ap), dot(ac, ap)
    bp = p - b
    d3, d4 = dot(ab, bp), dot(ac, bp)
    cp = p - c
    d5, d6 = dot(ab, cp), dot(ac, cp)
    vc = d1 * d4 - d3 * d2
    vb = d5 * d2 - d1 * d6
    va = d3 * d6 - d5 * d4

    res = np.empty_like(p)
    done = np.zeros(len(p), dtype=bool)

    def put(mask, value):
        nonlocal done
        mask = mask & ~done
        res[mask] = value[mask]
        done |= mask

    with np.errstate(invalid="ignore", divide="ignore"):
        put((d1 <= 0) & (d2 <= 0), a)
        put((d3 >= 0) & (d4 <= d3), b)
        put((d6 >= 0) & (d5 <= d6), c)
        v = d1 / (d1 - d3)
        put((vc <= 0) & (d1 >= 0) & (d3 <= 0), a + ab * v[:, None])
        w = d2 / (d2 - d6)
        put((vb <= 0) & (d2 >= 0) & (d6 <= 0), a + ac * w[:, None])
        w = (d4 - d3) / ((d4 - d3) + (d5 - d6))
        put((va <= 0) & ((d4 - d3) >= 0) & ((d5 - d6) >= 0), b + (c - b) * w[:, None])
        denom = va + vb + vc
        v = vb / denom
        w = vc / denom
        put(np.ones(len(p), dtype=bool), a + ab * v[:, None] + ac * w[:, None])

    bad = ~np.all(np.isfinite(res), axis=1)
    area2 = norm(np.cross(ab, ac))
    scale2 = np.maximum(dot(ab, ab), dot(ac, ac))
    bad |= area2 <= 1e-14 * scale2
    if bad.any():
        cands = [
            closest_points_segments(p[bad], a[bad], b[bad]),
            closest_points_segments(p[bad], b[bad], c[bad]),
            closest_points_segments(p[bad], c[bad], a[bad]),
        ]
        dists = np.stack([norm(p[bad] - q) for q in cands])
        pick = np.argmin(dists, axis=0)
        res[bad] = np.stack(cands)[pick, np.arange(bad.sum())]
    return res


def distance_point_triangle(p, tri):
    """Distance from ``p`` to triangle ``tri = (a, b, c)`` and the closest point."""
    tri = np.asarray(tri, dtype=float)
    p = np.asarray(p, dtype=float)
    q = closest_points_triangles(p[None], tri[0][None], tri[1][None], tri[2][None])[0]
    return float(norm(p - q)), q


# ---------------------------------------------------------------------------
# spheres


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise GeometryError("sphere radius must be positive")


def triplet_points_many(centers, radii, tangent_tol=1e-10):
    """Intersections of the bounding spheres of many ball triplets.

    Parameters
    ----------
    centers : (m, 3, 3) array
    radii : (m, 3) array

    Returns
    -------
    up, down : (m, 3) arrays
        ``c0 + h n`` and ``c0 - h n`` with ``n`` the unit normal of
        ``(c2 - c1) x (c3 - c1)``.
    count : (m,) int array
        0, 1 or 2 intersection points; -1 for collinear centers.
    """
    centers = np.asarray(centers, dtype=float)
    radii = np.asarray(radii, dtype=float)
    c1 = centers[:, 0]
    e = centers[:, 1] - c1
    f = centers[:, 2] - c1
    n = np.cross(e, f)
    nn = norm(n)
    ee = np.einsum("ij,ij->i", e, e)
    ff = np.einsum("ij,ij->i", f, f)
    ef = np.einsum("ij,ij->i", e, f)
    degenerate = nn <= 1e-12 * np.maximum(ee, ff)
    r1s = radii[:, 0] ** 2
    k1 = 0.5 * (r1s - radii[:, 1] ** 2 + ee)
    k2 = 0.5 * (r1s - radii[:, 2] ** 2 + ff)
    det = ee * ff - ef * ef
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = (k1 * ff - k2 * ef) / det
        mu = (k2 * ee - k1 * ef) / det
        x0 = c1 + lam[:, None] * e + mu[:, None] * f
        d = x0 - c1
        h2 = r1s - np.einsum("ij,ij->i", d, d)
        nhat = n / nn[:, None]
    rmax = radii.max(axis=1)
    h = np.sqrt(np.maximum(h2, 0.0))
    count = np.where(h2 < 0, 0, 2)
    count = np.where((h2 >= 0) & (h <= tangent_tol * rmax), 1, count)
    # slightly negative h2 from roundoff on a tangent configuration
    count = np.where((h2 < 0) & (np.sqrt(np.maximum(-h2, 0)) <= tangent_tol * rmax), 1, count)
    count = np.where(degenerate, -1, count)
    h = np.where(count == 1, 0.0, h)
    up = x0 + h[:, None] * nhat
    down = x0 - h[:, None] * nhat
    return up, down, count


def sphere_triplet_points(s1: Sphere, s2: Sphere, s3: Sphere, tangent_tol=1e-10):
    """Intersection points of three spheres: a list of zero, one or two points.

    Two points come back as ``[up, down]`` where ``up`` lies on the side of
    ``(c2 - c1) x (c3 - c1)``.
    """
    centers = np.array([[s1.center, s2.center, s3.center]])
    radii = np.array([[s1.radius, s2.radius, s3.radius]])
    up, down, count = triplet_points_many(centers, radii, tangent_tol)
    if count[0] < 0:
        raise GeometryError("degenerate triplet")
    if count[0] == 0:
        return []
    if count[0] == 1:
        return [up[0]]
    return [up[0], down[0]]


# ---------------------------------------------------------------------------
# planes and convex polyhedra


@dataclass(frozen=True)
class Plane:
    """Half-space ``normal . x <= offset`` with a unit normal."""

    normal: np.ndarray
    offset: float
    tag: int = -1

    def __post_init__(self):
        n = np.asarray(self.normal, dtype=float)
        length = float(norm(n))
        if length == 0:
            raise GeometryError("plane normal must be non-zero")
        object.__setattr__(self, "normal", n / length)
        object.__setattr__(self, "offset", float(self.offset) / length)

    @classmethod
    def bisector(cls, a, b, tag=-1):
        """Half-space of points closer to ``a`` than to ``b``."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        n = b - a
        return cls(n, float(n @ (0.5 * (a + b))), tag)

    def signed_distance(self, x):
        return np.asarray(x, dtype=float) @ self.normal - self.offset


BOX_TAG = -1


@dataclass
class ConvexPolyhedron:
    """Closed convex polyhedron.

    ``faces`` hold vertex indices counter-clockwise seen from outside;
    ``tags`` hold one neighbor id per face (negative for bounding-box faces).
    """

    vertices: np.ndarray
    faces: list
    tags: list = field(default_factory=list)

    def __post_init__(self):
        self.vertices = np.asarray(self.vertices, dtype=float).reshape(-1, 3)
        if not self.tags:
            self.tags = [BOX_TAG] * len(self.faces)

    @classmethod
    def box(cls, lo, hi, tag=BOX_TAG):
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        v = np.array(
            [
                [lo[0], lo[1], lo[2]],
                [hi[0], lo[1], lo[2]],
                [hi[0], hi[1], lo[2]],
                [lo[0], hi[1], lo[2]],
                [lo[0], lo[1], hi[2]],
                [hi[0], lo[1], hi[2]],
                [hi[0], hi[1], hi[2]],
                [lo[0], hi[1], hi[2]],
            ]
        )
        faces = [
            [0, 3, 2, 1],
            [4, 5, 6, 7],
            [0, 1, 5, 4],
            [2, 3, 7, 6],
            [1, 2, 6, 5],
            [0, 4, 7, 3],
        ]
        return cls(v, faces, [tag] * 6)

    # -- measures -----------------------------------------------------------

    def face_normals(self):
        """Unit outward normals by Newell's method."""
        out = np.zeros((len(self.faces), 3))
        for k, f in enumerate(self.faces):
            p = self.vertices[f]
            q = np.roll(p, -1, axis=0)
            out[k] = np.sum(np.cross(p, q), axis=0)
        return unit(out)

    def face_planes(self):
        normals = self.face_normals()
        offsets = np.array(
            [normals[k] @ self.vertices[f].mean(axis=0) for k, f in enumerate(self.faces)]
        )
        return normals, offsets

    def volume(self):
        ref = self.vertices.mean(axis=0)
        vol = 0.0
        for f in self.faces:
            p = self.vertices[f] - ref
            for k in range(1, len(f) - 1):
                vol += np.dot(p[0], np.cross(p[k], p[k + 1]))
        return vol / 6.0

    def diameter(self):
        v = self.vertices
        if len(v) < 2:
            return 0.0
        d = v[:, None, :] - v[None, :, :]
        return float(np.sqrt(np.max(np.einsum("ijk,ijk->ij", d, d))))

    def edges(self):
        """Undirected edges as a set of sorted index pairs."""
        out = set()
        for f in self.faces:
            for k in range(len(f)):
                i, j = f[k], f[(k + 1) % len(f)]
                out.add((i, j) if i < j else (j, i))
        return out

    def is_closed(self):
        directed = {}
        for f in self.faces:
            for k in range(len(f)):
                e = (f[k], f[(k + 1) % len(f)])
                directed[e] = directed.get(e, 0) + 1
        return all(c == 1 and directed.get((e[1], e[0]), 0) == 1 for e, c in directed.items())

    def max_convexity_violation(self):
        """Largest signed distance of any vertex above any face plane."""
        if not self.faces:
            return 0.0
        normals, offsets = self.face_planes()
        s = self.vertices @ normals.T - offsets[None, :]
        return float(s.max())

    # -- clipping -------------------------------------------------------------

    def clip(self, plane: Plane, eps=None):
        """Intersect with ``plane``; returns a new polyhedron, ``self`` or None.

        Vertices within ``eps`` of the plane count as lying on it.
        """
        if eps is None:
            eps = 1e-12 * max(1.0, float(np.abs(self.vertices).max()))
        s = self.vertices @ plane.normal - plane.offset
        if s.max() <= eps:
            return self
        if s.min() >= -eps:
            return None
        s_list = s.tolist()
        out = [x > eps for x in s_list]
        on = [abs(x) <= eps for x in s_list]
        verts = self.vertices
        new_points = []
        n_old = len(verts)
        cut_index = {}
        new_faces = []
        new_tags = []
        for f, tag in zip(self.faces, self.tags):
            if all(on[i] for i in f):
                continue
            poly = []
            m = len(f)
            for k in range(m):
                i = f[k]
                j = f[(k + 1) % m]
                if not out[i]:
                    poly.append(i)
                si = s_list[i]
                sj = s_list[j]
                if (si < -eps and sj > eps) or (si > eps and sj < -eps):
                    key = (i, j) if i < j else (j, i)
                    idx = cut_index.get(key)
                    if idx is None:
                        a, b = key
                        sa, sb = s_list[a], s_list[b]
                        t = sa / (sa - sb)
                        new_points.append(verts[a] + t * (verts[b] - verts[a]))
                        idx = n_old + len(new_points) - 1
                        cut_index[key] = idx
                    poly.append(idx)
            if len(poly) >= 3:
                new_faces.append(poly)
                new_tags.append(tag)
        if not new_faces:
            return None
        cap = _cap_cycle(new_faces)
        if cap is None:
            return None
        if len(cap) >= 3:
            new_faces.append(cap)
            new_tags.append(plane.tag)
        all_verts = np.vstack([verts] + [np.asarray(new_points).reshape(-1, 3)]) if new_points else verts
        return _compact(all_verts, new_faces, new_tags)

    def clip_all(self, planes, eps=None):
        cell = self
        for pl in planes:
            cell = cell.clip(pl, eps)
            if cell is None:
                return None
        return cell

    def copy(self):
        return ConvexPolyhedron(self.vertices.copy(), [list(f) for f in self.faces], list(self.tags))


def _cap_cycle(faces):
    """Chain the boundary left open by removed faces into one closing polygon."""
    directed = set()
    for f in faces:
        m = len(f)
        for k in range(m):
            directed.add((f[k], f[(k + 1) % m]))
    nxt = {}
    for a, b in directed:
        if (b, a) not in directed:
            if b in nxt:
                return _cap_fallback(faces, directed)
            nxt[b] = a
    if not nxt:
        return []
    start = min(nxt)
    cycle = [start]
    cur = nxt[start]
    while cur != start:
        cycle.append(cur)
        cur = nxt.get(cur)
        if cur is None or len(cycle) > len(nxt):
            return _cap_fallback(faces, directed)
    if len(cycle) != len(nxt):
        return _cap_fallback(faces, directed)
    return cycle


def _cap_fallback(faces, directed):
    # Unexpected topology from roundoff; signal failure so callers drop the cell piece.
    return None


def _compact(verts, faces, tags):
    used = sorted({i for f in faces for i in f})
    remap = {old: new for new, old in enumerate(used)}
    faces = [[remap[i] for i in f] for f in faces]
    return ConvexPolyhedron(verts[used], faces, tags)


# ---------------------------------------------------------------------------
# enclosing / inscribed spheres


def _sphere_from(points):
    """Smallest sphere having all given (1..4) points on its boundary."""
    p = np.asarray(points, dtype=float)
    k = len(p)
    if k == 1:
        return p[0].copy(), 0.0
    if k == 2:
        c = 0.5 * (p[0] + p[1])
        return c, float(norm(p[0] - c))
    a = p[0]
    rows = p[1:] - a
    if k == 3:
        u, v = rows
        n = np.cross(u, v)
        nn = n @ n
        if nn <= 1e-24 * max(u @ u, v @ v) ** 2:
            return None
        c = a + (np.cross(n, u) * (v @ v) + np.cross(v, n) * (u @ u)) / (2.0 * nn)
        return c, float(norm(p[0] - c))
    m = 2.0 * rows
    rhs = np.einsum("ij,ij->i", rows, rows)
    det = np.linalg.det(m)
    if abs(det) <= 1e-14 * np.abs(m).max() ** 3:
        return None
    x = np.linalg.solve(m, rhs)
    c = a + x
    return c, float(norm(p[0] - c))


def min_enclosing_sphere(points, rng=None):
    """Minimum enclosing sphere (randomized incremental, Welzl style)."""
    pts = np.asarray(points, dtype=float)
    if len(pts) == 0:
        raise GeometryError("no points")
    rng = np.random.default_rng(0) if rng is None else rng
    pts = pts[rng.permutation(len(pts))]
    scale = max(1.0, float(np.abs(pts).max()))
    tol = 1e-12 * scale

    def outside(c, r, x):
        return norm(x - c) > r + tol

    def best_of(cands, support):
        # degenerate support: fall back to smallest valid sphere through subsets
        best = None
        for sub in cands:
            s = _sphere_from(sub)
            if s is None:
                continue
            if all(not outside(s[0], s[1], q) for q in support):
                if best is None or s[1] < best[1]:
                    best = s
        return best

    c, r = pts[0].copy(), 0.0
    for i in range(1, len(pts)):
        if not outside(c, r, pts[i]):
            continue
        c, r = pts[i].copy(), 0.0
        for j in range(i):
            if not outside(c, r, pts[j]):
                continue
            c, r = _sphere_from([pts[i], pts[j]])
            for k in range(j):
                if not outside(c, r, pts[k]):
                    continue
                s = _sphere_from([pts[i], pts[j], pts[k]])
                if s is None:
                    s = best_of(
                        [[pts[i], pts[j]], [pts[i], pts[k]], [pts[j], pts[k]]],
                        [pts[i], pts[j], pts[k]],
                    )
                c, r = s
                for m in range(k):
                    if not outside(c, r, pts[m]):
                        continue
                    s = _sphere_from([pts[i], pts[j], pts[k], pts[m]])
                    quad = [pts[i], pts[j], pts[k], pts[m]]
                    if s is None or any(outside(s[0], s[1], q) for q in quad):
                        subs = [
                            [quad[a], quad[b], quad[d]]
                            for a, b, d in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3))
                        ]
                        subs += [[quad[a], quad[b]] for a in range(4) for b in range(a + 1, 4)]
                        s = best_of(subs, quad)
                    c, r = s
    return c, r


def inscribed_sphere(normals, offsets):
    """Chebyshev center of ``{x : n_i . x <= d_i}`` with unit normals.

    Returns ``(center, radius)``; radius is the largest inscribed ball.
    """
    normals = np.asarray(normals, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    a_ub = np.hstack([normals, np.ones((len(normals), 1))])
    res = linprog(
        c=[0.0, 0.0, 0.0, -1.0],
        A_ub=a_ub,
        b_ub=offsets,
        bounds=[(None, None)] * 3 + [(0, None)],
        method="highs",
    )
    if res.status != 0:
        raise GeometryError("degenerate cell")
    return res.x[:3], float(res.x[3])


def aspect_ratio(cell: ConvexPolyhedron) -> float:
    """Circumscribing over inscribed radius of a closed convex cell."""
    if len(cell.faces) < 4 or len(cell.vertices) < 4:
        raise GeometryError("degenerate cell")
    _, big = min_enclosing_sphere(cell.vertices)
    normals, offsets = cell.face_planes()
    _, small = inscribed_sphere(normals, offsets)
    if small <= 1e-12 * max(big, 1e-300):
        raise GeometryError("degenerate cell")
    return big / small


def clip(cell: ConvexPolyhedron, plane: Plane, eps=None):
    """Functional form of :meth:`ConvexPolyhedron.clip`; None means empty."""
    return cell.clip(plane, eps)
