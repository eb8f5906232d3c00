"""Unclipped Voronoi cells by bisector clipping, and the conforming surface between them."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .geometry import BOX_TAG, ConvexPolyhedron, GeometryError, Plane

log = logging.getLogger(__name__)


class VoronoiError(RuntimeError):
    pass


@dataclass
class VoronoiCell:
    seed: int
    poly: ConvexPolyhedron
    site: np.ndarray = None
    box: tuple = None

    @property
    def neighbors(self):
        return self.poly.tags

    def defining_planes(self, points):
        """Exact face planes: bisectors for seed faces, box planes for box faces.

        Newell normals of needle-thin faces near degenerate Voronoi vertices
        are unreliable; the planes that produced the faces are not.
        """
        normals = np.zeros((len(self.poly.faces), 3))
        offsets = np.zeros(len(self.poly.faces))
        lo, hi = self.box
        for k, (f, j) in enumerate(zip(self.poly.faces, self.poly.tags)):
            if j >= 0:
                pl = Plane.bisector(self.site, points[j])
                normals[k], offsets[k] = pl.normal, pl.offset
                continue
            v = self.poly.vertices[f]
            for ax in range(3):
                if np.all(v[:, ax] == lo[ax]):
                    normals[k, ax], offsets[k] = -1.0, -lo[ax]
                    break
                if np.all(v[:, ax] == hi[ax]):
                    normals[k, ax], offsets[k] = 1.0, hi[ax]
                    break
            else:
                normals[k] = self.poly.face_planes()[0][k]
                offsets[k] = normals[k] @ v.mean(axis=0)
        return normals, offsets


def expanded_box(lo, hi, factor=3.0):
    """Box ``factor`` times larger than ``[lo, hi]`` with the same center.

    A flat axis (a straight input segment, say) borrows the largest extent.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    c = 0.5 * (lo + hi)
    ext = hi - lo
    ext = np.where(ext <= 1e-9 * ext.max(), ext.max(), ext)
    h = 0.5 * ext * factor
    return c - h, c + h


def _cell(i, points, tree, box, eps):
    p = points[i]
    cell = box
    n = len(points)
    k = min(16, n)
    done = 1  # neighbors already processed (index 0 is the seed itself)
    while True:
        dist, idx = tree.query(p, k=k)
        dist = np.atleast_1d(dist)
        idx = np.atleast_1d(idx)
        for d, j in zip(dist[done:], idx[done:]):
            reach = float(np.sqrt(np.max(np.einsum("ij,ij->i", cell.vertices - p, cell.vertices - p))))
            if d > 2.0 * reach:
                return cell
            cell = cell.clip(Plane.bisector(p, points[j], int(j)), eps)
            if cell is None:
                raise VoronoiError("empty cell for seed %d" % i)
        done = len(idx)
        if k >= n:
            return cell
        k = min(2 * k, n)


def polish_vertices(cell: VoronoiCell, points):
    """Recompute each non-box vertex from the seeds whose faces meet there.

    Vertices built by successive clips carry errors that grow where bisectors
    meet at shallow angles. Solving the equidistance equations of the sorted
    seed set, relative to its smallest id, gives the same bits in every cell
    sharing the vertex, so neighboring cells agree on it.
    """
    poly = cell.poly
    inc = [set() for _ in range(len(poly.vertices))]
    for f, t in zip(poly.faces, poly.tags):
        for v in f:
            inc[v].add(int(t))
    quads, qrows, many = [], [], []
    for k, tags in enumerate(inc):
        if len(tags) < 3 or min(tags) < 0:
            continue
        T = sorted(tags | {cell.seed})
        if len(T) == 4:
            quads.append(T)
            qrows.append(k)
        else:
            many.append((k, T))
    V = poly.vertices.copy()
    if quads:
        T = np.array(quads)
        p0 = points[T[:, 0]]
        Q = points[T[:, 1:]]
        A = 2.0 * (Q - p0[:, None, :])
        b = np.einsum("nij,nij->ni", Q, Q) - np.einsum("ni,ni->n", p0, p0)[:, None]
        try:
            V[qrows] = np.linalg.solve(A, b[..., None])[..., 0]
        except np.linalg.LinAlgError:
            for k, a_, b_ in zip(qrows, A, b):
                V[k] = np.linalg.lstsq(a_, b_, rcond=None)[0]
    for k, T in many:
        p0, Q = points[T[0]], points[T[1:]]
        V[k] = np.linalg.lstsq(2.0 * (Q - p0), np.einsum("ij,ij->i", Q, Q) - p0 @ p0, rcond=None)[0]
    poly.vertices = V
    return cell


def compute_cells(points, lo, hi, polish=True):
    """One convex cell per seed inside the box ``[lo, hi]``.

    Neighbors are visited by increasing distance; once a neighbor lies
    farther than twice the largest seed-to-vertex distance of the current
    cell, no remaining bisector can cut it. Vertices are then recomputed
    from their defining seeds (see :func:`polish_vertices`).
    """
    points = np.asarray(points, dtype=float)
    if len(points) == 0:
        raise VoronoiError("no seeds")
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    scale = float(np.linalg.norm(hi - lo))
    tree = cKDTree(points)
    if len(points) > 1:
        d, _ = tree.query(points, k=2)
        if d[:, 1].min() < 1e-12 * scale:
            raise VoronoiError("duplicate seeds")
    box = ConvexPolyhedron.box(lo, hi)
    eps = 1e-12 * max(1.0, float(np.abs(np.concatenate([lo, hi])).max()))
    cells = [VoronoiCell(i, _cell(i, points, tree, box, eps), points[i], (lo, hi)) for i in range(len(points))]
    if polish:
        for c in cells:
            polish_vertices(c, points)
    return cells


def brute_force_cells(points, lo, hi):
    """Reference cells clipped by every bisector."""
    points = np.asarray(points, dtype=float)
    box = ConvexPolyhedron.box(lo, hi)
    out = []
    for i, p in enumerate(points):
        cell = box
        for j, q in enumerate(points):
            if j != i:
                cell = cell.clip(Plane.bisector(p, q, j))
        out.append(VoronoiCell(i, cell, p, (np.asarray(lo, float), np.asarray(hi, float))))
    return out


def verify_convexity(cells, scale=1.0, tol=1e-9, points=None):
    """Number of cells with a vertex above one of their face planes by more than ``tol * scale``.

    With ``points`` (the seeds), Voronoi cells are checked against their
    defining planes; otherwise face planes come from Newell normals.
    """
    bad = 0
    for c in cells:
        if isinstance(c, VoronoiCell) and points is not None and c.site is not None:
            n, o = c.defining_planes(points)
            worst = float((c.poly.vertices @ n.T - o).max()) if len(o) else 0.0
        else:
            poly = c.poly if isinstance(c, VoronoiCell) else c
            worst = poly.max_convexity_violation()
        if worst > tol * scale:
            bad += 1
    return bad


# -- surface -----------------------------------------------------------------------


@dataclass
class SurfaceMesh:
    vertices: np.ndarray
    facets: list  # vertex index polygons, counter-clockwise seen from the exterior side
    pairs: np.ndarray  # (interior seed, exterior seed) per facet

    def triangles(self):
        """Fan triangulation from the vertex nearest each facet's centroid."""
        out = []
        for f in self.facets:
            p = self.vertices[f]
            a = int(np.argmin(np.linalg.norm(p - p.mean(axis=0), axis=1)))
            m = len(f)
            for k in range(1, m - 1):
                out.append([f[a], f[(a + k) % m], f[(a + k + 1) % m]])
        return np.array(out, dtype=np.int64).reshape(-1, 3)

    def edges(self):
        e = set()
        for f in self.facets:
            for k in range(len(f)):
                a, b = f[k], f[(k + 1) % len(f)]
                e.add((min(a, b), max(a, b)))
        return e

    def euler_characteristic(self):
        used = np.unique(np.concatenate([np.asarray(f) for f in self.facets])) if self.facets else []
        return len(used) - len(self.edges()) + len(self.facets)

    def is_closed_manifold(self):
        count = {}
        for f in self.facets:
            for k in range(len(f)):
                a, b = f[k], f[(k + 1) % len(f)]
                count[(a, b)] = count.get((a, b), 0) + 1
        return all(c == 1 and count.get((b, a), 0) == 1 for (a, b), c in count.items())

    def write_off(self, path):
        with open(path, "w") as fh:
            fh.write("OFF\n%d %d 0\n" % (len(self.vertices), len(self.facets)))
            for v in self.vertices:
                fh.write("%.17g %.17g %.17g\n" % tuple(v))
            for f in self.facets:
                fh.write("%d %s\n" % (len(f), " ".join(str(int(x)) for x in f)))

    def write_obj(self, path):
        with open(path, "w") as fh:
            for v in self.vertices:
                fh.write("v %.17g %.17g %.17g\n" % tuple(v))
            for f in self.facets:
                fh.write("f %s\n" % " ".join(str(int(x) + 1) for x in f))


def extract_surface(cells, labels, scale=1.0, tol=1e-9):
    """Faces shared by seeds of different labels, oriented away from the interior side.

    ``labels`` uses 1 for interior and 0 for exterior. Vertices closer than
    ``tol * scale`` are merged and repeated corners dropped.
    """
    labels = np.asarray(labels)
    polys, pairs = [], []
    for c in cells:
        i = c.seed
        for f, j in zip(c.poly.faces, c.poly.tags):
            if j == BOX_TAG or j < 0 or labels[i] == labels[j]:
                continue
            if labels[i] != 1:
                continue  # emitted once, from the interior cell
            polys.append(c.poly.vertices[f])
            pairs.append((i, j))
    if not polys:
        return SurfaceMesh(np.zeros((0, 3)), [], np.zeros((0, 2), dtype=np.int64))
    allv = np.concatenate(polys)
    rep = np.arange(len(allv))
    tree = cKDTree(allv)
    for a, b in sorted(tree.query_pairs(tol * scale)):
        ra, rb = rep[a], rep[b]
        while rep[ra] != ra:
            ra = rep[ra]
        while rep[rb] != rb:
            rb = rep[rb]
        if ra != rb:
            rep[max(ra, rb)] = min(ra, rb)
    for k in range(len(rep)):
        r = k
        while rep[r] != r:
            r = rep[r]
        rep[k] = r
    uniq, inverse = np.unique(rep, return_inverse=True)
    verts = allv[uniq]
    facets, keep_pairs = [], []
    off = 0
    for poly, pr in zip(polys, pairs):
        ids = inverse[off : off + len(poly)].tolist()
        off += len(poly)
        clean = [v for k, v in enumerate(ids) if v != ids[k - 1]]
        if len(clean) >= 3 and len(set(clean)) == len(clean):
            facets.append(clean)
            keep_pairs.append(pr)
    return SurfaceMesh(verts, facets, np.array(keep_pairs, dtype=np.int64).reshape(-1, 2))


# -- volume output -----------------------------------------------------------------


def write_vtk(path, cells, labels=None, which=None):
    """Legacy VTK unstructured grid with polyhedron cells (type 42)."""
    chosen = [c for c in cells if which is None or which(c)]
    pts, conn, off = [], [], []
    offset = 0
    for c in chosen:
        base = len(pts)
        pts.extend(c.poly.vertices.tolist())
        faces = c.poly.faces
        stream = [len(faces)]
        for f in faces:
            stream += [len(f)] + [base + int(x) for x in f]
        conn.append(stream)
        offset += len(stream) + 1
        off.append(offset)
    size = sum(len(s) + 1 for s in conn)
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\npolyhedral Voronoi cells\nASCII\nDATASET UNSTRUCTURED_GRID\n")
        fh.write("POINTS %d double\n" % len(pts))
        for p in pts:
            fh.write("%.17g %.17g %.17g\n" % tuple(p))
        fh.write("CELLS %d %d\n" % (len(conn), size))
        for s in conn:
            fh.write("%d %s\n" % (len(s), " ".join(map(str, s))))
        fh.write("CELL_TYPES %d\n" % len(conn))
        fh.write("42\n" * len(conn))
        fh.write("CELL_DATA %d\nSCALARS seed int 1\nLOOKUP_TABLE default\n" % len(conn))
        for c in chosen:
            fh.write("%d\n" % c.seed)
        if labels is not None:
            fh.write("SCALARS label int 1\nLOOKUP_TABLE default\n")
            for c in chosen:
                fh.write("%d\n" % int(labels[c.seed]))


def write_cells_text(path, cells):
    """Plain cell listing: ``cell seed nv nf``, vertex lines, then ``n i j k ... tag`` face lines."""
    with open(path, "w") as fh:
        for c in cells:
            v, faces = c.poly.vertices, c.poly.faces
            fh.write("cell %d %d %d\n" % (c.seed, len(v), len(faces)))
            for p in v:
                fh.write("%.17g %.17g %.17g\n" % tuple(p))
            for f, t in zip(faces, c.poly.tags):
                fh.write("%d %s %d\n" % (len(f), " ".join(str(int(x)) for x in f), t))


def cell_aspect_ratios(cells, select=None):
    """Aspect ratio per selected cell; NaN where the cell is degenerate."""
    from .geometry import aspect_ratio

    out = []
    for c in cells:
        if select is not None and not select(c):
            continue
        try:
            out.append(aspect_ratio(c.poly))
        except GeometryError:
            out.append(np.nan)
    return np.array(out)
