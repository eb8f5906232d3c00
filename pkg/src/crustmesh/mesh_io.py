"""Triangle mesh container and OFF / OBJ / STL readers and writers."""
from __future__ import annotations

import logging
import struct
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

log = logging.getLogger(__name__)


class MeshError(ValueError):
    pass


@dataclass
class InputComplex:
    """Triangle mesh with edge adjacency.

    Attributes
    ----------
    vertices : (n, 3) float array
    triangles : (m, 3) int array
    edges : (e, 2) int array, sorted vertex pairs
    face_edges : (m, 3) int array
        edge ``k`` joins corners ``k`` and ``k+1`` of the triangle
    edge_faces : list of int arrays, incident facets per edge
    normals : (m, 3) unit facet normals
    areas : (m,) facet areas
    """

    vertices: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray = field(init=False)
    face_edges: np.ndarray = field(init=False)
    edge_faces: list = field(init=False)
    normals: np.ndarray = field(init=False)
    areas: np.ndarray = field(init=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float).reshape(-1, 3)
        self.triangles = np.ascontiguousarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(self.triangles) == 0:
            raise MeshError("empty mesh")
        if self.triangles.min() < 0 or self.triangles.max() >= len(self.vertices):
            raise MeshError("triangle index out of range")
        if not np.all(np.isfinite(self.vertices)):
            raise MeshError("non-finite vertex coordinates")
        self._build()

    def _build(self):
        t = self.triangles
        m = len(t)
        half = np.stack([t, np.roll(t, -1, axis=1)], axis=2).reshape(-1, 2)
        key = np.sort(half, axis=1)
        self.edges, inv = np.unique(key, axis=0, return_inverse=True)
        inv = inv.reshape(-1)
        self.face_edges = inv.reshape(m, 3)
        order = np.argsort(inv, kind="stable")
        counts = np.bincount(inv, minlength=len(self.edges))
        splits = np.cumsum(counts)[:-1]
        faces_of_half = np.repeat(np.arange(m), 3)
        self.edge_faces = np.split(faces_of_half[order], splits)
        a, b, c = (self.vertices[t[:, k]] for k in range(3))
        cr = np.cross(b - a, c - a)
        nrm = np.linalg.norm(cr, axis=1)
        self.areas = 0.5 * nrm
        with np.errstate(invalid="ignore", divide="ignore"):
            self.normals = np.where(nrm[:, None] > 0, cr / nrm[:, None], 0.0)

    # -- derived quantities ----------------------------------------------------

    @property
    def bbox(self):
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    @property
    def scale(self):
        lo, hi = self.bbox
        return float(np.linalg.norm(hi - lo))

    def edge_valence(self):
        return np.array([len(f) for f in self.edge_faces])

    def is_watertight(self):
        return bool(np.all(self.edge_valence() != 1))

    def euler_characteristic(self):
        used = np.unique(self.triangles)
        return len(used) - len(self.edges) + len(self.triangles)

    def signed_volume(self):
        a, b, c = (self.vertices[self.triangles[:, k]] for k in range(3))
        return float(np.einsum("ij,ij->i", a, np.cross(b, c)).sum() / 6.0)

    def dihedral_angles(self):
        """Interior dihedral angle per edge; nan for non-manifold or boundary edges."""
        out = np.full(len(self.edges), np.nan)
        two = np.array([len(f) == 2 for f in self.edge_faces])
        idx = np.flatnonzero(two)
        if len(idx):
            f = np.array([self.edge_faces[i] for i in idx])
            cosang = np.einsum("ij,ij->i", self.normals[f[:, 0]], self.normals[f[:, 1]])
            out[idx] = np.pi - np.arccos(np.clip(cosang, -1.0, 1.0))
        return out

    def copy(self):
        return InputComplex(self.vertices.copy(), self.triangles.copy())


def _orient_consistently(tris):
    """Flip facets so that manifold neighbours traverse shared edges oppositely."""
    tris = tris.copy()
    m = len(tris)
    edge_map = {}
    for f in range(m):
        for k in range(3):
            a, b = int(tris[f, k]), int(tris[f, (k + 1) % 3])
            edge_map.setdefault((min(a, b), max(a, b)), []).append(f)
    seen = np.zeros(m, dtype=bool)
    for start in range(m):
        if seen[start]:
            continue
        seen[start] = True
        queue = deque([start])
        while queue:
            f = queue.popleft()
            for k in range(3):
                a, b = int(tris[f, k]), int(tris[f, (k + 1) % 3])
                nb = edge_map[(min(a, b), max(a, b))]
                if len(nb) != 2:
                    continue
                g = nb[0] if nb[1] == f else nb[1]
                if seen[g]:
                    continue
                row = list(tris[g])
                same_dir = any(row[j] == a and row[(j + 1) % 3] == b for j in range(3))
                if same_dir:
                    tris[g] = tris[g][::-1]
                seen[g] = True
                queue.append(g)
    return tris


def _orient_outward(vertices, tris):
    """Per connected component, flip so the enclosed signed volume is positive."""
    m = len(tris)
    rows = np.repeat(np.arange(m), 3)
    cols = tris.reshape(-1)
    n = len(vertices)
    g = coo_matrix((np.ones(len(rows)), (rows, cols + m)), shape=(m + n, m + n))
    _, lab = connected_components(g, directed=False)
    flab = lab[:m]
    a, b, c = (vertices[tris[:, k]] for k in range(3))
    vol = np.einsum("ij,ij->i", a, np.cross(b, c))
    comp_vol = np.bincount(flab, weights=vol)
    flip = comp_vol[flab] < 0
    tris = tris.copy()
    tris[flip] = tris[flip][:, ::-1]
    return tris


def build_complex(vertices, triangles, merge_tol=1e-9, require_watertight=False, orient=True):
    """Weld, clean and orient raw arrays into an :class:`InputComplex`.

    ``merge_tol`` is relative to the bounding-box diagonal.
    """
    v = np.asarray(vertices, dtype=float).reshape(-1, 3)
    t = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    if len(v) == 0 or len(t) == 0:
        raise MeshError("empty mesh")
    if t.min() < 0 or t.max() >= len(v):
        raise MeshError("triangle index out of range")
    scale = float(np.linalg.norm(v.max(axis=0) - v.min(axis=0))) or 1.0
    # exact duplicates first, then tolerance merge
    v, inv = np.unique(v, axis=0, return_inverse=True)
    t = inv.reshape(-1)[t]
    pairs = cKDTree(v).query_pairs(merge_tol * scale, output_type="ndarray")
    if len(pairs):
        g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(len(v), len(v)))
        _, lab = connected_components(g, directed=False)
        first = np.full(lab.max() + 1, -1)
        for i in range(len(v)):
            if first[lab[i]] < 0:
                first[lab[i]] = i
        t = first[lab][t]
        log.info("merged %d near-duplicate vertex pairs", len(pairs))
    degenerate = (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 2] == t[:, 0])
    a, b, c = (v[t[:, k]] for k in range(3))
    area = 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)
    degenerate |= area < 1e-14 * scale**2
    if degenerate.any():
        log.warning("dropping %d degenerate facets", int(degenerate.sum()))
        t = t[~degenerate]
    if len(t) == 0:
        raise MeshError("empty mesh")
    used = np.unique(t)
    remap = np.full(len(v), -1)
    remap[used] = np.arange(len(used))
    v = v[used]
    t = remap[t]
    if orient:
        t = _orient_consistently(t)
        t = _orient_outward(v, t)
    mesh = InputComplex(v, t)
    if require_watertight and not mesh.is_watertight():
        raise MeshError("not watertight")
    return mesh


# ---------------------------------------------------------------------------
# readers


def _fan(face, warned):
    if len(face) < 3:
        raise MeshError("face with fewer than 3 vertices")
    if len(face) > 3 and not warned[0]:
        log.warning("fan-triangulating polygonal faces")
        warned[0] = True
    return [(face[0], face[i], face[i + 1]) for i in range(1, len(face) - 1)]


def read_off(text):
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.extend(line.split())
    if not tokens or not tokens[0].endswith("OFF"):
        raise MeshError("missing OFF header")
    pos = 1
    nv, nf = int(tokens[pos]), int(tokens[pos + 1])
    pos += 3
    verts = np.array(tokens[pos : pos + 3 * nv], dtype=float).reshape(nv, 3)
    pos += 3 * nv
    tris, warned = [], [False]
    for _ in range(nf):
        k = int(tokens[pos])
        face = [int(x) for x in tokens[pos + 1 : pos + 1 + k]]
        pos += 1 + k
        tris.extend(_fan(face, warned))
    return verts, np.array(tris, dtype=np.int64)


def read_obj(text):
    verts, tris, warned = [], [], [False]
    for line in text.splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            face = []
            for tok in parts[1:]:
                i = int(tok.split("/")[0])
                face.append(i - 1 if i > 0 else len(verts) + i)
            tris.extend(_fan(face, warned))
    return np.array(verts, dtype=float), np.array(tris, dtype=np.int64)


def read_stl(data: bytes):
    if len(data) >= 84:
        n = struct.unpack("<I", data[80:84])[0]
        if len(data) == 84 + 50 * n:
            rec = np.frombuffer(data[84:], dtype=np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("a", "<u2")]))
            pts = rec["v"].reshape(-1, 3).astype(float)
            return pts, np.arange(len(pts)).reshape(-1, 3)
    text = data.decode("ascii", errors="replace")
    pts = [[float(x) for x in line.split()[1:4]] for line in text.splitlines() if line.strip().startswith("vertex")]
    if len(pts) % 3:
        raise MeshError("malformed STL")
    pts = np.array(pts, dtype=float).reshape(-1, 3)
    return pts, np.arange(len(pts)).reshape(-1, 3)


def load_mesh(path, fmt=None, require_watertight=False, merge_tol=1e-9):
    """Read an OFF, OBJ or STL file into an :class:`InputComplex`."""
    path = Path(path)
    fmt = (fmt or path.suffix.lstrip(".")).upper()
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise MeshError(f"unreadable file: {path}") from exc
    try:
        if fmt == "OFF":
            v, t = read_off(raw.decode())
        elif fmt == "OBJ":
            v, t = read_obj(raw.decode())
        elif fmt == "STL":
            v, t = read_stl(raw)
        else:
            raise MeshError(f"unsupported format {fmt}")
    except (ValueError, IndexError, UnicodeDecodeError) as exc:
        if isinstance(exc, MeshError):
            raise
        raise MeshError(f"unreadable file: {path}") from exc
    return build_complex(v, t, merge_tol=merge_tol, require_watertight=require_watertight)


# ---------------------------------------------------------------------------
# writers


def write_off(path, vertices, faces):
    with open(path, "w") as fh:
        fh.write("OFF\n%d %d 0\n" % (len(vertices), len(faces)))
        for p in vertices:
            fh.write("%.17g %.17g %.17g\n" % tuple(p))
        for f in faces:
            fh.write("%d %s\n" % (len(f), " ".join(str(int(i)) for i in f)))
