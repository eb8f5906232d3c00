"""Sharp feature detection and strata (corners, creases, patches)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .mesh_io import InputComplex

CORNER, CREASE, PATCH = 0, 1, 2


@dataclass
class Crease:
    vertices: np.ndarray  # chain of vertex ids; closed chains repeat the first id at the end
    edges: np.ndarray  # mesh edge ids in chain order
    cycle: bool

    def length(self, mesh):
        p = mesh.vertices[self.vertices]
        return float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())


@dataclass
class Strata:
    """Strata of a triangle mesh.

    Global stratum ids list corners first, then creases, then patches.
    ``incident[a, b]`` is true when stratum ``a`` lies in the closure of
    the higher-dimensional stratum ``b``.
    """

    mesh: InputComplex
    theta_sharp: float
    sharp: np.ndarray
    corner_flags: np.ndarray
    corners: np.ndarray
    creases: list
    patches: list
    facet_patch: np.ndarray
    edge_crease: np.ndarray
    edge_dir: np.ndarray
    incident: np.ndarray
    dims: np.ndarray
    corner_rules: dict
    subdivision_rounds: int = 0

    @property
    def n_corners(self):
        return len(self.corners)

    @property
    def n_creases(self):
        return len(self.creases)

    @property
    def n_patches(self):
        return len(self.patches)

    @property
    def n_strata(self):
        return len(self.dims)

    def corner_sid(self, i):
        return i

    def crease_sid(self, k):
        return self.n_corners + k

    def patch_sid(self, j):
        return self.n_corners + self.n_creases + j

    def local_index(self, sid):
        if sid < self.n_corners:
            return sid
        if sid < self.n_corners + self.n_creases:
            return sid - self.n_corners
        return sid - self.n_corners - self.n_creases

    def facet_sid(self):
        return self.n_corners + self.n_creases + self.facet_patch

    def sharp_edge_sid(self):
        out = np.full(len(self.mesh.edges), -1)
        m = self.edge_crease >= 0
        out[m] = self.n_corners + self.edge_crease[m]
        return out

    def stratum_bboxes(self):
        """Axis-aligned box per stratum, shape ``(S, 2, 3)``."""
        mesh = self.mesh
        out = np.zeros((self.n_strata, 2, 3))
        for i, v in enumerate(self.corners):
            out[i] = mesh.vertices[v]
        for k, c in enumerate(self.creases):
            p = mesh.vertices[c.vertices]
            out[self.crease_sid(k)] = [p.min(axis=0), p.max(axis=0)]
        for j, fs in enumerate(self.patches):
            p = mesh.vertices[mesh.triangles[fs].reshape(-1)]
            out[self.patch_sid(j)] = [p.min(axis=0), p.max(axis=0)]
        return out

    def effective_flat_angle(self):
        """Largest normal deviation across non-sharp edges (radians)."""
        dih = self.mesh.dihedral_angles()
        m = ~self.sharp & np.isfinite(dih)
        if not m.any():
            return 0.0
        return float(np.pi - dih[m].min())

    def summary(self):
        return {
            "corners": self.n_corners,
            "creases": self.n_creases,
            "patches": self.n_patches,
            "sharp_edges": int(self.sharp.sum()),
        }


def sharp_edge_mask(mesh: InputComplex, theta_sharp):
    """Sharp iff the dihedral is below pi - theta_sharp or the edge is not 2-manifold."""
    dih = mesh.dihedral_angles()
    return ~np.isfinite(dih) | (dih < np.pi - theta_sharp)


def _vertex_facets(mesh):
    t = mesh.triangles
    flat = t.reshape(-1)
    order = np.argsort(flat, kind="stable")
    counts = np.bincount(flat, minlength=len(mesh.vertices))
    return np.split(order // 3, np.cumsum(counts)[:-1])


def detect_corners(mesh: InputComplex, sharp, theta_sharp):
    """Return a boolean corner flag per vertex and the rule that triggered each corner.

    A vertex with exactly one sharp edge is also a corner, so that every open
    crease ends at two corners.
    """
    nv = len(mesh.vertices)
    flags = np.zeros(nv, dtype=bool)
    rules = {}
    sharp_ids = np.flatnonzero(sharp)
    se = mesh.edges[sharp_ids]
    count = np.bincount(se.reshape(-1), minlength=nv)
    for v in np.flatnonzero(count > 2):
        flags[v] = True
        rules[int(v)] = "valence"
    for v in np.flatnonzero(count == 1):
        flags[v] = True
        rules[int(v)] = "endpoint"
    # two sharp edges whose supporting lines bend too much
    two = np.flatnonzero(count == 2)
    if len(two):
        inc = {int(v): [] for v in two}
        for (a, b) in se:
            if a in inc:
                inc[a].append(b)
            if b in inc:
                inc[b].append(a)
        for v, (a, b) in inc.items():
            u = mesh.vertices[a] - mesh.vertices[v]
            w = mesh.vertices[b] - mesh.vertices[v]
            ang = np.arctan2(np.linalg.norm(np.cross(u, w)), u @ w)
            if ang < np.pi - theta_sharp:
                flags[v] = True
                rules.setdefault(v, "bend")
    # sectors: facets around v connected across non-sharp edges at v
    vf = _vertex_facets(mesh)
    fe = mesh.face_edges
    cos_limit = np.cos(theta_sharp)
    for v in range(nv):
        if flags[v]:
            continue
        fs = vf[v]
        if len(fs) < 2:
            continue
        nrm = mesh.normals[fs]
        if count[v] == 0:
            # a single sector
            if (nrm @ nrm.T).min() > cos_limit:
                continue
            labels = np.zeros(len(fs), dtype=int)
        else:
            pos = {int(f): i for i, f in enumerate(fs)}
            rows, cols = [], []
            for i, f in enumerate(fs):
                for e in fe[f]:
                    if sharp[e] or v not in mesh.edges[e]:
                        continue
                    for g in mesh.edge_faces[e]:
                        if g != f and int(g) in pos:
                            rows.append(i)
                            cols.append(pos[int(g)])
            g = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(len(fs), len(fs)))
            _, labels = connected_components(g, directed=False)
        for lab in np.unique(labels):
            sub = nrm[labels == lab]
            if len(sub) > 1 and (sub @ sub.T).min() <= cos_limit:
                flags[v] = True
                rules[int(v)] = "sector"
                break
    return flags, rules


def build_strata(mesh: InputComplex, sharp, corner_flags, theta_sharp, corner_rules=None):
    """Assemble strata from a given sharp-edge mask and corner flags."""
    sharp = np.asarray(sharp, dtype=bool)
    corner_flags = np.asarray(corner_flags, dtype=bool)
    nv = len(mesh.vertices)
    corners = np.flatnonzero(corner_flags)
    sharp_ids = np.flatnonzero(sharp)
    adj = {}
    for e in sharp_ids:
        a, b = mesh.edges[e]
        adj.setdefault(int(a), []).append(int(e))
        adj.setdefault(int(b), []).append(int(e))
    for v in adj:
        adj[v].sort()

    edge_crease = np.full(len(mesh.edges), -1)
    edge_dir = np.zeros((len(mesh.edges), 3))
    creases = []

    def walk(start_v, start_e):
        verts = [start_v]
        edges = []
        v, e = start_v, start_e
        while True:
            a, b = mesh.edges[e]
            nxt = int(b) if a == v else int(a)
            edges.append(e)
            verts.append(nxt)
            edge_crease[e] = len(creases)
            d = mesh.vertices[nxt] - mesh.vertices[v]
            edge_dir[e] = d / np.linalg.norm(d)
            if corner_flags[nxt] or nxt == start_v:
                break
            cand = [x for x in adj[nxt] if edge_crease[x] < 0]
            if not cand:
                break
            v, e = nxt, cand[0]
        cycle = verts[-1] == verts[0]
        creases.append(Crease(np.array(verts), np.array(edges), cycle))

    for c in corners:
        for e in adj.get(int(c), []):
            if edge_crease[e] < 0:
                walk(int(c), e)
    for e in sharp_ids:
        if edge_crease[e] < 0:
            a = int(mesh.edges[e][0])
            walk(a, int(e))

    # patches: flood facets across non-sharp edges
    m = len(mesh.triangles)
    ns = np.flatnonzero(~sharp)
    pairs = np.array([mesh.edge_faces[e] for e in ns]).reshape(-1, 2) if len(ns) else np.zeros((0, 2), int)
    if m:
        g = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
        _, lab = connected_components(g, directed=False)
    else:
        lab = np.zeros(0, dtype=int)
    # relabel by smallest facet id for determinism
    first = {}
    for f in range(m):
        first.setdefault(int(lab[f]), len(first))
    facet_patch = np.array([first[int(x)] for x in lab])
    patches = [np.flatnonzero(facet_patch == j) for j in range(len(first))]

    nc, ne, npch = len(corners), len(creases), len(patches)
    S = nc + ne + npch
    dims = np.array([CORNER] * nc + [CREASE] * ne + [PATCH] * npch, dtype=int)
    incident = np.zeros((S, S), dtype=bool)
    corner_index = {int(v): i for i, v in enumerate(corners)}
    for k, cr in enumerate(creases):
        for v in (cr.vertices[0], cr.vertices[-1]):
            if int(v) in corner_index:
                incident[corner_index[int(v)], nc + k] = True
    vf = _vertex_facets(mesh)
    for i, v in enumerate(corners):
        for f in vf[v]:
            incident[i, nc + ne + facet_patch[f]] = True
    for k, cr in enumerate(creases):
        for e in cr.edges:
            for f in mesh.edge_faces[e]:
                incident[nc + k, nc + ne + facet_patch[f]] = True
    assert len(corner_flags) == nv
    return Strata(
        mesh=mesh,
        theta_sharp=float(theta_sharp),
        sharp=sharp,
        corner_flags=corner_flags,
        corners=corners,
        creases=creases,
        patches=patches,
        facet_patch=facet_patch,
        edge_crease=edge_crease,
        edge_dir=edge_dir,
        incident=incident,
        dims=dims,
        corner_rules=dict(corner_rules or {}),
    )


def detect_features(mesh: InputComplex, theta_sharp) -> Strata:
    """Sharp edges, corners, creases and patches for angle threshold ``theta_sharp`` (radians)."""
    if not 0 < theta_sharp < np.pi / 2:
        raise ValueError("theta_sharp must lie in (0, pi/2)")
    sharp = sharp_edge_mask(mesh, theta_sharp)
    flags, rules = detect_corners(mesh, sharp, theta_sharp)
    return build_strata(mesh, sharp, flags, theta_sharp, rules)
