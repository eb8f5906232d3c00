"""Adaptive, feature-preserving Loop subdivision of surface patches."""
import logging

import numpy as np

from .features import Strata, build_strata
from .mesh_io import InputComplex

log = logging.getLogger(__name__)


def _loop_beta(n):
    return (5.0 / 8.0 - (3.0 / 8.0 + 0.25 * np.cos(2 * np.pi / n)) ** 2) / n


def _subdivide_once(mesh, sharp, corner_flags, threshold):
    """One adaptive round; returns (mesh, sharp, corner_flags, n_marked)."""
    dih = mesh.dihedral_angles()
    bent = ~sharp & np.isfinite(dih) & (dih <= threshold)
    fe = mesh.face_edges
    marked = bent[fe].any(axis=1)
    if not marked.any():
        return mesh, sharp, corner_flags, 0
    split = np.zeros(len(mesh.edges), dtype=bool)
    split[fe[marked].reshape(-1)] = True
    # closure: a facet with two split edges is split regularly
    while True:
        k = split[fe].sum(axis=1)
        fix = k == 2
        if not fix.any():
            break
        split[fe[fix].reshape(-1)] = True

    v_old = mesh.vertices
    t = mesh.triangles
    nv = len(v_old)
    split_ids = np.flatnonzero(split)
    mid_index = np.full(len(mesh.edges), -1)
    mid_index[split_ids] = nv + np.arange(len(split_ids))
    new_pts = np.empty((len(split_ids), 3))
    for i, e in enumerate(split_ids):
        a, b = mesh.edges[e]
        faces = mesh.edge_faces[e]
        if sharp[e] or len(faces) != 2:
            new_pts[i] = 0.5 * (v_old[a] + v_old[b])
            continue
        opp = [int(x) for f in faces for x in t[f] if x != a and x != b]
        new_pts[i] = 0.375 * (v_old[a] + v_old[b]) + 0.125 * (v_old[opp[0]] + v_old[opp[1]])

    # even vertices move only when every incident facet is split regularly
    k = split[fe].sum(axis=1)
    red = k == 3
    v_new = v_old.copy()
    on_sharp = np.zeros(nv, dtype=bool)
    on_sharp[mesh.edges[sharp].reshape(-1)] = True
    nonmanifold = np.array([len(f) != 2 for f in mesh.edge_faces])
    bad_vertex = np.zeros(nv, dtype=bool)
    bad_vertex[mesh.edges[nonmanifold].reshape(-1)] = True
    all_red = np.ones(nv, dtype=bool)
    np.logical_and.at(all_red, t.reshape(-1), np.repeat(red, 3))
    movable = all_red & ~on_sharp & ~corner_flags & ~bad_vertex
    nbrs = [[] for _ in range(nv)]
    for a, b in mesh.edges:
        nbrs[a].append(b)
        nbrs[b].append(a)
    for v in np.flatnonzero(movable):
        nb = nbrs[v]
        n = len(nb)
        beta = _loop_beta(n)
        v_new[v] = (1 - n * beta) * v_old[v] + beta * v_old[nb].sum(axis=0)

    tris = []
    for f in range(len(t)):
        a, b, c = (int(x) for x in t[f])
        e0, e1, e2 = (int(x) for x in fe[f])
        m0, m1, m2 = int(mid_index[e0]), int(mid_index[e1]), int(mid_index[e2])
        kk = (m0 >= 0) + (m1 >= 0) + (m2 >= 0)
        if kk == 0:
            tris.append([a, b, c])
        elif kk == 3:
            tris += [[a, m0, m2], [b, m1, m0], [c, m2, m1], [m0, m1, m2]]
        else:
            corners_ = [a, b, c]
            j = [m0, m1, m2].index(max(m0, m1, m2))
            m = [m0, m1, m2][j]
            p, q, r = corners_[j], corners_[(j + 1) % 3], corners_[(j + 2) % 3]
            tris += [[p, m, r], [m, q, r]]
    tris = np.array(tris, dtype=np.int64)
    verts = np.vstack([v_new, new_pts])

    sharp_pairs = set()
    for e in np.flatnonzero(sharp):
        a, b = (int(x) for x in mesh.edges[e])
        m = mid_index[e]
        if m >= 0:
            sharp_pairs.add((min(a, m), max(a, m)))
            sharp_pairs.add((min(b, m), max(b, m)))
        else:
            sharp_pairs.add((a, b))
    new_mesh = InputComplex(verts, tris)
    new_sharp = np.array([(int(a), int(b)) in sharp_pairs for a, b in new_mesh.edges])
    new_corners = np.concatenate([corner_flags, np.zeros(len(new_pts), dtype=bool)])
    return new_mesh, new_sharp, new_corners, int(marked.sum())


def smooth_patches(strata: Strata, threshold_deg=175.0, iterations=6) -> Strata:
    """Loop-subdivide facets with a non-sharp dihedral at or below the threshold.

    Creases are split at midpoints and their vertices stay fixed; corners stay
    fixed. Stops once every intra-patch dihedral exceeds the threshold or
    after ``iterations`` rounds. Returns strata rebuilt on the refined mesh.
    """
    mesh, sharp, corners = strata.mesh, strata.sharp.copy(), strata.corner_flags.copy()
    threshold = np.deg2rad(threshold_deg)
    rounds = 0
    for _ in range(iterations):
        mesh, sharp, corners, n = _subdivide_once(mesh, sharp, corners, threshold)
        if n == 0:
            break
        rounds += 1
        log.debug("subdivision round %d: %d facets marked, %d facets now", rounds, n, len(mesh.triangles))
    if rounds == 0:
        return strata
    out = build_strata(mesh, sharp, corners, strata.theta_sharp, strata.corner_rules)
    out.subdivision_rounds = rounds
    return out
