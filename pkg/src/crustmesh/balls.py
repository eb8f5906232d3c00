"""Protection balls and their per-type spatial indices."""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

CORNER_BALL, EDGE_BALL, SURFACE_BALL = 0, 1, 2
TYPE_NAMES = ("corner", "edge", "surface")


class _TypeIndex:
    """k-d tree over the centers of one ball type with an insertion buffer.

    Radii live in the owning :class:`BallSet`, so shrinking a ball needs no
    index update; ``rmax`` stays a valid upper bound because radii never grow.
    """

    def __init__(self, owner):
        self.owner = owner
        self.ids = np.zeros(0, dtype=np.int64)
        self.tree = None
        self.tail = []
        self.rmax = 0.0

    def __len__(self):
        return len(self.ids) + len(self.tail)

    def insert(self, bid, r):
        self.tail.append(bid)
        self.rmax = max(self.rmax, r)
        if len(self.tail) > 64 + len(self.ids) // 4:
            self.rebuild()

    def rebuild(self):
        if self.tail:
            self.ids = np.concatenate([self.ids, np.array(self.tail, dtype=np.int64)])
            self.tail = []
        self.tree = cKDTree(self.owner.centers[self.ids], leafsize=16) if len(self.ids) else None
        if len(self.ids):
            self.rmax = float(self.owner.radii[self.ids].max())

    def all_ids(self):
        if self.tail:
            return np.concatenate([self.ids, np.array(self.tail, dtype=np.int64)])
        return self.ids

    def within(self, x, R):
        """Ids whose centers lie within ``R`` of ``x`` (sorted)."""
        out = []
        if self.tree is not None and R > 0:
            hit = self.tree.query_ball_point(x, R)
            if hit:
                out.append(self.ids[hit])
        if self.tail:
            t = np.array(self.tail, dtype=np.int64)
            d = np.linalg.norm(self.owner.centers[t] - x, axis=1)
            out.append(t[d <= R])
        if not out:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(out))

    def nearest(self, x):
        best_id, best_d = -1, np.inf
        if self.tree is not None:
            d, i = self.tree.query(x)
            best_id, best_d = int(self.ids[i]), float(d)
        if self.tail:
            t = np.array(self.tail, dtype=np.int64)
            d = np.linalg.norm(self.owner.centers[t] - x, axis=1)
            k = int(np.argmin(d))
            if d[k] < best_d or (d[k] == best_d and t[k] < best_id):
                best_id, best_d = int(t[k]), float(d[k])
        return best_id, best_d


class BallSet:
    """Growable arrays of balls plus one index per ball type.

    Per ball: center, radius, type, stratum id, stratum dimension,
    orientation vector, source face and an outward normal used for labels.
    """

    def __init__(self, capacity=256):
        self.n = 0
        self._alloc(capacity)
        self.index = [_TypeIndex(self) for _ in range(3)]
        self.certified = [False, False, False]
        self.generation = 0
        self.shrinks = []

    def _alloc(self, cap):
        def grow(a, shape, dtype):
            new = np.zeros((cap,) + shape, dtype=dtype)
            if a is not None:
                new[: self.n] = a[: self.n]
            return new

        g = lambda name: getattr(self, "_" + name, None)  # noqa: E731
        self._centers = grow(g("centers"), (3,), float)
        self._radii = grow(g("radii"), (), float)
        self._types = grow(g("types"), (), np.int64)
        self._sids = grow(g("sids"), (), np.int64)
        self._dims = grow(g("dims"), (), np.int64)
        self._vecs = grow(g("vecs"), (3,), float)
        self._faces = grow(g("faces"), (), np.int64)
        self._labels = grow(g("labels"), (3,), float)
        self.cap = cap

    # views on the live part
    centers = property(lambda self: self._centers[: self.n])
    radii = property(lambda self: self._radii[: self.n])
    types = property(lambda self: self._types[: self.n])
    sids = property(lambda self: self._sids[: self.n])
    dims = property(lambda self: self._dims[: self.n])
    vecs = property(lambda self: self._vecs[: self.n])
    faces = property(lambda self: self._faces[: self.n])
    labels = property(lambda self: self._labels[: self.n])

    def __len__(self):
        return self.n

    def add(self, center, radius, btype, sid, dim, vec, face=-1, label=None):
        if not radius > 0:
            raise ValueError("ball radius must be positive")
        if self.n == self.cap:
            self._alloc(2 * self.cap)
        i = self.n
        self._centers[i] = center
        self._radii[i] = radius
        self._types[i] = btype
        self._sids[i] = sid
        self._dims[i] = dim
        self._vecs[i] = vec
        self._faces[i] = face
        self._labels[i] = vec if label is None else label
        self.n += 1
        self.index[btype].insert(i, radius)
        self.certified[btype] = False
        self.generation += 1
        return i

    def shrink(self, bid, new_r, reason=""):
        """Reduce a radius; returns True if it changed."""
        old = self._radii[bid]
        if not new_r < old:
            return False
        if not new_r > 0:
            raise ValueError("ball shrunk to a non-positive radius")
        self._radii[bid] = new_r
        self.certified[self._types[bid]] = False
        self.generation += 1
        self.shrinks.append((int(bid), float(old), float(new_r), reason))
        return True

    def rebuild(self):
        for t in self.index:
            t.rebuild()

    def ids_of_type(self, btype):
        return np.sort(self.index[btype].all_ids())

    # -- queries --------------------------------------------------------------

    def overlap_radius(self, r, btype, tree_type, lipschitz=None):
        """Center search radius guaranteeing all overlaps with a ball of radius ``r``."""
        R = r + self.index[tree_type].rmax
        if lipschitz is not None and btype == tree_type and self.certified[tree_type]:
            R = min(R, 2.0 * r / (1.0 - lipschitz))
        return R

    def overlapping(self, center, r, btype=None, lipschitz=None, exclude=-1, types=(0, 1, 2)):
        """Ids of balls intersecting the open ball ``(center, r)``."""
        center = np.asarray(center, dtype=float)
        out = []
        for t in types:
            if len(self.index[t]) == 0:
                continue
            R = self.overlap_radius(r, btype, t, lipschitz)
            cand = self.index[t].within(center, R)
            if len(cand):
                d = np.linalg.norm(self._centers[cand] - center, axis=1)
                out.append(cand[d < r + self._radii[cand]])
        if not out:
            return np.zeros(0, dtype=np.int64)
        ids = np.sort(np.concatenate(out))
        return ids[ids != exclude]

    def covering(self, x, lipschitz=None, types=(0, 1, 2), scale=1.0):
        """Ids of balls containing ``x`` (closed balls), found per type."""
        x = np.asarray(x, dtype=float)
        out = []
        for t in types:
            idx = self.index[t]
            if len(idx) == 0:
                continue
            R = idx.rmax
            if lipschitz is not None and self.certified[t]:
                q, dq = idx.nearest(x)
                R = min(R, (self._radii[q] + lipschitz * dq) / (1.0 - lipschitz))
            cand = idx.within(x, R * (1 + 1e-12))
            if len(cand):
                d = np.linalg.norm(self._centers[cand] - x, axis=1)
                out.append(cand[d <= self._radii[cand]])
        if not out:
            return np.zeros(0, dtype=np.int64)
        return np.sort(np.concatenate(out))

    def covering_radius_bound(self, x, t, lipschitz):
        idx = self.index[t]
        q, dq = idx.nearest(np.asarray(x, dtype=float))
        return (self._radii[q] + lipschitz * dq) / (1.0 - lipschitz)

    def nearest(self, x, btype):
        return self.index[btype].nearest(np.asarray(x, dtype=float))

    def candidates_many(self, X, slack=1.0, types=(0, 1, 2)):
        """For each row of ``X``, ids of balls whose centers lie within ``slack * rmax``.

        Returns a list of sorted id arrays; used by bulk scans.
        """
        X = np.atleast_2d(X)
        res = [[] for _ in range(len(X))]
        for t in types:
            idx = self.index[t]
            if len(idx) == 0:
                continue
            idx.rebuild()
            if idx.tree is None:
                continue
            hits = idx.tree.query_ball_point(X, slack * idx.rmax * (1 + 1e-12))
            for i, h in enumerate(hits):
                if h:
                    res[i].append(idx.ids[h])
        return [np.sort(np.concatenate(r)) if r else np.zeros(0, dtype=np.int64) for r in res]

    def covered_mask(self, X, depth=0.0, types=(0, 1, 2)):
        """``best[i]`` = max over balls of ``1 - |x - c| / r``; -inf when uncovered.

        Vectorized bulk evaluation via a tree over ball centers.
        """
        X = np.atleast_2d(np.asarray(X, dtype=float))
        best = np.full(len(X), -np.inf)
        who = np.full(len(X), -1)
        for t in types:
            idx = self.index[t]
            if len(idx) == 0:
                continue
            idx.rebuild()
            hits = idx.tree.query_ball_point(X, idx.rmax * (1 + 1e-12))
            lens = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(X))
            if lens.sum() == 0:
                continue
            rows = np.repeat(np.arange(len(X)), lens)
            cols = idx.ids[np.concatenate([np.asarray(h, dtype=np.int64) for h in hits])]
            d = np.linalg.norm(X[rows] - self._centers[cols], axis=1)
            f = 1.0 - d / self._radii[cols]
            order = np.lexsort((cols, -f, rows))
            rows_s, f_s, cols_s = rows[order], f[order], cols[order]
            first = np.ones(len(rows_s), dtype=bool)
            first[1:] = rows_s[1:] != rows_s[:-1]
            r0, f0, c0 = rows_s[first], f_s[first], cols_s[first]
            better = f0 > best[r0]
            best[r0[better]] = f0[better]
            who[r0[better]] = c0[better]
        return best, who

    # -- io ---------------------------------------------------------------------

    def dump(self, path):
        """Write one ball per line: ``type stratum x y z r``."""
        with open(path, "w") as fh:
            for i in range(self.n):
                c = self._centers[i]
                fh.write(
                    "%s %d %.17g %.17g %.17g %.17g\n"
                    % (TYPE_NAMES[self._types[i]], self._sids[i], c[0], c[1], c[2], self._radii[i])
                )

    def copy(self):
        out = BallSet(max(self.cap, 1))
        out.n = self.n
        for name in ("centers", "radii", "types", "sids", "dims", "vecs", "faces", "labels"):
            getattr(out, "_" + name)[: self.n] = getattr(self, "_" + name)[: self.n]
        for t in range(3):
            out.index[t].tail = list(self.index[t].all_ids())
            out.index[t].rebuild()
        out.certified = list(self.certified)
        out.generation = self.generation
        out.shrinks = list(self.shrinks)
        return out


def load_ball_dump(path):
    """Parse a dump written by :meth:`BallSet.dump` into arrays."""
    types, sids, rows = [], [], []
    with open(path) as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            types.append(TYPE_NAMES.index(parts[0]))
            sids.append(int(parts[1]))
            rows.append([float(x) for x in parts[2:6]])
    rows = np.array(rows, dtype=float).reshape(-1, 4)
    return np.array(types), np.array(sids), rows[:, :3], rows[:, 3]
