"""Half-covered seed pairs and their elimination by shrinking balls."""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .balls import BallSet
from .geometry import triplet_points_many
from .rng import stream

log = logging.getLogger(__name__)

COVER_EPS = 1e-10  # a point counts as inside a ball only below r * (1 - COVER_EPS)
SHRINK_EPS = 1e-9
N_BINS = 100


class SliverError(RuntimeError):
    pass


# -- overlap structure ----------------------------------------------------------


def overlap_pairs(balls: BallSet):
    """Pairs ``i < j`` of balls whose interiors intersect, sorted."""
    if balls.n < 2:
        return np.zeros((0, 2), dtype=np.int64)
    c, r = balls.centers, balls.radii
    pairs = cKDTree(c).query_pairs(2 * float(r.max()), output_type="ndarray")
    if len(pairs) == 0:
        return np.zeros((0, 2), dtype=np.int64)
    d = np.linalg.norm(c[pairs[:, 0]] - c[pairs[:, 1]], axis=1)
    pairs = pairs[d < r[pairs[:, 0]] + r[pairs[:, 1]]]
    return pairs[np.lexsort((pairs[:, 1], pairs[:, 0]))]


def ball_triplets(balls: BallSet, pairs=None):
    """Triplets ``i < j < k`` of pairwise overlapping balls."""
    if pairs is None:
        pairs = overlap_pairs(balls)
    nb = [set() for _ in range(balls.n)]
    for i, j in pairs:
        nb[i].add(int(j))
        nb[j].add(int(i))
    out = []
    for i in range(balls.n):
        up = sorted(x for x in nb[i] if x > i)
        for j in up:
            for k in sorted(x for x in nb[j] if x > j and x in nb[i]):
                out.append((i, j, k))
    return np.array(out, dtype=np.int64).reshape(-1, 3)


@dataclass
class TripletPoints:
    """Both sphere intersection points of every overlapping triplet.

    ``cover_rows`` / ``cover_ball`` list ``(point row, ball)`` pairs with the
    point strictly inside a fourth ball. Rows index ``[up; down]`` restricted
    to the triplets with two intersection points (``valid``).
    """

    triplets: np.ndarray
    up: np.ndarray
    down: np.ndarray
    count: np.ndarray
    valid: np.ndarray
    cover_rows: np.ndarray
    cover_ball: np.ndarray
    covered_up: np.ndarray
    covered_down: np.ndarray

    @property
    def half_covered(self):
        return self.covered_up ^ self.covered_down


def covering_pairs(balls: BallSet, pts, exclude):
    """(row, ball) pairs with ``pts[row]`` strictly inside a ball not in ``exclude[row]``."""
    z = np.zeros(0, dtype=np.int64)
    if len(pts) == 0 or balls.n == 0:
        return z, z
    tree = cKDTree(balls.centers)
    hits = tree.query_ball_point(pts, float(balls.radii.max()))
    lens = np.fromiter((len(h) for h in hits), dtype=np.int64, count=len(pts))
    if lens.sum() == 0:
        return z, z
    rows = np.repeat(np.arange(len(pts)), lens)
    cols = np.concatenate([np.asarray(h, dtype=np.int64) for h in hits if h])
    d = np.linalg.norm(pts[rows] - balls.centers[cols], axis=1)
    ok = d < balls.radii[cols] * (1 - COVER_EPS)
    if exclude is not None:
        ok &= ~(exclude[rows] == cols[:, None]).any(axis=1)
    rows, cols = rows[ok], cols[ok]
    order = np.lexsort((cols, rows))
    return rows[order], cols[order]


def triplet_points(balls: BallSet, triplets=None) -> TripletPoints:
    if triplets is None:
        triplets = ball_triplets(balls)
    m = len(triplets)
    if m == 0:
        e3 = np.zeros((0, 3))
        z = np.zeros(0, dtype=np.int64)
        b = np.zeros(0, dtype=bool)
        return TripletPoints(triplets, e3, e3, z, b, z, z, b, b)
    up, down, count = triplet_points_many(balls.centers[triplets], balls.radii[triplets])
    valid = count == 2
    tv = triplets[valid]
    pts = np.concatenate([up[valid], down[valid]])
    rows, cols = covering_pairs(balls, pts, np.concatenate([tv, tv]))
    nv = int(valid.sum())
    cov = np.zeros(2 * nv, dtype=bool)
    cov[rows] = True
    return TripletPoints(triplets, up, down, count, valid, rows, cols, cov[:nv], cov[nv:])


# -- candidates and shrink planning ---------------------------------------------


@dataclass
class SeedPairCandidate:
    triplet: tuple
    g_up: np.ndarray
    g_down: np.ndarray
    covered_up: bool
    covered_down: bool
    covering: tuple  # balls containing the covered point

    @property
    def covered_point(self):
        return self.g_up if self.covered_up else self.g_down

    @property
    def free_point(self):
        return self.g_down if self.covered_up else self.g_up


def find_half_covered(balls: BallSet, tp: TripletPoints = None):
    """``[(quartet, candidate)]`` for triplets with exactly one covered intersection point."""
    if tp is None:
        tp = triplet_points(balls)
    nv = int(tp.valid.sum())
    if nv == 0:
        return []
    tv = tp.triplets[tp.valid]
    up, down = tp.up[tp.valid], tp.down[tp.valid]
    by_row = {}
    for r, c in zip(tp.cover_rows.tolist(), tp.cover_ball.tolist()):
        by_row.setdefault(r, []).append(c)
    out = []
    for s in np.flatnonzero(tp.half_covered):
        cu = bool(tp.covered_up[s])
        covering = tuple(by_row[s if cu else s + nv])
        tri = tuple(int(x) for x in tv[s])
        cand = SeedPairCandidate(tri, up[s], down[s], cu, not cu, covering)
        for q in covering:
            out.append((tuple(sorted(tri + (q,))), cand))
    out.sort(key=lambda x: (x[0], x[1].triplet))
    return out


def shrinkage_ratio(center, radius, g_up, g_down):
    """``(delta, bound)`` for shrinking a ball that holds ``g_down`` but not ``g_up``.

    ``delta = (r - |q - g_down|) / r`` and ``bound = |q - g_up| / |q - g_down| - 1``.
    """
    du = float(np.linalg.norm(np.asarray(g_up, float) - center))
    dd = float(np.linalg.norm(np.asarray(g_down, float) - center))
    if not (dd <= radius <= du):
        raise ValueError("not half-covered")
    return (radius - dd) / radius, du / dd - 1.0


@dataclass
class ShrinkPlan:
    radii: dict = field(default_factory=dict)
    iteration: int = 0
    # ball -> (delta, bound) of the demand that set its radius
    ratios: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.radii)


def plan_shrinks(candidates, balls: BallSet, iteration=0) -> ShrinkPlan:
    """One shrink per quartet, chosen in isolation; each ball keeps its smallest demand.

    Within a quartet the options are the balls that cover some half-covered
    seed of it; a ball covering all of them is preferred, then the smallest
    absolute shrink, then the smaller id.
    """
    plan = ShrinkPlan(iteration=iteration)
    groups = {}
    for quartet, cand in candidates:
        groups.setdefault(quartet, []).append(cand)
    for quartet in sorted(groups):
        cands = groups[quartet]
        demand = {}
        for cand in cands:
            (q,) = set(quartet) - set(cand.triplet)
            g = cand.covered_point
            r_new = float(np.linalg.norm(balls.centers[q] - g)) * (1 - SHRINK_EPS)
            prev = demand.get(q)
            if prev is None or r_new < prev[0]:
                demand[q] = (r_new, cand)
        counts = {q: sum(1 for c in cands if q not in c.triplet) for q in demand}
        full = [q for q in demand if counts[q] == len(cands)]
        pool = full or list(demand)
        best = min(pool, key=lambda q: (balls.radii[q] - demand[q][0], q))
        r_new, cand = demand[best]
        if best not in plan.radii or r_new < plan.radii[best]:
            plan.radii[best] = r_new
            r = balls.radii[best]
            dd = float(np.linalg.norm(balls.centers[best] - cand.covered_point))
            du = float(np.linalg.norm(balls.centers[best] - cand.free_point))
            plan.ratios[best] = ((r - dd) / r, du / dd - 1.0)
    return plan


def apply_plan(plan: ShrinkPlan, balls: BallSet):
    """Shrink every planned ball; returns the number shrunk."""
    n = 0
    for bid in sorted(plan.radii):
        delta, bound = plan.ratios[bid]
        if delta > bound + 1e-9:
            raise SliverError("shrinkage exceeds its bound")
        if balls.shrink(bid, plan.radii[bid], "sliver"):
            n += 1
    return n


# -- coverage distribution ----------------------------------------------------


@dataclass
class CoverageDistribution:
    counts: np.ndarray
    n: int
    uncovered: int = 0

    @property
    def pmf(self):
        tot = self.counts.sum()
        return self.counts / tot if tot else self.counts.astype(float)

    @property
    def cdf(self):
        return np.cumsum(self.pmf)


def histogram_depths(f, bins=N_BINS):
    """Histogram of coverage depths in [0, 1]; negative or missing depths are uncovered."""
    f = np.asarray(f, dtype=float)
    bad = ~(f >= 0)
    counts, _ = np.histogram(np.clip(f[~bad], 0, 1), bins=bins, range=(0.0, 1.0))
    return CoverageDistribution(counts, len(f), int(bad.sum()))


def area_samples(mesh, n, rng):
    k = rng.choice(len(mesh.triangles), size=n, p=mesh.areas / mesh.areas.sum())
    tri = mesh.vertices[mesh.triangles[k]]
    u = rng.random((n, 2))
    flip = u.sum(axis=1) > 1
    u[flip] = 1 - u[flip]
    return tri[:, 0] + u[:, :1] * (tri[:, 1] - tri[:, 0]) + u[:, 1:] * (tri[:, 2] - tri[:, 0])


def coverage_distribution(balls: BallSet, strata, n=10**6, rng=None):
    """Empirical distribution of ``max (1 - |x - p| / r_p)`` over uniform boundary points."""
    rng = np.random.default_rng(0) if rng is None else rng
    X = area_samples(strata.mesh, n, rng)
    best, _ = balls.covered_mask(X)
    return histogram_depths(best)


def tv_distance(a: CoverageDistribution, b: CoverageDistribution):
    return 0.5 * float(np.abs(a.pmf - b.pmf).sum())


# -- driver ---------------------------------------------------------------------


@dataclass
class SliverResult:
    iterations: int
    safe_mode: bool
    log: list
    distributions: list


def _elimination_loop(refiner, max_iters, n_cov, seed, sink):
    balls = refiner.balls
    entries, dists = [], []
    prev = None
    for it in range(max_iters + 1):
        dist = coverage_distribution(balls, refiner.strata, n_cov, stream(seed, "coverage-%d" % it))
        dists.append(dist)
        tv = None if prev is None else tv_distance(prev, dist)
        prev = dist
        tp = triplet_points(balls)
        cands = find_half_covered(balls, tp)
        n_half = int(tp.half_covered.sum())
        n_trip = int(tp.valid.sum())
        entry = {
            "iteration": it,
            "candidates": len(cands),
            "half_covered_triplets": n_half,
            "triplets": n_trip,
            "sliver_percent": 100.0 * n_half / n_trip if n_trip else 0.0,
            "max_delta": 0.0,
            "tv_distance": tv,
            "balls": balls.n,
            "balls_shrunk": 0,
            "balls_added": 0,
            "safe_mode": refiner.cov_alpha != refiner.alpha,
        }
        if not cands:
            entries.append(entry)
            if sink:
                sink(entry)
            return True, entries, dists
        if it == max_iters:
            entries.append(entry)
            if sink:
                sink(entry)
            return False, entries, dists
        plan = plan_shrinks(cands, balls, it)
        entry["max_delta"] = max(d for d, _ in plan.ratios.values())
        mark = len(balls.shrinks)
        n0 = balls.n
        entry["balls_shrunk"] = apply_plan(plan, balls)
        for t in range(3):
            refiner.enforce_lipschitz(t)
        dirty = set()
        refiner.mark_dirty(balls.shrinks[mark:], dirty)
        refiner.run(dirty)
        entry["balls_added"] = balls.n - n0
        entries.append(entry)
        if sink:
            sink(entry)
        log.info("sliver iteration %d: %d candidates, %d balls shrunk", it, len(cands), entry["balls_shrunk"])
    return False, entries, dists


def eliminate_slivers(refiner, log_path=None, max_iterations=None, coverage_samples=None):
    """Shrink, restore and repeat until no seed pair is half-covered.

    ``refiner`` must have completed its refinement. On failure after the
    iteration cap, refinement restarts once with coverage depth ``alpha / 2``
    when ``params.safe_mode`` is set. Returns a :class:`SliverResult`; the
    ball set is ``refiner.balls`` (replaced on a safe-mode restart).
    """
    params = refiner.params
    max_iters = params.max_sliver_iterations if max_iterations is None else max_iterations
    n_cov = params.coverage_samples if coverage_samples is None else coverage_samples
    fh = open(log_path, "w") if log_path else None

    def sink(entry):
        if fh:
            fh.write(json.dumps(entry) + "\n")
            fh.flush()

    try:
        done, entries, dists = _elimination_loop(refiner, max_iters, n_cov, params.rng_seed, sink)
        if done:
            return SliverResult(len(entries) - 1, False, entries, dists)
        if not params.safe_mode:
            raise SliverError("sliver elimination diverged")
        log.warning("sliver elimination did not converge; restarting in safe mode")
        refiner.restart(coverage_alpha=0.5 * params.alpha)
        done, more, dists2 = _elimination_loop(refiner, max_iters, n_cov, params.rng_seed + 1, sink)
        if not done:
            raise SliverError("sliver elimination diverged")
        return SliverResult(len(entries) + len(more) - 1, True, entries + more, dists + dists2)
    finally:
        if fh:
            fh.close()
