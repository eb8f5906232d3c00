import itertools
import json
import math

import numpy as np
import pytest

from crustmesh import models
from crustmesh.balls import SURFACE_BALL, BallSet
from crustmesh.features import detect_features
from crustmesh.geometry import Sphere, sphere_triplet_points
from crustmesh.params import Parameters
from crustmesh.refinement import Refiner
from crustmesh.slivers import (
    SHRINK_EPS,
    SeedPairCandidate,
    apply_plan,
    eliminate_slivers,
    find_half_covered,
    histogram_depths,
    plan_shrinks,
    shrinkage_ratio,
    triplet_points,
    tv_distance,
)

THETA = math.radians(60)
H = math.sqrt(3) / 2
TRI = np.array([[0, 0, 0], [1, 0, 0], [0.5, H, 0]], dtype=float)
APEX = math.sqrt(2 / 3)  # height of the two common points of three unit spheres on TRI


def three_unit_balls():
    b = BallSet()
    for p in TRI:
        b.add(p, 1.0, SURFACE_BALL, 0, 2, np.zeros(3))
    return b


def brute_half_covered(balls):
    """Independent scan over every triple and every fourth ball."""
    c, r = balls.centers, balls.radii
    out = []
    for t in itertools.combinations(range(balls.n), 3):
        if any(np.linalg.norm(c[i] - c[j]) >= r[i] + r[j] for i, j in itertools.combinations(t, 2)):
            continue
        pts = sphere_triplet_points(*(Sphere(c[i], r[i]) for i in t))
        if pts is None or len(pts) != 2 or np.allclose(pts[0], pts[1]):
            continue
        cov = []
        for g in pts:
            d = np.linalg.norm(c - g, axis=1)
            inside = d < r * (1 - 1e-10)
            inside[list(t)] = False
            cov.append(bool(inside.any()))
        if cov[0] != cov[1]:
            out.append(t)
    return out


def test_shrinkage_ratio_hand_example():
    q = np.zeros(3)
    delta, bound = shrinkage_ratio(q, 1.0, [1.2, 0, 0], [0, 0.9, 0])
    assert delta == pytest.approx(0.1, abs=1e-15)
    assert bound == pytest.approx(1 / 3, abs=1e-15)
    assert delta <= bound


def test_shrinkage_ratio_tangential_is_zero():
    assert shrinkage_ratio(np.zeros(3), 1.0, [2.0, 0, 0], [1.0, 0, 0])[0] == 0.0


def test_shrinkage_ratio_rejects_reversed_orientation():
    with pytest.raises(ValueError, match="not half-covered"):
        shrinkage_ratio(np.zeros(3), 1.0, [0.5, 0, 0], [1.5, 0, 0])


def test_three_balls_alone_are_not_emitted():
    assert find_half_covered(three_unit_balls()) == []


def test_deep_fourth_ball_covering_both_points_is_not_emitted():
    b = three_unit_balls()
    b.add(TRI.mean(axis=0), APEX + 0.1, SURFACE_BALL, 0, 2, np.zeros(3))
    tp = triplet_points(b)
    assert tp.covered_up[0] and tp.covered_down[0]
    assert all(cand.triplet != (0, 1, 2) for _, cand in find_half_covered(b, tp))


def test_single_quartet_shrinks_the_barely_covering_ball():
    b = three_unit_balls()
    q = TRI.mean(axis=0) + [0, 0, -1.5]
    g_down = TRI.mean(axis=0) + [0, 0, -APEX]
    b.add(q, 1.5 - APEX + 1e-3, SURFACE_BALL, 0, 2, np.zeros(3))
    cands = find_half_covered(b)
    assert {quartet for quartet, _ in cands} == {(0, 1, 2, 3)}
    plan = plan_shrinks(cands, b)
    assert list(plan.radii) == [3]
    assert plan.radii[3] == pytest.approx(np.linalg.norm(q - g_down) * (1 - SHRINK_EPS), rel=1e-14)
    assert apply_plan(plan, b) == 1
    assert find_half_covered(b) == []
    assert brute_half_covered(b) == []


def test_empty_candidates_give_empty_plan():
    assert len(plan_shrinks([], three_unit_balls())) == 0


def test_shared_ball_keeps_the_smaller_demand():
    b = BallSet()
    for k in range(7):
        b.add([3.0 * k, 0, 0], 1.0, SURFACE_BALL, 0, 2, np.zeros(3))
    q = b.centers[3]
    far = q + [5.0, 0, 0]
    a = SeedPairCandidate((0, 1, 2), far, q + [0.5, 0, 0], False, True, (3,))
    c = SeedPairCandidate((4, 5, 6), far, q + [0, 0.4, 0], False, True, (3,))
    plan = plan_shrinks([((0, 1, 2, 3), a), ((3, 4, 5, 6), c)], b)
    assert plan.radii == {3: pytest.approx(0.4 * (1 - SHRINK_EPS), rel=1e-15)}


def test_tv_of_identical_distributions_is_zero():
    f = np.random.default_rng(0).random(1000)
    assert tv_distance(histogram_depths(f), histogram_depths(f)) == 0.0


def test_uniform_depths_give_linear_cdf():
    f = (np.arange(100000) + 0.5) / 100000
    d = histogram_depths(f)
    assert d.counts.sum() == d.n
    np.testing.assert_allclose(d.cdf, np.arange(1, 101) / 100, atol=1e-12)
    assert np.all(np.diff(d.cdf) >= 0)


def test_uncovered_samples_are_counted_separately():
    d = histogram_depths([0.5, -np.inf, 0.2, -0.1])
    assert d.uncovered == 2 and d.counts.sum() == 2


def test_no_triplets_means_no_iterations():
    strata = detect_features(models.cube(), THETA)
    ref = Refiner(strata, Parameters.desk())
    ref.balls.add([0, 0, 0], 0.1, SURFACE_BALL, 20, 2, np.zeros(3))
    res = eliminate_slivers(ref, coverage_samples=1000)
    assert res.iterations == 0 and not res.safe_mode


@pytest.fixture(scope="module")
def sphere_run(tmp_path_factory):
    strata = detect_features(models.icosphere(2), THETA)
    ref = Refiner(strata, Parameters.desk())
    ref.rmps()
    before = ref.balls.radii.copy()
    log = tmp_path_factory.mktemp("slivers") / "log.jsonl"
    res = eliminate_slivers(ref, log_path=str(log), coverage_samples=20000)
    return ref, before, res, log


def test_sphere_elimination_reaches_a_fixpoint(sphere_run):
    ref, _, res, _ = sphere_run
    assert not res.safe_mode and res.iterations <= 100
    assert find_half_covered(ref.balls) == []
    assert brute_half_covered(ref.balls) == []


def test_elimination_only_shrinks(sphere_run):
    ref, before, _, _ = sphere_run
    assert np.all(ref.balls.radii[: len(before)] <= before)


def test_elimination_log_has_one_line_per_iteration(sphere_run):
    _, _, res, log = sphere_run
    rows = [json.loads(line) for line in log.read_text().splitlines()]
    assert len(rows) == res.iterations + 1
    assert rows[-1]["candidates"] == 0
    for key in ("candidates", "max_delta", "tv_distance", "balls_shrunk", "balls_added"):
        assert key in rows[0]
