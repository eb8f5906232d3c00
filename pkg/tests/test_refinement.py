import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crustmesh import models
from crustmesh.balls import CORNER_BALL, EDGE_BALL, SURFACE_BALL, BallSet
from crustmesh.conditions import check_conditions, exclusivity_violations
from crustmesh.features import detect_features
from crustmesh.mesh_io import build_complex
from crustmesh.params import ALPHA_DEFAULT, Parameters
from crustmesh.planar import Pslg, embed
from crustmesh.refinement import Refiner, is_deep_covered, lipschitz_fixpoint

THETA = math.radians(60)


def relaxation(centers, radii, L):
    """Reference fixpoint: repeat r_i <- min_j (r_j + L d_ij) until nothing changes."""
    r = radii.copy()
    d = np.linalg.norm(centers[:, None] - centers[None], axis=2)
    while True:
        new = np.minimum(r, (r[None, :] + L * d).min(axis=1))
        if np.array_equal(new, r):
            return r
        r = new


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 80), st.floats(0.05, 0.95))
def test_lipschitz_fixpoint_matches_relaxation(seed, n, L):
    rng = np.random.default_rng(seed)
    c = rng.random((n, 3)) * 5
    r = rng.random(n) * 3 + 1e-3
    got = lipschitz_fixpoint(c, r, L)
    np.testing.assert_allclose(got, relaxation(c, r, L), rtol=1e-12, atol=0)
    d = np.linalg.norm(c[:, None] - c[None], axis=2)
    assert np.all(got[:, None] <= got[None, :] + L * d + 1e-12)


def test_lipschitz_fixpoint_large_input_uses_same_answer():
    rng = np.random.default_rng(4)
    c = rng.random((5000, 3)) * 10
    r = rng.random(5000) + 0.01
    got = lipschitz_fixpoint(c, r, 0.25)
    sub = rng.choice(5000, 50, replace=False)
    d = np.linalg.norm(c[sub, None] - c[None], axis=2)
    np.testing.assert_allclose(got[sub], np.minimum(r[sub], (r[None] + 0.25 * d).min(axis=1)), rtol=1e-12)


@pytest.fixture(scope="module")
def cube_strata():
    return detect_features(models.cube(), THETA)


def test_enforce_lipschitz_two_corner_balls(cube_strata):
    ref = Refiner(cube_strata, Parameters.desk(), boundary=_NoBoundary())
    ref.balls.add([0, 0, 0], 1.0, CORNER_BALL, 0, 0, np.zeros(3))
    ref.balls.add([2, 0, 0], 10.0, CORNER_BALL, 1, 0, np.zeros(3))
    shrunk = ref.enforce_lipschitz(CORNER_BALL)
    assert list(shrunk) == [1]
    assert ref.balls.radii.tolist() == [1.0, 1.5]
    assert len(ref.enforce_lipschitz(CORNER_BALL)) == 0


class _NoBoundary:
    def __init__(self, hit=None):
        self.hit = hit

    def nearest_non_cosmooth(self, p, sid, dim, vec):
        return self.hit


def test_initial_radius_examples(cube_strata):
    p = np.array([0.5, 0.5, 1.0])
    ref = Refiner(cube_strata, Parameters.desk(), boundary=_NoBoundary((p + [2, 0, 0], 2.0, None)))
    ref.balls.add(p + [0, 1, 0], 0.5, SURFACE_BALL, 20, 2, np.array([0, 0, 1.0]))
    assert ref.initial_radius(p, 20, 2, np.array([0, 0, 1.0]), SURFACE_BALL) == pytest.approx(0.75, abs=1e-15)

    first = Refiner(cube_strata, Parameters.desk(), boundary=_NoBoundary((p + [3, 0, 0], 3.0, None)))
    assert first.initial_radius(p, 20, 2, np.array([0, 0, 1.0]), SURFACE_BALL) == pytest.approx(0.49 * 3.0)

    small = Refiner(cube_strata, Parameters.desk(sizing=0.1), boundary=_NoBoundary((p + [2, 0, 0], 2.0, None)))
    assert small.initial_radius(p, 20, 2, np.array([0, 0, 1.0]), SURFACE_BALL) == 0.1


def test_is_deep_covered_conventions():
    c = np.zeros(3)
    a = 0.13
    assert is_deep_covered(c, c, 1.0, a)
    assert not is_deep_covered(np.array([1.0, 0, 0]), c, 1.0, a)
    assert is_deep_covered(np.array([1 - a, 0, 0]), c, 1.0, a)


def test_cube_rmps_meets_all_conditions(cube_strata):
    ref = Refiner(cube_strata, Parameters.desk())
    ref.rmps()
    b = ref.balls
    assert np.sum(b.types == CORNER_BALL) == 8
    assert set(b.sids[b.types == EDGE_BALL]) == set(range(8, 20))
    assert set(b.sids[b.types == SURFACE_BALL]) == set(range(20, 26))
    rep = check_conditions(b, cube_strata, 20000)
    assert rep.c1 == rep.c2 == rep.c3 == rep.c4_coverage == rep.c4_separation == rep.exclusivity == 0


def test_oversized_ball_crossing_a_crease_violates_c1(cube_strata):
    b = BallSet()
    b.add([0.5, 0.5, 1.0], 0.8, SURFACE_BALL, 20 + _top_patch(cube_strata), 2, np.array([0, 0, 1.0]))
    rep = check_conditions(b, cube_strata, 5000)
    assert rep.c1 >= 1


def _top_patch(strata):
    m = strata.mesh
    f = int(np.flatnonzero(m.normals[:, 2] > 0.99)[0])
    return int(strata.facet_patch[f])


def test_empty_ball_set_leaves_everything_uncovered(cube_strata):
    rep = check_conditions(BallSet(), cube_strata, 3000)
    assert rep.c4_coverage == rep.n_samples == 3000


def test_circle_crease_with_unit_sizing():
    n, R = 64, 3.0
    ang = 2 * np.pi * np.arange(n) / n
    pslg = Pslg(np.column_stack([R * np.cos(ang), R * np.sin(ang)]), np.column_stack([np.arange(n), (np.arange(n) + 1) % n]))
    strata = embed(pslg, THETA)
    assert strata.n_corners == 0 and strata.n_creases == 1
    ref = Refiner(strata, Parameters.desk(sizing=1.0))
    ref.rmps()
    b = ref.balls
    assert np.all(b.radii <= 1.0)
    c = b.centers
    d = np.linalg.norm(c[:, None] - c[None], axis=2) + np.eye(len(c)) * 1e9
    assert np.all(d >= (1 - ALPHA_DEFAULT) * np.maximum(b.radii[:, None], b.radii[None]) * (1 - 1e-12))
    length = n * np.linalg.norm(pslg.vertices[1] - pslg.vertices[0])
    expected = length / (1 - ALPHA_DEFAULT)
    assert 0.5 * expected <= b.n <= 1.5 * expected
    # coverage scan along the polygon
    rng = np.random.default_rng(0)
    k = rng.integers(0, n, 10**4)
    t = rng.random(10**4)[:, None]
    a3 = strata.mesh.vertices
    X = a3[k] + t * (a3[(k + 1) % n] - a3[k])
    best, _ = b.covered_mask(X)
    assert np.all(best >= ALPHA_DEFAULT - 1e-12)


def test_perpendicular_patches_keep_surface_centers_out_of_edge_balls():
    v = np.array([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0], [1, 0, 1], [1, 1, 1]], dtype=float)
    t = np.array([[0, 1, 2], [0, 2, 3], [1, 4, 5], [1, 5, 2]])
    strata = detect_features(build_complex(v, t), THETA)
    ref = Refiner(strata, Parameters.desk())
    ref.rmps()
    b = ref.balls
    assert exclusivity_violations(b) == 0
    edge = b.ids_of_type(EDGE_BALL)
    surf = b.ids_of_type(SURFACE_BALL)
    assert len(edge) and len(surf)
    d = np.linalg.norm(b.centers[surf, None] - b.centers[None, edge], axis=2)
    assert np.all(d >= b.radii[edge][None, :] * (1 - 1e-12))
    rep = check_conditions(b, strata, 20000)
    assert rep.c1 == rep.c2 == rep.c3 == rep.c4_coverage == 0
