import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crustmesh import models
from crustmesh.balls import SURFACE_BALL, BallSet
from crustmesh.params import Parameters
from crustmesh.pipeline import make_seeds
from crustmesh.seeding import (
    EXTERIOR,
    INTERIOR,
    SURFACE,
    VOLUME,
    SeedSet,
    inside_mesh,
    interior_seeds_lattice,
    interior_seeds_random,
    surface_seeds,
)

L = 0.25
UP = np.array([0, 0, 1.0])


def flat_balls(points, r):
    b = BallSet()
    for p in points:
        b.add(p, r, SURFACE_BALL, 0, 2, UP)
    return b


def seed_set(points, radii, labels):
    n = len(points)
    return SeedSet(np.asarray(points, float), np.asarray(radii, float), np.asarray(labels),
                   np.full(n, SURFACE), np.full((n, 3), -1))


def test_three_balls_give_one_seed_per_side():
    h = math.sqrt(3) / 2
    s = surface_seeds(flat_balls([[0, 0, 0], [1, 0, 0], [0.5, h, 0]], 1.0), scale=1.0)
    assert len(s) == 2
    up = s.points[:, 2] > 0
    assert up.sum() == 1
    assert s.labels[up][0] == EXTERIOR and s.labels[~up][0] == INTERIOR
    np.testing.assert_allclose(s.radii, 1.0)


def test_flat_patch_seeds_come_in_mirrored_pairs():
    # a triangular lattice of balls in the plane z = 0
    a = 1.0
    pts = [[a * (i + 0.5 * (j % 2)), a * math.sqrt(3) / 2 * j, 0.0] for i in range(6) for j in range(6)]
    s = surface_seeds(flat_balls(pts, 0.7 * a), scale=6.0)
    assert len(s) > 0
    z = s.points[:, 2]
    assert np.all(np.abs(z) > 1e-6)
    assert np.all(s.labels[z > 0] == EXTERIOR) and np.all(s.labels[z < 0] == INTERIOR)
    mirror = s.points * [1, 1, -1]
    d = np.linalg.norm(mirror[:, None] - s.points[None], axis=2).min(axis=1)
    assert d.max() < 1e-12


@pytest.fixture(scope="module")
def cube_seeds():
    return make_seeds(models.cube(), Parameters.desk(), interior="random")


def test_cube_balls_carry_at_least_four_seeds(cube_seeds):
    b = cube_seeds.balls
    surf = cube_seeds.seeds.surface()
    d = np.linalg.norm(surf.points[None] - b.centers[:, None], axis=2)
    on_sphere = np.abs(d - b.radii[:, None]) <= 1e-9 * b.radii[:, None]
    assert on_sphere.sum(axis=1).min() >= 4


def test_cube_interior_seeds_are_strictly_inside(cube_seeds):
    vol = cube_seeds.seeds.volume()
    assert len(vol) > 0
    assert np.all(vol.labels == INTERIOR)
    assert np.all((vol.points > 0) & (vol.points < 1))


def test_cube_interior_seeds_respect_guidance_balls(cube_seeds):
    seeds, b = cube_seeds.seeds, cube_seeds.balls
    vol, surf = seeds.volume(), seeds.surface()
    d = np.linalg.norm(vol.points[:, None] - surf.points[None], axis=2)
    assert np.all(d > surf.radii[None])
    d = np.linalg.norm(vol.points[:, None] - b.centers[None], axis=2)
    assert np.all(d > b.radii[None])
    d = np.linalg.norm(vol.points[:, None] - vol.points[None], axis=2)
    iu = np.triu_indices(len(vol), 1)
    assert np.all(d[iu] >= np.minimum(vol.radii[:, None], vol.radii[None])[iu])
    assert np.all(vol.radii[:, None] <= vol.radii[None] + L * d + 1e-12)


def test_interior_labels_agree_with_ray_casting(cube_seeds):
    vol = cube_seeds.seeds.volume()
    m = cube_seeds.strata.mesh
    assert inside_mesh(vol.points, m.vertices, m.triangles).all()


def test_domain_inside_guidance_balls_gets_no_interior_seeds():
    s = seed_set([[0.5, 0.5, 0.0], [0.5, 0.5, 0.1]], [5.0, 5.0], [INTERIOR, EXTERIOR])
    out, stats = interior_seeds_random(s, None, L, np.random.default_rng(0), np.zeros(3), np.ones(3))
    assert len(out) == 0 and stats.darts == 100


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 12))
def test_random_interior_invariants(seed, n):
    rng = np.random.default_rng(seed)
    pts = rng.random((n, 3))
    s = seed_set(pts, rng.random(n) * 0.2 + 0.1, rng.integers(0, 2, n))
    out, _ = interior_seeds_random(s, None, L, np.random.default_rng(seed + 1), np.zeros(3), np.ones(3),
                                   keep_exterior=True)
    if len(out) == 0:
        return
    assert np.all((out.points >= 0) & (out.points <= 1))
    d = np.linalg.norm(out.points[:, None] - pts[None], axis=2)
    assert np.all(d > s.radii[None])
    k = d.argmin(axis=1)
    assert np.array_equal(out.labels, s.labels[k])
    dz = np.linalg.norm(out.points[:, None] - out.points[None], axis=2)
    assert np.all(out.radii[:, None] <= out.radii[None] + L * dz + 1e-12)
    assert np.all(out.radii <= s.radii[k] + L * d[np.arange(len(out)), k] + 1e-12)


def lattice_oracle(surf, balls, spacing, lo, hi):
    kept = []
    n = [int(round((hi[k] - lo[k]) / spacing)) + 1 for k in range(3)]
    for i in range(n[0]):
        for j in range(n[1]):
            for k in range(n[2]):
                p = np.array(lo) + spacing * np.array([i, j, k])
                if np.any(np.linalg.norm(surf.points - p, axis=1) <= surf.radii):
                    continue
                if np.any(np.linalg.norm(balls.centers - p, axis=1) <= balls.radii):
                    continue
                if surf.labels[np.argmin(np.linalg.norm(surf.points - p, axis=1))] == INTERIOR:
                    kept.append(p)
    return np.array(kept).reshape(-1, 3)


def test_lattice_matches_oracle_filter(cube_seeds):
    seeds, b = cube_seeds.seeds, cube_seeds.balls
    got = interior_seeds_lattice(seeds.surface(), b, 0.2, L, np.zeros(3), np.ones(3))
    ref = lattice_oracle(seeds.surface(), b, 0.2, [0, 0, 0], [1, 1, 1])
    assert len(got) == len(ref)
    assert sorted(map(tuple, np.round(got.points, 12))) == sorted(map(tuple, np.round(ref, 12)))
    assert np.all(got.kinds == VOLUME)


def test_lattice_coarser_than_domain_keeps_at_most_one_point(cube_seeds):
    got = interior_seeds_lattice(cube_seeds.seeds.surface(), cube_seeds.balls, 5.0, L, np.zeros(3), np.ones(3))
    assert len(got) <= 1


def test_lattice_point_on_a_guidance_sphere_is_excluded():
    s = seed_set([[0.0, 0.0, 0.0]], [0.2], [INTERIOR])
    got = interior_seeds_lattice(s, BallSet(), 0.2, L, np.zeros(3), np.array([0.4, 0.0, 0.0]))
    assert got.points.tolist() == [[0.4, 0.0, 0.0]]


def test_lattice_spacing_must_be_positive():
    s = seed_set([[0.0, 0.0, 0.0]], [0.2], [INTERIOR])
    for bad in (0.0, -1.0):
        with pytest.raises(ValueError):
            interior_seeds_lattice(s, BallSet(), bad, L, np.zeros(3), np.ones(3))


def test_csv_round_trip(tmp_path, cube_seeds):
    s = cube_seeds.seeds
    s.to_csv(tmp_path / "s.csv")
    back = SeedSet.from_csv(tmp_path / "s.csv")
    assert np.array_equal(back.points, s.points)
    assert np.array_equal(back.radii, s.radii)
    assert np.array_equal(back.labels, s.labels) and np.array_equal(back.kinds, s.kinds)
