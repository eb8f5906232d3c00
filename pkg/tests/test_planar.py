import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crustmesh import models
from crustmesh.params import Parameters
from crustmesh.planar import (
    PlanarError,
    Pslg,
    brute_force_cells_2d,
    circle_intersections,
    compute_cells_2d,
    load_pslg,
    mesh_2d,
    non_convex_cells_2d,
    nonconsecutive_overlaps,
    planar_corners,
    read_pslg,
    write_pslg,
    write_svg,
)
from crustmesh.seeding import EXTERIOR, INTERIOR, SURFACE

THETA = math.radians(60)
SQUARE = Pslg(np.array([[0, 0], [1, 0], [1, 1], [0, 1.0]]), np.array([[0, 1], [1, 2], [2, 3], [3, 0]]))


def regular_polygon(n, r=1.0):
    a = 2 * np.pi * np.arange(n) / n
    return Pslg(np.column_stack([r * np.cos(a), r * np.sin(a)]), np.column_stack([np.arange(n), (np.arange(n) + 1) % n]))


def in_square_with_hole(p, outer=1.0, inner=0.4):
    ax = np.abs(p)
    return (ax.max(axis=1) < outer / 2) & ~(ax.max(axis=1) < inner / 2)


def test_corner_detection():
    assert planar_corners(SQUARE, THETA).tolist() == [True] * 4
    assert not planar_corners(regular_polygon(12), THETA).any()
    star = Pslg(np.array([[0, 0], [1, 0], [-1, 0.1], [0, 1.0]]), np.array([[0, 1], [0, 2], [0, 3]]))
    assert planar_corners(star, THETA).tolist() == [True, True, True, True]


def test_invalid_graphs_are_rejected():
    with pytest.raises(PlanarError, match="intersect"):
        Pslg(np.array([[0, 0], [1, 1], [0, 1], [1, 0.0]]), np.array([[0, 1], [2, 3]]))
    with pytest.raises(PlanarError, match="out of range"):
        Pslg(np.array([[0, 0], [1, 1.0]]), np.array([[0, 2]]))
    with pytest.raises(PlanarError, match="repeated"):
        Pslg(np.array([[0, 0], [1, 1.0]]), np.array([[0, 1], [1, 0]]))


def test_read_plain_and_numbered_formats(tmp_path):
    plain = "4\n0 0\n1 0\n1 1\n0 1\n4\n0 1\n1 2\n2 3\n3 0\n"
    numbered = "# square\n4 2 0 0\n1 0 0\n2 1 0\n3 1 1\n4 0 1\n4 0\n1 1 2\n2 2 3\n3 3 4\n4 4 1\n0\n"
    for text in (plain, numbered):
        g = read_pslg(text)
        assert g.vertices.tolist() == SQUARE.vertices.tolist()
        assert g.segments.tolist() == SQUARE.segments.tolist()
    write_pslg(tmp_path / "sq.poly", SQUARE)
    back = load_pslg(tmp_path / "sq.poly")
    assert np.array_equal(back.vertices, SQUARE.vertices) and np.array_equal(back.segments, SQUARE.segments)
    with pytest.raises(PlanarError, match="malformed"):
        read_pslg("3\n0 0\n1 0\n")


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_even_odd_inside_matches_oracle(seed):
    pts, segs = models.square_with_hole()
    g = Pslg(pts, segs)
    X = np.random.default_rng(seed).uniform(-0.7, 0.7, (500, 2))
    assert np.array_equal(g.inside(X), in_square_with_hole(X))


def test_circle_intersections_lie_on_both_circles():
    c0, c1 = np.array([0.0, 0.0]), np.array([1.0, 0.0])
    left, right = circle_intersections(c0, 0.8, c1, 0.6)
    for p in (left, right):
        assert np.linalg.norm(p - c0) == pytest.approx(0.8, abs=1e-15)
        assert np.linalg.norm(p - c1) == pytest.approx(0.6, abs=1e-15)
    assert left[1] > 0 > right[1]
    assert circle_intersections(c0, 0.4, c1, 0.5) is None


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 120))
def test_cells_2d_match_brute_force(seed, n):
    pts = np.random.default_rng(seed).random((n, 2))
    fast, ref = compute_cells_2d(pts, np.zeros(2), np.ones(2)), brute_force_cells_2d(pts, np.zeros(2), np.ones(2))
    for a, b in zip(fast, ref):
        assert a.area == pytest.approx(b.area, rel=1e-9, abs=1e-15)
        assert sorted(map(tuple, np.round(a.vertices, 9))) == sorted(map(tuple, np.round(b.vertices, 9)))
    assert sum(c.area for c in fast) == pytest.approx(1.0, rel=1e-9)
    assert non_convex_cells_2d(fast) == 0


def check_mirrored_pairs(res):
    surf = res.seeds.kinds == SURFACE
    trip = res.seeds.triplets[surf]
    pts = res.seeds.points[surf]
    c = res.balls.centers[:, :2]
    for key in {tuple(t) for t in trip.tolist()}:
        k = np.flatnonzero((trip == key).all(axis=1))
        assert len(k) == 2
        a, b = key[0], key[1]
        u = (c[b] - c[a]) / np.linalg.norm(c[b] - c[a])
        p, q = pts[k[0]], pts[k[1]]
        # the pair is symmetric across the line through the two disk centers
        assert abs(np.dot(p - q, u)) < 1e-9
        mid = 0.5 * (p + q) - c[a]
        assert abs(mid[0] * u[1] - mid[1] * u[0]) < 1e-9


@pytest.fixture(scope="module")
def square_run():
    return mesh_2d(SQUARE, Parameters.desk(), n_hausdorff=5000)


def test_unit_square(square_run):
    r = square_run.report
    assert r["corners"] == 4 and r["non_convex_cells"] == 0
    assert r["hausdorff"] <= 1e-2
    assert r["area_relative_error"] <= 1e-6
    assert nonconsecutive_overlaps(square_run.strata, square_run.balls) == []
    corner_balls = square_run.balls.centers[square_run.balls.types == 0][:, :2]
    assert sorted(map(tuple, corner_balls)) == sorted(map(tuple, SQUARE.vertices))
    check_mirrored_pairs(square_run)


def test_square_interior_seeds_are_inside():
    # at unbounded sizing the boundary disks already cover the unit square
    s = mesh_2d(SQUARE, Parameters.desk(sizing=0.1), n_hausdorff=1000).seeds
    vol = s.points[s.kinds != SURFACE]
    assert len(vol) > 0
    assert np.all((vol > 0) & (vol < 1))


@pytest.fixture(scope="module")
def hole_run():
    pts, segs = models.square_with_hole()
    return mesh_2d(Pslg(pts, segs), Parameters.desk(), n_hausdorff=5000)


def test_square_with_hole_labels_follow_parity(hole_run):
    s = hole_run.seeds
    expect = np.where(in_square_with_hole(s.points), INTERIOR, EXTERIOR)
    assert np.array_equal(s.labels, expect)
    hole = np.abs(s.points).max(axis=1) < 0.2
    assert hole.any() and np.all(s.labels[hole] == EXTERIOR)


def test_square_with_hole_is_conforming(hole_run):
    r = hole_run.report
    assert r["corners"] == 8 and r["non_convex_cells"] == 0
    assert r["hausdorff"] <= 1e-2
    assert r["area_relative_error"] <= 1e-6
    assert nonconsecutive_overlaps(hole_run.strata, hole_run.balls) == []
    check_mirrored_pairs(hole_run)


def test_single_segment_places_seeds_without_interior():
    seg = Pslg(np.array([[0, 0], [1, 0.0]]), np.array([[0, 1]]))
    res = mesh_2d(seg, Parameters.desk(), interior="none", n_hausdorff=1000)
    assert res.report["n_surface_seeds"] > 0
    assert res.report["n_volume_seeds"] == 0
    with pytest.raises(PlanarError, match="unbounded interior"):
        mesh_2d(seg, Parameters.desk(), interior="random")


def test_svg_output(tmp_path, square_run):
    write_svg(tmp_path / "c.svg", square_run)
    text = (tmp_path / "c.svg").read_text()
    assert text.startswith("<svg") or text.startswith("<?xml")
    assert text.count("<polygon") >= len(square_run.cells) - 4
