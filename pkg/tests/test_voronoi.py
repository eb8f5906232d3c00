import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from crustmesh import models
from crustmesh.geometry import ConvexPolyhedron
from crustmesh.mesh_io import build_complex
from crustmesh.params import Parameters
from crustmesh.pipeline import mesh_3d
from crustmesh.quality import quality_report
from crustmesh.voronoi import (
    SurfaceMesh,
    VoronoiError,
    brute_force_cells,
    cell_aspect_ratios,
    compute_cells,
    extract_surface,
    verify_convexity,
    write_cells_text,
    write_vtk,
)

LO, HI = np.zeros(3), np.ones(3)


def vertex_key(poly, nd=9):
    return sorted(map(tuple, np.round(poly.vertices, nd)))


def test_two_seeds_split_the_box_in_half():
    cells = compute_cells([[0.25, 0.5, 0.5], [0.75, 0.5, 0.5]], LO, HI)
    for c in cells:
        assert c.poly.volume() == pytest.approx(0.5, abs=1e-15)
        assert c.neighbors.count(1 - c.seed) == 1
    x = cells[0].poly.vertices[:, 0]
    assert set(np.round(x, 15)) == {0.0, 0.5}


def test_cube_corner_seeds_match_brute_force():
    pts = np.array([[x, y, z] for x in (-1, 1) for y in (-1, 1) for z in (-1, 1)], dtype=float)
    lo, hi = np.full(3, -5.0), np.full(3, 5.0)
    fast, ref = compute_cells(pts, lo, hi), brute_force_cells(pts, lo, hi)
    for a, b in zip(fast, ref):
        assert vertex_key(a.poly) == vertex_key(b.poly)
        assert [0.0, 0.0, 0.0] in a.poly.vertices.tolist()


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_random_cells_match_brute_force_and_tile_the_box(seed):
    pts = np.random.default_rng(seed).random((100, 3))
    fast, ref = compute_cells(pts, LO, HI), brute_force_cells(pts, LO, HI)
    for a, b in zip(fast, ref):
        assert a.poly.volume() == pytest.approx(b.poly.volume(), rel=1e-9, abs=1e-15)
        assert vertex_key(a.poly, 8) == vertex_key(b.poly, 8)
        assert sorted(t for t in a.neighbors if t >= 0) == sorted(t for t in b.neighbors if t >= 0)
    assert sum(c.poly.volume() for c in fast) == pytest.approx(1.0, rel=1e-6)
    assert verify_convexity(fast, 1.0, points=pts) == 0


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_faces_are_reciprocal_bisectors(seed):
    pts = np.random.default_rng(seed).random((60, 3))
    cells = compute_cells(pts, LO, HI)
    faces = {}
    for c in cells:
        for f, t in zip(c.poly.faces, c.poly.tags):
            if t < 0:
                continue
            v = c.poly.vertices[f]
            p, q = pts[c.seed], pts[t]
            # every vertex is equidistant from both seeds
            diff = np.linalg.norm(v - p, axis=1) - np.linalg.norm(v - q, axis=1)
            assert np.abs(diff).max() < 1e-9
            faces[(c.seed, t)] = v
    for (i, j), v in faces.items():
        assert (j, i) in faces
        w = faces[(j, i)]
        d = np.linalg.norm(v[:, None] - w[None], axis=2)
        assert d.min(axis=1).max() < 1e-9 and d.min(axis=0).max() < 1e-9


def test_duplicate_seeds_are_rejected():
    with pytest.raises(VoronoiError, match="duplicate seeds"):
        compute_cells([[0.5, 0.5, 0.5], [0.5, 0.5, 0.5]], LO, HI)


def test_l_shaped_polyhedron_is_counted_non_convex():
    v = np.array([[0, 0, 0], [2, 0, 0], [2, 1, 0], [1, 1, 0], [1, 2, 0], [0, 2, 0]], dtype=float)
    top = v + [0, 0, 1]
    verts = np.vstack([v, top])
    faces = [[5, 4, 3, 2, 1, 0], [6, 7, 8, 9, 10, 11]] + [[k, (k + 1) % 6, (k + 1) % 6 + 6, k + 6] for k in range(6)]
    l_shape = ConvexPolyhedron(verts, faces)
    cube = ConvexPolyhedron.box(LO, HI)
    assert verify_convexity([cube]) == 0
    assert verify_convexity([cube, l_shape]) == 1


def test_opposite_labels_give_one_facet_and_equal_labels_none():
    pts = np.array([[0.25, 0.5, 0.5], [0.75, 0.5, 0.5]])
    cells = compute_cells(pts, LO, HI)
    s = extract_surface(cells, [1, 0])
    assert len(s.facets) == 1 and s.pairs.tolist() == [[0, 1]]
    np.testing.assert_allclose(s.vertices[:, 0], 0.5, atol=1e-15)
    # outward from the interior seed at x = 0.25
    p = s.vertices[s.facets[0]]
    n = np.cross(p[1] - p[0], p[2] - p[0])
    assert n[0] > 0
    assert extract_surface(cells, [1, 1]).facets == []
    assert extract_surface(cells, [0, 0]).facets == []


def test_surface_identical_to_input_has_zero_hausdorff():
    m = models.cube()
    s = SurfaceMesh(m.vertices.copy(), [list(t) for t in m.triangles], np.zeros((len(m.triangles), 2), int))
    rep = quality_report(s, [], m, np.zeros(0, int), n_hausdorff=2000, rng=np.random.default_rng(0))
    assert rep.hausdorff == pytest.approx(0.0, abs=1e-15)
    assert rep.non_convex_cells == 0


def test_equilateral_surface_has_perfect_quality():
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    t = np.array([[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]])
    m = build_complex(v, t)
    s = SurfaceMesh(v, [list(x) for x in t], np.zeros((4, 2), int))
    rep = quality_report(s, [], m, np.zeros(0, int), n_hausdorff=100, rng=np.random.default_rng(0))
    assert rep.frac_angle_below_30 == 0.0 and rep.frac_angle_above_90 == 0.0
    assert rep.q_min == pytest.approx(1.0, abs=1e-12)
    assert rep.euler_characteristic == 2


def test_uniform_grid_cells_have_cube_aspect_ratio():
    g = (np.arange(3) + 0.5) / 3
    pts = np.stack(np.meshgrid(g, g, g, indexing="ij"), axis=-1).reshape(-1, 3)
    rho = cell_aspect_ratios(compute_cells(pts, LO, HI))
    np.testing.assert_allclose(rho, math.sqrt(3), rtol=1e-9)


def test_writers_emit_every_cell(tmp_path):
    pts = np.random.default_rng(1).random((10, 3))
    cells = compute_cells(pts, LO, HI)
    write_vtk(tmp_path / "v.vtk", cells, np.ones(10, int))
    write_cells_text(tmp_path / "c.txt", cells)
    text = (tmp_path / "v.vtk").read_text()
    assert "UNSTRUCTURED_GRID" in text and "CELL_TYPES 10" in text
    assert (tmp_path / "c.txt").read_text().count("cell ") == 10


@pytest.fixture(scope="module")
def sphere_run():
    return mesh_3d(models.icosphere(2), Parameters.desk(), interior="none", n_hausdorff=2000)


def test_sphere_surface_is_a_closed_sphere(sphere_run):
    s = sphere_run.surface
    assert s.is_closed_manifold()
    assert s.euler_characteristic() == 2
    assert sphere_run.report.non_convex_cells == 0


def test_sphere_facets_bisect_their_seed_pairs(sphere_run):
    s, pts = sphere_run.surface, sphere_run.seeds.points
    labels = sphere_run.seeds.labels
    for f, (i, j) in zip(s.facets, s.pairs):
        assert labels[i] == 1 and labels[j] == 0
        v = s.vertices[f]
        diff = np.linalg.norm(v - pts[i], axis=1) - np.linalg.norm(v - pts[j], axis=1)
        assert np.abs(diff).max() < 1e-9


def test_sphere_surface_has_no_steiner_vertices(sphere_run):
    # every surface vertex is a sample with at least four seeds on its sphere
    b = sphere_run.balls
    v = sphere_run.surface.vertices
    pts = sphere_run.seeds.points
    d = np.linalg.norm(v[:, None] - b.centers[None], axis=2)
    k = d.argmin(axis=1)
    assert np.all(d[np.arange(len(v)), k] <= 1e-7 * b.radii[k])
    ds = np.linalg.norm(pts[None] - b.centers[k][:, None], axis=2)
    on_sphere = np.abs(ds - b.radii[k][:, None]) <= 1e-7 * b.radii[k][:, None]
    assert on_sphere.sum(axis=1).min() >= 4


def test_expanded_box_triples_each_extent_and_inflates_flat_axes():
    from crustmesh.voronoi import expanded_box

    lo, hi = expanded_box([0, 0, 0], [2, 1, 1])
    assert lo.tolist() == [-2, -1, -1] and hi.tolist() == [4, 2, 2]
    lo, hi = expanded_box([0, 0], [1, 0])
    assert lo.tolist() == [-1, -1.5] and hi.tolist() == [2, 1.5]
