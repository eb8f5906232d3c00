import json

import numpy as np
import pytest

from crustmesh import models
from crustmesh.cli import EXIT_INPUT, EXIT_OK, EXIT_PIPELINE, EXIT_USAGE, main
from crustmesh.mesh_io import write_off
from crustmesh.planar import Pslg, write_pslg
from crustmesh.seeding import SeedSet


@pytest.fixture(scope="module")
def cube_off(tmp_path_factory):
    path = tmp_path_factory.mktemp("in") / "cube.off"
    m = models.cube()
    write_off(path, m.vertices, m.triangles)
    return str(path)


@pytest.fixture(scope="module")
def hole_poly(tmp_path_factory):
    path = tmp_path_factory.mktemp("in") / "hole.poly"
    write_pslg(path, Pslg(*models.square_with_hole()))
    return str(path)


def report(out):
    with open(out / "report.json") as fh:
        r = json.load(fh)
    r.pop("timings", None)
    return r


def test_mesh3d_writes_all_outputs(tmp_path, cube_off):
    out = tmp_path / "run"
    assert main(["mesh3d", cube_off, "--desk", "--interior", "none", "--out", str(out)]) == EXIT_OK
    for name in ("seeds.csv", "surface.off", "volume.vtk", "cells.txt", "report.json", "sliver_log.jsonl"):
        assert (out / name).exists(), name
    r = report(out)
    assert r["non_convex_cells"] == 0 and r["euler_characteristic"] == 2
    assert r["extra"]["surface_closed_manifold"]


def test_seeds_only_then_report_only(tmp_path, cube_off):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["seeds-only", cube_off, "--desk", "--interior", "none", "--out", str(a)]) == EXIT_OK
    assert not (a / "report.json").exists()
    seeds = SeedSet.from_csv(a / "seeds.csv")
    assert len(seeds) > 0
    argv = ["report-only", cube_off, "--desk", "--seeds", str(a / "seeds.csv"), "--out", str(b)]
    assert main(argv) == EXIT_OK
    r = report(b)
    assert r["n_surface_seeds"] == len(seeds) and r["euler_characteristic"] == 2


def test_mesh2d(tmp_path, hole_poly):
    out = tmp_path / "p"
    assert main(["mesh2d", hole_poly, "--desk", "--out", str(out)]) == EXIT_OK
    assert (out / "cells.svg").exists() and (out / "seeds.csv").exists()
    assert report(out)["non_convex_cells"] == 0


def test_same_seed_gives_identical_outputs(tmp_path, hole_poly, cube_off):
    for argv in (["mesh2d", hole_poly], ["mesh3d", cube_off, "--interior", "none"]):
        outs = []
        for k in range(2):
            out = tmp_path / ("%s-%d" % (argv[0], k))
            assert main(argv + ["--desk", "--seed", "7", "--out", str(out)]) == EXIT_OK
            outs.append(out)
        assert (outs[0] / "seeds.csv").read_bytes() == (outs[1] / "seeds.csv").read_bytes()
        assert report(outs[0]) == report(outs[1])


def test_different_seeds_change_interior_sampling(tmp_path, hole_poly):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["mesh2d", hole_poly, "--desk", "--seed", "1", "--out", str(a)])
    main(["mesh2d", hole_poly, "--desk", "--seed", "2", "--out", str(b)])
    assert (a / "seeds.csv").read_bytes() != (b / "seeds.csv").read_bytes()


def test_missing_input_is_an_input_error(tmp_path, capsys):
    assert main(["mesh3d", str(tmp_path / "nope.off"), "--out", str(tmp_path)]) == EXIT_INPUT
    err = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert err["error"] and "nope.off" in err["message"]


def test_malformed_input_is_an_input_error(tmp_path):
    bad = tmp_path / "bad.off"
    bad.write_text("OFF\n3 1 0\n0 0 0\n")
    assert main(["mesh3d", str(bad), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    poly = tmp_path / "bad.poly"
    poly.write_text("2\n0 0\n1 1\n1\n0 5\n")
    assert main(["mesh2d", str(poly), "--out", str(tmp_path / "o")]) == EXIT_INPUT


def test_open_graph_with_interior_is_rejected(tmp_path):
    poly = tmp_path / "seg.poly"
    write_pslg(poly, Pslg(np.array([[0, 0], [1, 0.0]]), np.array([[0, 1]])))
    assert main(["mesh2d", str(poly), "--desk", "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert main(["mesh2d", str(poly), "--desk", "--interior", "none", "--out", str(tmp_path / "n")]) == EXIT_OK


@pytest.mark.parametrize(
    "argv",
    [
        ["mesh3d"],
        ["explode", "x.off"],
        ["mesh3d", "x.off", "--lipschitz", "1.5"],
        ["mesh3d", "x.off", "--theta-sharp", "95"],
        ["mesh3d", "x.off", "--sizing", "-1"],
        ["mesh3d", "x.off", "--interior", "lattice:0"],
        ["mesh3d", "x.off", "--seed", "-3"],
        ["report-only", "x.off"],
    ],
)
def test_bad_arguments_are_usage_errors(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_USAGE


def test_pipeline_error_code_is_distinct():
    assert EXIT_PIPELINE not in (EXIT_OK, EXIT_USAGE, EXIT_INPUT)
