"""End-to-end 3D run: features, balls, slivers, seeds, cells, surface, report."""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field

import numpy as np

from .features import detect_features
from .params import Parameters
from .quality import quality_report
from .refinement import Refiner
from .rng import stream
from .seeding import INTERIOR, SeedSet, interior_seeds_lattice, interior_seeds_random, surface_seeds
from .slivers import eliminate_slivers
from .subdivision import smooth_patches
from .voronoi import compute_cells, expanded_box, extract_surface, write_cells_text, write_vtk

log = logging.getLogger(__name__)


@dataclass
class RunResult:
    strata: object
    refiner: object
    slivers: object
    seeds: SeedSet
    cells: list = None
    surface: object = None
    report: object = None
    timings: dict = field(default_factory=dict)
    interior_stats: object = None

    @property
    def balls(self):
        return self.refiner.balls


def parse_interior(spec):
    """``random``, ``none`` or ``lattice:SPACING`` into ``(mode, spacing)``."""
    if spec in ("random", "none"):
        return spec, None
    if spec.startswith("lattice:"):
        spacing = float(spec.split(":", 1)[1])
        if not spacing > 0:
            raise ValueError("lattice spacing must be positive")
        return "lattice", spacing
    raise ValueError("interior must be random, none or lattice:SPACING")


def prepare(mesh, params: Parameters):
    strata = detect_features(mesh, params.theta_sharp)
    return smooth_patches(strata, params.smoothing_dihedral_threshold, params.smoothing_iterations)


def make_seeds(mesh, params, interior="random", sliver_log=None):
    """Everything up to the seed set; returns a :class:`RunResult` without cells."""
    timings = {}
    t0 = time.perf_counter()
    strata = prepare(mesh, params)
    refiner = Refiner(strata, params)
    refiner.rmps()
    result = eliminate_slivers(refiner, log_path=sliver_log)
    seeds = surface_seeds(refiner.balls, strata)
    timings["surface"] = time.perf_counter() - t0
    t1 = time.perf_counter()
    mode, spacing = parse_interior(interior)
    box = expanded_box(*strata.mesh.bbox)
    stats = None
    if mode == "random":
        vol, stats = interior_seeds_random(
            seeds, refiner.balls, params.lipschitz, stream(params.rng_seed, "interior"), box[0], box[1],
            inner_box=strata.mesh.bbox,
        )
        seeds = seeds.extend(vol)
    elif mode == "lattice":
        vol = interior_seeds_lattice(seeds, refiner.balls, spacing, params.lipschitz, *strata.mesh.bbox)
        seeds = seeds.extend(vol)
    timings["volume"] = time.perf_counter() - t1
    return RunResult(strata, refiner, result, seeds, timings=timings, interior_stats=stats)


def mesh_3d(mesh, params: Parameters, interior="random", sliver_log=None, n_hausdorff=10**5):
    run = make_seeds(mesh, params, interior, sliver_log)
    t = time.perf_counter()
    finish(run, params, n_hausdorff)
    run.timings["cells"] = time.perf_counter() - t
    run.report.timings = dict(run.timings)
    return run


def report_from_seeds(mesh, params, seeds: SeedSet, n_hausdorff=10**5):
    """Cells, surface and report for a seed set produced earlier (no refinement)."""
    run = RunResult(prepare(mesh, params), None, None, seeds)
    t = time.perf_counter()
    finish(run, params, n_hausdorff)
    run.timings["cells"] = time.perf_counter() - t
    run.report.timings = dict(run.timings)
    return run


def finish(run: RunResult, params, n_hausdorff=10**5):
    mesh = run.strata.mesh
    lo, hi = expanded_box(*mesh.bbox)
    run.cells = compute_cells(run.seeds.points, lo, hi)
    run.surface = extract_surface(run.cells, run.seeds.labels, mesh.scale)
    run.report = quality_report(
        run.surface, run.cells, mesh, run.seeds.labels, run.seeds.kinds, run.timings, n_hausdorff,
        stream(params.rng_seed, "hausdorff"), points=run.seeds.points,
    )
    if run.refiner is not None:
        b = run.balls
        run.report.extra.update(
            {"balls": int(b.n), "balls_by_type": np.bincount(b.types, minlength=3).tolist()}
        )
    run.report.extra.update(
        {
            "sliver_iterations": int(run.slivers.iterations) if run.slivers else None,
            "safe_mode": bool(run.slivers.safe_mode) if run.slivers else None,
            "corners": int(run.strata.n_corners),
            "creases": int(run.strata.n_creases),
            "patches": int(run.strata.n_patches),
            "input_euler_characteristic": int(mesh.euler_characteristic()),
            "surface_closed_manifold": bool(run.surface.is_closed_manifold()),
            "parameters": params.to_dict(),
        }
    )
    return run


def write_outputs(run: RunResult, out_dir, fmt="off"):
    os.makedirs(out_dir, exist_ok=True)
    run.seeds.to_csv(os.path.join(out_dir, "seeds.csv"))
    if run.surface is not None:
        if fmt == "obj":
            run.surface.write_obj(os.path.join(out_dir, "surface.obj"))
        else:
            run.surface.write_off(os.path.join(out_dir, "surface.off"))
    if run.cells is not None:
        labels = run.seeds.labels
        write_vtk(os.path.join(out_dir, "volume.vtk"), run.cells, labels, which=lambda c: labels[c.seed] == INTERIOR)
        write_cells_text(os.path.join(out_dir, "cells.txt"), [c for c in run.cells if labels[c.seed] == INTERIOR])
    if run.report is not None:
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            json.dump(run.report.to_dict(), fh, indent=2, sort_keys=True)
