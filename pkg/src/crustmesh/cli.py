"""Command-line driver.

Subcommands: ``mesh3d``, ``mesh2d``, ``seeds-only`` and ``report-only``.
Verbosity comes from the ``CRUSTMESH_LOG`` environment variable
(``DEBUG``, ``INFO``, ``WARNING``, ...).
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from .mesh_io import MeshError, load_mesh
from .params import Parameters

log = logging.getLogger("crustmesh")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_PIPELINE, EXIT_NONCONVEX = 0, 2, 3, 4, 5


def _unit_interval(name):
    def parse(text):
        v = float(text)
        if not 0 < v < 1:
            raise argparse.ArgumentTypeError("%s must lie strictly between 0 and 1" % name)
        return v

    return parse


def _angle(text):
    v = float(text)
    if not 0 < v < 90:
        raise argparse.ArgumentTypeError("theta-sharp must lie strictly between 0 and 90 degrees")
    return v


def _sizing(text):
    if text.lower() in ("inf", "infinity"):
        return math.inf
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError("sizing must be positive or inf")
    return v


def _seed(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _interior(text):
    from .pipeline import parse_interior

    try:
        parse_interior(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc
    return text


def _positive_int(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("input", help="input mesh (OFF/OBJ/STL) or planar graph (.poly)")
    common.add_argument("--theta-sharp", type=_angle, default=60.0, help="sharp-feature angle in degrees")
    common.add_argument("--lipschitz", type=_unit_interval("lipschitz"), default=0.25)
    common.add_argument("--sizing", type=_sizing, default=math.inf)
    common.add_argument("--alpha", type=_unit_interval("alpha"), default=None)
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--interior", type=_interior, default="random", help="random, lattice:SPACING or none")
    common.add_argument("--max-sliver-iters", type=_positive_int, default=100)
    common.add_argument("--safe-mode", action="store_true", help="restart with shallower coverage if slivers persist")
    common.add_argument("--threads", type=_positive_int, default=1, help="accepted for compatibility; runs single-threaded")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--format", choices=("off", "obj", "stl", "poly"), default=None, help="input format override")
    common.add_argument("--desk", action="store_true", help="reduced supersample counts for quick runs")

    p = argparse.ArgumentParser(prog="crustmesh", description="Conforming Voronoi meshing.")
    sub = p.add_subparsers(dest="mode", required=True)
    sub.add_parser("mesh3d", parents=[common], help="full 3D pipeline")
    sub.add_parser("mesh2d", parents=[common], help="planar pipeline on a straight-line graph")
    sub.add_parser("seeds-only", parents=[common], help="3D seeds without cells")
    r = sub.add_parser("report-only", parents=[common], help="cells and report from an existing seeds.csv")
    r.add_argument("--seeds", required=True, help="seeds.csv written by an earlier run")
    return p


def params_from_args(args):
    kw = dict(
        theta_sharp=math.radians(args.theta_sharp),
        lipschitz=args.lipschitz,
        sizing=args.sizing,
        rng_seed=args.seed,
        max_sliver_iterations=args.max_sliver_iters,
        safe_mode=args.safe_mode,
    )
    if args.alpha is not None:
        kw["alpha"] = args.alpha
    return Parameters.desk(**kw) if args.desk else Parameters(**kw)


def _configure_logging():
    level = os.environ.get("CRUSTMESH_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(name)s: %(message)s")


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def run(args):
    from . import pipeline
    from .planar import PlanarError, load_pslg, mesh_2d, write_svg
    from .seeding import SeedSet

    params = params_from_args(args)
    os.makedirs(args.out, exist_ok=True)
    if args.threads > 1:
        log.info("--threads %d requested; computation is single-threaded", args.threads)

    if args.mode == "mesh2d":
        res = mesh_2d(load_pslg(args.input), params, args.interior)
        res.seeds.to_csv(os.path.join(args.out, "seeds.csv"))
        write_svg(os.path.join(args.out, "cells.svg"), res)
        with open(os.path.join(args.out, "report.json"), "w") as fh:
            json.dump(res.report, fh, indent=2, sort_keys=True)
        return EXIT_OK if res.report["non_convex_cells"] == 0 else EXIT_NONCONVEX

    if args.format == "poly":
        raise PlanarError("planar graphs are meshed with mesh2d")
    mesh = load_mesh(args.input, fmt=args.format)
    sliver_log = os.path.join(args.out, "sliver_log.jsonl")

    if args.mode == "seeds-only":
        r = pipeline.make_seeds(mesh, params, args.interior, sliver_log)
        r.seeds.to_csv(os.path.join(args.out, "seeds.csv"))
        return EXIT_OK

    if args.mode == "report-only":
        seeds = SeedSet.from_csv(args.seeds)
        r = pipeline.report_from_seeds(mesh, params, seeds)
    else:
        r = pipeline.mesh_3d(mesh, params, args.interior, sliver_log)
    pipeline.write_outputs(r, args.out)
    return EXIT_OK if r.report.non_convex_cells == 0 else EXIT_NONCONVEX


def main(argv=None):
    _configure_logging()
    args = build_parser().parse_args(argv)
    from .planar import PlanarError
    from .refinement import RefinementError
    from .seeding import SeedingError
    from .slivers import SliverError
    from .voronoi import VoronoiError

    try:
        code = run(args)
    except FileNotFoundError as exc:
        return _fail(EXIT_INPUT, "FileNotFoundError", str(exc))
    except (MeshError, PlanarError) as exc:
        return _fail(EXIT_INPUT, type(exc).__name__, str(exc))
    except (RefinementError, SliverError, SeedingError, VoronoiError, ValueError) as exc:
        return _fail(EXIT_PIPELINE, type(exc).__name__, str(exc))
    if code == EXIT_NONCONVEX:
        return _fail(code, "NonConvexCells", "non-convex cells in the output; see report.json")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
