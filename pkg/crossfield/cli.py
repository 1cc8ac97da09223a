"""
    cli.py
    ------
    This is the main module of the cross field toolkit. Implements the command line interface:

        smooth            smooth a cross field on a tetrahedral mesh, export VTK and a convergence CSV
        bench-recovery    round-trip random rotations through their tensors
        bench-projection  compare the approximate and the exact projection on random tensors
        validate          check a file of 9-parameter tensors
        mesh              write a sphere or cube fixture mesh

    Exit codes: 0 success, 1 error, 2 smoothing stopped at the iteration cap.
"""

import argparse
import csv
import logging
import os
import sys

import numpy as np

from crossfield import helper
from crossfield.config import PROJECTION_METHODS, STOPPING_RULES, load_configuration
from crossfield.field_smoother import NotConverged, boundary_conditions, singularity_indicator, smooth
from crossfield.helper import CrossFieldError, show_error, show_notification
from crossfield.mesh_files import IoError, FileError, cube_mesh, export_vtk, load_mesh, save_mesh, sphere_mesh
from crossfield.recovery_projection import (DegenerateSpectrum, exact_project, project_arrays, projection_distance,
                                            random_perturbed_tensors, recover_rotations)
from crossfield.rotation_core import cross_distances, random_rotation_matrices
from crossfield.tensor_rep import (TensorFormatError, full_from_nine, mandel_matrices, parse_tensor,
                                   tensors_from_rotations, validate_structure)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_NOT_CONVERGED = 2

# Recovered rotations farther than this from the original count as failures
RECOVERY_TOLERANCE = 1e-8

# Slack of the "exact <= approx" comparison in the projection benchmark
DOMINATION_TOLERANCE = 1e-12


def header(command, config):
    show_notification("crossfield %s (seed %d)" % (command, config.seed))


def cmd_smooth(config, args):
    """load_mesh -> boundary_conditions -> smooth -> singularity_indicator -> export_vtk + CSV."""

    header("smooth", config)
    if args.bc != "normal" and not (args.bc.startswith("file:") and len(args.bc) > len("file:")):
        raise ValueError("--bc must be 'normal' or 'file:PATH', got " + repr(args.bc))

    mesh = load_mesh(args.mesh)
    if args.bc == "normal":
        field = boundary_conditions(mesh)
    else:
        field = boundary_conditions(mesh, "from-file", args.bc[len("file:"):])

    code = EXIT_OK
    try:
        field, log = smooth(mesh, field, config.smoother)
    except NotConverged as e:
        show_error(str(e))
        field, log = e.field, e.log
        code = EXIT_NOT_CONVERGED

    report = singularity_indicator(mesh, field, tuple(config.eta_band))
    field.eta = report.eta

    export_vtk(mesh, field, report, args.out + ".vtk")
    log.to_csv(args.out + ".csv")

    initial, final = log.rows[0][1], log.rows[-1][1]
    show_notification("iterations: %d, energy %.6g -> %.6g" % (log.iterations, initial, final))
    show_notification(report.summary())
    return code


def cmd_bench_recovery(config, args):
    """Random rotation -> tensor -> Mandel -> recovered rotation, compared up to the octahedral group."""

    header("bench-recovery", config)
    rng = np.random.default_rng(config.seed)
    rotations = random_rotation_matrices(rng, config.recovery_samples)

    frames, degenerate = recover_rotations(mandel_matrices(tensors_from_rotations(rotations)))
    distances = cross_distances(frames, rotations)
    failures = int(np.count_nonzero(degenerate | (distances >= RECOVERY_TOLERANCE)))

    show_notification("samples: %d" % config.recovery_samples)
    show_notification("max cross distance: %.3e" % float(np.max(distances)))
    show_notification("failures (>= %g rad): %d" % (RECOVERY_TOLERANCE, failures))
    return EXIT_OK if failures == 0 else EXIT_ERROR


def cmd_bench_projection(config, args):
    """Approximate and exact projection distances of random tensors around random crosses."""

    header("bench-projection", config)
    rng = np.random.default_rng(config.seed)
    tensors = random_perturbed_tensors(rng, config.projection_samples, config.radius)

    _, approx, degenerate = project_arrays(tensors, "approx")
    _, exact, _ = project_arrays(tensors, "exact", config.workers or os.cpu_count() or 1)

    # A degenerate approximate projection dominates nothing
    approx = np.where(degenerate, np.inf, approx)
    violations = int(np.count_nonzero(exact > approx + DOMINATION_TOLERANCE))

    positive = (exact > 0.0) & np.isfinite(approx)
    gaps = (approx[positive] - exact[positive]) / exact[positive]
    median_gap = float(np.median(gaps)) if len(gaps) else 0.0

    if args.out:
        try:
            with open(args.out, 'w', newline='') as file:
                writer = csv.writer(file)
                writer.writerow(["sample", "exact_distance", "approx_distance"])
                for sample, (p1, p2) in enumerate(zip(exact, approx)):
                    writer.writerow([sample, "%.17g" % p1, "%.17g" % p2])
        except OSError as e:
            raise IoError("Could not write " + args.out + ": " + str(e)) from e

    show_notification("samples: %d, radius %g" % (config.projection_samples, config.radius))
    show_notification("degenerate approximations: %d" % int(np.count_nonzero(degenerate)))
    show_notification("median relative gap (approx - exact) / exact: %.4g" % median_gap)
    show_notification("samples with exact > approx: %d" % violations)
    return EXIT_OK if violations == 0 else EXIT_ERROR


def cmd_validate(config, args):
    """Structure check and projection distance of every tensor line of a file."""

    header("validate", config)
    try:
        with open(args.path, 'r') as file:
            lines = file.readlines()
    except OSError as e:
        raise FileError("Could not read " + args.path + ": " + str(e)) from e

    failures = 0
    show_notification("%6s  %-40s  %s" % ("line", "structure", "distance"))
    for number, line in enumerate(lines, start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue

        try:
            tensor = parse_tensor(line)
        except TensorFormatError as e:
            show_error("%s:%d: %s" % (args.path, number, e))
            return EXIT_ERROR

        report = validate_structure(full_from_nine(tensor))
        try:
            distance = projection_distance(tensor)
        except DegenerateSpectrum:
            distance = exact_project(tensor).distance

        failures += not report.passed
        show_notification("%6d  %-40s  %.6g" % (number, report, distance))

    return EXIT_OK if failures == 0 else EXIT_ERROR


def cmd_mesh(config, args):
    if args.shape == "sphere":
        mesh = sphere_mesh(args.size)
    else:
        mesh = cube_mesh(max(1, int(round(1.0 / args.size))))

    save_mesh(mesh, args.out)
    show_notification("%s mesh: %d vertices, %d tets -> %s" % (args.shape, mesh.vertex_count, len(mesh.tets), args.out))
    return EXIT_OK


def _band(text):
    try:
        low, high = (float(value) for value in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError("expected LO,HI, got " + repr(text)) from None
    return [low, high]


def build_parser():
    parser = argparse.ArgumentParser(prog="crossfield", description="Cross fields for hexahedral meshing")
    parser.add_argument("--config", help="run configuration (JSON)")
    parser.add_argument("--verbose", action="store_true", help="debug logging and tracebacks")
    parser.add_argument("--seed", type=int, help="random seed")
    subparsers = parser.add_subparsers(dest="command", required=True)

    smooth_parser = subparsers.add_parser("smooth", help="smooth a cross field on a tetrahedral mesh")
    smooth_parser.add_argument("--mesh", required=True, help="MSH 2.2 ASCII or simple-tet file")
    smooth_parser.add_argument("--out", required=True, help="output base path (writes OUT.vtk and OUT.csv)")
    smooth_parser.add_argument("--bc", default="normal", help="normal | file:PATH")
    smooth_parser.add_argument("--target", type=float, help="stopping ratio")
    smooth_parser.add_argument("--max-iters", type=int, help="iteration cap")
    smooth_parser.add_argument("--projection", choices=PROJECTION_METHODS)
    smooth_parser.add_argument("--stopping", choices=STOPPING_RULES)
    smooth_parser.add_argument("--relaxation", type=float, help="weight of the neighbor mean in (0, 1]")
    smooth_parser.add_argument("--eta-band", type=_band, help="LO,HI")
    smooth_parser.set_defaults(handler=cmd_smooth)

    recovery_parser = subparsers.add_parser("bench-recovery", help="round-trip random rotations")
    recovery_parser.add_argument("--samples", type=int)
    recovery_parser.set_defaults(handler=cmd_bench_recovery)

    projection_parser = subparsers.add_parser("bench-projection", help="approximate vs exact projection")
    projection_parser.add_argument("--samples", type=int)
    projection_parser.add_argument("--radius", type=float)
    projection_parser.add_argument("--out", help="CSV of (exact, approx) distances")
    projection_parser.add_argument("--workers", type=int,
                                   help="processes for the exact projections, 0 for one per CPU")
    projection_parser.set_defaults(handler=cmd_bench_projection)

    validate_parser = subparsers.add_parser("validate", help="check a file of 9-parameter tensors")
    validate_parser.add_argument("path")
    validate_parser.set_defaults(handler=cmd_validate)

    mesh_parser = subparsers.add_parser("mesh", help="write a fixture mesh")
    mesh_parser.add_argument("--shape", choices=("sphere", "cube"), default="sphere")
    mesh_parser.add_argument("--size", type=float, default=0.07, help="element size")
    mesh_parser.add_argument("--out", required=True)
    mesh_parser.set_defaults(handler=cmd_mesh)

    return parser


def apply_overrides(config, args):
    """Command line flags take precedence over the configuration file."""

    if args.seed is not None:
        config.seed = args.seed

    overrides = {"target": ("smoother", "energy_reduction_target"),
                 "max_iters": ("smoother", "max_iterations"),
                 "projection": ("smoother", "projection_method"),
                 "stopping": ("smoother", "stopping_rule"),
                 "relaxation": ("smoother", "relaxation"),
                 "workers": (None, "workers"),
                 "eta_band": (None, "eta_band"),
                 "radius": (None, "radius")}
    for option, (section, name) in overrides.items():
        value = getattr(args, option, None)
        if value is not None:
            setattr(config.smoother if section else config, name, value)

    samples = getattr(args, "samples", None)
    if samples is not None:
        config.recovery_samples = samples
        config.projection_samples = samples

    return config.validate()


def main(argv=None):
    args = build_parser().parse_args(argv)

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")

    try:
        config = apply_overrides(load_configuration(args.config), args)
        return args.handler(config, args)
    except (CrossFieldError, ValueError) as e:
        show_error(str(e))
        if args.verbose:
            show_error(helper.exception_message(type(e), e, e.__traceback__))
        return EXIT_ERROR


if __name__ == "__main__":
    # Unhandled exceptions are printed with their traceback
    sys.excepthook = helper.excepthook

    sys.exit(main())
