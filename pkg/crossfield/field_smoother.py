"""
    field_smoother.py
    -----------------
    Implements the smoothing of a cross field on a tetrahedral mesh: boundary conditions aligned
    with the boundary normals, the edge energy E = 1/2 sum_ij |A_i - A_j|^2, the explicit
    average-then-project iteration and the per-vertex singularity indicator eta.
"""

import csv
import logging
import math
import time
from dataclasses import dataclass, field as dataclass_field
from typing import List, Tuple

import numpy as np

from crossfield.config import SmootherConfig
from crossfield.helper import CrossFieldError
from crossfield.mesh_files import FileError, IoError
from crossfield.recovery_projection import project_arrays
from crossfield.tensor_rep import mandel_matrices, reference_tensor, tensors_from_rotations

logger = logging.getLogger(__name__)

# Vertex normals shorter than this (after area-weighted averaging) have no usable direction
NORMAL_TOLERANCE = 1e-6

# Fixed vertices must hold crosses up to this projection distance
ON_MANIFOLD_TOLERANCE = 1e-9

BOUNDARY_MODES = ("normal-aligned", "from-file")

DEFAULT_ETA_BAND = (0.3, 0.5)

# The "stall" rule compares energies this many iterations apart (even: period-2 cycles cancel)
STALL_WINDOW = 10

_MANDEL_OFFSET = mandel_matrices(np.zeros(9))


class DegenerateNormal(CrossFieldError, ArithmeticError):
    """Raised when the averaged normal at a boundary vertex vanishes."""

    def __init__(self, vertex, magnitude):
        super().__init__("averaged normal at vertex %d has magnitude %.3g" % (vertex, magnitude))
        self.vertex = vertex
        self.magnitude = magnitude


class NotConverged(CrossFieldError):
    """Raised when the iteration cap is reached. The last field and the log are attached."""

    def __init__(self, field, log):
        super().__init__("stopping criterion not met after %d iterations" % log.iterations)
        self.field = field
        self.log = log


class CrossField:
    """Per-vertex tensors (n, 9), singularity indicator (n,) and Dirichlet flags (n,)."""

    def __init__(self, tensors, eta=None, fixed=None):
        self.tensors = np.array(tensors, dtype=float).reshape(-1, 9)
        count = len(self.tensors)
        self.eta = np.zeros(count) if eta is None else np.array(eta, dtype=float).reshape(-1)
        self.fixed = np.zeros(count, dtype=bool) if fixed is None else np.array(fixed, dtype=bool).reshape(-1)

        if len(self.eta) != count or len(self.fixed) != count:
            raise ValueError("tensors, eta and fixed flags must have one entry per vertex")

    def __len__(self):
        return len(self.tensors)

    @classmethod
    def uniform(cls, count, tensor=None, fixed=None):
        tensor = reference_tensor() if tensor is None else tensor
        return cls(np.tile(tensor.a, (count, 1)), fixed=fixed)

    def copy(self):
        return CrossField(self.tensors, self.eta, self.fixed)

    def validate(self):
        """Raise ValueError when a fixed vertex does not hold a cross."""

        if self.fixed.any():
            _, distances, degenerate = project_arrays(self.tensors[self.fixed])
            if degenerate.any() or np.max(distances) > ON_MANIFOLD_TOLERANCE:
                raise ValueError("fixed vertices must hold cross tensors")
        return self


@dataclass
class ConvergenceLog:
    """One row per iteration; row 0 is the initial field."""

    rows: List[Tuple[int, float, float, float]] = dataclass_field(default_factory=list)
    converged: bool = False

    def record(self, iteration, energy, elapsed_seconds, residual=math.nan):
        self.rows.append((iteration, float(energy), float(elapsed_seconds), float(residual)))

    @property
    def iterations(self):
        return self.rows[-1][0] if self.rows else 0

    @property
    def energies(self):
        return np.array([row[1] for row in self.rows])

    @property
    def residuals(self):
        return np.array([row[3] for row in self.rows])

    def to_csv(self, path):
        try:
            with open(path, 'w', newline='') as file:
                writer = csv.writer(file)
                writer.writerow(["iteration", "energy", "elapsed_seconds", "residual"])
                for iteration, energy, elapsed, residual in self.rows:
                    writer.writerow([iteration, "%.17g" % energy, "%.6f" % elapsed, "%.17g" % residual])
        except OSError as e:
            raise IoError("Could not write " + str(path) + ": " + str(e)) from e


@dataclass
class SingularityReport:
    eta: np.ndarray
    flagged: np.ndarray
    band: Tuple[float, float]
    histogram: Tuple[np.ndarray, np.ndarray]

    @property
    def minimum(self):
        return float(np.min(self.eta)) if len(self.eta) else 0.0

    @property
    def maximum(self):
        return float(np.max(self.eta)) if len(self.eta) else 0.0

    def summary(self):
        return "eta min %.4g, max %.4g, %d of %d vertices in [%g, %g]" % (
            self.minimum, self.maximum, len(self.flagged), len(self.eta), self.band[0], self.band[1])


#
# Boundary conditions
# ------------------------

def frames_from_normals(normals):
    """Rotation matrices whose third column is the given unit normal; the first column is the
    coordinate axis least aligned with the normal, made orthogonal to it."""

    normals = np.asarray(normals, dtype=float).reshape(-1, 3)
    axes = np.eye(3)[np.argmin(np.abs(normals), axis=1)]
    first = axes - np.einsum('ij,ij->i', axes, normals)[:, np.newaxis] * normals
    first /= np.linalg.norm(first, axis=1, keepdims=True)
    second = np.cross(normals, first)
    return np.stack([first, second, normals], axis=2)


def _normal_aligned(mesh):
    field = CrossField.uniform(mesh.vertex_count)
    boundary = mesh.boundary_vertices
    if not len(boundary):
        return field

    averages = mesh.vertex_normals()[boundary] / mesh.vertex_boundary_areas()[boundary, np.newaxis]
    magnitudes = np.linalg.norm(averages, axis=1)
    if np.any(magnitudes < NORMAL_TOLERANCE):
        worst = int(np.argmin(magnitudes))
        raise DegenerateNormal(int(boundary[worst]), float(magnitudes[worst]))

    frames = frames_from_normals(averages / magnitudes[:, np.newaxis])
    field.tensors[boundary] = tensors_from_rotations(frames)
    field.fixed[boundary] = True
    return field


def _from_file(mesh, path):
    field = CrossField.uniform(mesh.vertex_count)
    try:
        with open(path, 'r') as file:
            lines = file.readlines()
    except OSError as e:
        raise FileError("Could not read boundary conditions " + str(path) + ": " + str(e)) from e

    rows, tensors, flags = [], [], []
    for number, line in enumerate(lines, start=1):
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue
        if len(fields) != 11:
            raise FileError("%s:%d: expected 'vertex a1 ... a9 fixed', got %d values" % (path, number, len(fields)))

        try:
            vertex = int(fields[0])
            values = [float(value) for value in fields[1:10]]
            if fields[10].lower() not in ("0", "1", "true", "false"):
                raise ValueError("invalid fixed flag " + repr(fields[10]))
            flag = fields[10].lower() in ("1", "true")
        except ValueError as e:
            raise FileError("%s:%d: %s" % (path, number, e)) from e

        if not 0 <= vertex < mesh.vertex_count or not all(math.isfinite(value) for value in values):
            raise FileError("%s:%d: invalid vertex index or tensor values" % (path, number))

        rows.append(vertex)
        tensors.append(values)
        flags.append(flag)

    if rows:
        projected, _, degenerate = project_arrays(np.array(tensors))
        if degenerate.any():
            vertex = rows[int(np.flatnonzero(degenerate)[0])]
            raise FileError("%s: tensor of vertex %d has no recoverable cross" % (path, vertex))

        field.tensors[rows] = projected
        field.fixed[rows] = flags

    return field


def boundary_conditions(mesh, mode="normal-aligned", path=None):
    """Initial field: the reference cross everywhere, with boundary vertices fixed to crosses
    aligned with the averaged boundary normal (or fixed to the crosses of a file)."""

    if mode == "normal-aligned":
        field = _normal_aligned(mesh)
    elif mode == "from-file":
        if path is None:
            raise ValueError("from-file boundary conditions need a path")
        field = _from_file(mesh, path)
    else:
        raise ValueError("unknown boundary condition mode " + repr(mode))

    logger.info("Boundary conditions (%s): %d fixed vertices of %d", mode, int(field.fixed.sum()), len(field))
    return field.validate()


#
# Energy and iteration
# ------------------------

def _mandel_differences(tensors1, tensors2):
    """Mandel form of the linear part of tensors1 - tensors2."""

    return mandel_matrices(np.asarray(tensors1) - np.asarray(tensors2)) - _MANDEL_OFFSET


def energy(graph, field):
    """E = 1/2 sum over edges of the squared Mandel Frobenius distance of the end tensors."""

    if not len(graph.edges):
        return 0.0

    differences = _mandel_differences(field.tensors[graph.edges[:, 0]], field.tensors[graph.edges[:, 1]])
    return 0.5 * float(np.sum(differences ** 2))


def _free_vertices(graph, field):
    """Vertices the smoother updates: not fixed and with at least one neighbor."""

    return np.flatnonzero(~field.fixed & (graph.degrees > 0))


def _averages(graph, field):
    return graph.averaging @ field.tensors


def smooth_step(graph, field, config=None):
    """One Jacobi sweep: every free vertex gets the projection of the mean of its neighbors.
    Vertices whose mean has no recoverable cross keep their tensor.

    With config.relaxation w < 1 the projected value is (1 - w) A_i + w mean_i instead, which
    damps the modes that alternate in sign from one sweep to the next.
    """

    config = config or SmootherConfig()
    free = _free_vertices(graph, field)
    result = field.copy()
    if not len(free):
        return result

    targets = _averages(graph, field)[free]
    if config.relaxation < 1.0:
        targets = (1.0 - config.relaxation) * field.tensors[free] + config.relaxation * targets

    projected, _, degenerate = project_arrays(targets, config.projection_method)

    if degenerate.any():
        logger.debug("%d vertices kept their tensor (degenerate average)", int(degenerate.sum()))

    result.tensors[free[~degenerate]] = projected[~degenerate]
    return result


def smooth(graph, field, config=None):
    """Iterate smooth_step until the stopping rule of the configuration holds.

    Returns (field, log). Raises NotConverged, carrying the last field and the log, when the
    iteration cap is reached first.
    """

    config = config or SmootherConfig()
    log = ConvergenceLog()

    if not field.fixed.any():
        # Nothing pins the field: the uniform reference field has zero energy
        logger.info("No fixed vertex, returning the uniform field")
        result = CrossField.uniform(len(field))
        log.record(0, 0.0, 0.0)
        log.converged = True
        return result, log

    start = time.perf_counter()
    initial = energy(graph, field)
    log.record(0, initial, 0.0)
    first_residual = None

    for iteration in range(1, config.max_iterations + 1):
        updated = smooth_step(graph, field, config)
        residual = float(np.linalg.norm(_mandel_differences(updated.tensors, field.tensors)))
        field = updated

        current = energy(graph, field)
        log.record(iteration, current, time.perf_counter() - start, residual)

        if iteration % config.report_every == 0:
            logger.info("Iteration %d: energy %.6g (ratio %.3g), residual %.3g",
                        iteration, current, current / initial if initial > 0.0 else 0.0, residual)

        if first_residual is None:
            first_residual = residual

        if config.stopping_rule == "energy":
            done = initial == 0.0 or current <= config.energy_reduction_target * initial
        elif config.stopping_rule == "residual":
            done = first_residual == 0.0 or residual <= config.energy_reduction_target * first_residual
        else:
            done = initial == 0.0 or _stalled(log.rows, initial, config.energy_reduction_target)

        if done:
            log.converged = True
            logger.info("Converged after %d iterations: energy %.6g, %.2f s",
                        iteration, current, time.perf_counter() - start)
            return field, log

    logger.warning("No convergence after %d iterations (energy %.6g of %.6g)",
                   config.max_iterations, log.rows[-1][1], initial)
    raise NotConverged(field, log)


def _stalled(rows, initial, target):
    """True once the energy changed by at most target * E_0 per iteration, on average over the
    last STALL_WINDOW iterations."""

    if len(rows) <= STALL_WINDOW:
        return False

    return abs(rows[-1 - STALL_WINDOW][1] - rows[-1][1]) <= target * STALL_WINDOW * initial


def singularity_indicator(graph, field, band=DEFAULT_ETA_BAND):
    """eta at every free vertex: the projection distance of the mean of its neighbors; 0 at
    fixed and isolated vertices. Vertices with eta in "band" are flagged."""

    eta = np.zeros(len(field))
    free = _free_vertices(graph, field)

    if len(free):
        averages = _averages(graph, field)[free]
        _, distances, degenerate = project_arrays(averages)
        if degenerate.any():
            distances[degenerate] = project_arrays(averages[degenerate], "exact")[1]
        eta[free] = distances

    low, high = band
    flagged = np.flatnonzero((eta >= low) & (eta <= high))
    histogram = np.histogram(eta, bins=10, range=(0.0, max(high, float(eta.max()) if len(eta) else 0.0)))

    return SingularityReport(eta, flagged, (low, high), histogram)
