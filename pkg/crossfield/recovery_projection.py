"""
    recovery_projection.py
    ----------------------
    Implements the recovery of the rotation encoded by a cross tensor and the projection of
    arbitrary tensors of the 9-parameter space back onto the set of crosses:
    - approximate projection: eigenvectors of the Mandel matrix -> second order tensor -> frame
    - exact projection: Nelder-Mead search over the ZXZ Euler angles
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from crossfield.helper import CrossFieldError
from crossfield.rotation_core import (Rotation, euler_matrices, octahedral_elements,
                                      random_rotation_matrices, rotation_to_euler)
from crossfield.tensor_rep import (CrossTensor9, Mandel6, full_from_nine, mandel_matrices, mandel_vectors,
                                   nine_to_mandel, symmetric_matrices_from_vec6, tensors_from_rotations,
                                   validate_structure)

logger = logging.getLogger(__name__)

# Minimum gap between the eigenvalues of the second order tensor built from the Mandel eigenvectors
EIGENVALUE_GAP_TOLERANCE = 1e-9

# Tolerance of the projector test M.M = M, trace(M) = 3
PROJECTOR_TOLERANCE = 1e-10

# Nelder-Mead settings of the exact projection
SIMPLEX_STEP = 0.1
SIMPLEX_TOLERANCE = 1e-10
SIMPLEX_MAX_ITERATIONS = 10000
SIMPLEX_MAX_EVALUATIONS = 40000

# Ways of combining the three dominant Mandel eigenvectors into one 6-vector, tried in order
CANDIDATE_WEIGHTS = tuple(np.array(weights, dtype=float) * np.array(signs, dtype=float)
                          for weights in ((1, 1, 1), (1, 2, 3))
                          for signs in ((1, 1, 1), (1, 1, -1), (1, -1, 1), (-1, 1, 1)))

METHODS = ("approx", "exact")


class DegenerateSpectrum(CrossFieldError, ArithmeticError):
    """Raised when no frame can be read off the eigenvectors of a Mandel matrix."""


class NoConvergence(CrossFieldError, ArithmeticError):
    """Raised when the simplex search of the exact projection does not converge."""


@dataclass(frozen=True)
class ProjectionResult:
    tensor: CrossTensor9
    rotation: Rotation
    distance: float
    method: str


def _fix_signs(vectors):
    """Make the largest-magnitude component of every eigenvector (columns of the last two axes) positive."""

    largest = np.argmax(np.abs(vectors), axis=-2)
    signs = np.sign(np.take_along_axis(vectors, largest[..., np.newaxis, :], axis=-2))
    signs[signs == 0.0] = 1.0
    return vectors * signs


def _proper(frames):
    """Negate the third column where the determinant is -1."""

    frames = frames.copy()
    improper = np.linalg.det(frames) < 0.0
    frames[improper, :, 2] *= -1.0
    return frames


def recover_rotations(m):
    """Batched rotation recovery.

    m: Mandel matrices of shape (n, 6, 6).
    Returns the rotation matrices (n, 3, 3) and a boolean mask of the rows for which no frame
    could be read off (identity is stored there).
    """

    m = np.asarray(m, dtype=float).reshape(-1, 6, 6)
    count = m.shape[0]

    _, vectors = np.linalg.eigh(m)
    dominant = _fix_signs(vectors)[:, :, 3:]

    best_frames = np.broadcast_to(np.eye(3), (count, 3, 3)).copy()
    best_distances = np.full(count, np.inf)

    for weights in CANDIDATE_WEIGHTS:
        d = symmetric_matrices_from_vec6(dominant @ weights)
        values, frames = np.linalg.eigh(d)
        gaps = np.minimum(values[:, 1] - values[:, 0], values[:, 2] - values[:, 1])

        frames = _proper(_fix_signs(frames))
        distances = np.linalg.norm(mandel_matrices(tensors_from_rotations(frames)) - m, axis=(1, 2))
        distances[gaps < EIGENVALUE_GAP_TOLERANCE] = np.inf

        # Strict comparison, ties go to the earlier candidate
        better = distances < best_distances
        best_frames[better] = frames[better]
        best_distances[better] = distances[better]

    return best_frames, np.isinf(best_distances)


def recover_rotation(mandel):
    """Rotation encoded by a (possibly perturbed) cross tensor given as a Mandel matrix."""

    frames, degenerate = recover_rotations(mandel.m)
    if degenerate[0]:
        raise DegenerateSpectrum("eigenvalues of the recovered second order tensor are not separated")

    return Rotation(frames[0])


def _exact_rows(m):
    results = [exact_project_mandel(Mandel6(row)) for row in m]
    tensors = np.array([result.tensor.a for result in results]).reshape(-1, 9)
    distances = np.array([result.distance for result in results]).reshape(-1)
    return tensors, distances


def project_arrays(a, method="approx", workers=1):
    """Batched projection of parameters of shape (n, 9).

    Returns (tensors (n, 9), distances (n,), degenerate mask (n,)). Rows flagged degenerate hold
    the input unchanged and a NaN distance. The exact projections are spread over "workers"
    processes; the rows come back in input order.
    """

    a = np.asarray(a, dtype=float).reshape(-1, 9)
    m = mandel_matrices(a)

    if method == "exact":
        if workers > 1 and len(m) > 1:
            chunks = [chunk for chunk in np.array_split(m, 4 * workers) if len(chunk)]
            with ProcessPoolExecutor(max_workers=workers) as executor:
                parts = list(executor.map(_exact_rows, chunks))
        else:
            parts = [_exact_rows(m)]

        tensors = np.concatenate([part[0] for part in parts])
        distances = np.concatenate([part[1] for part in parts])
        return tensors, distances, np.zeros(a.shape[0], dtype=bool)

    if method != "approx":
        raise ValueError("unknown projection method " + repr(method))

    frames, degenerate = recover_rotations(m)
    tensors = tensors_from_rotations(frames)
    distances = np.linalg.norm(mandel_matrices(tensors) - m, axis=(1, 2))

    tensors[degenerate] = a[degenerate]
    distances[degenerate] = np.nan
    return tensors, distances, degenerate


def _result(rotation, mandel, method):
    tensor = CrossTensor9(tensors_from_rotations(rotation.r))
    distance = float(np.linalg.norm(mandel_matrices(tensor.a) - mandel.m))
    return ProjectionResult(tensor, rotation, distance, method)


def approx_project_mandel(mandel):
    return _result(recover_rotation(mandel), mandel, "approx")


def approx_project(z):
    """Projection onto the crosses through the eigen-based recovery. Raises DegenerateSpectrum."""

    return approx_project_mandel(nine_to_mandel(z))


def _start_angles(rotation):
    """Euler angles of the octahedral equivalent of "rotation" farthest from gimbal lock."""

    frames = rotation.r @ octahedral_elements().matrices
    best = int(np.argmin(np.abs(frames[:, 2, 2])))
    return rotation_to_euler(Rotation(frames[best])).as_array()


def exact_project_mandel(mandel):
    """Minimize the Mandel Frobenius distance over the ZXZ Euler angles, starting from the
    eigen-based guess (or from (0, 0, 0) when that guess is degenerate)."""

    try:
        guess = approx_project_mandel(mandel)
        start = _start_angles(guess.rotation)
    except DegenerateSpectrum:
        guess = None
        start = np.zeros(3)

    def objective(angles):
        # Mandel matrix of the cross of R: sum over the columns r of R of w(r) w(r)^T
        w = mandel_vectors(euler_matrices(angles).T)
        return np.linalg.norm(w.T @ w - mandel.m)

    simplex = np.vstack([start, start + SIMPLEX_STEP * np.eye(3)])
    result = minimize(objective, start, method="Nelder-Mead",
                      options={"initial_simplex": simplex,
                               "xatol": SIMPLEX_TOLERANCE,
                               "fatol": np.inf,
                               "maxiter": SIMPLEX_MAX_ITERATIONS,
                               "maxfev": SIMPLEX_MAX_EVALUATIONS})

    if not result.success:
        raise NoConvergence("simplex search stopped after %d iterations: %s" % (result.nit, result.message))

    logger.debug("exact projection converged in %d iterations, distance %.3g", result.nit, result.fun)

    exact = _result(Rotation(euler_matrices(result.x)), mandel, "exact")
    if guess is not None and guess.distance < exact.distance:
        return ProjectionResult(guess.tensor, guess.rotation, guess.distance, "exact")

    return exact


def exact_project(z):
    """Closest cross (Mandel Frobenius norm) found by a local simplex search. Raises NoConvergence."""

    return exact_project_mandel(nine_to_mandel(z))


def projection_distance(z, method="approx"):
    if method == "approx":
        return approx_project(z).distance
    if method == "exact":
        return exact_project(z).distance

    raise ValueError("unknown projection method " + repr(method))


def _affine_part():
    """Matrix L (36 x 9) with vec(M(a)) = vec(M(0)) + L a."""

    offset = mandel_matrices(np.zeros(9))
    return (mandel_matrices(np.eye(9)) - offset).reshape(9, 36).T


def random_perturbed_tensors(rng, count, radius):
    """Random cross tensors plus perturbations drawn uniformly in the ball of the given Mandel
    Frobenius radius within the 9-parameter space. Returns an array of shape (count, 9)."""

    crosses = tensors_from_rotations(random_rotation_matrices(rng, count))

    # Uniform in the unit 9-ball
    directions = rng.standard_normal((count, 9))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    u = directions * rng.random((count, 1)) ** (1.0 / 9.0)

    # Map the unit ball onto the Mandel ball: |L C^-T u| = |u| with L^T L = C C^T
    l = _affine_part()
    c = np.linalg.cholesky(l.T @ l)
    perturbations = np.linalg.solve(c.T, u.T).T

    return crosses + radius * perturbations


def is_cross_tensor(a):
    """True when the tensor is fully symmetric with unit partial traces and its Mandel matrix is
    a rank 3 projector; such tensors are exactly the rotated reference crosses."""

    if not validate_structure(full_from_nine(a)).passed:
        return False

    m = mandel_matrices(a.a)
    return bool(np.max(np.abs(m @ m - m)) <= PROJECTOR_TOLERANCE and abs(np.trace(m) - 3.0) <= PROJECTOR_TOLERANCE)

