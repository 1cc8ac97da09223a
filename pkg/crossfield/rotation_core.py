"""
    rotation_core.py
    ----------------
    Implements rotations of the reference cross: the ZXZ Euler angle parameterization,
    the 24 rotations of the octahedral group and the distance between two cross attitudes
    (rotations compared up to the octahedral symmetry).
"""

import functools
import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.transform import Rotation as ScipyRotation

from crossfield.helper import CrossFieldError

# Per-entry tolerance on R^T R = I and det(R) = +1
ORTHONORMALITY_TOLERANCE = 1e-12

# Below this value of sin(beta) the ZXZ angles alpha and gamma are not separable
GIMBAL_LOCK_TOLERANCE = 1e-12


class InvalidRotation(CrossFieldError, ValueError):
    """Raised when a matrix is not a proper rotation."""


@dataclass(frozen=True, eq=False)
class Rotation:
    """Element of SO(3), stored as a read-only 3x3 matrix of direction cosines.
    Column q is the image r^q of the q-th axis of the reference cross."""

    r: np.ndarray

    def __post_init__(self):
        r = np.array(self.r, dtype=float)

        if r.shape != (3, 3):
            raise InvalidRotation("rotation must be a 3x3 matrix, got shape " + str(r.shape))

        if not np.all(np.isfinite(r)):
            raise InvalidRotation("rotation has non-finite entries")

        orthonormality = np.max(np.abs(r.T @ r - np.eye(3)))
        determinant = np.linalg.det(r)
        if orthonormality > ORTHONORMALITY_TOLERANCE or abs(determinant - 1.0) > ORTHONORMALITY_TOLERANCE:
            raise InvalidRotation("matrix is not a rotation (|R^T R - I| = %.3g, det = %.15g)"
                                  % (orthonormality, determinant))

        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @classmethod
    def identity(cls):
        return cls(np.eye(3))

    def __matmul__(self, other):
        return Rotation(self.r @ other.r)

    def transpose(self):
        return Rotation(self.r.T)

    def column(self, q):
        return self.r[:, q].copy()


@dataclass(frozen=True)
class EulerAngles:
    """ZXZ Euler angles (radians): alpha, gamma in [-pi, pi), beta in [0, pi]."""

    alpha: float
    beta: float
    gamma: float

    def __post_init__(self):
        if not (-math.pi <= self.alpha < math.pi and -math.pi <= self.gamma < math.pi):
            raise ValueError("alpha and gamma must be in [-pi, pi), got %r" % (self,))
        if not 0.0 <= self.beta <= math.pi:
            raise ValueError("beta must be in [0, pi], got %r" % (self,))

    @classmethod
    def wrapped(cls, alpha, beta, gamma):
        """Build angles from arbitrary reals, mapped onto the canonical ranges."""

        matrix = euler_matrices(np.array([alpha, beta, gamma], dtype=float))
        return rotation_to_euler(Rotation(matrix))

    def as_array(self):
        return np.array([self.alpha, self.beta, self.gamma])


class OctahedralGroup:
    """The 24 rotations mapping the axis set {+-e1, +-e2, +-e3} onto itself."""

    def __init__(self, elements):
        self.elements = tuple(elements)

        # Stacked (24, 3, 3) copy for vectorized products
        self.matrices = np.array([element.r for element in self.elements])
        self.matrices.setflags(write=False)

    def __len__(self):
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __getitem__(self, index):
        return self.elements[index]

    def index_of(self, matrix, tolerance=0.0):
        """Return the position of "matrix" in the group, or -1 if it is not an element."""

        deviations = np.max(np.abs(self.matrices - np.asarray(matrix)), axis=(1, 2))
        matches = np.flatnonzero(deviations <= tolerance)
        return int(matches[0]) if matches.size else -1

    def __contains__(self, rotation):
        matrix = rotation.r if isinstance(rotation, Rotation) else rotation
        return self.index_of(matrix) >= 0


def _wrap(angle):
    """Map an angle onto [-pi, pi)."""

    wrapped = math.atan2(math.sin(angle), math.cos(angle))
    return -math.pi if wrapped >= math.pi else wrapped


def euler_matrices(angles):
    """Batched ZXZ rotation matrices, entry by entry as R = Z1 X2 Z3.

    angles: array of shape (..., 3) holding (alpha, beta, gamma).
    Returns an array of shape (..., 3, 3).
    """

    angles = np.asarray(angles, dtype=float)
    c1, c2, c3 = np.cos(angles[..., 0]), np.cos(angles[..., 1]), np.cos(angles[..., 2])
    s1, s2, s3 = np.sin(angles[..., 0]), np.sin(angles[..., 1]), np.sin(angles[..., 2])

    r = np.empty(angles.shape[:-1] + (3, 3))
    r[..., 0, 0] = c1 * c3 - c2 * s1 * s3
    r[..., 0, 1] = -c1 * s3 - c3 * c2 * s1
    r[..., 0, 2] = s2 * s1
    r[..., 1, 0] = c1 * c2 * s3 + c3 * s1
    r[..., 1, 1] = c1 * c2 * c3 - s1 * s3
    r[..., 1, 2] = -c1 * s2
    r[..., 2, 0] = s3 * s2
    r[..., 2, 1] = c3 * s2
    r[..., 2, 2] = c2
    return r


def euler_to_rotation(angles):
    """Rotation R = Z1 X2 Z3 for the ZXZ Euler angles."""

    return Rotation(euler_matrices(angles.as_array()))


def rotation_to_euler(rotation):
    """Inverse of euler_to_rotation.

    At the gimbal lock locus (beta = 0 or pi) gamma is set to 0 and alpha carries the
    whole in-plane angle.
    """

    r = rotation.r
    sin_beta = math.hypot(r[0, 2], r[1, 2])
    beta = math.atan2(sin_beta, r[2, 2])

    if sin_beta < GIMBAL_LOCK_TOLERANCE:
        # R11 = cos(alpha +- gamma), R21 = sin(alpha +- gamma) at both lock points
        alpha = math.atan2(r[1, 0], r[0, 0])
        gamma = 0.0
    else:
        alpha = math.atan2(r[0, 2], -r[1, 2])
        gamma = math.atan2(r[2, 0], r[2, 1])

    return EulerAngles(_wrap(alpha), beta, _wrap(gamma))


@functools.lru_cache(maxsize=None)
def octahedral_elements():
    """Return the 24 signed permutation matrices with determinant +1, identity first."""

    elements = []
    for permutation in itertools.permutations(range(3)):
        for signs in itertools.product((1.0, -1.0), repeat=3):
            matrix = np.zeros((3, 3))
            for row, column in enumerate(permutation):
                matrix[row, column] = signs[row]

            if round(np.linalg.det(matrix)) == 1:
                elements.append(Rotation(matrix))

    return OctahedralGroup(elements)


def rotation_angles(matrices):
    """Geodesic angles in [0, pi] of a stack of rotation matrices (shape (..., 3, 3))."""

    matrices = np.asarray(matrices, dtype=float)
    flat = matrices.reshape(-1, 3, 3)
    return ScipyRotation.from_matrix(flat).magnitude().reshape(matrices.shape[:-2])


def rotation_angle(rotation):
    """Geodesic angle of a single rotation, in [0, pi]."""

    return float(rotation_angles(rotation.r))


def cross_distances(r1, r2):
    """Batched cross distance between stacks of rotation matrices of shape (n, 3, 3)."""

    group = octahedral_elements().matrices
    r1 = np.asarray(r1, dtype=float).reshape(-1, 3, 3)
    r2 = np.asarray(r2, dtype=float).reshape(-1, 3, 3)

    # R1 g R2^T for every sample and every group element
    products = np.einsum('nij,gjk,nlk->ngil', r1, group, r2)
    return rotation_angles(products).min(axis=1)


def cross_distance(rotation1, rotation2):
    """Angle between two cross attitudes: min over g in O of the angle of R1 g R2^T."""

    return float(cross_distances(rotation1.r, rotation2.r)[0])


def random_rotation_matrices(rng, count):
    """Haar-uniform rotation matrices from normalized Gaussian quaternions (shape (count, 3, 3))."""

    quaternions = rng.standard_normal((count, 4))
    quaternions /= np.linalg.norm(quaternions, axis=1, keepdims=True)
    return ScipyRotation.from_quat(quaternions).as_matrix()


def random_rotations(rng, count):
    return [Rotation(matrix) for matrix in random_rotation_matrices(rng, count)]


def rotation_about_axis(axis, angle):
    """Right-handed rotation by "angle" about "axis"."""

    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    return Rotation(ScipyRotation.from_rotvec(angle * axis).as_matrix())
