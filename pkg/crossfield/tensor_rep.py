"""
    tensor_rep.py
    -------------
    Implements the fourth order tensor representation of crosses.

    A cross attitude R is represented by A_ijkl = sum_q R_iq R_jq R_kq R_lq. Full symmetry and the
    six partial traces A_iikl = delta_kl leave 9 free parameters (a1..a9), which span a linear
    space convenient for interpolation:

        a1 = A1111, a2 = A2222, a3 = A3333, a4 = A2322, a5 = A2333,
        a6 = A1311, a7 = A1333, a8 = A1211, a9 = A1222

    The 9 parameters are the canonical storage. The Mandel 6x6 matrix (rows ordered 11, 22, 33,
    23, 13, 12 with the sqrt(2) and 2 factors) turns double contractions into matrix products,
    and the full 81-entry array is only built for validation and tests.
"""

import itertools
import math
from dataclasses import dataclass

import numpy as np

from crossfield.helper import CrossFieldError

SQRT2 = math.sqrt(2.0)

# Tolerance of the structural checks (symmetry, partial traces, Mandel pattern)
STRUCTURE_TOLERANCE = 1e-9

# Mandel row order: 11, 22, 33, 23, 13, 12
MANDEL_PAIRS = ((0, 0), (1, 1), (2, 2), (1, 2), (0, 2), (0, 1))

# Index counts (n1, n2, n3) of the 15 independent components of a fully symmetric tensor
CANONICAL_COMPONENTS = tuple(counts for counts in itertools.product(range(5), repeat=3) if sum(counts) == 4)


class StructureViolation(CrossFieldError, ValueError):
    """Raised when a matrix or tensor does not follow the structure of the 9-parameter space."""


class TensorFormatError(CrossFieldError, ValueError):
    """Raised when a text line does not hold 9 floats."""


@dataclass(frozen=True, eq=False)
class CrossTensor9:
    """The 9 parameters (a1..a9) of a tensor of the linear space."""

    a: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=float).reshape(-1)
        if a.shape != (9,):
            raise StructureViolation("a cross tensor has exactly 9 parameters, got " + str(a.size))
        if not np.all(np.isfinite(a)):
            raise StructureViolation("cross tensor parameters must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    def __add__(self, other):
        return CrossTensor9(self.a + other.a)

    def __sub__(self, other):
        return CrossTensor9(self.a - other.a)

    def __mul__(self, factor):
        return CrossTensor9(factor * self.a)

    __rmul__ = __mul__

    def __repr__(self):
        return "CrossTensor9(" + format_tensor(self) + ")"


@dataclass(frozen=True, eq=False)
class Mandel6:
    """Symmetric 6x6 Mandel matrix of a minor- and major-symmetric fourth order tensor."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.shape != (6, 6):
            raise StructureViolation("a Mandel matrix is 6x6, got shape " + str(m.shape))

        asymmetry = np.max(np.abs(m - m.T))
        if asymmetry > STRUCTURE_TOLERANCE:
            raise StructureViolation("Mandel matrix is not symmetric (max |M - M^T| = %.3g)" % asymmetry)

        # Stored exactly symmetric
        m = 0.5 * (m + m.T)
        m.setflags(write=False)
        object.__setattr__(self, "m", m)


@dataclass(frozen=True, eq=False)
class MandelProduct:
    """6x6 product of two Mandel matrices that do not commute; not symmetric."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=float)
        if m.shape != (6, 6):
            raise StructureViolation("a Mandel matrix is 6x6, got shape " + str(m.shape))
        m.setflags(write=False)
        object.__setattr__(self, "m", m)


@dataclass(frozen=True, eq=False)
class SymTensor2:
    """Symmetric second order tensor (3x3)."""

    d: np.ndarray

    def __post_init__(self):
        d = np.array(self.d, dtype=float)
        if d.shape != (3, 3):
            raise StructureViolation("a second order tensor is 3x3, got shape " + str(d.shape))
        if np.max(np.abs(d - d.T)) > STRUCTURE_TOLERANCE:
            raise StructureViolation("second order tensor is not symmetric")
        d = 0.5 * (d + d.T)
        d.setflags(write=False)
        object.__setattr__(self, "d", d)


@dataclass(frozen=True, eq=False)
class FullTensor4:
    """Plain 3x3x3x3 array. It is not symmetrized on construction so that validate_structure
    can report what it holds; use FullTensor4.symmetrized() to build a fully symmetric one."""

    t: np.ndarray

    def __post_init__(self):
        t = np.array(self.t, dtype=float)
        if t.shape != (3, 3, 3, 3):
            raise StructureViolation("a fourth order tensor is 3x3x3x3, got shape " + str(t.shape))
        t.setflags(write=False)
        object.__setattr__(self, "t", t)

    @classmethod
    def symmetrized(cls, t):
        t = np.asarray(t, dtype=float)
        permutations = list(itertools.permutations(range(4)))
        return cls(sum(np.transpose(t, p) for p in permutations) / len(permutations))


@dataclass(frozen=True)
class ValidationReport:
    symmetry_violation: float
    trace_violation: float
    tolerance: float = STRUCTURE_TOLERANCE

    @property
    def passed(self):
        return self.symmetry_violation <= self.tolerance and self.trace_violation <= self.tolerance

    def __str__(self):
        return "%s (symmetry %.3g, traces %.3g)" % ("pass" if self.passed else "FAIL",
                                                   self.symmetry_violation, self.trace_violation)


#
# Batched array forms, shape (..., 9) <-> (..., 6, 6)
# ------------------------

def tensors_from_rotations(r):
    """9 parameters of A_ijkl = sum_q R_iq R_jq R_kq R_lq for rotation matrices of shape (..., 3, 3)."""

    r = np.asarray(r, dtype=float)
    x, y, z = r[..., 0, :], r[..., 1, :], r[..., 2, :]

    return np.stack([np.sum(x ** 4, axis=-1),
                     np.sum(y ** 4, axis=-1),
                     np.sum(z ** 4, axis=-1),
                     np.sum(y ** 3 * z, axis=-1),
                     np.sum(y * z ** 3, axis=-1),
                     np.sum(x ** 3 * z, axis=-1),
                     np.sum(x * z ** 3, axis=-1),
                     np.sum(x ** 3 * y, axis=-1),
                     np.sum(x * y ** 3, axis=-1)], axis=-1)


def mandel_matrices(a):
    """Mandel matrices of shape (..., 6, 6) from parameters of shape (..., 9)."""

    a = np.asarray(a, dtype=float)
    a1, a2, a3, a4, a5, a6, a7, a8, a9 = np.moveaxis(a, -1, 0)

    m = np.empty(a.shape[:-1] + (6, 6))

    # Normal block
    m[..., 0, 0] = a1
    m[..., 1, 1] = a2
    m[..., 2, 2] = a3
    m[..., 0, 1] = m[..., 1, 0] = 0.5 * (1.0 + a3 - a2 - a1)
    m[..., 0, 2] = m[..., 2, 0] = 0.5 * (1.0 + a2 - a3 - a1)
    m[..., 1, 2] = m[..., 2, 1] = 0.5 * (1.0 + a1 - a2 - a3)

    # Coupling block, sqrt(2) factors
    m[..., 3, 0] = m[..., 0, 3] = -SQRT2 * (a4 + a5)
    m[..., 3, 1] = m[..., 1, 3] = SQRT2 * a4
    m[..., 3, 2] = m[..., 2, 3] = SQRT2 * a5
    m[..., 4, 0] = m[..., 0, 4] = SQRT2 * a6
    m[..., 4, 1] = m[..., 1, 4] = -SQRT2 * (a6 + a7)
    m[..., 4, 2] = m[..., 2, 4] = SQRT2 * a7
    m[..., 5, 0] = m[..., 0, 5] = SQRT2 * a8
    m[..., 5, 1] = m[..., 1, 5] = SQRT2 * a9
    m[..., 5, 2] = m[..., 2, 5] = -SQRT2 * (a8 + a9)

    # Shear block, factors 2
    m[..., 3, 3] = 1.0 + a1 - a3 - a2
    m[..., 4, 4] = 1.0 + a2 - a3 - a1
    m[..., 5, 5] = 1.0 + a3 - a2 - a1
    m[..., 4, 3] = m[..., 3, 4] = -2.0 * (a8 + a9)
    m[..., 5, 3] = m[..., 3, 5] = -2.0 * (a6 + a7)
    m[..., 5, 4] = m[..., 4, 5] = -2.0 * (a4 + a5)

    return m


def parameters_from_mandel(m):
    """Read the 9 parameters off Mandel matrices of shape (..., 6, 6), without checking the pattern."""

    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 0, 0],
                     m[..., 1, 1],
                     m[..., 2, 2],
                     m[..., 3, 1] / SQRT2,
                     m[..., 3, 2] / SQRT2,
                     m[..., 4, 0] / SQRT2,
                     m[..., 4, 2] / SQRT2,
                     m[..., 5, 0] / SQRT2,
                     m[..., 5, 1] / SQRT2], axis=-1)


def mandel_vectors(x):
    """Mandel 6-vectors (x1^2, x2^2, x3^2, sqrt2 x2 x3, sqrt2 x1 x3, sqrt2 x1 x2) of points (..., 3)."""

    x = np.asarray(x, dtype=float)
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    return np.stack([x1 * x1, x2 * x2, x3 * x3, SQRT2 * x2 * x3, SQRT2 * x1 * x3, SQRT2 * x1 * x2], axis=-1)


def symmetric_matrices_from_vec6(v):
    """Batched vec6_to_symtensor2: (..., 6) -> (..., 3, 3)."""

    v = np.asarray(v, dtype=float)
    d = np.empty(v.shape[:-1] + (3, 3))
    d[..., 0, 0] = v[..., 0]
    d[..., 1, 1] = v[..., 1]
    d[..., 2, 2] = v[..., 2]
    d[..., 1, 2] = d[..., 2, 1] = v[..., 3] / SQRT2
    d[..., 0, 2] = d[..., 2, 0] = v[..., 4] / SQRT2
    d[..., 0, 1] = d[..., 1, 0] = v[..., 5] / SQRT2
    return d


#
# Single-value operations
# ------------------------

def reference_tensor():
    """The axis-aligned reference cross x1^4 + x2^4 + x3^4."""

    return CrossTensor9([1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])


def isotropic_tensor():
    """The rotation invariant element of the space, (delta_ij delta_kl + delta_ik delta_jl + delta_il delta_jk) / 5."""

    return CrossTensor9([0.6, 0.6, 0.6, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])


def tensor_from_rotation(rotation):
    return CrossTensor9(tensors_from_rotations(rotation.r))


def nine_to_mandel(a):
    return Mandel6(mandel_matrices(a.a))


def mandel_to_nine(mandel):
    """Inverse of nine_to_mandel. Raises StructureViolation if an entry deviates from the pattern."""

    m = mandel.m if isinstance(mandel, Mandel6) else np.asarray(mandel, dtype=float)
    parameters = parameters_from_mandel(m)

    deviation = np.max(np.abs(mandel_matrices(parameters) - m))
    if deviation > STRUCTURE_TOLERANCE:
        row, column = np.unravel_index(np.argmax(np.abs(mandel_matrices(parameters) - m)), m.shape)
        raise StructureViolation("Mandel entry (%d, %d) deviates from the 9-parameter pattern by %.3g"
                                 % (row + 1, column + 1, deviation))

    return CrossTensor9(parameters)


def _canonical_values(a):
    """Values of the 15 independent components, keyed by index counts (n1, n2, n3)."""

    a1, a2, a3, a4, a5, a6, a7, a8, a9 = a
    return {(4, 0, 0): a1,
            (0, 4, 0): a2,
            (0, 0, 4): a3,
            # Partial traces A_ii11 = A_ii22 = A_ii33 = 1
            (2, 2, 0): 0.5 * (1.0 + a3 - a1 - a2),
            (2, 0, 2): 0.5 * (1.0 + a2 - a1 - a3),
            (0, 2, 2): 0.5 * (1.0 + a1 - a2 - a3),
            (3, 1, 0): a8,
            (1, 3, 0): a9,
            (3, 0, 1): a6,
            (1, 0, 3): a7,
            (0, 3, 1): a4,
            (0, 1, 3): a5,
            # Partial traces A_ii23 = A_ii13 = A_ii12 = 0
            (2, 1, 1): -(a4 + a5),
            (1, 2, 1): -(a6 + a7),
            (1, 1, 2): -(a8 + a9)}


def full_from_nine(a):
    """The fully symmetric 81-entry tensor of a 9-parameter tensor."""

    values = _canonical_values(a.a)
    t = np.empty((3, 3, 3, 3))
    for index in itertools.product(range(3), repeat=4):
        t[index] = values[tuple(index.count(axis) for axis in range(3))]

    return FullTensor4(t)


def nine_from_full(tensor):
    """Read the 9 parameters off a full tensor (no structural check)."""

    t = tensor.t
    return CrossTensor9([t[0, 0, 0, 0], t[1, 1, 1, 1], t[2, 2, 2, 2],
                         t[1, 2, 1, 1], t[1, 2, 2, 2], t[0, 2, 0, 0],
                         t[0, 2, 2, 2], t[0, 1, 0, 0], t[0, 1, 1, 1]])


def mandel_from_full(tensor):
    """Mandel matrix of a full tensor with minor and major symmetry, entry by entry."""

    t = tensor.t
    factors = np.array([1.0, 1.0, 1.0, SQRT2, SQRT2, SQRT2])
    m = np.empty((6, 6))
    for row, (i, j) in enumerate(MANDEL_PAIRS):
        for column, (k, l) in enumerate(MANDEL_PAIRS):
            m[row, column] = factors[row] * factors[column] * t[i, j, k, l]

    return Mandel6(m)


def rotate_tensor(a, rotation):
    """Apply A'_ijkl = S_im S_jn S_ko S_lp A_mnop to a tensor of the linear space."""

    s = rotation.r
    t = full_from_nine(a).t
    return nine_from_full(FullTensor4(np.einsum('im,jn,ko,lp,mnop->ijkl', s, s, s, s, t)))


def partial_traces(tensor):
    """The 3x3 matrix A_iikl."""

    return np.einsum('iikl->kl', tensor.t)


def validate_structure(tensor):
    """Check full symmetry and the partial traces A_iikl = delta_kl."""

    t = tensor.t
    symmetry_violation = max(np.max(np.abs(t - np.transpose(t, p))) for p in itertools.permutations(range(4)))
    trace_violation = np.max(np.abs(partial_traces(tensor) - np.eye(3)))

    return ValidationReport(float(symmetry_violation), float(trace_violation))


def evaluate_polynomial(a, x):
    """Value of A_ijkl x_i x_j x_k x_l as the quadratic form (x (x) x)^T M (x (x) x)."""

    v = mandel_vectors(x)
    return float(v @ mandel_matrices(a.a) @ v)


def mandel_contract(mandel1, mandel2):
    """Double contraction A:B as the 6x6 product. A Mandel6 when the product is symmetric (the
    inputs commute: a projector with itself, anything with the identity), else a MandelProduct."""

    product = mandel1.m @ mandel2.m
    if np.max(np.abs(product - product.T)) <= STRUCTURE_TOLERANCE:
        return Mandel6(product)

    return MandelProduct(product)


def mandel_distance(mandel1, mandel2):
    return float(np.linalg.norm(mandel1.m - mandel2.m))


def frobenius_distance(a, b):
    """Frobenius distance of the Mandel forms of two tensors."""

    return float(np.linalg.norm(mandel_matrices(a.a) - mandel_matrices(b.a)))


def vec6_to_symtensor2(v):
    v = np.asarray(v, dtype=float)
    if v.shape != (6,):
        raise StructureViolation("a Mandel vector has 6 components, got shape " + str(v.shape))
    return SymTensor2(symmetric_matrices_from_vec6(v))


def symtensor2_to_vec6(tensor):
    d = tensor.d
    return np.array([d[0, 0], d[1, 1], d[2, 2], SQRT2 * d[1, 2], SQRT2 * d[0, 2], SQRT2 * d[0, 1]])


def format_tensor(a):
    """9 whitespace separated floats, a1 first."""

    return " ".join("%.17g" % value for value in a.a)


def parse_tensor(line):
    fields = line.split()
    if len(fields) != 9:
        raise TensorFormatError("expected 9 values, got " + str(len(fields)))

    try:
        values = [float(field) for field in fields]
    except ValueError as e:
        raise TensorFormatError(str(e)) from e

    if not all(math.isfinite(value) for value in values):
        raise TensorFormatError("values must be finite")

    return CrossTensor9(values)
