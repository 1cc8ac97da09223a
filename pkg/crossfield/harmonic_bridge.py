"""
    harmonic_bridge.py
    ------------------
    Implements the link between the tensor representation and the spherical harmonics
    representation of crosses: the quartic polynomial of a tensor, its Laplacian, the orthogonal
    projection onto harmonic quartics and the real degree-4 spherical harmonics Y4m.
"""

import math
from dataclasses import dataclass

import numpy as np

from crossfield.tensor_rep import full_from_nine, reference_tensor

# Monomials x1^p x2^q x3^r of degree 4, as exponent triples
QUARTIC_MONOMIALS = tuple((p, q, 4 - p - q) for p in range(4, -1, -1) for q in range(4 - p, -1, -1))

# Monomials of the Laplacian of a quartic: x1^2, x2^2, x3^2, x2 x3, x1 x3, x1 x2
QUADRATIC_MONOMIALS = ((2, 0, 0), (0, 2, 0), (0, 0, 2), (0, 1, 1), (1, 0, 1), (1, 1, 0))

HARMONIC_TOLERANCE = 1e-12

# Ratio between the harmonic projection of x1^4 + x2^4 + x3^4 and sqrt(7/12) Y40 + sqrt(5/12) Y44
FRAME_SCALE = 8.0 * math.sqrt(3.0 * math.pi) / (15.0 * math.sqrt(7.0))

_INDEX = {monomial: i for i, monomial in enumerate(QUARTIC_MONOMIALS)}
_QUADRATIC_INDEX = {monomial: i for i, monomial in enumerate(QUADRATIC_MONOMIALS)}


def _coefficients(coeffs):
    coeffs = np.array(coeffs, dtype=float).reshape(-1)
    if coeffs.shape != (15,):
        raise ValueError("a quartic in 3 variables has 15 coefficients, got " + str(coeffs.size))
    if not np.all(np.isfinite(coeffs)):
        raise ValueError("polynomial coefficients must be finite")
    coeffs.setflags(write=False)
    return coeffs


@dataclass(frozen=True, eq=False)
class QuarticPolynomial:
    """Homogeneous quartic, coefficients ordered as QUARTIC_MONOMIALS."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _coefficients(self.coeffs))

    def coefficient(self, p, q, r):
        return float(self.coeffs[_INDEX[(p, q, r)]])


@dataclass(frozen=True, eq=False)
class HarmonicQuartic(QuarticPolynomial):
    """Quartic with a vanishing Laplacian."""

    def __post_init__(self):
        super().__post_init__()
        scale = max(1.0, float(np.max(np.abs(self.coeffs))))
        if np.max(np.abs(laplacian(self))) > HARMONIC_TOLERANCE * scale:
            raise ValueError("polynomial is not harmonic")


def polynomial_from_tensor(a):
    """Expand A_ijkl x_i x_j x_k x_l into monomial coefficients."""

    t = full_from_nine(a).t
    coeffs = np.zeros(15)
    for i, (p, q, r) in enumerate(QUARTIC_MONOMIALS):
        # All index orderings of the monomial hold the same value
        index = (0,) * p + (1,) * q + (2,) * r
        multiplicity = math.factorial(4) // (math.factorial(p) * math.factorial(q) * math.factorial(r))
        coeffs[i] = multiplicity * t[index]

    return QuarticPolynomial(coeffs)


def evaluate(p, x):
    """Value of the quartic at points of shape (..., 3)."""

    x = np.asarray(x, dtype=float)
    exponents = np.array(QUARTIC_MONOMIALS)
    monomials = np.prod(x[..., np.newaxis, :] ** exponents, axis=-1)
    values = monomials @ p.coeffs
    return float(values) if values.ndim == 0 else values


def laplacian(p):
    """The 6 coefficients (QUADRATIC_MONOMIALS order) of the Laplacian of a quartic."""

    result = np.zeros(6)
    for coefficient, exponents in zip(p.coeffs, QUARTIC_MONOMIALS):
        for axis in range(3):
            power = exponents[axis]
            if power < 2:
                continue
            derived = list(exponents)
            derived[axis] -= 2
            result[_QUADRATIC_INDEX[tuple(derived)]] += power * (power - 1) * coefficient

    return result


def squared_norm_squared():
    """|x|^4 as a quartic."""

    coeffs = np.zeros(15)
    for axis in range(3):
        fourth = [0, 0, 0]
        fourth[axis] = 4
        coeffs[_INDEX[tuple(fourth)]] = 1.0
    for first, second in ((0, 1), (0, 2), (1, 2)):
        mixed = [0, 0, 0]
        mixed[first] = mixed[second] = 2
        coeffs[_INDEX[tuple(mixed)]] = 2.0

    return QuarticPolynomial(coeffs)


def remove_isotropic_part(p):
    """Subtract (lambda / 20) |x|^4 from a quartic whose Laplacian is lambda |x|^2.

    Raises ValueError when the Laplacian is not a multiple of |x|^2.
    """

    coefficients = laplacian(p)
    scale = max(1.0, float(np.max(np.abs(p.coeffs))))
    diagonal, mixed = coefficients[:3], coefficients[3:]
    if np.max(np.abs(mixed)) > HARMONIC_TOLERANCE * scale or np.ptp(diagonal) > HARMONIC_TOLERANCE * scale:
        raise ValueError("Laplacian is not a multiple of |x|^2: " + str(coefficients))

    factor = float(np.mean(diagonal)) / 20.0
    return HarmonicQuartic(p.coeffs - factor * squared_norm_squared().coeffs)


def project_to_harmonic(a):
    """Orthogonal projection of the quartic of a tensor onto the harmonic quartics; for every
    tensor of the 9-parameter space this removes (3/5) |x|^4."""

    return remove_isotropic_part(polynomial_from_tensor(a))


def sh4_values(m, points):
    """Real orthonormal spherical harmonics Y4m (no Condon-Shortley phase) at unit points (..., 3)."""

    points = np.asarray(points, dtype=float)
    x, y, z = points[..., 0], points[..., 1], points[..., 2]
    pi = math.pi

    if m == -4:
        return 0.75 * math.sqrt(35.0 / pi) * x * y * (x * x - y * y)
    if m == -3:
        return 0.75 * math.sqrt(35.0 / (2.0 * pi)) * (3.0 * x * x - y * y) * y * z
    if m == -2:
        return 0.75 * math.sqrt(5.0 / pi) * x * y * (7.0 * z * z - 1.0)
    if m == -1:
        return 0.75 * math.sqrt(5.0 / (2.0 * pi)) * y * z * (7.0 * z * z - 3.0)
    if m == 0:
        return 3.0 / 16.0 * math.sqrt(1.0 / pi) * (35.0 * z ** 4 - 30.0 * z * z + 3.0)
    if m == 1:
        return 0.75 * math.sqrt(5.0 / (2.0 * pi)) * x * z * (7.0 * z * z - 3.0)
    if m == 2:
        return 3.0 / 8.0 * math.sqrt(5.0 / pi) * (x * x - y * y) * (7.0 * z * z - 1.0)
    if m == 3:
        return 0.75 * math.sqrt(35.0 / (2.0 * pi)) * (x * x - 3.0 * y * y) * x * z
    if m == 4:
        return 3.0 / 16.0 * math.sqrt(35.0 / pi) * (x ** 4 - 6.0 * x * x * y * y + y ** 4)

    raise ValueError("order m must be in [-4, 4], got " + str(m))


def sh4_eval(m, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (3,) or abs(np.linalg.norm(x) - 1.0) > 1e-12:
        raise ValueError("sh4_eval expects a unit 3-vector, got " + str(x))

    return float(sh4_values(m, x))


def sphere_quadrature(order=50):
    """Product rule on the unit sphere: Gauss-Legendre in x3 times the trapezoidal rule in the
    azimuth. Exact for polynomials of degree < order. Returns (points (n, 3), weights (n,))."""

    heights, height_weights = np.polynomial.legendre.leggauss(order // 2)
    azimuths = 2.0 * math.pi * np.arange(order) / order

    z, phi = np.meshgrid(heights, azimuths, indexing="ij")
    ring = np.sqrt(1.0 - z * z)
    points = np.stack([ring * np.cos(phi), ring * np.sin(phi), z], axis=-1).reshape(-1, 3)
    weights = np.repeat(height_weights * (2.0 * math.pi / order), order)

    return points, weights


def orthogonality_check(a, m=None):
    """Integral over the sphere of Y4m (P(alpha) - alpha), alpha the quartic of "a".

    With m = None the constant function 1 replaces Y4m.
    """

    points, weights = sphere_quadrature()
    alpha = polynomial_from_tensor(a)
    difference = evaluate(project_to_harmonic(a), points) - evaluate(alpha, points)
    harmonic = np.ones(len(points)) if m is None else sh4_values(m, points)

    return float(np.sum(weights * harmonic * difference))


def reference_frame(x):
    """sqrt(7/12) Y40 + sqrt(5/12) Y44, the spherical harmonics form of the reference cross."""

    return math.sqrt(7.0 / 12.0) * sh4_values(0, x) + math.sqrt(5.0 / 12.0) * sh4_values(4, x)


def frame_scale_factors(points):
    """Ratio of the harmonic projection of the reference cross to reference_frame at unit points."""

    points = np.asarray(points, dtype=float)
    return evaluate(project_to_harmonic(reference_tensor()), points) / reference_frame(points)
