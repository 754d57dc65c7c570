"""
Real spherical harmonics of degree <= 4, sphere quadrature and the
(a0, u0) pair on the unit sphere.

Every harmonic is stored as its solid harmonic r^l Y_lm(x / r), a
homogeneous polynomial of degree l, so values and gradients off the sphere
come for free.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product
from typing import Dict, Tuple

import numpy as np
from scipy.special import factorial, lpmv

from skewdrift.config.settings import config
from skewdrift.utils.errors import QuadratureError, ValidationError

logger = logging.getLogger("zhikov")

MAX_DEGREE = 4
ZONAL_AXIS = 2

Coefficients = Dict[Tuple[int, int], float]


def _check_index(l: int, m: int) -> None:
    if not 0 <= l <= MAX_DEGREE or abs(m) > l:
        raise ValidationError(f"harmonic index (l={l}, m={m}) outside degree <= {MAX_DEGREE}")


def real_harmonic(l: int, m: int, directions: np.ndarray) -> np.ndarray:
    """
    Orthonormal real spherical harmonic Y_lm at unit directions.

    m > 0 uses cos(m phi), m < 0 uses sin(|m| phi); the Condon-Shortley
    phase is dropped so that Y_11 is proportional to +x.
    """
    _check_index(l, m)
    directions = np.atleast_2d(directions)
    z = np.clip(directions[:, ZONAL_AXIS], -1.0, 1.0)
    phi = np.arctan2(directions[:, 1], directions[:, 0])
    k = abs(m)
    norm = math.sqrt((2 * l + 1) / (4.0 * math.pi) * float(factorial(l - k) / factorial(l + k)))
    legendre = (-1) ** k * lpmv(k, l, z)
    if m == 0:
        return norm * legendre
    trig = np.cos(k * phi) if m > 0 else np.sin(k * phi)
    return math.sqrt(2.0) * norm * legendre * trig


def _monomials(l: int) -> np.ndarray:
    return np.array([e for e in product(range(l + 1), repeat=3) if sum(e) == l])


def _fibonacci_sphere(count: int) -> np.ndarray:
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    phi = math.pi * (1.0 + math.sqrt(5.0)) * k
    s = np.sqrt(1.0 - z ** 2)
    return np.stack([s * np.cos(phi), s * np.sin(phi), z], axis=1)


@lru_cache(maxsize=None)
def solid_harmonic(l: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Monomial exponents (K, 3) and coefficients (K,) of r^l Y_lm.

    Homogeneous polynomials of degree l are determined by their values on
    the sphere, so a least-squares fit at spread directions is exact.
    """
    _check_index(l, m)
    exponents = _monomials(l)
    directions = _fibonacci_sphere(8 * exponents.shape[0] + 16)
    design = np.prod(directions[:, None, :] ** exponents[None, :, :], axis=2)
    coefficients, *_ = np.linalg.lstsq(design, real_harmonic(l, m, directions), rcond=None)
    coefficients[np.abs(coefficients) < 1e-13] = 0.0
    return exponents, coefficients


def solid_values(l: int, m: int, x: np.ndarray) -> np.ndarray:
    exponents, coefficients = solid_harmonic(l, m)
    return np.prod(np.atleast_2d(x)[:, None, :] ** exponents[None, :, :], axis=2) @ coefficients


def solid_gradient(l: int, m: int, x: np.ndarray) -> np.ndarray:
    """Gradient of r^l Y_lm at points, shape (P, 3)."""
    exponents, coefficients = solid_harmonic(l, m)
    x = np.atleast_2d(x)
    out = np.zeros_like(x, dtype=float)
    for axis in range(3):
        lowered = exponents.copy()
        lowered[:, axis] = np.maximum(lowered[:, axis] - 1, 0)
        factor = exponents[:, axis] * coefficients
        out[:, axis] = np.prod(x[:, None, :] ** lowered[None, :, :], axis=2) @ factor
    return out


@lru_cache(maxsize=None)
def sphere_rule(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Product rule on the unit sphere: Gauss-Legendre in cos(theta) times the
    trapezoid rule with 2 * order points in phi.

    Exact for polynomials of degree < 2 * order.

    Returns:
        Tuple of (directions (Q, 3), weights (Q,)), weights summing to 4 pi
    """
    if order < 1:
        raise ValidationError(f"sphere quadrature order must be positive, got {order}")
    z, wz = np.polynomial.legendre.leggauss(order)
    phi = np.arange(2 * order) * math.pi / order
    zz, pp = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1.0 - zz ** 2)
    directions = np.stack([s * np.cos(pp), s * np.sin(pp), zz], axis=-1).reshape(-1, 3)
    weights = np.repeat(wz * math.pi / order, 2 * order)
    return directions, weights


def expansion(coefficients: Coefficients, x: np.ndarray) -> np.ndarray:
    """Value of sum c_lm Y_lm(x / |x|) at nonzero points."""
    x = np.atleast_2d(x)
    r = np.linalg.norm(x, axis=1)
    omega = x / r[:, None]
    out = np.zeros(x.shape[0])
    for (l, m), c in coefficients.items():
        out += c * solid_values(l, m, omega)
    return out


@dataclass(frozen=True)
class SphericalPair:
    """
    Angular profiles a0 and u0 with int a0 = int u0 a0 = 0 and
    int a0 u0^2 = -2 on the unit sphere.

    a0 = normalization * sum a0_coefficients[l, m] Y_lm; u0 is the plain
    expansion of u0_coefficients.
    """

    a0_coefficients: Coefficients
    u0_coefficients: Coefficients
    normalization: float = 1.0
    constraints: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for l, m in list(self.a0_coefficients) + list(self.u0_coefficients):
            _check_index(l, m)

    def a0(self, x: np.ndarray) -> np.ndarray:
        return self.normalization * expansion(self.a0_coefficients, x)

    def u0(self, x: np.ndarray) -> np.ndarray:
        return expansion(self.u0_coefficients, x)

    def flipped(self) -> "SphericalPair":
        """The pair with a0 replaced by -a0."""
        return SphericalPair(self.a0_coefficients, self.u0_coefficients, -self.normalization)

    def moments(self, order: int = None) -> Dict[str, float]:
        """The three constraint integrals under the sphere rule of the given order."""
        order = config.get("zhikov", "sphere_order") if order is None else order
        omega, weights = sphere_rule(order)
        a0, u0 = self.a0(omega), self.u0(omega)
        return {
            "a0": float(weights @ a0),
            "u0_a0": float(weights @ (u0 * a0)),
            "a0_u0_squared": float(weights @ (a0 * u0 ** 2)),
        }

    def to_dict(self) -> Dict[str, object]:
        return {
            "a0_coefficients": {f"{l},{m}": c for (l, m), c in sorted(self.a0_coefficients.items())},
            "u0_coefficients": {f"{l},{m}": c for (l, m), c in sorted(self.u0_coefficients.items())},
            "normalization": self.normalization,
            "constraints": self.constraints,
        }


def build_pair(order: int = None) -> SphericalPair:
    """
    Minimal-degree pair: u0 = Y_10, a0 = beta Y_20 with beta fixed by the
    cubic moment so that int a0 u0^2 = -2.

    Raises:
        QuadratureError: When the cubic moment is degenerate or the
            orthogonality constraints fail under the sphere rule
    """
    order = config.get("zhikov", "sphere_order") if order is None else order
    unscaled = SphericalPair({(2, 0): 1.0}, {(1, 0): 1.0})
    moment = unscaled.moments(order)["a0_u0_squared"]
    if abs(moment) < 1e-12:
        raise QuadratureError(f"cubic moment {moment:.3e} is degenerate")
    beta = -2.0 / moment
    scaled = SphericalPair(unscaled.a0_coefficients, unscaled.u0_coefficients, beta)
    moments = scaled.moments(order)
    if abs(moments["a0"]) > 1e-10 or abs(moments["u0_a0"]) > 1e-10:
        raise QuadratureError(f"orthogonality constraints fail at order {order}: {moments}")
    logger.info(f"Built pair with beta={beta:.10f} at sphere order {order}")
    return SphericalPair(scaled.a0_coefficients, scaled.u0_coefficients, beta, moments)


def stream_coefficients(coefficients: Coefficients) -> Coefficients:
    """psi with Laplace-Beltrami psi = a0: psi_lm = -c_lm / (l (l + 1))."""
    out = {}
    for (l, m), c in coefficients.items():
        if l == 0:
            if c != 0.0:
                raise ValidationError("a0 with a nonzero mean has no angular stream function")
            continue
        out[(l, m)] = -c / (l * (l + 1))
    return out
