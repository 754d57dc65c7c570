"""
Riesz potential I f(x) = int |x - y|^(1-n) |f(y)| dy and the computable
right-hand sides of its L^p -> L^q and Morrey estimates.
"""

import logging
import math
from typing import Optional

import numpy as np

from skewdrift.analysis.balls import morrey_norm, unit_ball_volume
from skewdrift.analysis.norms import lp_norm
from skewdrift.config.settings import config
from skewdrift.fem.fields import Layout, ScalarField
from skewdrift.fem.quadrature import kernel_integral
from skewdrift.utils.errors import ValidationError

logger = logging.getLogger("norms")


def riesz_values(
    f: ScalarField, targets: np.ndarray, levels: Optional[int] = None, threads: Optional[int] = None
) -> np.ndarray:
    """
    Riesz potential of |f| at the given vertices.

    Cells of the evaluation vertex's patch are integrated with the graded
    rule; the density is |f| averaged per cell.
    """
    mesh = f.mesh
    levels = config.get("analysis", "graded_levels") if levels is None else levels
    threads = config.get("run", "threads") if threads is None else threads
    density = np.abs(f.values[mesh.cells]).mean(axis=1) if f.is_vertex else np.abs(f.values)
    return kernel_integral(mesh, density, 1.0 - mesh.dimension, targets, levels=levels, threads=threads)


def riesz_potential(f: ScalarField, levels: Optional[int] = None, threads: Optional[int] = None) -> ScalarField:
    """Vertex field of the Riesz potential of |f|."""
    values = riesz_values(f, np.arange(f.mesh.n_vertices), levels=levels, threads=threads)
    return ScalarField(f.mesh, values, Layout.VERTEX)


def lp_potential_bound(f: ScalarField, p: float, q: float) -> float:
    """
    Bound on ||I f||_q in terms of ||f||_p:
    ((1 - d) / (mu - d))^(1 - d) omega_n^(1 - mu) |Omega|^(mu - d) ||f||_p,
    with mu = 1/n and d = 1/p - 1/q, valid for 0 <= d < mu.
    """
    n = f.mesh.dimension
    mu = 1.0 / n
    delta = 1.0 / p - 1.0 / q
    if not 0.0 <= delta < mu:
        raise ValidationError(f"need 0 <= 1/p - 1/q < 1/n, got {delta:.4g} for p={p}, q={q}")
    measure = f.mesh.domain.volume
    constant = ((1.0 - delta) / (mu - delta)) ** (1.0 - delta)
    return constant * unit_ball_volume(n) ** (1.0 - mu) * measure ** (mu - delta) * lp_norm(f, p)


def morrey_potential_bound(f: ScalarField, q: float, morrey: Optional[float] = None) -> float:
    """
    Bound on int |I f|^q for f in the Morrey space M^n:
    n (n-1)^(q-1) omega_n q^q diam^n ||f||_{M^n}^q.
    """
    n = f.mesh.dimension
    if q < 1.0:
        raise ValidationError(f"q must be at least 1, got {q}")
    morrey = morrey_norm(f, float(n)) if morrey is None else morrey
    diameter = f.mesh.domain.diameter
    return n * (n - 1) ** (q - 1.0) * unit_ball_volume(n) * q ** q * diameter ** n * morrey ** q


def log_morrey_bound_ratio(potential: ScalarField, f: ScalarField, q: float) -> float:
    """log(int |I f|^q) - log(Morrey-space bound); nonpositive when the bound holds."""
    lhs = lp_norm(potential, q) ** q
    rhs = morrey_potential_bound(f, q)
    if lhs == 0.0:
        return -math.inf
    return math.log(lhs) - math.log(rhs)
