"""
Truncated solves, the approximation-solution driver, the skew bracket and
the energy defect.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from skewdrift.config.settings import config
from skewdrift.fem.fields import (
    Functional, ScalarField, SkewField, VectorField, gradient, h1_seminorm, l2_norm, same_mesh,
)
from skewdrift.fem.mesh import Mesh
from skewdrift.potentials.construct import solenoidal_residual
from skewdrift.solver.assembly import LinearSystem, apply_functional, assemble, assemble_drift
from skewdrift.solver.krylov import krylov_solve, poincare_constant
from skewdrift.utils.convergence import ConvergenceTracker
from skewdrift.utils.errors import ValidationError

logger = logging.getLogger("solver")


@dataclass(frozen=True, eq=False)
class SolveReport:
    """Result of an approximation-solution run."""

    u: ScalarField
    truncation_levels: List[float]
    increments: List[float]
    bracket_uu: float
    energy_defect: float
    linear_residuals: List[float]
    converged: bool
    gradient_norm: float
    history: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "truncation_levels": self.truncation_levels,
            "increments": self.increments,
            "bracket_uu": self.bracket_uu,
            "energy_defect": self.energy_defect,
            "linear_residuals": self.linear_residuals,
            "converged": self.converged,
            "gradient_norm": self.gradient_norm,
            "history": self.history,
        }


def truncate_skew(a_field: SkewField, level: float) -> SkewField:
    """Clamp every stored entry to [-N, N]."""
    if not level > 0:
        raise ValidationError(f"truncation level must be positive, got {level}")
    return SkewField(a_field.mesh, np.clip(a_field.values, -level, level))


def truncate_vector(drift: VectorField, level: float) -> VectorField:
    """Clamp every component to [-N, N]."""
    if not level > 0:
        raise ValidationError(f"truncation level must be positive, got {level}")
    return VectorField(drift.mesh, np.clip(drift.values, -level, level))


def bracket(u: ScalarField, v: ScalarField, a_field: SkewField) -> float:
    """
    [u, v] = int A grad u . grad v.

    Evaluated as sum_{k<l} A_kl (d_l u d_k v - d_k u d_l v), so
    [u, u] = 0 and [u, v] = -[v, u] hold exactly.
    """
    mesh = same_mesh(u, v, a_field)
    gu, gv = gradient(u).values, gradient(v).values
    rows, cols = np.triu_indices(mesh.dimension, 1)
    pairs = gu[:, cols] * gv[:, rows] - gu[:, rows] * gv[:, cols]
    return float((mesh.cell_volumes * (a_field.values * pairs).sum(axis=1)).sum())


def energy_defect(u: ScalarField, f: Functional) -> float:
    """(f, u) - int |grad u|^2."""
    return apply_functional(f, u) - h1_seminorm(u) ** 2


def apriori_bound(f: Functional) -> float:
    """C_P ||g||_2 + ||F||_2, the bound on ||grad u_N||_2 from the energy identity."""
    mesh = f.mesh
    bound = 0.0
    if f.density is not None:
        bound += poincare_constant(mesh) * l2_norm(f.density)
    if f.flux is not None:
        bound += math.sqrt(float((mesh.cell_volumes * (f.flux.values ** 2).sum(axis=1)).sum()))
    return bound


def _solve(system: LinearSystem, x0: Optional[np.ndarray] = None) -> Tuple[ScalarField, List[float]]:
    values, history = krylov_solve(system.matrix, system.rhs, x0=x0)
    return system.expand(values), history


def solve_truncated(
    mesh: Mesh, a_field: SkewField, level: float, f: Functional, x0: Optional[np.ndarray] = None
) -> ScalarField:
    """
    Solve the Dirichlet problem with A clamped at level N.

    Args:
        mesh: The mesh
        a_field: Skew field A
        level: Truncation level N > 0 (inf for none)
        f: Right-hand side
        x0: Optional initial interior iterate

    Returns:
        ScalarField: The discrete solution, zero on the boundary
    """
    truncated = a_field if math.isinf(level) else truncate_skew(a_field, level)
    u, _ = _solve(assemble(mesh, truncated, f), x0)
    return u


def approximation_solution(
    mesh: Mesh,
    a_field: SkewField,
    f: Functional,
    schedule: Optional[Sequence[float]] = None,
    tracker: Optional[ConvergenceTracker] = None,
    x0: Optional[np.ndarray] = None,
    check_apriori: Optional[bool] = None,
) -> SolveReport:
    """
    Solve along an increasing truncation schedule and record the increments.

    Stops early once ||grad(u_N - u_prev)|| <= increment_rtol ||grad u_N||.
    A single level has no increment and is reported as not converged.

    Args:
        mesh: The mesh
        a_field: Skew field A (may be unbounded)
        f: Right-hand side
        schedule: Increasing truncation levels
        tracker: Receives per-level histories
        x0: Initial interior iterate of the first level
        check_apriori: Compare ||grad u_N|| against the a-priori bound

    Returns:
        SolveReport: Final solution with histories
    """
    schedule = config.get_floats("solver", "schedule") if schedule is None else list(schedule)
    check_apriori = config.get("solver", "check_apriori") if check_apriori is None else check_apriori
    increment_rtol = config.get("solver", "increment_rtol")
    if not schedule:
        raise ValidationError("truncation schedule is empty")
    if any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValidationError(f"truncation schedule must be increasing, got {schedule}")
    same_mesh(a_field, f)
    tracker = tracker or ConvergenceTracker()
    bound = apriori_bound(f) if check_apriori else None

    previous: Optional[ScalarField] = None
    truncated = a_field
    iterate = x0
    converged = False
    for level in schedule:
        truncated = truncate_skew(a_field, level)
        system = assemble(mesh, truncated, f)
        u, history = _solve(system, iterate)
        iterate = u.values[system.interior]
        norm = h1_seminorm(u)
        increment = h1_seminorm(u - previous) if previous is not None else None
        tracker.update(level, norm, history, increment, bound)
        if bound is not None and norm > bound * (1.0 + 1e-8):
            logger.warning(f"A-priori bound violated at N={level:g}: {norm:.6g} > {bound:.6g}")
        logger.debug(f"N={level:g}: |grad u|={norm:.6g}, increment={increment}")
        previous = u
        if increment is not None and increment <= increment_rtol * norm:
            converged = True
            break

    history = tracker.get_history_dict()
    report = SolveReport(
        u=previous,
        truncation_levels=history["truncation_levels"],
        increments=history["increments"],
        bracket_uu=bracket(previous, previous, truncated),
        energy_defect=energy_defect(previous, f),
        linear_residuals=[r[-1] for r in history["linear_residuals"]],
        converged=converged,
        gradient_norm=h1_seminorm(previous),
        history=history,
    )
    logger.info(tracker.get_summary())
    return report


def solve_drift(
    mesh: Mesh, drift: VectorField, level: float, f: Functional, x0: Optional[np.ndarray] = None
) -> ScalarField:
    """
    Solve int grad u . grad phi + int (a_N u) . grad phi = (f, phi).

    The clamped drift is checked against the solenoidality gate; a failing
    drift is solved anyway with a warning.
    """
    truncated = drift if math.isinf(level) else truncate_vector(drift, level)
    residual = solenoidal_residual(truncated)
    scale = math.sqrt(float((mesh.cell_volumes * (truncated.values ** 2).sum(axis=1)).sum()))
    if residual > config.get("potentials", "solenoidal_rtol") * max(scale, 1e-300):
        logger.warning(f"Drift fails the solenoidality gate: residual {residual:.3e} vs |a|_2 {scale:.3e}")
    u, _ = _solve(assemble_drift(mesh, truncated, f), x0)
    return u


def null_test(
    mesh: Mesh, a_field: SkewField, schedule: Optional[Sequence[float]] = None, x0: Optional[np.ndarray] = None
) -> float:
    """
    Approximation solution with f = 0; returns the final ||grad u||_2.

    Args:
        x0: Optional nonzero initial iterate injected at the first level
    """
    zero = Functional(density=ScalarField.zeros(mesh))
    report = approximation_solution(mesh, a_field, zero, schedule, x0=x0, check_apriori=False)
    return report.gradient_norm
