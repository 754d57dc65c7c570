"""
The nonuniqueness example on the unit ball in R^3:

    a = a0(x / |x|) x / |x|^3,    u = (1 - |x|^4) u0(x / |x|),

for which -int a u . grad u = -1. The drift is singular at the origin and is
excised on B_rho wherever it enters a discrete computation.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Sequence, Tuple

import numpy as np

from skewdrift.analysis.classify import NormReport, classify_drift
from skewdrift.config.settings import config
from skewdrift.fem.fields import Functional, ScalarField, SkewField, VectorField, gradient
from skewdrift.fem.mesh import DomainKind, Mesh, build_mesh
from skewdrift.fem.quadrature import quadrature_points
from skewdrift.solver.approximation import SolveReport, approximation_solution, energy_defect
from skewdrift.utils.errors import ValidationError
from skewdrift.zhikov.harmonics import SphericalPair, solid_gradient, stream_coefficients

logger = logging.getLogger("zhikov")


def _check_ball(mesh: Mesh) -> None:
    if mesh.domain.kind != DomainKind.UNIT_BALL:
        raise ValidationError(f"the example lives on the unit ball, got {mesh.domain.kind.value}")


def _check_rho(rho: float) -> None:
    if not 0.0 < rho <= 0.1:
        raise ValidationError(f"excision radius rho must lie in (0, 0.1], got {rho}")


def drift_values(pair: SphericalPair, points: np.ndarray) -> np.ndarray:
    """a at points; zero at the origin."""
    points = np.atleast_2d(points)
    r = np.linalg.norm(points, axis=1)
    out = np.zeros_like(points, dtype=float)
    nonzero = r > 0.0
    x, rr = points[nonzero], r[nonzero]
    out[nonzero] = (pair.a0(x) / rr ** 3)[:, None] * x
    return out


def drift_field(pair: SphericalPair, mesh: Mesh, rho: float) -> VectorField:
    """
    Cellwise a at centroids, zero on cells whose centroid lies in B_rho.

    Args:
        pair: Angular profiles
        mesh: Unit-ball mesh
        rho: Excision radius in (0, 0.1]
    """
    _check_ball(mesh)
    _check_rho(rho)
    values = drift_values(pair, mesh.centroids)
    values[np.linalg.norm(mesh.centroids, axis=1) < rho] = 0.0
    return VectorField(mesh, values)


def candidate_values(pair: SphericalPair, points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    r = np.linalg.norm(points, axis=1)
    out = np.zeros(points.shape[0])
    nonzero = r > 0.0
    out[nonzero] = (1.0 - r[nonzero] ** 4) * pair.u0(points[nonzero])
    return out


def candidate_solution(pair: SphericalPair, mesh: Mesh) -> ScalarField:
    """Vertex values of (1 - r^4) u0; 0 at the origin and on the boundary."""
    _check_ball(mesh)
    values = candidate_values(pair, mesh.vertices)
    values[mesh.boundary] = 0.0
    return ScalarField(mesh, values)


def _excised_quadrature(mesh: Mesh, rho: float) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Quadrature over the mesh minus B_rho, refined near the origin and on the
    cells cut by the excision sphere.

    Returns:
        Tuple of (cell ids (P,), points (P, 3), weights (P,), barycentric (P, 4))
    """
    radius = np.linalg.norm(mesh.centroids, axis=1)
    reach = np.linalg.norm(mesh.vertices[mesh.cells], axis=2).max(axis=1)
    kept = reach > rho
    inner = kept & ((radius < config.get("zhikov", "inner_radius")) | (np.abs(radius - rho) < 1.5 * mesh.h))
    groups = []
    for cells, refine in ((np.flatnonzero(kept & ~inner), 0),
                          (np.flatnonzero(inner), config.get("zhikov", "inner_refine"))):
        if cells.size == 0:
            continue
        points, weights, bary = quadrature_points(mesh, refine, cells)
        q = bary.shape[0]
        groups.append((np.repeat(cells, q), points.reshape(-1, 3), weights.reshape(-1), np.tile(bary, (cells.size, 1))))
    ids, points, weights, bary = (np.concatenate(parts) for parts in zip(*groups))
    weights = np.where(np.linalg.norm(points, axis=1) < rho, 0.0, weights)
    return ids, points, weights, bary


def core_radius(mesh: Mesh, rho: float) -> float:
    """
    Excision radius for the discrete candidate: rho, widened to
    ``zhikov.core_shells`` grid steps (the radial shell thickness of the ball mesh).

    The P1 candidate is continuous at the origin, so the cells around it
    carry a spurious jump of u0 that cancels the defect unless they are cut
    out together with B_rho.
    """
    return max(rho, config.get("zhikov", "core_shells") * mesh.spacing)


def bracket_integrand(pair: SphericalPair, points: np.ndarray) -> np.ndarray:
    """-a . u grad u = 4 r (1 - r^4) a0 u0^2; only the radial part of grad u meets a."""
    r = np.linalg.norm(points, axis=1)
    out = np.zeros(points.shape[0])
    nonzero = r > 0.0
    x, rr = points[nonzero], r[nonzero]
    out[nonzero] = 4.0 * rr * (1.0 - rr ** 4) * pair.a0(x) * pair.u0(x) ** 2
    return out


def bracket_value(pair: SphericalPair, mesh: Mesh, rho: float) -> float:
    """
    -int_{Omega minus B_rho} a . u grad u by quadrature of the exact fields.

    Tends to -1 as the mesh is refined and rho shrinks.
    """
    _check_ball(mesh)
    _check_rho(rho)
    _, points, weights, _ = _excised_quadrature(mesh, rho)
    value = float(weights @ bracket_integrand(pair, points))
    logger.info(f"Bracket value {value:.6f} (rho={rho:g}, resolution {mesh.resolution})")
    return value


def excised_reference(pair: SphericalPair, rho: float) -> float:
    """Closed form of the excised bracket: (1 - rho^4)^2 / 2 * int a0 u0^2."""
    return 0.5 * (1.0 - rho ** 4) ** 2 * pair.moments()["a0_u0_squared"]


def potential_values(pair: SphericalPair, points: np.ndarray) -> np.ndarray:
    """
    w with curl w = a away from the origin:
    w = sum_lm psi_lm r^(-l-1) x cross grad(r^l Y_lm), Laplace-Beltrami psi = a0.
    """
    points = np.atleast_2d(points)
    r = np.linalg.norm(points, axis=1)
    w = np.zeros_like(points, dtype=float)
    nonzero = r > 0.0
    x, rr = points[nonzero], r[nonzero]
    for (l, m), c in stream_coefficients(pair.a0_coefficients).items():
        term = np.cross(x, solid_gradient(l, m, x))
        w[nonzero] += pair.normalization * c * rr[:, None] ** (-l - 1) * term
    return w


def skew_potential(pair: SphericalPair, mesh: Mesh, sign: float = 1.0) -> SkewField:
    """
    Skew field A xi = w x xi at centroids, so that div A = sign * a.

    Args:
        pair: Angular profiles
        mesh: Unit-ball mesh
        sign: +1 for a, -1 for the drift b = -a of the approximation problem
    """
    _check_ball(mesh)
    w = sign * potential_values(pair, mesh.centroids)
    return SkewField(mesh, np.stack([-w[:, 2], w[:, 1], -w[:, 0]], axis=1))


def right_hand_side(pair: SphericalPair, u: ScalarField, rho: float) -> Functional:
    """
    f = -div(grad u + b u) with b = -a excised on B_rho, as the flux
    F = -(grad u + cell mean of (b u)).
    """
    mesh = u.mesh
    ids, points, weights, bary = _excised_quadrature(mesh, rho)
    u_points = np.einsum("pj,pj->p", u.values[mesh.cells[ids]], bary)
    moments = -(weights * u_points)[:, None] * drift_values(pair, points)
    drift_part = np.stack([np.bincount(ids, weights=moments[:, k], minlength=mesh.n_cells) for k in range(3)], axis=1)
    flux = -(gradient(u).values + drift_part / mesh.cell_volumes[:, None])
    return Functional(flux=VectorField(mesh, flux))


@dataclass(frozen=True, eq=False)
class ZhikovReport:
    """The paired solution reports of the example and the criterion table."""

    pair: SphericalPair
    resolution: int
    rho: float
    core_radius: float
    bracket: float
    reference: float
    candidate_defect: float
    solve: SolveReport
    norms: Optional[NormReport]
    defect_tol: float
    approximation_tol: float

    @property
    def reproduced(self) -> bool:
        return (abs(self.candidate_defect + 1.0) <= self.defect_tol
                and self.solve.energy_defect >= -self.approximation_tol)

    def verdict(self) -> str:
        answer = "yes" if self.reproduced else "no"
        return f"nonapproximation defect {self.candidate_defect:.2f} ± {self.defect_tol:g} reproduced: {answer}"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "pair": self.pair.to_dict(),
            "resolution": self.resolution,
            "rho": self.rho,
            "core_radius": self.core_radius,
            "bracket": self.bracket,
            "excised_reference": self.reference,
            "candidate_defect": self.candidate_defect,
            "approximation": self.solve.to_dict(),
            "norms": self.norms.to_dict() if self.norms is not None else None,
            "reproduced": self.reproduced,
            "verdict": self.verdict(),
        }


def nonuniqueness_report(
    pair: SphericalPair,
    mesh: Mesh,
    rho: float,
    schedule: Optional[Sequence[float]] = None,
    classify: bool = True,
) -> ZhikovReport:
    """
    Compare the example solution with the approximation solution for the
    same right-hand side.

    The example's defect (f, u) - int |grad u|^2 equals the bracket, about -1,
    while the approximation solution satisfies the energy identity.

    Args:
        pair: Angular profiles
        mesh: Unit-ball mesh
        rho: Excision radius in (0, 0.1]
        schedule: Truncation levels (default: zhikov.schedule)
        classify: Also classify |a| against the uniqueness criteria, using
            a twice finer mesh with rho / 2 as the refined sample

    Returns:
        ZhikovReport: Both defects, the bracket and the criterion table
    """
    _check_ball(mesh)
    _check_rho(rho)
    schedule = config.get_floats("zhikov", "schedule") if schedule is None else list(schedule)

    u = candidate_solution(pair, mesh)
    core = core_radius(mesh, rho)
    if core > 0.5:
        raise ValidationError(
            f"resolution {mesh.resolution} is too coarse: the excised core reaches radius {core:.3g} > 0.5")
    f = right_hand_side(pair, u, core)
    candidate_defect = energy_defect(u, f)
    logger.info(f"Candidate defect (f, u) - |grad u|^2 = {candidate_defect:.6f} (core radius {core:.3g})")

    a_field = skew_potential(pair, mesh, sign=-1.0)
    solve = approximation_solution(mesh, a_field, f, schedule, check_apriori=False)
    logger.info(f"Approximation solution defect {solve.energy_defect:.3e}")

    norms = None
    if classify:
        fine = build_mesh(mesh.domain, 2 * mesh.resolution)
        norms = classify_drift(drift_field(pair, mesh, rho), refined=drift_field(pair, fine, rho / 2.0))

    report = ZhikovReport(
        pair=pair,
        resolution=mesh.resolution,
        rho=rho,
        core_radius=core,
        bracket=bracket_value(pair, mesh, rho),
        reference=excised_reference(pair, rho),
        candidate_defect=candidate_defect,
        solve=solve,
        norms=norms,
        defect_tol=config.get("zhikov", "defect_tol"),
        approximation_tol=config.get("zhikov", "approximation_tol"),
    )
    logger.info(report.verdict())
    return report
