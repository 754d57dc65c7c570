"""
Skew potentials A with div A = a (a_i = d_j A_ji) for solenoidal drifts a,
and the weak checks of that identity.

Three constructions are provided: the 2-D stream function, the line
integral w(x) = int_0^1 a(tx) x tx dt on the ball (A xi = w x xi), and the
Newtonian potential A_ij = d_j V_i - d_i V_j of the zero extension.
"""

import logging
import math
from typing import List, Optional

import numpy as np
import scipy.sparse.linalg as spla

from skewdrift.config.settings import config
from skewdrift.fem.fields import ScalarField, SkewField, VectorField, gradient
from skewdrift.fem.mesh import DomainKind, Mesh
from skewdrift.fem.quadrature import kernel_integral
from skewdrift.solver.assembly import mass_matrix, stiffness_matrix
from skewdrift.utils.errors import NormalTraceError, SolenoidalityError, ValidationError

logger = logging.getLogger("potentials")


def _l2(values: np.ndarray, mesh: Mesh) -> float:
    return math.sqrt(float((mesh.cell_volumes * (values ** 2).sum(axis=1)).sum()))


def _hat_flux(a: VectorField) -> np.ndarray:
    """int a . grad phi_v for every vertex hat."""
    mesh = a.mesh
    contrib = mesh.cell_volumes[:, None] * np.einsum("cid,cd->ci", mesh.basis_gradients, a.values)
    return np.bincount(mesh.cells.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices)


def _hat_norms(mesh: Mesh) -> np.ndarray:
    return np.sqrt(stiffness_matrix(mesh).diagonal())


def solenoidal_residual(a: VectorField) -> float:
    """max over interior hats of |int a . grad phi| / ||grad phi||_2."""
    mesh = a.mesh
    interior = mesh.interior_vertices
    if interior.size == 0:
        return 0.0
    return float(np.max(np.abs(_hat_flux(a)[interior]) / _hat_norms(mesh)[interior]))


def boundary_flux_residual(a: VectorField) -> float:
    """max over boundary hats of |int a . grad phi| / ||grad phi||_2 (weak normal trace)."""
    mesh = a.mesh
    boundary = np.flatnonzero(mesh.boundary)
    return float(np.max(np.abs(_hat_flux(a)[boundary]) / _hat_norms(mesh)[boundary]))


def check_solenoidal(a: VectorField, rtol: Optional[float] = None) -> float:
    """
    Raise SolenoidalityError unless the gate residual is below rtol ||a||_2.

    Returns:
        float: The residual
    """
    rtol = config.get("potentials", "solenoidal_rtol") if rtol is None else rtol
    residual = solenoidal_residual(a)
    scale = _l2(a.values, a.mesh)
    if residual > rtol * scale:
        raise SolenoidalityError(
            f"drift is not weakly solenoidal: residual {residual:.3e} exceeds {rtol:.1e} * {scale:.3e}",
            residual,
        )
    return residual


def random_test_functions(mesh: Mesh, count: int, seed: Optional[int] = None) -> List[np.ndarray]:
    """
    Vertex values of smooth random functions vanishing on the boundary:
    a domain bubble times random combinations of low cosine modes.
    """
    seed = config.get("run", "seed") if seed is None else seed
    rng = np.random.default_rng(seed)
    x = mesh.vertices
    if mesh.domain.is_round:
        bubble = np.maximum(1.0 - (x ** 2).sum(axis=1), 0.0)
    else:
        bubble = np.prod(4.0 * x * (1.0 - x), axis=1)
    modes = np.array(np.meshgrid(*[np.arange(3)] * mesh.dimension, indexing="ij")).reshape(mesh.dimension, -1).T
    basis = np.cos(math.pi * x @ modes.T)
    tests = []
    for _ in range(count):
        values = bubble * (basis @ rng.standard_normal(modes.shape[0]))
        values[mesh.boundary] = 0.0
        tests.append(values)
    return tests


def weak_div_residual(
    a_field: SkewField, a: VectorField, test_count: Optional[int] = None, random_tests: Optional[int] = None,
    seed: Optional[int] = None,
) -> float:
    """
    max_phi max_i |int A_ji d_j phi + int a_i phi| / ||phi||_{W^{1,2}}.

    Test functions are interior hats (strided to test_count) and smooth
    random P1 combinations.

    Args:
        a_field: Skew potential A
        a: Drift a
        test_count: Number of hat tests
        random_tests: Number of random tests
        seed: Seed of the random tests

    Returns:
        float: The largest normalized residual
    """
    mesh = a_field.mesh
    if a.mesh is not mesh:
        raise ValidationError("A and a live on different meshes")
    test_count = config.get("potentials", "test_count") if test_count is None else test_count
    random_tests = config.get("potentials", "random_tests") if random_tests is None else random_tests
    n = mesh.dimension
    k = n + 1

    # per-vertex vector residual of the hat at that vertex
    g = mesh.basis_gradients
    a_grad = np.einsum("cij,cvj->cvi", a_field.matrices(), g)
    local = mesh.cell_volumes[:, None, None] * (-a_grad + a.values[:, None, :] / k)
    hat = np.stack([
        np.bincount(mesh.cells.ravel(), weights=local[:, :, i].ravel(), minlength=mesh.n_vertices)
        for i in range(n)
    ], axis=1)

    stiff, mass = stiffness_matrix(mesh), mass_matrix(mesh)
    interior = mesh.interior_vertices
    worst = 0.0
    if interior.size and test_count > 0:
        stride = max(1, interior.size // test_count)
        chosen = interior[::stride][:test_count]
        norms = np.sqrt(stiff.diagonal()[chosen] + mass.diagonal()[chosen])
        worst = float(np.max(np.abs(hat[chosen]).max(axis=1) / norms))
    for phi in random_test_functions(mesh, random_tests, seed):
        norm = math.sqrt(float(phi @ (stiff @ phi) + phi @ (mass @ phi)))
        if norm > 0.0:
            worst = max(worst, float(np.abs(phi @ hat).max()) / norm)
    logger.debug(f"Weak divergence residual {worst:.3e}")
    return worst


def skew_from_stream(alpha: ScalarField) -> SkewField:
    """The 2x2 skew field with A_12 = alpha, so that div A = (-alpha_y, alpha_x)."""
    if alpha.mesh.dimension != 2:
        raise ValidationError("stream functions are two-dimensional")
    return SkewField(alpha.mesh, alpha.cell_values()[:, None])


def stream_function_2d(a: VectorField) -> ScalarField:
    """
    Recover alpha with (-alpha_y, alpha_x) = a.

    Solves the Neumann problem int grad alpha . grad psi = int (a_2, -a_1) . grad psi
    with one vertex pinned, then shifts alpha to zero mean.

    Raises:
        ValidationError: When the mesh is not two-dimensional
        SolenoidalityError: When a fails the solenoidality gate
    """
    mesh = a.mesh
    if mesh.dimension != 2:
        raise ValidationError("stream_function_2d needs a two-dimensional drift")
    check_solenoidal(a)
    rotated = VectorField(mesh, np.stack([a.values[:, 1], -a.values[:, 0]], axis=1))
    rhs = _hat_flux(rotated)
    free = np.arange(1, mesh.n_vertices)
    stiff = stiffness_matrix(mesh)[free][:, free].tocsc()
    values = np.zeros(mesh.n_vertices)
    values[free] = spla.spsolve(stiff, rhs[free])
    mean = float(mass_matrix(mesh).sum(axis=0) @ values) / mesh.measure
    return ScalarField(mesh, values - mean)


def _cross_to_skew(w: np.ndarray) -> np.ndarray:
    """Upper entries (A_12, A_13, A_23) of A xi = w x xi."""
    return np.stack([-w[:, 2], w[:, 1], -w[:, 0]], axis=1)


def poincare_potential_ball(a: VectorField, nodes: Optional[int] = None) -> SkewField:
    """
    A xi = w x xi with w(x) = int_0^1 a(tx) x tx dt, at cell centroids.

    Args:
        a: Solenoidal drift on the unit ball
        nodes: Gauss-Legendre nodes on [0, 1] (at least 32)

    Returns:
        SkewField: Potential with curl w = div A = a

    Raises:
        ValidationError: Off the unit ball or with too few nodes
        SolenoidalityError: When the weak divergence of a exceeds solenoidal_rtol ||a||_2
    """
    mesh = a.mesh
    if mesh.domain.kind != DomainKind.UNIT_BALL:
        raise ValidationError(f"poincare_potential_ball needs the unit ball, got {mesh.domain.kind.value}")
    nodes = config.get("potentials", "line_nodes") if nodes is None else nodes
    if nodes < 32:
        raise ValidationError(f"line integral needs at least 32 nodes, got {nodes}")
    check_solenoidal(a)

    t, weights = np.polynomial.legendre.leggauss(nodes)
    t, weights = 0.5 * (t + 1.0), 0.5 * weights
    x = mesh.centroids
    w = np.zeros_like(x)
    for tk, wk in zip(t, weights):
        points = tk * x
        values = a.values[mesh.locate_cells(points)]
        w += wk * np.cross(values, points)
    return SkewField(mesh, _cross_to_skew(w))


def newtonian_potential(
    a: VectorField, levels: Optional[int] = None, threads: Optional[int] = None
) -> SkewField:
    """
    A_ij = d_j V_i - d_i V_j with V = (4 pi)^-1 int a(y) |x - y|^-1 dy.

    The drift must have zero weak normal trace so that its zero extension
    stays solenoidal.

    Raises:
        ValidationError: When the mesh is not three-dimensional
        NormalTraceError: When the boundary flux residual exceeds tolerance
    """
    mesh = a.mesh
    if mesh.dimension != 3:
        raise ValidationError("newtonian_potential needs a three-dimensional drift")
    levels = config.get("potentials", "graded_levels") if levels is None else levels
    threads = config.get("run", "threads") if threads is None else threads
    scale = _l2(a.values, mesh)
    if scale == 0.0:
        return SkewField.zeros(mesh)
    flux = boundary_flux_residual(a)
    if flux > config.get("potentials", "boundary_flux_rtol") * scale:
        raise NormalTraceError(
            f"drift has a nonzero normal trace (boundary flux residual {flux:.3e});"
            " use poincare_potential_ball on the unit ball instead",
            flux,
        )

    potential = kernel_integral(mesh, a.values, -1.0, np.arange(mesh.n_vertices),
                                levels=levels, threads=threads) / (4.0 * math.pi)
    # jac[c, i, j] = d_j V_i
    jac = np.stack([gradient(ScalarField(mesh, potential[:, i])).values for i in range(3)], axis=1)
    rows, cols = np.triu_indices(3, 1)
    return SkewField(mesh, jac[:, rows, cols] - jac[:, cols, rows])

