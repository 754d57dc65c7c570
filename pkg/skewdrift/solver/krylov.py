"""
Restarted GMRES with an incomplete-LU preconditioner and true-residual
verification, plus the discrete Poincare constant.
"""

import logging
import math
from functools import lru_cache
from typing import List, Optional, Tuple

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from skewdrift.config.settings import config
from skewdrift.fem.mesh import Mesh
from skewdrift.solver.assembly import mass_matrix, stiffness_matrix
from skewdrift.utils.errors import SolverError

logger = logging.getLogger("solver")


def _preconditioner(matrix: sp.csr_matrix) -> Optional[spla.LinearOperator]:
    try:
        ilu = spla.spilu(
            matrix.tocsc(),
            drop_tol=config.get("solver", "ilu_drop_tol"),
            fill_factor=config.get("solver", "ilu_fill_factor"),
        )
    except RuntimeError as e:
        logger.warning(f"Incomplete LU failed ({e}); running GMRES unpreconditioned")
        return None
    return spla.LinearOperator(matrix.shape, matvec=ilu.solve)


def krylov_solve(
    matrix: sp.csr_matrix,
    rhs: np.ndarray,
    x0: Optional[np.ndarray] = None,
    rtol: Optional[float] = None,
    max_iterations: Optional[int] = None,
    restart: Optional[int] = None,
) -> Tuple[np.ndarray, List[float]]:
    """
    Solve a nonsymmetric sparse system.

    GMRES runs from the last iterate until the true relative residual
    ||b - Ax|| / ||b|| is at most rtol or the iteration budget is spent.

    Args:
        matrix: Square sparse matrix
        rhs: Right-hand side
        x0: Initial iterate
        rtol: Relative residual target
        max_iterations: Inner iteration budget
        restart: GMRES restart length

    Returns:
        Tuple of (solution, true relative residual after each cycle)

    Raises:
        SolverError: When the budget is exhausted or GMRES stalls.
    """
    rtol = config.get("solver", "rtol") if rtol is None else rtol
    max_iterations = config.get("solver", "max_iterations") if max_iterations is None else max_iterations
    restart = config.get("solver", "restart") if restart is None else restart

    size = matrix.shape[0]
    x = np.zeros(size) if x0 is None else np.array(x0, dtype=float)
    if size == 0:
        return x, [0.0]
    b_norm = float(np.linalg.norm(rhs))
    if b_norm == 0.0 and not np.any(x):
        return x, [0.0]
    scale = b_norm if b_norm > 0.0 else float(np.linalg.norm(matrix @ x))

    def residual(v: np.ndarray) -> float:
        return float(np.linalg.norm(rhs - matrix @ v)) / scale

    preconditioner = _preconditioner(matrix)
    history = [residual(x)]
    iterations = 0
    while history[-1] > rtol:
        if iterations >= max_iterations:
            raise SolverError(
                f"GMRES did not reach rtol {rtol:.1e} in {max_iterations} iterations"
                f" (residual {history[-1]:.3e})", history)
        inner: List[float] = []
        cycles = max(1, (max_iterations - iterations) // restart)
        x, info = spla.gmres(
            matrix, rhs, x0=x, rtol=0.1 * rtol, atol=0.0, restart=restart, maxiter=cycles,
            M=preconditioner, callback=inner.append, callback_type="pr_norm",
        )
        iterations += max(len(inner), 1)
        history.append(residual(x))
        logger.debug(f"GMRES cycle: info={info}, iterations={iterations}, residual={history[-1]:.3e}")
        if history[-1] > rtol and history[-1] >= history[-2] * (1.0 - 1e-3):
            raise SolverError(f"GMRES stalled at residual {history[-1]:.3e}", history)
    return x, history


@lru_cache(maxsize=16)
def poincare_constant(mesh: Mesh) -> float:
    """
    Discrete Poincare constant C_P with ||u||_2 <= C_P ||grad u||_2 on the
    zero-boundary P1 space.
    """
    interior = mesh.interior_vertices
    stiff = stiffness_matrix(mesh)[interior][:, interior].tocsc()
    mass = mass_matrix(mesh)[interior][:, interior].tocsc()
    if interior.size <= 2:
        dense = np.linalg.eigvals(np.linalg.solve(mass.toarray(), stiff.toarray()))
        smallest = float(np.min(dense.real))
    else:
        values = spla.eigsh(stiff, k=1, M=mass, sigma=0.0, which="LM", return_eigenvectors=False)
        smallest = float(values[0])
    return 1.0 / math.sqrt(smallest)
