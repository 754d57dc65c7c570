"""
P1 assembly of the Dirichlet problem  -div(grad u + A grad u) = f  and of
its drift form  -div(grad u + a u) = f.
"""

import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.sparse as sp

from skewdrift.fem.fields import Functional, ScalarField, SkewField, VectorField, same_mesh
from skewdrift.fem.mesh import Mesh
from skewdrift.utils.errors import ValidationError

logger = logging.getLogger("solver")


def _scatter(mesh: Mesh, local: np.ndarray) -> sp.csr_matrix:
    """Sum per-cell (n+1)x(n+1) blocks into a global V x V matrix."""
    k = mesh.dimension + 1
    rows = np.repeat(mesh.cells, k, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, k)).ravel()
    return sp.csr_matrix((local.ravel(), (rows, cols)), shape=(mesh.n_vertices, mesh.n_vertices))


@lru_cache(maxsize=16)
def stiffness_matrix(mesh: Mesh) -> sp.csr_matrix:
    """K_ij = int grad phi_j . grad phi_i."""
    g = mesh.basis_gradients
    local = mesh.cell_volumes[:, None, None] * np.einsum("cid,cjd->cij", g, g)
    return _scatter(mesh, local)


@lru_cache(maxsize=16)
def mass_matrix(mesh: Mesh) -> sp.csr_matrix:
    """Consistent P1 mass matrix."""
    k = mesh.dimension + 1
    pattern = (np.ones((k, k)) + np.eye(k)) / (k * (k + 1))
    return _scatter(mesh, mesh.cell_volumes[:, None, None] * pattern[None])


def skew_matrix(a_field: SkewField) -> sp.csr_matrix:
    """
    S_ij = int A grad phi_j . grad phi_i, antisymmetric entry by entry.
    """
    mesh = a_field.mesh
    g = mesh.basis_gradients
    if not np.all(np.isfinite(a_field.values)):
        raise ValidationError("skew field has non-finite entries; truncate it first")
    raw = mesh.cell_volumes[:, None, None] * np.einsum("cik,ckl,cjl->cij", g, a_field.matrices(), g)
    local = 0.5 * (raw - np.transpose(raw, (0, 2, 1)))
    return _scatter(mesh, local)


def drift_matrix(drift: VectorField) -> sp.csr_matrix:
    """D_ij = int phi_j a . grad phi_i for cellwise-constant a."""
    mesh = drift.mesh
    k = mesh.dimension + 1
    if not np.all(np.isfinite(drift.values)):
        raise ValidationError("drift has non-finite entries; truncate it first")
    test = np.einsum("cid,cd->ci", mesh.basis_gradients, drift.values)
    local = (mesh.cell_volumes / k)[:, None, None] * np.repeat(test[:, :, None], k, axis=2)
    return _scatter(mesh, local)


def load_vector(f: Functional) -> np.ndarray:
    """
    (f, phi_i) = int g phi_i - int F . grad phi_i for f = g + div F.
    """
    mesh = f.mesh
    k = mesh.dimension + 1
    rhs = np.zeros(mesh.n_vertices)
    if f.density is not None:
        g = f.density
        if g.is_vertex:
            rhs += mass_matrix(mesh) @ g.values
        else:
            share = np.repeat(g.values * mesh.cell_volumes / k, k)
            rhs += np.bincount(mesh.cells.ravel(), weights=share, minlength=mesh.n_vertices)
    if f.flux is not None:
        contrib = mesh.cell_volumes[:, None] * np.einsum("cid,cd->ci", mesh.basis_gradients, f.flux.values)
        rhs -= np.bincount(mesh.cells.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices)
    return rhs


def apply_functional(f: Functional, u: ScalarField) -> float:
    """(f, u) for a P1 field u."""
    same_mesh(f, u)
    return float(load_vector(f) @ u.values)


@dataclass(frozen=True, eq=False)
class LinearSystem:
    """Interior-vertex system of a Dirichlet problem with zero boundary values."""

    mesh: Mesh
    matrix: sp.csr_matrix
    rhs: np.ndarray
    interior: np.ndarray
    full_matrix: sp.csr_matrix

    def expand(self, interior_values: np.ndarray) -> ScalarField:
        """Vertex field with the given interior values and zero boundary."""
        values = np.zeros(self.mesh.n_vertices)
        values[self.interior] = interior_values
        return ScalarField(self.mesh, values)


def _restrict(mesh: Mesh, full: sp.csr_matrix, rhs: np.ndarray) -> LinearSystem:
    interior = mesh.interior_vertices
    matrix = full[interior][:, interior].tocsr()
    return LinearSystem(mesh, matrix, rhs[interior], interior, full)


def assemble(mesh: Mesh, a_field: Optional[SkewField], f: Functional) -> LinearSystem:
    """
    Assemble the matrix-form system over interior vertices.

    The symmetric part of the matrix is exactly the Laplace stiffness
    matrix; the skew part is assembled separately and added.

    Args:
        mesh: The mesh
        a_field: Bounded skew field (None for the Laplacian)
        f: Right-hand side

    Returns:
        LinearSystem: Matrix, right-hand side and interior numbering
    """
    if same_mesh(f, a_field) is not mesh:
        raise ValidationError("right-hand side lives on a different mesh")
    full = stiffness_matrix(mesh)
    if a_field is not None:
        full = (full + skew_matrix(a_field)).tocsr()
    return _restrict(mesh, full, load_vector(f))


def assemble_drift(mesh: Mesh, drift: VectorField, f: Functional) -> LinearSystem:
    """Assemble int grad u . grad phi + int (a u) . grad phi = (f, phi)."""
    same_mesh(drift, f)
    full = (stiffness_matrix(mesh) + drift_matrix(drift)).tocsr()
    return _restrict(mesh, full, load_vector(f))
