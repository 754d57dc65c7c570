"""
Discrete fields on a mesh and the basic calculus on them.

Scalar fields are continuous piecewise linear (vertex layout) or piecewise
constant (cell layout); vector and skew-matrix fields are always cellwise.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional, Sequence, Union

import numpy as np

from skewdrift.fem.mesh import Mesh
from skewdrift.fem.quadrature import quadrature_points
from skewdrift.utils.errors import MeshMismatchError, ValidationError

logger = logging.getLogger("mesh")


class Layout(str, Enum):
    """Where a scalar field's values live."""

    VERTEX = "vertex"
    CELL = "cell"


def _readonly(values: np.ndarray) -> np.ndarray:
    values = np.array(values, dtype=float)
    values.flags.writeable = False
    return values


def same_mesh(*items) -> Mesh:
    """Return the common mesh of fields, raising on mismatch."""
    meshes = [item.mesh for item in items if item is not None]
    if not meshes:
        raise ValidationError("no operands given")
    for mesh in meshes[1:]:
        if mesh is not meshes[0]:
            raise MeshMismatchError("operands live on different meshes")
    return meshes[0]


@dataclass(frozen=True, eq=False)
class ScalarField:
    """A scalar field with vertex (P1) or cell (P0) layout."""

    mesh: Mesh
    values: np.ndarray
    layout: Layout = Layout.VERTEX

    def __post_init__(self):
        layout = Layout(self.layout)
        object.__setattr__(self, "layout", layout)
        values = _readonly(self.values)
        expected = self.mesh.n_vertices if layout == Layout.VERTEX else self.mesh.n_cells
        if values.shape != (expected,):
            raise ValidationError(f"{layout.value} field needs {expected} values, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("field values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, mesh: Mesh, func: Callable[[np.ndarray], np.ndarray],
                      layout: Layout = Layout.VERTEX) -> "ScalarField":
        """Sample func at vertices (vertex layout) or centroids (cell layout)."""
        layout = Layout(layout)
        points = mesh.vertices if layout == Layout.VERTEX else mesh.centroids
        return cls(mesh, np.broadcast_to(func(points), (points.shape[0],)), layout)

    @classmethod
    def zeros(cls, mesh: Mesh, layout: Layout = Layout.VERTEX) -> "ScalarField":
        size = mesh.n_vertices if Layout(layout) == Layout.VERTEX else mesh.n_cells
        return cls(mesh, np.zeros(size), layout)

    @property
    def is_vertex(self) -> bool:
        return self.layout == Layout.VERTEX

    def cell_values(self) -> np.ndarray:
        """Cell means (exact for P1: the centroid value)."""
        if self.is_vertex:
            return self.values[self.mesh.cells].mean(axis=1)
        return self.values

    def at_quadrature(self, bary: np.ndarray) -> np.ndarray:
        """Values at barycentric points of every cell, shape (C, Q)."""
        if self.is_vertex:
            return self.values[self.mesh.cells] @ bary.T
        return np.repeat(self.values[:, None], bary.shape[0], axis=1)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.mesh, values, self.layout)

    def abs(self) -> "ScalarField":
        return self.with_values(np.abs(self.values))

    def __neg__(self) -> "ScalarField":
        return self.with_values(-self.values)

    def __add__(self, other: Union["ScalarField", float]) -> "ScalarField":
        if isinstance(other, ScalarField):
            same_mesh(self, other)
            if other.layout != self.layout:
                raise ValidationError("cannot add fields of different layouts")
            return self.with_values(self.values + other.values)
        return self.with_values(self.values + float(other))

    __radd__ = __add__

    def __sub__(self, other: Union["ScalarField", float]) -> "ScalarField":
        return self + (-other)

    def __mul__(self, scale: float) -> "ScalarField":
        return self.with_values(self.values * float(scale))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class VectorField:
    """A cellwise-constant vector field, values of shape (C, n)."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = _readonly(self.values)
        expected = (self.mesh.n_cells, self.mesh.dimension)
        if values.shape != expected:
            raise ValidationError(f"vector field needs shape {expected}, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("field values must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, mesh: Mesh, func: Callable[[np.ndarray], np.ndarray]) -> "VectorField":
        """Sample func at cell centroids."""
        return cls(mesh, func(mesh.centroids))

    @classmethod
    def zeros(cls, mesh: Mesh) -> "VectorField":
        return cls(mesh, np.zeros((mesh.n_cells, mesh.dimension)))

    def norm(self) -> ScalarField:
        """Pointwise Euclidean length as a cell field."""
        return ScalarField(self.mesh, np.linalg.norm(self.values, axis=1), Layout.CELL)

    def __add__(self, other: "VectorField") -> "VectorField":
        same_mesh(self, other)
        return VectorField(self.mesh, self.values + other.values)

    def __mul__(self, scale: float) -> "VectorField":
        return VectorField(self.mesh, self.values * float(scale))

    __rmul__ = __mul__

    def __neg__(self) -> "VectorField":
        return self * -1.0


@dataclass(frozen=True, eq=False)
class SkewField:
    """
    A cellwise skew-symmetric matrix field.

    Only the strict upper triangle is stored (row-major order of
    ``np.triu_indices(n, 1)``), so A^T = -A holds by construction.
    """

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        n = self.mesh.dimension
        values = _readonly(np.reshape(self.values, (self.mesh.n_cells, -1)))
        if values.shape[1] != n * (n - 1) // 2:
            raise ValidationError(f"skew field needs {n * (n - 1) // 2} entries per cell, got {values.shape[1]}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("skew field entries must be finite")
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, mesh: Mesh, func: Callable[[np.ndarray], np.ndarray]) -> "SkewField":
        """Sample the independent entries at cell centroids."""
        return cls(mesh, np.reshape(func(mesh.centroids), (mesh.n_cells, -1)))

    @classmethod
    def from_matrices(cls, mesh: Mesh, matrices: np.ndarray) -> "SkewField":
        """Keep the strict upper triangle of (C, n, n) matrices."""
        rows, cols = np.triu_indices(mesh.dimension, 1)
        return cls(mesh, matrices[:, rows, cols])

    @classmethod
    def uniform_entries(cls, entry: ScalarField) -> "SkewField":
        """Skew field whose independent entries all equal a scalar field."""
        n = entry.mesh.dimension
        values = np.repeat(entry.cell_values()[:, None], n * (n - 1) // 2, axis=1)
        return cls(entry.mesh, values)

    @classmethod
    def zeros(cls, mesh: Mesh) -> "SkewField":
        n = mesh.dimension
        return cls(mesh, np.zeros((mesh.n_cells, n * (n - 1) // 2)))

    def matrices(self) -> np.ndarray:
        """Full matrices, shape (C, n, n)."""
        n = self.mesh.dimension
        rows, cols = np.triu_indices(n, 1)
        out = np.zeros((self.mesh.n_cells, n, n))
        out[:, rows, cols] = self.values
        out[:, cols, rows] = -self.values
        return out

    def frobenius(self) -> ScalarField:
        """|A| as the cellwise Frobenius norm."""
        return ScalarField(self.mesh, np.sqrt(2.0 * (self.values ** 2).sum(axis=1)), Layout.CELL)

    def max_entry(self) -> float:
        return float(np.abs(self.values).max()) if self.values.size else 0.0

    def __add__(self, other: "SkewField") -> "SkewField":
        same_mesh(self, other)
        return SkewField(self.mesh, self.values + other.values)

    def __mul__(self, scale: float) -> "SkewField":
        return SkewField(self.mesh, self.values * float(scale))

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class Functional:
    """A right-hand side f = g + div F: density g plus flux F."""

    density: Optional[ScalarField] = None
    flux: Optional[VectorField] = None

    def __post_init__(self):
        if self.density is None and self.flux is None:
            raise ValidationError("a functional needs a density or a flux")
        same_mesh(self.density, self.flux)

    @property
    def mesh(self) -> Mesh:
        return same_mesh(self.density, self.flux)


def gradient(u: ScalarField) -> VectorField:
    """Exact cellwise gradient of a P1 field."""
    if not u.is_vertex:
        raise ValidationError("gradient needs a vertex-layout field")
    mesh = u.mesh
    grads = np.einsum("cj,cjd->cd", u.values[mesh.cells], mesh.basis_gradients)
    return VectorField(mesh, grads)


def dot(v: VectorField, w: VectorField) -> ScalarField:
    """Cellwise inner product."""
    mesh = same_mesh(v, w)
    return ScalarField(mesh, np.einsum("cd,cd->c", v.values, w.values), Layout.CELL)


def integrate(*factors: ScalarField, cells: Optional[np.ndarray] = None) -> float:
    """
    Integrate the product of scalar fields with the degree-2 rule.

    Exact whenever the product is a piecewise polynomial of degree <= 2
    (e.g. the product of two P1 fields).

    Args:
        factors: One or more fields on the same mesh
        cells: Optional boolean mask or index array restricting the domain

    Returns:
        float: The integral
    """
    mesh = same_mesh(*factors)
    points, weights, bary = quadrature_points(mesh)
    product = np.ones_like(weights)
    for factor in factors:
        product = product * factor.at_quadrature(bary)
    per_cell = (weights * product).sum(axis=1)
    if cells is not None:
        per_cell = per_cell[cells]
    return float(per_cell.sum())


def h1_seminorm(u: ScalarField) -> float:
    """sqrt(int |grad u|^2)."""
    grads = gradient(u).values
    return float(np.sqrt((u.mesh.cell_volumes * (grads ** 2).sum(axis=1)).sum()))


def l2_norm(u: ScalarField) -> float:
    return float(np.sqrt(max(integrate(u, u), 0.0)))


def perp_gradient(alpha: ScalarField) -> VectorField:
    """The 2-D field (-alpha_y, alpha_x); exactly weakly solenoidal."""
    if alpha.mesh.dimension != 2:
        raise ValidationError("perp_gradient is two-dimensional")
    g = gradient(alpha).values
    return VectorField(alpha.mesh, np.stack([-g[:, 1], g[:, 0]], axis=1))


def discrete_curl(psi: Sequence[ScalarField]) -> VectorField:
    """Cellwise curl of a P1 vector field in 3-D; exactly weakly solenoidal."""
    if len(psi) != 3 or psi[0].mesh.dimension != 3:
        raise ValidationError("discrete_curl needs three vertex fields in 3-D")
    mesh = same_mesh(*psi)
    g = np.stack([gradient(component).values for component in psi], axis=1)
    # g[c, i, j] = d psi_i / d x_j
    curl = np.stack([
        g[:, 2, 1] - g[:, 1, 2],
        g[:, 0, 2] - g[:, 2, 0],
        g[:, 1, 0] - g[:, 0, 1],
    ], axis=1)
    return VectorField(mesh, curl)


def cell_average(u: ScalarField) -> ScalarField:
    """Cell means of a field as a cell-layout field."""
    return ScalarField(u.mesh, u.cell_values(), Layout.CELL)


def vertex_average(f: ScalarField) -> ScalarField:
    """Patch-volume weighted vertex values of a cell field."""
    if f.is_vertex:
        return f
    mesh = f.mesh
    weighted = mesh.incidence @ (f.values * mesh.cell_volumes)
    return ScalarField(mesh, weighted / (mesh.incidence @ mesh.cell_volumes))


def vertex_patch_max(f: ScalarField) -> np.ndarray:
    """Largest |f| over the cells of each vertex patch (vertex values as is)."""
    if f.is_vertex:
        return np.abs(f.values)
    mesh = f.mesh
    out = np.zeros(mesh.n_vertices)
    vals = np.repeat(np.abs(f.values), mesh.dimension + 1)
    np.maximum.at(out, mesh.cells.ravel(), vals)
    return out


def cell_field(values: Union[np.ndarray, Sequence[float]], mesh: Mesh) -> ScalarField:
    return ScalarField(mesh, np.asarray(values, dtype=float), Layout.CELL)


def l2_error(u: ScalarField, exact: Callable[[np.ndarray], np.ndarray], refine: int = 1) -> float:
    """||u - exact||_2 with the once-refined degree-2 rule."""
    points, weights, bary = quadrature_points(u.mesh, refine)
    n = u.mesh.dimension
    diff = u.at_quadrature(bary) - exact(points.reshape(-1, n)).reshape(weights.shape)
    return float(np.sqrt((weights * diff ** 2).sum()))
