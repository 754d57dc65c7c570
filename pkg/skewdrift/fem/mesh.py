"""
Model domains and structured simplicial meshes.

Squares and cubes are split into triangles / Kuhn tetrahedra. Disks and
balls reuse the structured grid of [-1, 1]^n and map every cube shell onto a
sphere (x -> x * |x|_inf / |x|_2), so refinement stays nested in the
preimage and the boundary vertices land on the unit sphere.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property
from typing import Tuple

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from skewdrift.utils.errors import ValidationError

logger = logging.getLogger("mesh")

LOCATE_CHUNK = 20000


class DomainKind(str, Enum):
    """Supported model domains."""

    UNIT_SQUARE = "unit_square"
    UNIT_DISK = "unit_disk"
    UNIT_CUBE = "unit_cube"
    UNIT_BALL = "unit_ball"


_DIMENSION = {
    DomainKind.UNIT_SQUARE: 2,
    DomainKind.UNIT_DISK: 2,
    DomainKind.UNIT_CUBE: 3,
    DomainKind.UNIT_BALL: 3,
}


@dataclass(frozen=True)
class Domain:
    """A model domain Omega in R^n."""

    kind: DomainKind

    def __post_init__(self):
        if not isinstance(self.kind, DomainKind):
            try:
                object.__setattr__(self, "kind", DomainKind(self.kind))
            except ValueError:
                raise ValidationError(f"Unsupported domain kind: {self.kind!r}")

    @classmethod
    def from_name(cls, name: str) -> "Domain":
        """Build a domain from its config name, e.g. ``unit_disk``."""
        return cls(name)

    @property
    def dimension(self) -> int:
        return _DIMENSION[self.kind]

    @property
    def is_round(self) -> bool:
        """True for the disk and the ball."""
        return self.kind in (DomainKind.UNIT_DISK, DomainKind.UNIT_BALL)

    @property
    def bounds(self) -> Tuple[float, float]:
        """Per-axis bounding box [lo, hi]."""
        return (-1.0, 1.0) if self.is_round else (0.0, 1.0)

    @property
    def volume(self) -> float:
        """Exact measure |Omega|."""
        if self.kind == DomainKind.UNIT_DISK:
            return math.pi
        if self.kind == DomainKind.UNIT_BALL:
            return 4.0 * math.pi / 3.0
        return 1.0

    @property
    def diameter(self) -> float:
        return 2.0 if self.is_round else math.sqrt(self.dimension)

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Boolean mask of points in the closed domain."""
        points = np.atleast_2d(points)
        if self.is_round:
            return np.linalg.norm(points, axis=1) <= 1.0 + tol
        return np.all((points >= -tol) & (points <= 1.0 + tol), axis=1)

    def boundary_distance(self, points: np.ndarray) -> np.ndarray:
        """Distance of interior points to the boundary."""
        points = np.atleast_2d(points)
        if self.is_round:
            return np.maximum(1.0 - np.linalg.norm(points, axis=1), 0.0)
        return np.maximum(np.minimum(points, 1.0 - points).min(axis=1), 0.0)


@dataclass(frozen=True, eq=False)
class Mesh:
    """
    Conforming simplicial mesh of a model domain.

    Geometry derived from the vertex and cell arrays is computed lazily and
    cached; the arrays themselves are read-only.
    """

    domain: Domain
    vertices: np.ndarray
    cells: np.ndarray
    boundary: np.ndarray
    resolution: int

    def __post_init__(self):
        for name in ("vertices", "cells", "boundary"):
            getattr(self, name).flags.writeable = False

    @property
    def dimension(self) -> int:
        return self.domain.dimension

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def spacing(self) -> float:
        """Nominal grid step of the structured preimage."""
        lo, hi = self.domain.bounds
        return (hi - lo) / self.resolution

    @cached_property
    def _edges(self) -> np.ndarray:
        x = self.vertices[self.cells]
        return x[:, 1:, :] - x[:, :1, :]

    @cached_property
    def cell_volumes(self) -> np.ndarray:
        det = np.linalg.det(self._edges)
        return np.abs(det) / math.factorial(self.dimension)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the barycentric basis functions, shape (C, n+1, n)."""
        inv = np.linalg.inv(self._edges)
        grads = np.empty((self.n_cells, self.dimension + 1, self.dimension))
        grads[:, 1:, :] = np.transpose(inv, (0, 2, 1))
        grads[:, 0, :] = -grads[:, 1:, :].sum(axis=1)
        return grads

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        x = self.vertices[self.cells]
        longest = np.zeros(self.n_cells)
        for i, j in itertools.combinations(range(self.dimension + 1), 2):
            longest = np.maximum(longest, np.linalg.norm(x[:, i] - x[:, j], axis=1))
        return longest

    @cached_property
    def h(self) -> float:
        """Mesh size: the largest cell diameter."""
        return float(self.cell_diameters.max())

    @cached_property
    def measure(self) -> float:
        return float(self.cell_volumes.sum())

    @cached_property
    def vertex_measure(self) -> np.ndarray:
        """Lumped vertex measure sum_{T ni v} |T| / (n+1)."""
        share = np.repeat(self.cell_volumes / (self.dimension + 1), self.dimension + 1)
        return np.bincount(self.cells.ravel(), weights=share, minlength=self.n_vertices)

    @cached_property
    def incidence(self) -> sp.csr_matrix:
        """Vertex-by-cell incidence matrix."""
        rows = self.cells.ravel()
        cols = np.repeat(np.arange(self.n_cells), self.dimension + 1)
        data = np.ones(rows.size)
        return sp.csr_matrix((data, (rows, cols)), shape=(self.n_vertices, self.n_cells))

    @cached_property
    def interior_vertices(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @cached_property
    def centroid_tree(self) -> cKDTree:
        return cKDTree(self.centroids)

    def locate_cells(self, points: np.ndarray, candidates: int = 12) -> np.ndarray:
        """
        Find the cell containing each point.

        Points outside every candidate cell fall back to the nearest centroid.

        Args:
            points: Array of shape (P, n)
            candidates: Number of nearest centroids tested per point

        Returns:
            np.ndarray: Cell index per point
        """
        points = np.atleast_2d(points)
        if points.shape[0] > LOCATE_CHUNK:
            return np.concatenate([
                self.locate_cells(points[i:i + LOCATE_CHUNK], candidates)
                for i in range(0, points.shape[0], LOCATE_CHUNK)
            ])
        k = min(candidates, self.n_cells)
        _, near = self.centroid_tree.query(points, k=k)
        near = near.reshape(points.shape[0], k)
        origin = self.vertices[self.cells[near, 0]]
        grads = self.basis_gradients[near]
        bary = np.einsum("pkjd,pkd->pkj", grads, points[:, None, :] - origin)
        bary[:, :, 0] += 1.0
        inside = bary.min(axis=2) >= -1e-10
        first = np.where(inside.any(axis=1), inside.argmax(axis=1), 0)
        return near[np.arange(points.shape[0]), first]


def _structured_grid(dimension: int, resolution: int, lo: float, hi: float):
    """Vertices, cells and boundary flags of the structured grid on [lo, hi]^n."""
    r = resolution
    axis = np.linspace(lo, hi, r + 1)
    index = np.indices((r + 1,) * dimension).reshape(dimension, -1).T
    # vertex id = i + (r+1) j + (r+1)^2 k
    index = index[:, ::-1]
    vertices = axis[index]
    boundary = np.any((index == 0) | (index == r), axis=1)

    strides = (r + 1) ** np.arange(dimension)
    base = np.indices((r,) * dimension).reshape(dimension, -1).T[:, ::-1] @ strides

    if dimension == 2:
        v00 = base
        v10 = base + 1
        v01 = base + (r + 1)
        v11 = v01 + 1
        cells = np.concatenate([
            np.stack([v00, v10, v11], axis=1),
            np.stack([v00, v11, v01], axis=1),
        ])
    else:
        blocks = []
        for perm in itertools.permutations(range(dimension)):
            corner = np.zeros(dimension, dtype=int)
            path = [0]
            for axis_id in perm:
                corner[axis_id] = 1
                path.append(int(corner @ strides))
            blocks.append(np.stack([base + offset for offset in path], axis=1))
        cells = np.concatenate(blocks)
    return vertices, cells, boundary


def _radial_map(vertices: np.ndarray, boundary: np.ndarray) -> np.ndarray:
    """Map cube shells of [-1, 1]^n onto spheres."""
    sup = np.abs(vertices).max(axis=1)
    euclid = np.linalg.norm(vertices, axis=1)
    scale = np.divide(sup, euclid, out=np.zeros_like(sup), where=euclid > 0)
    mapped = vertices * scale[:, None]
    mapped[boundary] /= np.linalg.norm(mapped[boundary], axis=1)[:, None]
    return mapped


def _orient(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    x = vertices[cells]
    det = np.linalg.det(x[:, 1:, :] - x[:, :1, :])
    cells = cells.copy()
    flip = det < 0
    cells[flip, 1], cells[flip, 2] = cells[flip, 2], cells[flip, 1].copy()
    return cells


def build_mesh(domain: Domain, resolution: int) -> Mesh:
    """
    Build a structured simplicial mesh of a model domain.

    Args:
        domain: The model domain
        resolution: Cells per axis of the structured preimage (>= 2)

    Returns:
        Mesh: A conforming mesh with positively oriented cells
    """
    if not isinstance(domain, Domain):
        domain = Domain(domain)
    if int(resolution) != resolution or resolution < 2:
        raise ValidationError(f"resolution must be an integer >= 2, got {resolution}")
    resolution = int(resolution)

    lo, hi = domain.bounds
    vertices, cells, boundary = _structured_grid(domain.dimension, resolution, lo, hi)
    if domain.is_round:
        vertices = _radial_map(vertices, boundary)
    cells = _orient(vertices, cells)

    mesh = Mesh(domain=domain, vertices=vertices, cells=cells, boundary=boundary, resolution=resolution)
    logger.debug(f"Built {domain.kind.value} mesh: {mesh.n_vertices} vertices, {mesh.n_cells} cells")
    return mesh
