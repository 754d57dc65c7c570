"""
Ball averages: the centered Hardy-Littlewood maximal function, the Morrey
norm and the Coifman-Rochberg majorant.

Ball integrals use cellwise integrals of |f| placed at cell centroids and a
cKDTree dual-tree count, so the zero extension of f outside the domain is
implicit.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import gamma as gamma_fn

from skewdrift.config.settings import config
from skewdrift.fem.fields import Layout, ScalarField, vertex_patch_max
from skewdrift.fem.mesh import Mesh
from skewdrift.fem.quadrature import quadrature_points

logger = logging.getLogger("norms")

CHUNK = 256


def unit_ball_volume(n: int) -> float:
    """omega_n = |B_1| in R^n."""
    return math.pi ** (n / 2.0) / float(gamma_fn(n / 2.0 + 1.0))


def cell_masses(f: ScalarField) -> np.ndarray:
    """int_T |f| per cell (degree-2 rule for P1 fields)."""
    mesh = f.mesh
    if not f.is_vertex:
        return np.abs(f.values) * mesh.cell_volumes
    _, weights, bary = quadrature_points(mesh)
    return (weights * np.abs(f.at_quadrature(bary))).sum(axis=1)


@dataclass(frozen=True)
class BallEstimate:
    """A supremum over balls with its maximizing ball."""

    value: float
    center: Tuple[float, ...]
    radius: float

    def to_dict(self):
        return {"value": self.value, "center": list(self.center), "radius": self.radius}


def _ball_sums(mesh: Mesh, masses: np.ndarray, points: np.ndarray, radii: np.ndarray, threads: int) -> np.ndarray:
    """int_{B_r(x)} |f| and |B_r(x) cap Omega| for every point and radius."""
    tree = cKDTree(mesh.centroids)
    volumes = mesh.cell_volumes

    def evaluate(chunk: np.ndarray) -> np.ndarray:
        out = np.empty((chunk.shape[0], 2, radii.size))
        for row, x in enumerate(chunk):
            single = cKDTree(x[None, :])
            out[row, 0] = tree.count_neighbors(single, radii, weights=(masses, None), cumulative=True)
            out[row, 1] = tree.count_neighbors(single, radii, weights=(volumes, None), cumulative=True)
        return out

    chunks = [points[i:i + CHUNK] for i in range(0, points.shape[0], CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(evaluate, chunks))
    else:
        parts = [evaluate(chunk) for chunk in chunks]
    return np.concatenate(parts) if parts else np.empty((0, 2, radii.size))


def maximal_values(f: ScalarField, targets: Optional[np.ndarray] = None, threads: Optional[int] = None) -> np.ndarray:
    """
    Centered maximal function of the zero extension at vertices.

    Radii run over spacing * 2^k up to the domain diameter. A ball average
    divides by max(|B_r|, discrete |B_r cap Omega|), so averages of
    constants never exceed the constant; the zero-radius term is the
    vertex patch maximum of |f|.

    Args:
        f: The field
        targets: Vertex indices (default: all)
        threads: Worker threads over targets

    Returns:
        np.ndarray: Mf at the targets
    """
    mesh = f.mesh
    threads = config.get("run", "threads") if threads is None else threads
    targets = np.arange(mesh.n_vertices) if targets is None else np.asarray(targets, dtype=int)
    n = mesh.dimension
    count = int(math.ceil(math.log2(mesh.domain.diameter / mesh.spacing))) + 1
    radii = mesh.spacing * 2.0 ** np.arange(count)

    sums = _ball_sums(mesh, cell_masses(f), mesh.vertices[targets], radii, threads)
    denominator = np.maximum(unit_ball_volume(n) * radii ** n, sums[:, 1, :])
    averages = (sums[:, 0, :] / denominator).max(axis=1)
    return np.maximum(averages, vertex_patch_max(f)[targets])


def maximal_function(f: ScalarField, threads: Optional[int] = None) -> ScalarField:
    """Mf as a vertex field."""
    return ScalarField(f.mesh, maximal_values(f, threads=threads), Layout.VERTEX)


def coifman_rochberg_majorant(f: ScalarField, gamma: float = 1.0, threads: Optional[int] = None) -> ScalarField:
    """gamma^-1 log M exp(gamma |f|); dominates |f| and has bounded oscillation."""
    lifted = f.with_values(np.exp(gamma * np.abs(f.values)))
    values = np.log(maximal_values(lifted, threads=threads)) / gamma
    return ScalarField(f.mesh, values, Layout.VERTEX)


def _morrey_centers(f: ScalarField, max_centers: int, top_centers: int) -> np.ndarray:
    mesh = f.mesh
    stride = max(1, int(math.ceil(mesh.n_vertices / max_centers)))
    strided = np.arange(0, mesh.n_vertices, stride)
    nodal = vertex_patch_max(f)
    top = np.argsort(-nodal, kind="stable")[:top_centers]
    return np.union1d(strided, top)


def morrey_ball(
    f: ScalarField, p: float, max_centers: Optional[int] = None, top_centers: Optional[int] = None,
    threads: Optional[int] = None,
) -> BallEstimate:
    """
    sup R^(-n(1 - 1/p)) int_{Omega cap B_R} |f| over a dyadic ball family.

    Centers are strided mesh vertices plus the vertices where |f| peaks;
    radii are diam(Omega) 2^-k down to twice the grid spacing.

    Returns:
        BallEstimate: The value and the maximizing ball
    """
    mesh = f.mesh
    max_centers = config.get("analysis", "max_centers") if max_centers is None else max_centers
    top_centers = config.get("analysis", "top_centers") if top_centers is None else top_centers
    threads = config.get("run", "threads") if threads is None else threads
    n = mesh.dimension
    scale = n if math.isinf(p) else n * (1.0 - 1.0 / p)

    diameter = mesh.domain.diameter
    count = int(math.floor(math.log2(diameter / (2.0 * mesh.spacing) + 1e-12))) + 1
    radii = diameter * 0.5 ** np.arange(count)[::-1]
    centers = _morrey_centers(f, max_centers, top_centers)

    sums = _ball_sums(mesh, cell_masses(f), mesh.vertices[centers], radii, threads)[:, 0, :]
    scaled = sums * radii[None, :] ** (-scale)
    best = np.unravel_index(int(np.argmax(scaled)), scaled.shape)
    center = tuple(float(c) for c in mesh.vertices[centers[best[0]]])
    estimate = BallEstimate(float(scaled[best]), center, float(radii[best[1]]))
    logger.debug(f"Morrey sup {estimate.value:.6g} at center {center}, radius {estimate.radius:.4g}")
    return estimate


def morrey_norm(f: ScalarField, p: float, **kwargs) -> float:
    """Value of :func:`morrey_ball`."""
    return morrey_ball(f, p, **kwargs).value
