"""
Mean oscillation over dyadic cubes and their half-shifted copies.
"""

import itertools
import logging
import math
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np

from skewdrift.config.settings import config
from skewdrift.fem.fields import ScalarField
from skewdrift.fem.quadrature import quadrature_points
from skewdrift.utils.errors import ValidationError

logger = logging.getLogger("norms")


def _signed_samples(f: ScalarField):
    """Points, weights and values: centroids for cell fields, degree-2 points for P1."""
    mesh = f.mesh
    if not f.is_vertex:
        return mesh.centroids, mesh.cell_volumes, f.values
    points, weights, bary = quadrature_points(mesh)
    n = mesh.dimension
    return points.reshape(-1, n), weights.reshape(-1), f.at_quadrature(bary).reshape(-1)


def _cube_groups(f: ScalarField, depth: int) -> Iterator[Tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """
    Yield (cube id, weights, values) of the samples in cubes of side
    width 2^-depth that lie inside the domain, for the plain lattice and
    every lattice shifted by -1/2 or +1/2 of a side along each axis.
    """
    mesh = f.mesh
    domain = mesh.domain
    n = mesh.dimension
    lo, hi = domain.bounds
    side = (hi - lo) / 2 ** depth
    points, weights, values = _signed_samples(f)
    corners = np.array(list(itertools.product((0.0, 1.0), repeat=n)))

    for shift in itertools.product((-0.5, 0.0, 0.5), repeat=n):
        origin = lo + side * np.asarray(shift)
        index = np.floor((points - origin) / side).astype(np.int64)
        count = 2 ** depth + 1
        index = np.clip(index, -1, count - 1) + 1
        keys = np.ravel_multi_index(index.T, (count + 1,) * n)

        used = np.unique(keys)
        cube_idx = np.array(np.unravel_index(used, (count + 1,) * n)).T - 1
        low_corner = origin + side * cube_idx
        inside = np.all([domain.contains(low_corner + side * c) for c in corners], axis=0)
        inside_keys = used[inside]
        if inside_keys.size == 0:
            continue
        mask = np.isin(keys, inside_keys)
        _, local = np.unique(keys[mask], return_inverse=True)
        yield local, weights[mask], values[mask]


def _cube_oscillations(local: np.ndarray, weights: np.ndarray, values: np.ndarray, p: float = 1.0):
    """Per-cube (|Q|^-1 int_Q |f - f_Q|^p)^(1/p)."""
    measure = np.bincount(local, weights=weights)
    mean = np.bincount(local, weights=weights * values) / measure
    dev = np.abs(values - mean[local]) ** p
    return (np.bincount(local, weights=weights * dev) / measure) ** (1.0 / p)


def _check_depth(f: ScalarField, max_depth: int) -> None:
    if max_depth < 0:
        raise ValidationError(f"max_depth must be nonnegative, got {max_depth}")
    if 2 ** max_depth > f.mesh.resolution / 2:
        raise ValidationError(
            f"max_depth {max_depth} under-resolves cube means at resolution {f.mesh.resolution}"
            f" (need 2^depth <= {f.mesh.resolution // 2})"
        )


def bmo_profile(f: ScalarField, max_depth: Optional[int] = None) -> List[Tuple[int, float]]:
    """
    Running supremum of the mean oscillation per depth.

    Args:
        f: The field
        max_depth: Finest dyadic depth (2^max_depth <= resolution / 2)

    Returns:
        List of (depth, estimate), nondecreasing in depth
    """
    max_depth = config.get("analysis", "bmo_max_depth") if max_depth is None else max_depth
    _check_depth(f, max_depth)
    profile = []
    best = 0.0
    for depth in range(max_depth + 1):
        for local, weights, values in _cube_groups(f, depth):
            best = max(best, float(_cube_oscillations(local, weights, values).max()))
        profile.append((depth, best))
    logger.debug(f"BMO profile: {profile}")
    return profile


def bmo_norm(f: ScalarField, max_depth: Optional[int] = None) -> float:
    """Supremum of the mean oscillation over the dyadic and half-shifted cubes."""
    return bmo_profile(f, max_depth)[-1][1]


def bmo_growth_ratio(profile: Sequence[Tuple[int, float]]) -> float:
    """Finest-depth estimate over the next coarser one; 1 for a single depth."""
    if len(profile) < 2:
        return 1.0
    last = profile[-1][1]
    previous = profile[-2][1]
    if previous <= 0.0:
        return 1.0 if last <= 0.0 else math.inf
    return last / previous


def john_nirenberg_profile(
    f: ScalarField, max_depth: Optional[int] = None, exponents: Sequence[float] = (1.0, 2.0, 4.0, 8.0)
) -> List[Tuple[float, float]]:
    """
    Higher oscillation moments divided by p.

    For f in BMO, sup_Q (|Q|^-1 int_Q |f - f_Q|^p)^(1/p) / p stays bounded in p;
    the raw values are reported without a dimensional constant.

    Returns:
        List of (p, sup_Q moment / p)
    """
    max_depth = config.get("analysis", "bmo_max_depth") if max_depth is None else max_depth
    _check_depth(f, max_depth)
    best = {p: 0.0 for p in exponents}
    for depth in range(max_depth + 1):
        for local, weights, values in _cube_groups(f, depth):
            for p in exponents:
                best[p] = max(best[p], float(_cube_oscillations(local, weights, values, p).max()) / p)
    return [(p, best[p]) for p in exponents]
