"""
Field specifications of experiment files.

A spec is a kind name followed by an optional number, e.g. ``log_radial 1``,
``sine 2`` or a bare number for a constant. Kinds:

    none            zero
    constant c      c everywhere
    log_radial s    s log(1 / |x - x0|)
    quadrant_log s  s log(1 / |x - x0|) on the first quadrant, 0 elsewhere
    power s         |x - x0|^-s
    sine k          prod_i sin(k pi t_i) in box coordinates t in [0, 1]^n
    rotation        |x - x0|^2 / 2
    bump            exp(1 - 1 / (1 - 4 |x - x0|^2)) on B_1/2(x0)
    zhikov          |a| of the unit-ball example (excised at zhikov.rho)

x0 is the domain center. As a drift or solenoidal field, a scalar profile
psi becomes the skew field with all entries psi, or the field
perp-grad psi (2-D) / curl (0, 0, psi) (3-D).
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from skewdrift.config.settings import config
from skewdrift.fem.fields import (
    Layout, ScalarField, SkewField, VectorField, discrete_curl, perp_gradient,
)
from skewdrift.fem.mesh import Mesh
from skewdrift.utils.errors import ConfigError, ValidationError
from skewdrift.zhikov.example import drift_field, skew_potential
from skewdrift.zhikov.harmonics import build_pair

logger = logging.getLogger("runner")


@dataclass(frozen=True)
class FieldSpec:
    """A parsed field specification."""

    kind: str
    parameter: float = math.nan

    @property
    def is_zero(self) -> bool:
        return self.kind == "none" or (self.kind == "constant" and self.parameter == 0.0)


# kind -> whether it takes a number, its default
KINDS = {
    "none": (False, math.nan),
    "constant": (True, 1.0),
    "log_radial": (True, 1.0),
    "quadrant_log": (True, 1.0),
    "power": (True, 1.0),
    "sine": (True, 1.0),
    "rotation": (False, math.nan),
    "bump": (False, math.nan),
    "zhikov": (False, math.nan),
}


def parse_spec(text: str, key: str = "field") -> FieldSpec:
    """
    Parse ``kind [number]`` or a bare number.

    Raises:
        ConfigError: Naming the key on unknown kinds or bad numbers
    """
    parts = str(text).split()
    if not parts:
        raise ConfigError(f"Empty field specification for {key}", [key])
    if len(parts) == 1:
        try:
            return FieldSpec("constant", float(parts[0]))
        except ValueError:
            pass
    return _named(parts, key)


def _named(parts, key: str) -> FieldSpec:
    kind = parts[0].lower()
    if kind not in KINDS or len(parts) > 2:
        raise ConfigError(f"Invalid field specification for {key}: '{' '.join(parts)}'", [key])
    takes_number, default = KINDS[kind]
    if len(parts) == 2 and not takes_number:
        raise ConfigError(f"Field kind '{kind}' takes no parameter ({key})", [key])
    try:
        value = float(parts[1]) if len(parts) == 2 else default
    except ValueError:
        raise ConfigError(f"Invalid number in {key}: '{parts[1]}'", [key])
    return FieldSpec(kind, value)


def _center(mesh: Mesh) -> np.ndarray:
    lo, hi = mesh.domain.bounds
    return np.full(mesh.dimension, 0.5 * (lo + hi))


def _profile(spec: FieldSpec, mesh: Mesh) -> Callable[[np.ndarray], np.ndarray]:
    center = _center(mesh)
    lo, hi = mesh.domain.bounds
    s = spec.parameter

    def radius(x):
        return np.linalg.norm(x - center, axis=1)

    def punctured(x):
        # nan at the center, rejected by the finiteness check
        r = radius(x)
        return np.where(r > 0.0, r, np.nan)

    def log_radial(x):
        return -s * np.log(punctured(x))

    def bump(x):
        t = 4.0 * radius(x) ** 2
        inside = t < 1.0
        return np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - t, 1.0)), 0.0)

    profiles: Dict[str, Callable[[np.ndarray], np.ndarray]] = {
        "none": lambda x: np.zeros(x.shape[0]),
        "constant": lambda x: np.full(x.shape[0], s),
        "log_radial": log_radial,
        "quadrant_log": lambda x: np.where(np.all(x > center, axis=1), log_radial(x), 0.0),
        "power": lambda x: punctured(x) ** -s,
        "sine": lambda x: np.prod(np.sin(s * math.pi * (x - lo) / (hi - lo)), axis=1),
        "rotation": lambda x: 0.5 * radius(x) ** 2,
        "bump": bump,
    }
    return profiles[spec.kind]


def scalar_field(spec: FieldSpec, mesh: Mesh, layout: Layout = Layout.CELL) -> ScalarField:
    """Sample a scalar spec at vertices or centroids."""
    if spec.kind == "zhikov":
        if layout != Layout.CELL:
            raise ValidationError("the zhikov profile is a cellwise drift magnitude")
        return drift_field(build_pair(), mesh, config.get("zhikov", "rho")).norm()
    points = mesh.vertices if Layout(layout) == Layout.VERTEX else mesh.centroids
    values = _profile(spec, mesh)(points)
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"field '{spec.kind}' is not finite at the sample points")
    return ScalarField(mesh, values, layout)


def vanishing_field(spec: FieldSpec, mesh: Mesh) -> ScalarField:
    """Vertex samples with the boundary values set to zero."""
    values = np.array(scalar_field(spec, mesh, Layout.VERTEX).values)
    values[mesh.boundary] = 0.0
    return ScalarField(mesh, values)


def skew_field(spec: FieldSpec, mesh: Mesh) -> SkewField:
    """A skew drift A: all independent entries equal the profile."""
    if spec.is_zero:
        return SkewField.zeros(mesh)
    if spec.kind == "zhikov":
        return skew_potential(build_pair(), mesh)
    return SkewField.uniform_entries(scalar_field(spec, mesh))


def solenoidal_field(spec: FieldSpec, mesh: Mesh) -> VectorField:
    """A discretely solenoidal drift a built from the profile as stream function."""
    if spec.is_zero:
        return VectorField.zeros(mesh)
    if spec.kind == "constant":
        values = np.zeros((mesh.n_cells, mesh.dimension))
        values[:, -1] = spec.parameter
        return VectorField(mesh, values)
    if spec.kind == "zhikov":
        return drift_field(build_pair(), mesh, config.get("zhikov", "rho"))
    stream = scalar_field(spec, mesh, Layout.VERTEX)
    if mesh.dimension == 2:
        return perp_gradient(stream)
    zero = ScalarField.zeros(mesh)
    return discrete_curl([zero, zero, stream])


def flux_field(spec: FieldSpec, mesh: Mesh) -> VectorField:
    """A flux F with every component equal to the profile."""
    values = scalar_field(spec, mesh).values
    return VectorField(mesh, np.repeat(values[:, None], mesh.dimension, axis=1))
