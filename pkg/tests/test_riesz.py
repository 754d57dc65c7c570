import math

import numpy as np
import pytest

from skewdrift.analysis.norms import lp_norm
from skewdrift.analysis.riesz import (
    log_morrey_bound_ratio, lp_potential_bound, morrey_potential_bound, riesz_potential, riesz_values,
)
from skewdrift.fem.fields import Layout, ScalarField
from skewdrift.fem.mesh import Domain, build_mesh
from skewdrift.utils.errors import ValidationError


def center_vertex(mesh):
    return int(np.argmin(np.linalg.norm(mesh.vertices, axis=1)))


def test_potential_of_one_at_disk_center():
    mesh = build_mesh(Domain("unit_disk"), 32)
    f = ScalarField(mesh, np.ones(mesh.n_cells), Layout.CELL)
    value = riesz_values(f, np.array([center_vertex(mesh)]))[0]
    assert value == pytest.approx(2.0 * math.pi, rel=0.05)


@pytest.mark.slow
def test_potential_of_one_at_ball_center():
    mesh = build_mesh(Domain("unit_ball"), 48)
    f = ScalarField(mesh, np.ones(mesh.n_cells), Layout.CELL)
    value = riesz_values(f, np.array([center_vertex(mesh)]), threads=4)[0]
    assert value == pytest.approx(4.0 * math.pi, rel=0.02)


@pytest.mark.parametrize("p, q", [(2.0, 2.0), (2.0, 4.0), (4.0, 8.0), (3.0, 3.0)])
def test_lp_bound_holds(disk, p, q):
    rng = np.random.default_rng(5)
    f = ScalarField(disk, rng.uniform(0.0, 2.0, disk.n_cells), Layout.CELL)
    potential = riesz_potential(f)
    assert lp_norm(potential, q) <= lp_potential_bound(f, p, q)


def test_lp_bound_needs_admissible_exponents(disk):
    f = ScalarField(disk, np.ones(disk.n_cells), Layout.CELL)
    with pytest.raises(ValidationError):
        lp_potential_bound(f, 2.0, 1.5)
    with pytest.raises(ValidationError):
        lp_potential_bound(f, 1.0, 100.0)


def test_morrey_bound_holds(disk):
    f = ScalarField(disk, np.ones(disk.n_cells), Layout.CELL)
    potential = riesz_potential(f)
    assert log_morrey_bound_ratio(potential, f, 2.0) <= 0.0
    with pytest.raises(ValidationError):
        morrey_potential_bound(f, 0.5)


def test_potential_is_linear_in_the_density(disk):
    f = ScalarField.from_function(disk, lambda x: 1.0 + x[:, 0] ** 2, Layout.CELL)
    targets = np.arange(0, disk.n_vertices, 17)
    assert np.allclose(riesz_values(f * 3.0, targets), 3.0 * riesz_values(f, targets), rtol=1e-12)
