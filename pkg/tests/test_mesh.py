import math

import numpy as np
import pytest

from skewdrift.fem.mesh import Domain, DomainKind, build_mesh
from skewdrift.fem.quadrature import base_rule, graded_rule, refined_rule
from skewdrift.utils.errors import ValidationError


@pytest.mark.parametrize("name, dimension", [
    ("unit_square", 2), ("unit_disk", 2), ("unit_cube", 3), ("unit_ball", 3),
])
def test_cells_are_positively_oriented(name, dimension):
    mesh = build_mesh(Domain(name), 4)
    assert mesh.dimension == dimension
    assert mesh.cells.shape[1] == dimension + 1
    x = mesh.vertices[mesh.cells]
    det = np.linalg.det(x[:, 1:, :] - x[:, :1, :])
    assert np.all(det > 0)


def test_box_measures_are_exact(square, cube):
    assert square.measure == pytest.approx(1.0, abs=1e-13)
    assert cube.measure == pytest.approx(1.0, abs=1e-13)
    assert cube.n_cells == 6 * 4 ** 3


@pytest.mark.parametrize("mesh_name", ["square", "disk", "cube", "ball"])
def test_boundary_flags_match_geometry(request, mesh_name):
    mesh = request.getfixturevalue(mesh_name)
    x = mesh.vertices[mesh.boundary]
    if mesh.domain.is_round:
        assert np.allclose(np.linalg.norm(x, axis=1), 1.0, atol=1e-12)
        inner = mesh.vertices[~mesh.boundary]
        assert np.all(np.linalg.norm(inner, axis=1) < 1.0 - 1e-12)
    else:
        assert np.all(np.min(np.minimum(x, 1.0 - x), axis=1) < 1e-12)


def test_disk_area_converges():
    mesh = build_mesh(Domain("unit_disk"), 64)
    assert abs(mesh.measure - math.pi) < 5e-3


@pytest.mark.slow
def test_ball_volume_converges():
    mesh = build_mesh(Domain("unit_ball"), 32)
    assert abs(mesh.measure - 4.0 * math.pi / 3.0) < 2e-2


def test_refinement_halves_mesh_size():
    coarse = build_mesh(Domain("unit_disk"), 8)
    fine = build_mesh(Domain("unit_disk"), 16)
    assert fine.h <= 0.5 * coarse.h + 1e-12


@pytest.mark.parametrize("resolution", [0, 1, 2.5])
def test_invalid_resolution(resolution):
    with pytest.raises(ValidationError):
        build_mesh(Domain("unit_square"), resolution)


def test_unknown_domain():
    with pytest.raises(ValidationError):
        Domain.from_name("torus")
    assert Domain.from_name("unit_ball").kind == DomainKind.UNIT_BALL


def test_vertex_measure_sums_to_measure(ball):
    assert ball.vertex_measure.sum() == pytest.approx(ball.measure, rel=1e-12)


def test_basis_gradients_reproduce_linear_functions(ball):
    coefficients = np.array([0.3, -1.2, 2.0])
    values = ball.vertices @ coefficients
    grads = np.einsum("cj,cjd->cd", values[ball.cells], ball.basis_gradients)
    assert np.allclose(grads, coefficients, atol=1e-10)


def test_locate_cells(disk):
    points = disk.centroids[::7]
    assert np.array_equal(disk.locate_cells(points), np.arange(disk.n_cells)[::7])


def test_mesh_arrays_are_read_only(square):
    with pytest.raises(ValueError):
        square.vertices[0, 0] = 5.0


@pytest.mark.parametrize("dimension", [2, 3])
def test_rules_integrate_quadratics(dimension):
    # int over the reference simplex of lambda_0^2 is 2 / ((n + 1)(n + 2)) of its volume
    exact = 2.0 / ((dimension + 1) * (dimension + 2))
    for bary, weights in (base_rule(dimension), refined_rule(dimension, 2)):
        assert weights.sum() == pytest.approx(1.0)
        assert weights @ bary[:, 0] ** 2 == pytest.approx(exact)


@pytest.mark.parametrize("dimension, levels", [(2, 3), (3, 2)])
def test_graded_rule_covers_all_but_the_corner(dimension, levels):
    _, weights = graded_rule(dimension, levels)
    assert weights.sum() == pytest.approx(1.0 - 0.5 ** (levels * dimension))
