import math

import numpy as np
import pytest

from skewdrift.analysis.balls import (
    coifman_rochberg_majorant, maximal_function, maximal_values, morrey_ball, morrey_norm, unit_ball_volume,
)
from skewdrift.fem.fields import Layout, ScalarField
from skewdrift.fem.mesh import Domain, build_mesh


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(math.pi)
    assert unit_ball_volume(3) == pytest.approx(4.0 * math.pi / 3.0)


def test_maximal_function_of_constant(ball):
    f = ScalarField(ball, np.full(ball.n_cells, 3.0), Layout.CELL)
    assert np.allclose(maximal_function(f).values, 3.0, rtol=1e-12)


def test_maximal_function_dominates_vertex_values(disk):
    f = ScalarField.from_function(disk, lambda x: np.sin(4.0 * x[:, 0]) + x[:, 1] ** 2)
    assert np.all(maximal_values(f) >= np.abs(f.values) - 1e-14)


def test_maximal_function_threads_agree(disk):
    f = ScalarField.from_function(disk, lambda x: np.exp(x[:, 0]), Layout.CELL)
    assert np.array_equal(maximal_values(f, threads=1), maximal_values(f, threads=3))


def test_maximal_function_of_indicator_outside_its_support(ball):
    f = ScalarField.from_function(
        ball, lambda x: (np.linalg.norm(x, axis=1) < 0.5).astype(float), Layout.CELL)
    target = int(np.argmin(np.abs(np.linalg.norm(ball.vertices, axis=1) - 0.75)))
    value = maximal_values(f, np.array([target]))[0]
    assert 0.0 < value < 1.0


def test_coifman_rochberg_majorant_dominates(disk):
    f = ScalarField.from_function(disk, lambda x: -np.log(np.linalg.norm(x, axis=1) + 0.1))
    majorant = coifman_rochberg_majorant(f, gamma=0.5)
    assert np.all(majorant.values >= np.abs(f.values) - 1e-12)


def test_morrey_norm_of_bounded_field(ball):
    f = ScalarField(ball, np.ones(ball.n_cells), Layout.CELL)
    estimate = morrey_ball(f, 3.0)
    assert 0.0 < estimate.value <= 4.0 * math.pi / 3.0 * ball.domain.diameter
    assert estimate.radius > 0.0
    assert len(estimate.center) == 3


@pytest.mark.slow
def test_morrey_norm_of_inverse_radius():
    mesh = build_mesh(Domain("unit_ball"), 48)
    f = ScalarField.from_function(mesh, lambda x: 1.0 / np.linalg.norm(x, axis=1), Layout.CELL)
    assert morrey_norm(f, 3.0) == pytest.approx(2.0 * math.pi, rel=0.05)
