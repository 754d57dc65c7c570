import math

import numpy as np
import pytest

from skewdrift.fem.fields import ScalarField, SkewField, VectorField, discrete_curl, gradient, perp_gradient
from skewdrift.fem.mesh import Domain, build_mesh
from skewdrift.potentials.construct import (
    boundary_flux_residual, check_solenoidal, newtonian_potential, poincare_potential_ball,
    random_test_functions, skew_from_stream, solenoidal_residual, stream_function_2d, weak_div_residual,
)
from skewdrift.utils.errors import NormalTraceError, SolenoidalityError, ValidationError


def rotation(mesh):
    return VectorField.from_function(mesh, lambda x: np.stack([-x[:, 1], x[:, 0]], axis=1))


def vertical(mesh):
    values = np.zeros((mesh.n_cells, 3))
    values[:, 2] = 1.0
    return VectorField(mesh, values)


def bump_drift(mesh):
    """curl (0, 0, psi) for a bump psi supported in B_1/2."""
    r2 = (mesh.vertices ** 2).sum(axis=1)
    inside = 4.0 * r2 < 1.0
    psi = np.where(inside, np.exp(1.0 - 1.0 / np.where(inside, 1.0 - 4.0 * r2, 1.0)), 0.0)
    zero = ScalarField.zeros(mesh)
    return discrete_curl([zero, zero, ScalarField(mesh, psi)])


def l2_gap(v, w):
    return math.sqrt(float((v.mesh.cell_volumes * ((v.values - w.values) ** 2).sum(axis=1)).sum()))


def test_rotation_stream_function():
    errors = []
    for resolution in (16, 32):
        mesh = build_mesh(Domain("unit_disk"), resolution)
        a = rotation(mesh)
        alpha = stream_function_2d(a)
        errors.append(l2_gap(perp_gradient(alpha), a))
        assert errors[-1] <= mesh.h
        # zero mean
        assert float(alpha.values @ mesh.vertex_measure) == pytest.approx(0.0, abs=1e-3)
    assert errors[0] / errors[1] > 1.6


def test_stream_potential_reproduces_the_drift(disk):
    alpha = ScalarField.from_function(disk, lambda x: np.sin(2.0 * x[:, 0]) * np.cos(x[:, 1]))
    a = perp_gradient(alpha)
    recovered = stream_function_2d(a)
    assert np.allclose(gradient(recovered).values, gradient(alpha).values, atol=1e-8)
    assert weak_div_residual(skew_from_stream(recovered), a) < 1e-10


def test_stream_function_rejects_sources(disk):
    source = VectorField.from_function(disk, lambda x: x.copy())
    with pytest.raises(SolenoidalityError) as info:
        stream_function_2d(source)
    assert info.value.residual > 0.0
    with pytest.raises(ValidationError):
        stream_function_2d(vertical(build_mesh(Domain("unit_ball"), 4)))


def test_check_solenoidal(disk):
    assert check_solenoidal(rotation(disk)) < 1e-12
    with pytest.raises(SolenoidalityError):
        check_solenoidal(VectorField.from_function(disk, lambda x: x.copy()))


def test_constant_field_poincare_potential(ball):
    a = vertical(ball)
    a_field = poincare_potential_ball(a)
    # w = e3 x x / 2
    x = ball.centroids
    w = np.stack([-x[:, 1], x[:, 0], np.zeros(len(x))], axis=1) / 2.0
    assert np.allclose(a_field.values, np.stack([-w[:, 2], w[:, 1], -w[:, 0]], axis=1), atol=1e-12)
    assert weak_div_residual(a_field, a) < 1e-12


def test_poincare_preconditions(square, ball):
    with pytest.raises(ValidationError):
        poincare_potential_ball(VectorField.zeros(square))
    with pytest.raises(ValidationError):
        poincare_potential_ball(vertical(ball), nodes=16)


def test_poincare_potential_rejects_sources(ball):
    source = VectorField.from_function(ball, lambda x: x.copy())
    with pytest.raises(ValidationError):
        poincare_potential_ball(source)
    with pytest.raises(SolenoidalityError) as info:
        poincare_potential_ball(source)
    assert info.value.residual > 0.0


def test_poincare_potential_is_linear(ball):
    a1, a2 = vertical(ball), bump_drift(ball)
    combined = poincare_potential_ball(a1 + a2 * 2.0)
    separate = poincare_potential_ball(a1) + poincare_potential_ball(a2) * 2.0
    assert np.allclose(combined.values, separate.values, atol=1e-12)


def test_zero_drift_potentials(ball):
    zero = VectorField.zeros(ball)
    assert newtonian_potential(zero).max_entry() == 0.0
    assert poincare_potential_ball(zero).max_entry() == 0.0


def test_newtonian_potential_needs_zero_normal_trace(ball):
    assert boundary_flux_residual(vertical(ball)) > 1e-3
    with pytest.raises(NormalTraceError, match="poincare_potential_ball"):
        newtonian_potential(vertical(ball))
    with pytest.raises(ValidationError):
        newtonian_potential(VectorField.zeros(build_mesh(Domain("unit_square"), 4)))


def test_newtonian_potential_of_bump():
    mesh = build_mesh(Domain("unit_ball"), 12)
    a = bump_drift(mesh)
    assert solenoidal_residual(a) < 1e-12
    assert boundary_flux_residual(a) < 1e-12
    a_field = newtonian_potential(a, threads=2)
    assert a_field.max_entry() > 0.0
    assert np.allclose(newtonian_potential(a * 2.0).values, 2.0 * a_field.values, rtol=1e-10, atol=1e-14)
    # smooth tests see the O(h) consistency error, far below the zero-potential baseline
    baseline = weak_div_residual(SkewField.zeros(mesh), a, test_count=0)
    assert weak_div_residual(a_field, a, test_count=0) < 0.5 * baseline


def test_constant_skew_is_a_gauge(ball):
    a = vertical(ball)
    a_field = poincare_potential_ball(a)
    shifted = a_field + SkewField(ball, np.tile([0.7, -1.3, 2.0], (ball.n_cells, 1)))
    assert weak_div_residual(shifted, a) < 1e-12


def test_corrupted_potential_is_detected(ball):
    a = vertical(ball)
    a_field = poincare_potential_ball(a)
    rng = np.random.default_rng(9)
    corrupted = a_field + SkewField(ball, 0.1 * rng.normal(size=a_field.values.shape))
    assert weak_div_residual(corrupted, a) > 1e-3


def test_random_test_functions(disk, cube):
    for mesh in (disk, cube):
        tests = random_test_functions(mesh, 4, seed=11)
        assert len(tests) == 4
        for phi in tests:
            assert np.all(phi[mesh.boundary] == 0.0)
            assert np.abs(phi).max() > 0.0
        again = random_test_functions(mesh, 4, seed=11)
        assert all(np.array_equal(p, q) for p, q in zip(tests, again))
