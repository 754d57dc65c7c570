import math

import numpy as np
import pytest

from skewdrift.analysis.norms import (
    epsilon_profile, exp_gamma_star, grand_lebesgue_norm, growth_limit, lp_norm, lp_samples, weak_norm,
)
from skewdrift.analysis.tail import field_tail
from skewdrift.fem.fields import Layout, ScalarField
from skewdrift.fem.mesh import Domain, build_mesh
from skewdrift.utils.errors import ValidationError


def log_radial(resolution):
    mesh = build_mesh(Domain("unit_disk"), resolution)
    return ScalarField.from_function(mesh, lambda x: -np.log(np.linalg.norm(x, axis=1)), Layout.CELL)


def inverse_radius(resolution):
    mesh = build_mesh(Domain("unit_disk"), resolution)
    return ScalarField.from_function(mesh, lambda x: 1.0 / np.linalg.norm(x, axis=1), Layout.CELL)


def constant(mesh, value=1.0):
    return ScalarField(mesh, np.full(mesh.n_cells, value), Layout.CELL)


def test_lp_norm_of_linear_field_is_exact(square):
    f = ScalarField.from_function(square, lambda x: x[:, 0])
    assert lp_norm(f, 2.0) == pytest.approx(1.0 / math.sqrt(3.0), abs=1e-10)


def test_lp_norm_of_log_singularity():
    # 2 pi int_0^inf t^4 e^(-2t) dt = pi 4! / 2^4
    expected = (math.pi * 24.0 / 16.0) ** 0.25
    assert lp_norm(log_radial(128), 4.0) == pytest.approx(expected, abs=2e-2)


def test_lp_norm_rejects_bad_exponents(square):
    for p in (0.5, math.inf):
        with pytest.raises(ValidationError):
            lp_norm(constant(square), p)


def test_lp_norm_of_zero(square):
    assert lp_norm(constant(square, 0.0), 3.0) == 0.0


def test_bounded_field_diagnostics(disk):
    f = constant(disk, 2.0)
    assert field_tail(f).is_bounded
    assert growth_limit(f) == 0.0
    assert exp_gamma_star(f) == math.inf
    samples = lp_samples(f, 64.0)
    assert [p for p, _ in samples] == [8.0, 16.0, 32.0, 64.0]
    for p, value in samples:
        assert value == pytest.approx(2.0 * disk.measure ** (1.0 / p), rel=1e-10)


def test_power_tail_diagnostics():
    f = inverse_radius(64)
    model = field_tail(f)
    assert model.kind == "power"
    assert model.exponent == pytest.approx(2.0, rel=0.25)
    assert growth_limit(f, model=model) == math.inf
    assert exp_gamma_star(f, model=model) == 0.0


def test_exponential_summability_of_log_singularity():
    f = log_radial(128)
    model = field_tail(f)
    assert model.kind == "exponential"
    assert exp_gamma_star(f, model=model, check=False) == pytest.approx(2.0, rel=0.15)


def test_exponential_summability_from_refinement():
    gamma = exp_gamma_star(log_radial(64), refined=log_radial(128), check=False)
    assert gamma == pytest.approx(2.0, rel=0.15)


def test_refinement_keeps_bounded_and_power_verdicts(disk):
    assert exp_gamma_star(constant(disk, 2.0), refined=constant(disk, 2.0)) == math.inf
    assert exp_gamma_star(inverse_radius(32), refined=inverse_radius(64)) == 0.0


@pytest.mark.slow
def test_growth_limit_matches_stirling():
    f = log_radial(256)
    model = field_tail(f)
    limit = growth_limit(f, p_max=64.0, model=model)
    gamma = exp_gamma_star(f, model=model)
    assert limit == pytest.approx(1.0 / (2.0 * math.e), rel=0.1)
    assert gamma == pytest.approx(2.0, rel=0.15)
    assert gamma * math.e * limit == pytest.approx(1.0, rel=0.2)


def test_lp_samples_need_room(square):
    with pytest.raises(ValidationError):
        lp_samples(constant(square), 8.0)


def test_weak_norm_of_constant(square):
    assert weak_norm(constant(square), 2.0) == pytest.approx(1.0)
    with pytest.raises(ValidationError):
        weak_norm(constant(square), 0.5)


def test_weak_norm_dominated_by_strong_norm():
    f = log_radial(32)
    for p in (1.0, 2.0, 4.0):
        assert weak_norm(f, p) <= lp_norm(f, p) * (1.0 + 1e-12)


def test_grand_lebesgue_of_constant(square):
    assert grand_lebesgue_norm(constant(square)) == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(ValidationError):
        grand_lebesgue_norm(constant(square), 3)


def test_grand_lebesgue_of_inverse_radius_is_stable():
    coarse = grand_lebesgue_norm(inverse_radius(32))
    value = grand_lebesgue_norm(inverse_radius(32), refined=inverse_radius(64))
    # sup_s 2^(1/s) is attained at s = 1
    assert math.isfinite(value)
    assert value == pytest.approx(2.0, rel=0.1)
    assert value / coarse < 1.5


def test_grand_lebesgue_of_inverse_square_diverges():
    def inverse_square(resolution):
        mesh = build_mesh(Domain("unit_disk"), resolution)
        return ScalarField.from_function(mesh, lambda x: 1.0 / np.sum(x ** 2, axis=1), Layout.CELL)

    assert grand_lebesgue_norm(inverse_square(16), refined=inverse_square(64)) == math.inf


def test_epsilon_profile_of_bounded_field_vanishes(square):
    samples, slope = epsilon_profile(constant(square), 2.0, 1.0)
    assert len(samples) == 7
    assert slope == pytest.approx(1.0, abs=1e-8)


def test_epsilon_profile_of_inverse_radius():
    # || |x|^-1 ||_(2 - eps) grows like eps^(-1/2), so eps times it still vanishes
    _, slope = epsilon_profile(inverse_radius(64), 2.0, 1.0)
    assert slope > 0.1


def test_epsilon_profile_below_the_integrability_exponent():
    mesh = build_mesh(Domain("unit_disk"), 64)
    f = ScalarField.from_function(mesh, lambda x: np.linalg.norm(x, axis=1) ** -1.5, Layout.CELL)
    _, slope = epsilon_profile(f, 2.0, 1.0)
    assert slope == -math.inf
