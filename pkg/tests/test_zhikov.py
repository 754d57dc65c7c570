import math

import numpy as np
import pytest

from skewdrift.analysis.classify import Verdict
from skewdrift.config.settings import config
from skewdrift.fem.mesh import Domain, build_mesh
from skewdrift.utils.errors import ValidationError
from skewdrift.zhikov.example import (
    bracket_value, candidate_solution, core_radius, drift_field, drift_values, excised_reference,
    nonuniqueness_report, potential_values, skew_potential,
)
from skewdrift.zhikov.harmonics import (
    SphericalPair, build_pair, real_harmonic, solid_values, sphere_rule, stream_coefficients,
)

# beta = -2 / int Y20 Y10^2 = -2.5 sqrt(16 pi / 5)
BETA = -2.5 * math.sqrt(16.0 * math.pi / 5.0)


@pytest.fixture(scope="module")
def pair():
    return build_pair()


@pytest.fixture(scope="module")
def mid_ball():
    return build_mesh(Domain("unit_ball"), 16)


def random_points(count, low, high, seed=0):
    rng = np.random.default_rng(seed)
    directions = rng.normal(size=(count, 3))
    directions /= np.linalg.norm(directions, axis=1)[:, None]
    return directions * rng.uniform(low, high, size=count)[:, None]


@pytest.mark.parametrize("l, m", [(0, 0), (1, -1), (1, 0), (2, 0), (2, 2), (3, -2), (4, 3)])
def test_harmonics_are_orthonormal_and_solid(l, m):
    omega, weights = sphere_rule(10)
    y = real_harmonic(l, m, omega)
    assert weights @ (y * y) == pytest.approx(1.0, abs=1e-12)
    assert weights @ (y * real_harmonic(1, 0, omega)) == pytest.approx(float((l, m) == (1, 0)), abs=1e-12)
    x = random_points(20, 0.3, 2.0)
    r = np.linalg.norm(x, axis=1)
    assert np.allclose(solid_values(l, m, x), r ** l * real_harmonic(l, m, x / r[:, None]), atol=1e-10)


def test_sphere_rule_covers_the_sphere():
    _, weights = sphere_rule(6)
    assert weights.sum() == pytest.approx(4.0 * math.pi)
    with pytest.raises(ValidationError):
        sphere_rule(0)


def test_pair_constraints(pair):
    assert pair.normalization == pytest.approx(BETA, rel=1e-10)
    assert pair.moments()["a0"] == pytest.approx(0.0, abs=1e-10)
    assert pair.moments()["u0_a0"] == pytest.approx(0.0, abs=1e-10)
    assert pair.moments()["a0_u0_squared"] == pytest.approx(-2.0, abs=1e-8)


def test_pair_is_stable_across_sphere_orders():
    coarse, fine = build_pair(6), build_pair(10)
    assert coarse.normalization == pytest.approx(fine.normalization, rel=1e-12)
    for key, value in coarse.moments(6).items():
        assert value == pytest.approx(fine.moments(10)[key], abs=1e-8)


def test_stream_coefficients(pair):
    assert stream_coefficients(pair.a0_coefficients) == {(2, 0): -1.0 / 6.0}
    with pytest.raises(ValidationError):
        stream_coefficients({(0, 0): 1.0})
    with pytest.raises(ValidationError):
        SphericalPair({(5, 0): 1.0}, {(1, 0): 1.0})


def test_drift_is_radial(pair, ball):
    x = ball.centroids[np.random.default_rng(1).choice(ball.n_cells, 100, replace=False)]
    r = np.linalg.norm(x, axis=1)
    a = drift_values(pair, x)
    assert np.allclose((a * x).sum(axis=1), pair.a0(x) / r, rtol=1e-12)
    half = random_points(10, 0.5, 0.5)
    assert np.allclose(np.linalg.norm(drift_values(pair, half), axis=1), 4.0 * np.abs(pair.a0(half)))
    assert np.all(drift_values(pair, np.zeros((1, 3))) == 0.0)


def test_drift_field_excises_the_core(pair, ball):
    a = drift_field(pair, ball, 0.1)
    core = np.linalg.norm(ball.centroids, axis=1) < 0.1
    assert np.all(a.values[core] == 0.0)
    assert np.all(np.isfinite(a.values))


@pytest.mark.parametrize("rho", [0.0, -0.01, 0.2])
def test_rho_must_lie_in_range(pair, ball, rho):
    with pytest.raises(ValidationError):
        drift_field(pair, ball, rho)
    with pytest.raises(ValidationError):
        bracket_value(pair, ball, rho)


def test_example_needs_the_ball(pair, cube):
    with pytest.raises(ValidationError):
        candidate_solution(pair, cube)
    with pytest.raises(ValidationError):
        drift_field(pair, cube, 0.05)


def test_candidate_solution(pair, ball):
    u = candidate_solution(pair, ball)
    assert np.all(u.values[ball.boundary] == 0.0)
    assert np.abs(u.values).max() <= math.sqrt(3.0 / (4.0 * math.pi)) * (1.0 + 1e-12)
    origin = np.flatnonzero(np.linalg.norm(ball.vertices, axis=1) == 0.0)
    assert np.all(u.values[origin] == 0.0)


def test_potential_curl_is_the_drift(pair):
    x = random_points(12, 0.3, 0.9, seed=4)
    step = 1e-5
    curl = np.zeros_like(x)
    jacobian = np.zeros((x.shape[0], 3, 3))
    for k in range(3):
        shift = np.zeros(3)
        shift[k] = step
        jacobian[:, :, k] = (potential_values(pair, x + shift) - potential_values(pair, x - shift)) / (2.0 * step)
    curl[:, 0] = jacobian[:, 2, 1] - jacobian[:, 1, 2]
    curl[:, 1] = jacobian[:, 0, 2] - jacobian[:, 2, 0]
    curl[:, 2] = jacobian[:, 1, 0] - jacobian[:, 0, 1]
    a = drift_values(pair, x)
    assert np.allclose(curl, a, atol=1e-6 * np.abs(a).max())


def test_skew_potential_applies_the_cross_product(pair, ball):
    xi = np.array([0.3, -1.0, 2.0])
    w = potential_values(pair, ball.centroids)
    for sign in (1.0, -1.0):
        applied = skew_potential(pair, ball, sign).matrices() @ xi
        assert np.allclose(applied, sign * np.cross(w, xi), atol=1e-12)


def test_bracket_approaches_the_excised_value(pair, mid_ball):
    value = bracket_value(pair, mid_ball, 0.05)
    assert value == pytest.approx(excised_reference(pair, 0.05), abs=5e-2)
    assert value < -0.9


def test_bracket_is_linear_in_the_pair(pair, ball):
    value = bracket_value(pair, ball, 0.1)
    assert bracket_value(pair.flipped(), ball, 0.1) == pytest.approx(-value, rel=1e-12)
    silent = SphericalPair(pair.a0_coefficients, {(1, 0): 0.0}, pair.normalization)
    assert bracket_value(silent, ball, 0.1) == 0.0


def test_core_radius_covers_the_mesh_shells(ball):
    assert core_radius(ball, 0.05) == pytest.approx(config.get("zhikov", "core_shells") * ball.spacing)
    config.set("zhikov", "core_shells", 1)
    assert core_radius(ball, 0.1) == pytest.approx(max(0.1, ball.spacing))


def test_nonuniqueness_report(pair, mid_ball):
    report = nonuniqueness_report(pair, mid_ball, 0.05, schedule=[1.0, 4.0, 16.0], classify=False)
    assert report.candidate_defect == pytest.approx(excised_reference(pair, report.core_radius), abs=0.1)
    assert report.candidate_defect < -0.7
    assert report.solve.energy_defect >= -1e-6
    assert report.solve.bracket_uu == 0.0
    payload = report.to_dict()
    assert payload["norms"] is None
    assert payload["core_radius"] == report.core_radius
    assert "reproduced: " in payload["verdict"]


@pytest.mark.slow
def test_bracket_value_at_fine_resolution(pair):
    mesh = build_mesh(Domain("unit_ball"), 48)
    assert bracket_value(pair, mesh, 0.05) == pytest.approx(-1.0, abs=3e-2)


@pytest.mark.slow
def test_nonuniqueness_is_reproduced(pair):
    mesh = build_mesh(Domain("unit_ball"), 32)
    report = nonuniqueness_report(pair, mesh, 0.05)
    assert report.candidate_defect == pytest.approx(-1.0, abs=0.08)
    assert report.solve.energy_defect >= -1e-6
    assert report.norms.criteria["L2"] == Verdict.FAILS
    assert report.norms.criteria["Ln"] == Verdict.FAILS
    assert report.norms.criteria["L2n/(n+2)"] == Verdict.HOLDS


def test_coarse_meshes_cannot_hold_the_core(pair, ball):
    with pytest.raises(ValidationError, match="too coarse"):
        nonuniqueness_report(pair, ball, 0.05, classify=False)
