import math

import numpy as np
import pytest

from skewdrift.config.settings import config
from skewdrift.fem.fields import Functional, ScalarField, SkewField
from skewdrift.potentials.construct import random_test_functions
from skewdrift.solver.approximation import solve_truncated
from skewdrift.solver.assembly import apply_functional
from skewdrift.truncation.lipschitz import (
    TruncationData, caccioppoli_replay, chebyshev_check, lipschitz_constant, lipschitz_truncation,
    truncation_increments, vertex_lipschitz,
)
from skewdrift.utils.errors import ValidationError

LEVELS = [0.25, 0.5, 1.0, 2.0, 4.0, 8.0]


@pytest.fixture
def bumpy(disk):
    rng = np.random.default_rng(21)
    values = random_test_functions(disk, 1, seed=3)[0] + 0.3 * rng.normal(size=disk.n_vertices)
    values[disk.boundary] = 0.0
    return ScalarField(disk, values)


@pytest.fixture
def solution(disk):
    a_field = SkewField.from_function(disk, lambda x: 2.0 * np.cos(3.0 * x[:, 0]) * x[:, 1])
    f = Functional(density=ScalarField(disk, np.full(disk.n_vertices, 4.0)))
    return solve_truncated(disk, a_field, math.inf, f), a_field, f


def test_lipschitz_quotients(square):
    u = ScalarField.from_function(square, lambda x: 3.0 * x[:, 0] - x[:, 1])
    assert lipschitz_constant(u) == pytest.approx(math.sqrt(10.0))
    assert np.all(vertex_lipschitz(u, threads=2) <= math.sqrt(10.0) * (1.0 + 1e-12))


@pytest.mark.parametrize("level", [0.5, 1.0, 2.0, 4.0])
def test_truncation_keeps_good_vertices(bumpy, level):
    data = TruncationData.of(bumpy)
    good = data.good_set(level, 1.0)
    truncated = lipschitz_truncation(bumpy, level, 1.0, data)
    assert np.array_equal(truncated.values[good], bumpy.values[good])
    assert np.all(truncated.values[bumpy.mesh.boundary] == 0.0)
    assert lipschitz_constant(truncated) <= level * (1.0 + 1e-12)


def test_truncation_is_lipschitz_for_other_constants(bumpy):
    for constant in (0.5, 2.0):
        truncated = lipschitz_truncation(bumpy, 1.0, constant)
        assert lipschitz_constant(truncated) <= constant * (1.0 + 1e-12)


def test_large_level_returns_the_field(bumpy):
    data = TruncationData.of(bumpy)
    level = max(data.g.max(), data.quotient.max())
    assert lipschitz_truncation(bumpy, level, 1.0, data) is bumpy


def test_thread_count_does_not_change_the_truncation(bumpy):
    one = lipschitz_truncation(bumpy, 1.0, threads=1)
    four = lipschitz_truncation(bumpy, 1.0, threads=4)
    assert np.array_equal(one.values, four.values)


def test_truncation_increments_vanish_eventually(bumpy):
    data = TruncationData.of(bumpy)
    top = max(data.g.max(), data.quotient.max())
    increments = truncation_increments(bumpy, [0.25, 1.0, top])
    assert [level for level, _ in increments] == [0.25, 1.0, top]
    assert increments[0][1] > 0.0
    assert increments[-1][1] == 0.0


@pytest.mark.parametrize("level", LEVELS)
def test_chebyshev_check(bumpy, level):
    measure, bound = chebyshev_check(TruncationData.of(bumpy).g, bumpy.mesh, level)
    assert 0.0 <= measure <= bound


def test_nonpositive_level_raises(bumpy):
    for level in (0.0, -1.0):
        with pytest.raises(ValidationError):
            lipschitz_truncation(bumpy, level)
    with pytest.raises(ValidationError):
        lipschitz_truncation(bumpy, 1.0, constant=0.0)


def test_replay_holds_for_a_discrete_solution(solution):
    u, a_field, f = solution
    table = caccioppoli_replay(u, a_field, LEVELS)
    assert table.holds
    assert [row.level for row in table.rows] == LEVELS
    lhs = [row.lhs for row in table.rows]
    assert all(b >= a for a, b in zip(lhs, lhs[1:]))
    assert lhs[-1] <= table.energy * (1.0 + 1e-12)
    for row in table.rows:
        assert row.bad_measure <= row.chebyshev_bound
        truncated = lipschitz_truncation(u, row.level)
        assert row.residual == pytest.approx(apply_functional(f, truncated), abs=1e-8 * table.energy)
    assert [entry["epsilon"] for entry in table.aggregates] == [0.2, 0.1, 0.05]
    assert all(entry["holds"] for entry in table.aggregates)


def test_replay_table_serializes(solution):
    u, a_field, _ = solution
    payload = caccioppoli_replay(u, a_field, [2.0, 1.0]).to_dict()
    assert [row["level"] for row in payload["rows"]] == [1.0, 2.0]
    assert set(payload) == {"constant", "energy", "holds", "rows", "aggregates"}
    assert payload["constant"] == config.get("truncation", "lipschitz_c")


def test_replay_holds_for_random_fields(bumpy, disk):
    a_field = SkewField(disk, np.random.default_rng(8).normal(size=(disk.n_cells, 1)))
    assert caccioppoli_replay(bumpy, a_field, LEVELS, threads=2).holds


def test_replay_rejects_bad_levels(solution):
    u, a_field, _ = solution
    with pytest.raises(ValidationError):
        caccioppoli_replay(u, a_field, [])
    with pytest.raises(ValidationError):
        caccioppoli_replay(u, a_field, [1.0, 0.0])


def test_boundary_distance_check_is_counted(solution):
    u, a_field, _ = solution
    config.set("truncation", "check_boundary_distance", True)
    rows = caccioppoli_replay(u, a_field, [1.0, 4.0]).rows
    assert all(row.boundary_violations >= 0 for row in rows)
