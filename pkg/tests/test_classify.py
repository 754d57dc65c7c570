import json

import numpy as np
import pytest

from skewdrift.analysis.classify import Verdict, classify_drift, magnitude
from skewdrift.fem.fields import Layout, ScalarField, SkewField, VectorField
from skewdrift.fem.io import to_jsonable
from skewdrift.fem.mesh import Domain, build_mesh

CRITERIA = {
    "L2", "Ln", "L2n/(n+2)", "Morrey_n", "exp_growth", "exp_summable", "BMO", "weak_Ln",
    "grand_Lebesgue_n", "eps_L2", "sqrt_eps_L2",
}


@pytest.fixture(scope="module")
def strong_singularity():
    mesh = build_mesh(Domain("unit_disk"), 32)
    return ScalarField.from_function(mesh, lambda x: np.linalg.norm(x, axis=1) ** -1.5, Layout.CELL)


def test_magnitude(ball):
    rng = np.random.default_rng(2)
    a_field = SkewField(ball, rng.normal(size=(ball.n_cells, 3)))
    assert np.allclose(magnitude(a_field).values, np.sqrt(2.0) * np.linalg.norm(a_field.values, axis=1))
    drift = VectorField(ball, rng.normal(size=(ball.n_cells, 3)))
    assert np.allclose(magnitude(drift).values, np.linalg.norm(drift.values, axis=1))


def test_bounded_drift_satisfies_every_criterion(square):
    a_field = SkewField(square, np.full((square.n_cells, 1), 2.0))
    report = classify_drift(a_field)
    assert set(report.criteria) == CRITERIA
    assert all(verdict == Verdict.HOLDS for verdict in report.criteria.values())
    assert report.growth_limit_L == 0.0


def test_bounded_drift_with_refined_sample(square):
    fine = build_mesh(square.domain, 2 * square.resolution)
    report = classify_drift(
        SkewField(square, np.ones((square.n_cells, 1))), refined=SkewField(fine, np.ones((fine.n_cells, 1))))
    assert all(verdict == Verdict.HOLDS for verdict in report.criteria.values())


def test_strong_singularity_fails_the_integrability_criteria(strong_singularity):
    report = classify_drift(strong_singularity)
    assert report.tail.kind == "power"
    for name in ("L2", "Ln", "Morrey_n", "weak_Ln", "exp_growth", "exp_summable", "eps_L2"):
        assert report.criteria[name] == Verdict.FAILS, name
    assert report.criteria["L2n/(n+2)"] == Verdict.HOLDS


def test_refinement_exposes_divergence(strong_singularity):
    fine_mesh = build_mesh(Domain("unit_disk"), 64)
    fine = ScalarField.from_function(fine_mesh, lambda x: np.linalg.norm(x, axis=1) ** -1.5, Layout.CELL)
    report = classify_drift(strong_singularity, refined=fine)
    # int r^-3 r dr grows like 1 / h
    assert report.criteria["L2"] == Verdict.FAILS


def test_report_serializes(square):
    report = classify_drift(ScalarField(square, np.ones(square.n_cells), Layout.CELL))
    payload = json.loads(json.dumps(to_jsonable(report.to_dict())))
    assert payload["criteria"]["BMO"] == "holds"
    assert payload["tail"]["kind"] == "bounded"
    lines = report.table().splitlines()
    assert lines[0].startswith("criterion")
    assert len(lines) == len(CRITERIA) + 1
