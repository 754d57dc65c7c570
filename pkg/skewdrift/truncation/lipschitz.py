"""
Lipschitz truncation u_lambda of a discrete field and the replay of the
Caccioppoli chain int_{g<=lambda} |grad u|^2 <= C lambda int_{g>lambda} (|A| + 1) |grad u|.

The good set is F(lambda) = {g <= lambda and l <= C lambda} plus the boundary,
with g = M|grad u| and l the vertex Lipschitz quotient. u is C lambda
Lipschitz on F(lambda), and the symmetric McShane extension keeps it there.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid
from scipy.spatial.distance import cdist

from skewdrift.analysis.balls import maximal_values
from skewdrift.config.settings import config
from skewdrift.fem.fields import ScalarField, SkewField, gradient, h1_seminorm, same_mesh
from skewdrift.fem.mesh import Mesh
from skewdrift.utils.errors import ValidationError

logger = logging.getLogger("truncation")

CHUNK = 512
EPSILONS = (0.2, 0.1, 0.05)


def _map_chunks(func: Callable[[np.ndarray], np.ndarray], size: int, threads: int) -> np.ndarray:
    chunks = [np.arange(i, min(i + CHUNK, size)) for i in range(0, size, CHUNK)]
    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(func, chunks))
    else:
        parts = [func(chunk) for chunk in chunks]
    return np.concatenate(parts) if parts else np.empty(0)


def vertex_lipschitz(u: ScalarField, threads: Optional[int] = None) -> np.ndarray:
    """l(v) = max over all vertices y != v of |u(v) - u(y)| / |v - y|."""
    if not u.is_vertex:
        raise ValidationError("Lipschitz quotients need a vertex-layout field")
    threads = config.get("run", "threads") if threads is None else threads
    x, values = u.mesh.vertices, u.values

    def evaluate(chunk: np.ndarray) -> np.ndarray:
        dist = cdist(x[chunk], x)
        jump = np.abs(values[chunk, None] - values[None, :])
        quotient = np.divide(jump, dist, out=np.zeros_like(jump), where=dist > 0)
        return quotient.max(axis=1)

    return _map_chunks(evaluate, u.mesh.n_vertices, threads)


def lipschitz_constant(u: ScalarField, threads: Optional[int] = None) -> float:
    """Brute-force max over vertex pairs of |u(x) - u(y)| / |x - y|."""
    return float(vertex_lipschitz(u, threads).max())


def gradient_maximal(u: ScalarField, threads: Optional[int] = None) -> np.ndarray:
    """g = M|grad u| at the vertices."""
    return maximal_values(gradient(u).norm(), threads=threads)


@dataclass(frozen=True, eq=False)
class TruncationData:
    """Lambda-independent ingredients of the truncation of one field."""

    u: ScalarField
    g: np.ndarray
    quotient: np.ndarray

    @classmethod
    def of(cls, u: ScalarField, threads: Optional[int] = None) -> "TruncationData":
        if not u.is_vertex:
            raise ValidationError("Lipschitz truncation needs a vertex-layout field")
        return cls(u, gradient_maximal(u, threads), vertex_lipschitz(u, threads))

    def good_set(self, level: float, constant: float) -> np.ndarray:
        """Boolean vertex mask of F(lambda)."""
        good = (self.g <= level) & (self.quotient <= constant * level)
        return good | self.u.mesh.boundary


def _check_level(level: float, constant: float) -> None:
    if not level > 0:
        raise ValidationError(f"lambda must be positive, got {level}")
    if not constant > 0:
        raise ValidationError(f"Lipschitz constant C must be positive, got {constant}")


def _extend(u: ScalarField, good: np.ndarray, slope: float, threads: int) -> ScalarField:
    """Symmetric McShane extension of u restricted to the good vertices."""
    x = u.mesh.vertices
    anchors = x[good]
    anchor_values = u.values[good]

    def evaluate(chunk: np.ndarray) -> np.ndarray:
        cone = slope * cdist(x[chunk], anchors)
        upper = (anchor_values[None, :] + cone).min(axis=1)
        lower = (anchor_values[None, :] - cone).max(axis=1)
        return 0.5 * (upper + lower)

    values = _map_chunks(evaluate, u.mesh.n_vertices, threads)
    values[good] = u.values[good]
    return u.with_values(values)


def lipschitz_truncation(
    u: ScalarField,
    level: float,
    constant: Optional[float] = None,
    data: Optional[TruncationData] = None,
    threads: Optional[int] = None,
) -> ScalarField:
    """
    Lipschitz truncation u_lambda.

    Args:
        u: Vertex field vanishing on the boundary
        level: lambda > 0
        constant: C > 0 in the Lipschitz bound C lambda
        data: Precomputed g and Lipschitz quotients of u
        threads: Worker threads over evaluation vertices

    Returns:
        ScalarField: u_lambda, equal to u on F(lambda) and C lambda Lipschitz
    """
    constant = config.get("truncation", "lipschitz_c") if constant is None else constant
    threads = config.get("run", "threads") if threads is None else threads
    _check_level(level, constant)
    data = data or TruncationData.of(u, threads)
    good = data.good_set(level, constant)
    if good.all():
        return u
    logger.debug(f"lambda={level:g}: {int((~good).sum())} vertices outside F")
    return _extend(u, good, constant * level, threads)


def chebyshev_check(g: np.ndarray, mesh: Mesh, level: float) -> Tuple[float, float]:
    """
    |{g > lambda}| and ||g||_2^2 / lambda^2 on the lumped vertex measure.

    Returns:
        Tuple of (measure, bound); measure <= bound always holds
    """
    weights = mesh.vertex_measure
    measure = float(weights[g > level].sum())
    return measure, float((weights * g ** 2).sum()) / level ** 2


def boundary_distance_violations(data: TruncationData, good: np.ndarray, constant: float) -> int:
    """Vertices of F(lambda) with |u(v)| > C dist(v, boundary) g(v)."""
    mesh = data.u.mesh
    dist = mesh.domain.boundary_distance(mesh.vertices)
    bad = np.abs(data.u.values) > constant * dist * data.g * (1.0 + 1e-12) + 1e-14
    return int((bad & good & ~mesh.boundary).sum())


@dataclass(frozen=True)
class ReplayRow:
    """One lambda of the Caccioppoli replay."""

    level: float
    lhs: float
    rhs: float
    residual: float
    lipschitz_factor: float
    bad_measure: float
    chebyshev_bound: float
    increment: float
    boundary_violations: int
    holds: bool


@dataclass(frozen=True)
class ReplayTable:
    """Rows per lambda plus the epsilon-weighted aggregates."""

    constant: float
    energy: float
    rows: List[ReplayRow]
    aggregates: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return all(row.holds for row in self.rows)

    def row_dicts(self) -> List[Dict[str, Any]]:
        return [asdict(row) for row in self.rows]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "constant": self.constant,
            "energy": self.energy,
            "holds": self.holds,
            "rows": self.row_dicts(),
            "aggregates": self.aggregates,
        }


def _aggregate(levels: np.ndarray, values: np.ndarray, epsilon: float) -> float:
    """int eps lambda^(-1-eps) X(lambda) d lambda by the trapezoid rule in log lambda."""
    if levels.size < 2:
        return float(epsilon * levels[0] ** -epsilon * values[0]) if levels.size else 0.0
    return float(trapezoid(epsilon * levels ** -epsilon * values, np.log(levels)))


def caccioppoli_replay(
    u: ScalarField,
    a_field: SkewField,
    levels: Sequence[float],
    constant: Optional[float] = None,
    slack: Optional[float] = None,
    threads: Optional[int] = None,
) -> ReplayTable:
    """
    Replay the truncation estimate for a discrete solution u.

    With G(lambda) the cells whose vertices all lie in F(lambda), testing the
    equation with u_lambda gives

        int_G |grad u|^2 = R(u_lambda) - int_{Omega\\G} (I + A) grad u . grad u_lambda

    where R(u_lambda) = int (I + A) grad u . grad u_lambda is the residual,
    (f, u_lambda) for a solution with right-hand side f. A row holds when
    LHS <= |R| + kappa RHS (1 + slack), kappa = max |grad u_lambda| / (C lambda)
    off G.

    Args:
        u: Vertex field vanishing on the boundary
        a_field: Bounded skew field A on the same mesh
        levels: Positive lambdas
        constant: C of the good set
        slack: Relative quadrature slack
        threads: Worker threads

    Returns:
        ReplayTable: One row per lambda in increasing order
    """
    mesh = same_mesh(u, a_field)
    constant = config.get("truncation", "lipschitz_c") if constant is None else constant
    slack = config.get("truncation", "slack") if slack is None else slack
    threads = config.get("run", "threads") if threads is None else threads
    check_boundary = config.get("truncation", "check_boundary_distance")
    levels = sorted(float(level) for level in levels)
    if not levels:
        raise ValidationError("caccioppoli_replay needs at least one lambda")
    for level in levels:
        _check_level(level, constant)

    data = TruncationData.of(u, threads)
    grad_u = gradient(u).values
    grad_len = np.linalg.norm(grad_u, axis=1)
    volumes = mesh.cell_volumes
    weight = mesh.cell_volumes * (a_field.frobenius().values + 1.0) * grad_len
    # (I + A) grad u per cell
    flux = grad_u + np.einsum("cij,cj->ci", a_field.matrices(), grad_u)
    energy = float((volumes * grad_len ** 2).sum())

    rows = []
    for level in levels:
        good = data.good_set(level, constant)
        truncated = lipschitz_truncation(u, level, constant, data, threads)
        grad_t = gradient(truncated).values
        inside = good[mesh.cells].all(axis=1)

        lhs = float((volumes[inside] * grad_len[inside] ** 2).sum())
        rhs = constant * level * float(weight[~inside].sum())
        residual = float((volumes * np.einsum("ci,ci->c", flux, grad_t)).sum())
        off = np.linalg.norm(grad_t[~inside], axis=1)
        kappa = float(off.max()) / (constant * level) if off.size else 0.0
        measure, bound = chebyshev_check(data.g, mesh, level)
        violations = boundary_distance_violations(data, good, constant) if check_boundary else 0
        if violations:
            logger.warning(f"lambda={level:g}: {violations} vertices violate |u| <= C dist g")
        holds = lhs <= (abs(residual) + kappa * rhs) * (1.0 + slack) + 1e-12 * max(energy, 1.0)
        rows.append(ReplayRow(
            level=level,
            lhs=lhs,
            rhs=rhs,
            residual=residual,
            lipschitz_factor=kappa,
            bad_measure=measure,
            chebyshev_bound=bound,
            increment=h1_seminorm(truncated - u),
            boundary_violations=violations,
            holds=bool(holds),
        ))
        logger.debug(f"lambda={level:g}: LHS={lhs:.6g} RHS={rhs:.6g} residual={residual:.3e} holds={holds}")

    grid = np.array(levels)
    aggregates = []
    for epsilon in EPSILONS:
        lhs = _aggregate(grid, np.array([row.lhs for row in rows]), epsilon)
        rhs = _aggregate(grid, np.array([row.rhs * row.lipschitz_factor for row in rows]), epsilon)
        residual = _aggregate(grid, np.array([abs(row.residual) for row in rows]), epsilon)
        aggregates.append({
            "epsilon": epsilon,
            "lhs": lhs,
            "rhs": rhs,
            "residual": residual,
            "holds": bool(lhs <= (residual + rhs) * (1.0 + slack) + 1e-12 * max(energy, 1.0)),
        })

    table = ReplayTable(constant=constant, energy=energy, rows=rows, aggregates=aggregates)
    logger.info(f"Caccioppoli replay over {len(rows)} lambdas: holds={table.holds}")
    return table


def truncation_increments(
    u: ScalarField, levels: Sequence[float], constant: Optional[float] = None, threads: Optional[int] = None
) -> List[Tuple[float, float]]:
    """(lambda, ||grad(u_lambda - u)||_2) along the given lambdas."""
    constant = config.get("truncation", "lipschitz_c") if constant is None else constant
    data = TruncationData.of(u, threads)
    return [
        (float(level), h1_seminorm(lipschitz_truncation(u, level, constant, data, threads) - u))
        for level in sorted(levels)
    ]
