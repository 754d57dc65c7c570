"""
Distribution-tail model of |f| and tail-corrected log-moments.

The layer-cake distribution mu(t) = |{|f| > t}| is sampled at the measure
levels |Omega| 2^-k that the mesh still resolves. The spacing of the levels
t_k over the finest part of that window decides the tail class:

* increments that shrink: bounded,
* constant increments d: exponential, mu(t) ~ exp(-kappa t), kappa = log 2 / d,
* geometrically growing increments: power law, mu(t) ~ t^-s.

Moments beyond the last resolved level are closed analytically from the
class, so p-th moments stay meaningful for large p on a fixed mesh.
"""

import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np
from scipy.special import gammaincc, gammaln, logsumexp

from skewdrift.fem.fields import ScalarField
from skewdrift.fem.quadrature import quadrature_points

logger = logging.getLogger("norms")

LOG2 = math.log(2.0)
# slope of log(increment) per halving that separates the three classes
CLASS_SLOPE = 0.15 * LOG2
MIN_LEVELS = 4


def abs_samples(f: ScalarField) -> Tuple[np.ndarray, np.ndarray]:
    """|f| at quadrature points with their weights (flattened)."""
    mesh = f.mesh
    if not f.is_vertex:
        return np.abs(f.values), mesh.cell_volumes.copy()
    _, weights, bary = quadrature_points(mesh)
    return np.abs(f.at_quadrature(bary)).reshape(-1), weights.reshape(-1)


@dataclass(frozen=True)
class TailModel:
    """Fitted tail class of a distribution function."""

    kind: str
    t_star: float = 0.0
    m_star: float = 0.0
    rate: float = math.inf
    exponent: float = math.inf
    levels: Tuple[float, ...] = ()

    @property
    def is_bounded(self) -> bool:
        return self.kind == "bounded"

    def moment_finite(self, p: float) -> bool:
        """Whether int |f|^p is finite under the fitted tail."""
        return self.kind != "power" or p < self.exponent

    def to_dict(self):
        return {
            "kind": self.kind,
            "rate": self.rate,
            "exponent": self.exponent,
            "t_star": self.t_star,
            "m_star": self.m_star,
        }


def fit_tail(values: np.ndarray, weights: np.ndarray, min_measure: float) -> TailModel:
    """
    Fit the tail class of |f| from weighted samples.

    Args:
        values: Nonnegative sample values
        weights: Sample measures
        min_measure: Smallest level set measure considered resolved

    Returns:
        TailModel: The fitted model
    """
    total = float(weights.sum())
    order = np.argsort(-values, kind="stable")
    v = values[order]
    cum = np.cumsum(weights[order])
    top = int(math.floor(math.log2(total / min_measure))) if min_measure > 0 else 0
    if top < MIN_LEVELS or v[0] <= 0.0:
        return TailModel("bounded", t_star=float(v[0]))

    k = np.arange(1, top + 1)
    idx = np.minimum(np.searchsorted(cum, total * 0.5 ** k), v.size - 1)
    t = v[idx]
    window = k >= max(top // 2, 1)
    kw, tw = k[window], t[window]
    d = np.diff(tw)
    t_star = float(t[-1])
    m_star = float(weights[values > t_star].sum())
    scale = max(float(v[0]), 1e-300)

    positive = d > 1e-12 * scale
    if d.mean() <= 1e-12 * scale or positive.sum() < 2:
        return TailModel("bounded", t_star=t_star, m_star=m_star, levels=tuple(t.tolist()))
    sigma = np.polyfit(kw[1:][positive], np.log(d[positive]), 1)[0]

    if sigma < -CLASS_SLOPE:
        return TailModel("bounded", t_star=t_star, m_star=m_star, levels=tuple(t.tolist()))
    if sigma > CLASS_SLOPE and np.all(tw > 0):
        slope = np.polyfit(kw, np.log(tw), 1)[0]
        exponent = LOG2 / slope if slope > 0 else math.inf
        logger.debug(f"Power tail: exponent {exponent:.4g}")
        return TailModel("power", t_star=t_star, m_star=m_star, exponent=float(exponent),
                         levels=tuple(t.tolist()))
    rate = LOG2 / float(d.mean())
    logger.debug(f"Exponential tail: rate {rate:.4g}")
    return TailModel("exponential", t_star=t_star, m_star=m_star, rate=rate, levels=tuple(t.tolist()))


def field_tail(f: ScalarField, resolve_cells: float = 16.0) -> TailModel:
    """Tail model of |f| with level sets resolved down to a few cells."""
    values, weights = abs_samples(f)
    return fit_tail(values, weights, resolve_cells * float(f.mesh.cell_volumes.max()))


def log_moment(values: np.ndarray, weights: np.ndarray, p: float, model: TailModel) -> float:
    """
    log int |f|^p, with the part above the last resolved level replaced by
    the fitted tail.

    Returns:
        float: The log-moment (+inf when the tail makes it infinite)
    """
    with np.errstate(divide="ignore"):
        logs = np.log(values)
    if model.kind == "bounded" or model.m_star <= 0.0:
        return float(logsumexp(p * logs, b=weights))

    t_star, m_star = model.t_star, model.m_star
    below = values <= t_star
    parts = [
        float(logsumexp(p * logs[below], b=weights[below])),
        p * math.log(t_star) + math.log(m_star),
    ]
    if model.kind == "exponential":
        kappa = model.rate
        upper = gammaincc(p, kappa * t_star)
        if upper > 0.0:
            parts.append(math.log(p) + math.log(m_star) + kappa * t_star + gammaln(p)
                         + math.log(upper) - p * math.log(kappa))
        else:
            parts.append(math.log(p) + math.log(m_star) + (p - 1.0) * math.log(t_star) - math.log(kappa))
    else:
        if not model.moment_finite(p):
            return math.inf
        parts.append(math.log(p) + math.log(m_star) + p * math.log(t_star) - math.log(model.exponent - p))
    return float(logsumexp(parts))


def tail_norm(f: ScalarField, p: float, model: TailModel = None) -> float:
    """Tail-corrected ||f||_p."""
    values, weights = abs_samples(f)
    if model is None:
        model = field_tail(f)
    log_m = log_moment(values, weights, p, model)
    return math.exp(log_m / p) if math.isfinite(log_m) else (0.0 if log_m < 0 else math.inf)
