"""
Lebesgue-type norm diagnostics: L^p norms and their growth limit,
exponential summability, weak-L^p, grand Lebesgue and the epsilon-limit
profiles.
"""

import logging
import math
from typing import List, Optional, Tuple

import numpy as np
from scipy.special import logsumexp

from skewdrift.analysis.tail import (
    TailModel, abs_samples, field_tail, log_moment,
)
from skewdrift.config.settings import config
from skewdrift.fem.fields import ScalarField
from skewdrift.utils.errors import ValidationError

logger = logging.getLogger("norms")


def lp_norm(f: ScalarField, p: float) -> float:
    """
    (int |f|^p)^(1/p) by quadrature.

    Args:
        f: The field
        p: Exponent, 1 <= p < inf

    Returns:
        float: The norm
    """
    if not p >= 1.0 or not math.isfinite(p):
        raise ValidationError(f"lp_norm needs a finite p >= 1, got {p}")
    values, weights = abs_samples(f)
    scale = float(values.max()) if values.size else 0.0
    if scale == 0.0:
        return 0.0
    # scaled to keep large p in range
    return scale * float(np.dot(weights, (values / scale) ** p)) ** (1.0 / p)


def _norm_from_log(log_m: float, p: float) -> float:
    if math.isfinite(log_m):
        return math.exp(log_m / p)
    return 0.0 if log_m < 0 else math.inf


def lp_samples(f: ScalarField, p_max: float, model: Optional[TailModel] = None) -> List[Tuple[float, float]]:
    """Tail-corrected (p, ||f||_p) for p in 8, 16, ..., p_max."""
    if p_max < 16:
        raise ValidationError(f"p_max must be at least 16, got {p_max}")
    model = model or field_tail(f)
    values, weights = abs_samples(f)
    samples = []
    p = 8.0
    while p <= p_max:
        log_m = log_moment(values, weights, p, model)
        samples.append((p, _norm_from_log(log_m, p)))
        p *= 2.0
    return samples


def growth_limit(f: ScalarField, p_max: Optional[float] = None, model: Optional[TailModel] = None) -> float:
    """
    Estimate L = lim p^-1 ||f||_p.

    Uses g(p) = ||f||_p / p on p = 8, 16, ..., p_max and the Richardson
    step 2 g(2p) - g(p) on the last pair.

    Returns:
        float: 0 for bounded f, inf for power-law tails, the clamped
            extrapolation otherwise
    """
    p_max = config.get("analysis", "p_max") if p_max is None else p_max
    model = model or field_tail(f)
    samples = lp_samples(f, p_max, model)
    logger.debug(f"L^p samples: {samples}")
    if model.is_bounded:
        return 0.0
    if model.kind == "power" or not all(math.isfinite(v) for _, v in samples):
        return math.inf
    (p1, n1), (p2, n2) = samples[-2], samples[-1]
    g1, g2 = n1 / p1, n2 / p2
    return max(2.0 * g2 - g1, 0.0)


def _log_exp_integral(values: np.ndarray, weights: np.ndarray, gamma: float) -> float:
    """log int exp(gamma |f|) from quadrature samples."""
    return float(logsumexp(gamma * values, b=weights))


def exp_gamma_star(
    f: ScalarField,
    refined: Optional[ScalarField] = None,
    model: Optional[TailModel] = None,
    check: bool = True,
) -> float:
    """
    Largest gamma for which int exp(gamma |f|) is stable under refinement.

    With a refined sample of the same field, int exp(gamma |f|) is evaluated
    by quadrature on both meshes and gamma is bisected for the largest value
    whose fine-to-coarse ratio stays within the ratio of the two sups. That
    threshold is the borderline growth of an integral diverging like the
    logarithm of the resolution, which is how the sup itself grows for a
    logarithmic singularity. Without a refined sample the fitted tail rate
    stands in for gamma*.

    Args:
        f: The field
        refined: The same field on a finer mesh
        model: Precomputed tail model of f
        check: Cross-check against 1 / (e L) and warn on disagreement

    Returns:
        float: gamma*, inf for bounded f and 0 for power-law tails
    """
    model = model or field_tail(f)
    if model.is_bounded:
        return math.inf
    if model.kind == "power":
        return 0.0

    if refined is None:
        gamma = model.rate
    else:
        coarse_v, coarse_w = abs_samples(f)
        fine_v, fine_w = abs_samples(refined)
        coarse_sup = float(coarse_v.max()) if coarse_v.size else 0.0
        fine_sup = float(fine_v.max()) if fine_v.size else 0.0
        if coarse_sup <= 0.0 or fine_sup <= coarse_sup * (1.0 + 1e-12):
            return math.inf
        threshold = math.log(fine_sup / coarse_sup)

        def stable(gamma: float) -> bool:
            growth = _log_exp_integral(fine_v, fine_w, gamma) - _log_exp_integral(coarse_v, coarse_w, gamma)
            return growth <= threshold

        lo, hi = 0.0, 1.0
        while stable(hi) and hi < 1e6:
            lo, hi = hi, 2.0 * hi
        if stable(hi):
            return math.inf
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if stable(mid):
                lo = mid
            else:
                hi = mid
        gamma = 0.5 * (lo + hi)
        logger.debug(f"exp summability: threshold {threshold:.4f}, gamma* {gamma:.4f}")

    if check:
        limit = growth_limit(f, model=model)
        if 0.0 < limit < math.inf:
            product = gamma * math.e * limit
            if abs(product - 1.0) > 0.2:
                logger.warning(f"gamma* e L = {product:.3f} departs from 1 by more than 20%")
    return gamma


def weak_norm(f: ScalarField, p: float) -> float:
    """sup_t t |{|f| > t}|^(1/p)."""
    if p < 1.0:
        raise ValidationError(f"weak_norm needs p >= 1, got {p}")
    values, weights = abs_samples(f)
    order = np.argsort(-values, kind="stable")
    measure = np.cumsum(weights[order])
    return float((values[order] * measure ** (1.0 / p)).max()) if values.size else 0.0


def _grand_sup(f: ScalarField, n: int) -> float:
    measure = f.mesh.measure
    delta = (n - 1) / 64.0
    best = 0.0
    for s in 1.0 + delta * np.arange(64):
        value = ((n - s) / measure) ** (1.0 / s) * lp_norm(f, s)
        best = max(best, value)
    return best


def grand_lebesgue_norm(f: ScalarField, n: Optional[int] = None, refined: Optional[ScalarField] = None) -> float:
    """
    sup over 1 <= s < n of ((n - s) |Omega|^-1 int |f|^s)^(1/s), sampled on
    s = 1, 1 + delta, ..., n - delta with delta = 2^-6 (n - 1).

    With a refined sample the value is inf once the refined sup exceeds the
    coarse one by more than analysis.divergence_factor.
    """
    n = f.mesh.dimension if n is None else n
    if n != f.mesh.dimension:
        raise ValidationError(f"grand Lebesgue exponent {n} differs from the dimension {f.mesh.dimension}")
    coarse = _grand_sup(f, n)
    if refined is None:
        return coarse
    if refined.mesh.dimension != n:
        raise ValidationError("refined sample lives in another dimension")
    fine = _grand_sup(refined, n)
    factor = config.get("analysis", "divergence_factor")
    if fine > factor * coarse:
        logger.debug(f"grand Lebesgue norm grows {coarse:.4g} -> {fine:.4g} under refinement")
        return math.inf
    return fine


def epsilon_profile(
    f: ScalarField, base: float, theta: float, depths: Tuple[int, ...] = tuple(range(2, 9)),
    model: Optional[TailModel] = None,
) -> Tuple[List[Tuple[float, float]], float]:
    """
    Sample eps^theta ||f||_{base - eps} on eps = 2^-k.

    Returns:
        Tuple of ((eps, value) samples, fitted slope of log value against
        log eps). A positive slope means the quantity vanishes as eps -> 0;
        the slope is -inf when some norm is infinite.
    """
    model = model or field_tail(f)
    values, weights = abs_samples(f)
    samples = []
    for k in depths:
        eps = 0.5 ** k
        s = base - eps
        log_m = log_moment(values, weights, s, model)
        value = eps ** theta * _norm_from_log(log_m, s)
        samples.append((eps, value))
    vals = np.array([v for _, v in samples])
    if not np.all(np.isfinite(vals)):
        return samples, -math.inf
    if np.all(vals == 0.0):
        return samples, math.inf
    eps = np.array([e for e, _ in samples])
    slope = float(np.polyfit(np.log(eps), np.log(np.maximum(vals, 1e-300)), 1)[0])
    return samples, slope


def integral_power(f: ScalarField, p: float) -> float:
    """int |f|^p by plain quadrature."""
    return lp_norm(f, p) ** p
