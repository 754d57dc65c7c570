"""
Uniqueness-criterion classification of a drift and the NormReport that
collects every norm diagnostic of its magnitude.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

from skewdrift.analysis.balls import BallEstimate, morrey_ball
from skewdrift.analysis.bmo import bmo_growth_ratio, bmo_profile
from skewdrift.analysis.norms import (
    epsilon_profile, exp_gamma_star, grand_lebesgue_norm, growth_limit,
    integral_power, lp_samples, weak_norm,
)
from skewdrift.analysis.tail import TailModel, field_tail
from skewdrift.config.settings import config
from skewdrift.fem.fields import ScalarField, SkewField, VectorField

logger = logging.getLogger("norms")

Drift = Union[SkewField, VectorField, ScalarField]

# ratio of the finest BMO depth to the middle one that counts as growth
BMO_GROWTH = 1.3
SLOPE_VANISHING = 0.1
SLOPE_FINITE = -0.05


class Verdict(str, Enum):
    HOLDS = "holds"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class NormReport:
    """Norm diagnostics of |A| (Frobenius) or |a| and the criterion verdicts."""

    lp_samples: List[Tuple[float, float]]
    growth_limit_L: float
    gamma_star: float
    bmo: float
    bmo_depth_profile: List[Tuple[int, float]]
    morrey_n: float
    morrey_ball: BallEstimate
    grand_lebesgue_n: float
    weak_n: float
    tail: TailModel
    epsilon_profiles: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    quantities: Dict[str, float] = field(default_factory=dict)
    criteria: Dict[str, Verdict] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "lp_samples": [list(s) for s in self.lp_samples],
            "growth_limit_L": self.growth_limit_L,
            "gamma_star": self.gamma_star,
            "bmo": self.bmo,
            "bmo_depth_profile": [list(s) for s in self.bmo_depth_profile],
            "morrey_n": self.morrey_n,
            "morrey_ball": self.morrey_ball.to_dict(),
            "grand_lebesgue_n": self.grand_lebesgue_n,
            "weak_n": self.weak_n,
            "tail": self.tail.to_dict(),
            "epsilon_profiles": self.epsilon_profiles,
            "quantities": self.quantities,
            "criteria": {name: verdict.value for name, verdict in self.criteria.items()},
        }

    def table(self) -> str:
        """Fixed-column table: criterion, value, verdict."""
        lines = [f"{'criterion':<20}{'value':>16}  verdict"]
        for name, verdict in self.criteria.items():
            value = self.quantities.get(name, math.nan)
            lines.append(f"{name:<20}{value:>16.6g}  {verdict.value}")
        return "\n".join(lines)


def magnitude(drift: Drift) -> ScalarField:
    """|A| (Frobenius) for skew fields, |a| for vector fields."""
    if isinstance(drift, SkewField):
        return drift.frobenius()
    if isinstance(drift, VectorField):
        return drift.norm()
    return drift.abs()


def _depth(m: ScalarField, requested: int) -> int:
    return max(0, min(requested, int(math.floor(math.log2(m.mesh.resolution / 2)))))


def _measure(
    m: ScalarField,
    p_max: float,
    depth: int,
    threads: int,
    refined: Optional[ScalarField] = None,
    gamma: Optional[float] = None,
) -> Dict[str, Any]:
    """All diagnostics of one magnitude sample; gamma* uses the refined sample when given."""
    n = m.mesh.dimension
    model = field_tail(m)
    out = {"model": model}
    out["profile"] = bmo_profile(m, _depth(m, depth))
    out["ball"] = morrey_ball(m, float(n), threads=threads)
    out["limit"] = growth_limit(m, p_max, model)
    out["gamma"] = exp_gamma_star(m, refined=refined, model=model, check=False) if gamma is None else gamma
    out["samples"] = lp_samples(m, p_max, model)
    out["eps"] = {
        "grand_Lebesgue_n": epsilon_profile(m, float(n), 1.0 / n, model=model),
        "eps_L2": epsilon_profile(m, 2.0, 1.0, model=model),
    }
    if n == 2:
        out["eps"]["sqrt_eps_L2"] = epsilon_profile(m, 2.0, 0.5, model=model)

    conj = 2.0 * n / (n + 2.0)
    q = {
        "L2": integral_power(m, 2.0),
        "Ln": integral_power(m, float(n)),
        "L2n/(n+2)": integral_power(m, conj),
        "Morrey_n": out["ball"].value,
        "exp_growth": out["limit"],
        "exp_summable": 1.0 / out["gamma"] if out["gamma"] > 0 else math.inf,
        "BMO": out["profile"][-1][1],
        "weak_Ln": weak_norm(m, float(n)) ** n,
    }
    for name, (samples, _) in out["eps"].items():
        base = float(n) if name == "grand_Lebesgue_n" else 2.0
        eps, value = samples[-1]
        q[name] = value ** (base - eps)
    out["quantities"] = q
    return out


def _fallback(name: str, coarse: Dict[str, Any], n: int) -> Verdict:
    """Verdict from a single mesh: tail class and fitted slopes."""
    model: TailModel = coarse["model"]
    if model.is_bounded:
        return Verdict.HOLDS
    exponents = {"L2": 2.0, "Ln": float(n), "L2n/(n+2)": 2.0 * n / (n + 2.0)}
    if name in exponents:
        return Verdict.HOLDS if model.moment_finite(exponents[name]) else Verdict.FAILS
    if name == "Morrey_n":
        if model.kind == "exponential" or model.exponent > n + 0.25:
            return Verdict.HOLDS
        return Verdict.FAILS if model.exponent < n - 0.25 else Verdict.INCONCLUSIVE
    if name == "weak_Ln":
        ok = model.kind == "exponential" or model.exponent >= n - 0.25
        return Verdict.HOLDS if ok else Verdict.FAILS
    if name == "exp_growth":
        return Verdict.HOLDS if math.isfinite(coarse["limit"]) else Verdict.FAILS
    if name == "exp_summable":
        return Verdict.HOLDS if coarse["gamma"] > 0 else Verdict.FAILS
    if name == "BMO":
        return Verdict.FAILS if bmo_growth_ratio(coarse["profile"]) >= BMO_GROWTH else Verdict.INCONCLUSIVE
    _, slope = coarse["eps"][name]
    threshold = SLOPE_FINITE if name == "grand_Lebesgue_n" else SLOPE_VANISHING
    return Verdict.HOLDS if slope > threshold else Verdict.FAILS


def _refined_verdict(coarse: float, fine: float, factor: float) -> Verdict:
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        return Verdict.FAILS
    if coarse <= 0.0:
        return Verdict.HOLDS if fine <= 0.0 else Verdict.INCONCLUSIVE
    return Verdict.FAILS if fine / coarse >= factor else Verdict.HOLDS


def classify_drift(
    drift: Drift,
    refined: Optional[Drift] = None,
    p_max: Optional[float] = None,
    bmo_max_depth: Optional[int] = None,
    threads: Optional[int] = None,
) -> NormReport:
    """
    Run every norm diagnostic on |drift| and classify the uniqueness criteria.

    Args:
        drift: Skew matrix field A, vector drift a or a scalar magnitude
        refined: The same drift sampled on the once-refined mesh; when
            given, a criterion fails when its quantity grows by the
            divergence factor under the refinement
        p_max: Largest L^p exponent sampled
        bmo_max_depth: Finest dyadic depth (capped by the resolution)
        threads: Worker threads for ball sums

    Returns:
        NormReport: Diagnostics and verdicts
    """
    p_max = config.get("analysis", "p_max") if p_max is None else p_max
    depth = config.get("analysis", "bmo_max_depth") if bmo_max_depth is None else bmo_max_depth
    threads = config.get("run", "threads") if threads is None else threads
    factor = config.get("analysis", "divergence_factor")

    m = magnitude(drift)
    n = m.mesh.dimension
    m_fine = magnitude(refined) if refined is not None else None
    coarse = _measure(m, p_max, depth, threads, refined=m_fine)
    fine = None
    if m_fine is not None:
        # gamma* is a property of the pair of samples
        fine = _measure(m_fine, p_max, depth, threads, gamma=coarse["gamma"])

    criteria: Dict[str, Verdict] = {}
    for name, value in coarse["quantities"].items():
        if fine is None:
            criteria[name] = _fallback(name, coarse, n)
        else:
            criteria[name] = _refined_verdict(value, fine["quantities"][name], factor)
    logger.info("Criteria: " + ", ".join(f"{k}={v.value}" for k, v in criteria.items()))

    return NormReport(
        lp_samples=coarse["samples"],
        growth_limit_L=coarse["limit"],
        gamma_star=coarse["gamma"],
        bmo=coarse["profile"][-1][1],
        bmo_depth_profile=coarse["profile"],
        morrey_n=coarse["ball"].value,
        morrey_ball=coarse["ball"],
        grand_lebesgue_n=grand_lebesgue_norm(m, n, refined=m_fine),
        weak_n=weak_norm(m, float(n)),
        tail=coarse["model"],
        epsilon_profiles={
            name: {"samples": [list(s) for s in samples], "slope": slope}
            for name, (samples, slope) in coarse["eps"].items()
        },
        quantities=coarse["quantities"],
        criteria=criteria,
    )
