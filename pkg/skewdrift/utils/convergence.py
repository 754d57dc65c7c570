"""
Convergence tracking for approximation-solution runs.
"""

import math
from typing import Any, Dict, List, Optional


class ConvergenceTracker:
    """Track truncation levels, increments, Krylov residuals and a-priori checks."""

    def __init__(self):
        """Initialize empty histories."""
        self.reset()

    def update(
        self,
        level: float,
        gradient_norm: float,
        residuals: List[float],
        increment: Optional[float] = None,
        apriori_bound: Optional[float] = None,
    ) -> None:
        """
        Record one truncation level.

        Args:
            level: Truncation level N
            gradient_norm: ||grad u_N||_2
            residuals: Relative residual history of the Krylov solve
            increment: ||grad(u_N - u_prev)||_2, None at the first level
            apriori_bound: The bound ||grad u_N||_2 is checked against
        """
        self.levels.append(float(level))
        self.gradient_norms.append(float(gradient_norm))
        self.linear_residuals.append([float(r) for r in residuals])
        if increment is not None:
            self.increments.append(float(increment))
        if apriori_bound is not None:
            self.apriori_bounds.append(float(apriori_bound))
            if gradient_norm > apriori_bound * (1.0 + 1e-8):
                self.apriori_violations += 1
        self.solve_count += 1

    @property
    def final_residual(self) -> float:
        if not self.linear_residuals or not self.linear_residuals[-1]:
            return math.nan
        return self.linear_residuals[-1][-1]

    def get_summary(self) -> str:
        """
        Return a formatted one-line summary.

        Returns:
            str: Formatted summary
        """
        last = self.increments[-1] if self.increments else math.nan
        return (
            f"LEVELS {self.solve_count}    LAST N {self.levels[-1] if self.levels else math.nan:g}    "
            f"LAST INCREMENT {last:.3e}    A-PRIORI VIOLATIONS {self.apriori_violations}"
        )

    def get_history_dict(self) -> Dict[str, Any]:
        """
        Return the histories as a dictionary.

        Returns:
            Dict[str, Any]: Histories keyed by name
        """
        return {
            "truncation_levels": list(self.levels),
            "increments": list(self.increments),
            "gradient_norms": list(self.gradient_norms),
            "linear_residuals": [list(r) for r in self.linear_residuals],
            "apriori_bounds": list(self.apriori_bounds),
            "apriori_violations": self.apriori_violations,
            "solve_count": self.solve_count,
        }

    def reset(self) -> None:
        """Reset all histories."""
        self.levels: List[float] = []
        self.increments: List[float] = []
        self.gradient_norms: List[float] = []
        self.linear_residuals: List[List[float]] = []
        self.apriori_bounds: List[float] = []
        self.apriori_violations = 0
        self.solve_count = 0
