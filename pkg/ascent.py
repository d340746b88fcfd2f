"""
Residual ascent: seeded multistart maximization over the unit sphere of a graded space.
Used to estimate perturbation constants that have no closed form. Every value it
returns was evaluated at a point of the sphere, so it never exceeds the true supremum.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from graded_spaces import GradedSpace, check_grade, weight_vector

logger = logging.getLogger(__name__)

MAX_STEPS = 500
REL_IMPROVEMENT = 1e-10
FD_STEP = 1e-6
MIN_STEP = 1e-12


@dataclass(frozen=True, eq=False)
class AscentResult:
    value: float
    maximizer: Optional[np.ndarray]
    evaluations: int
    restarts: int
    mode: str = "estimated"


class ResidualAscent:
    """Multistart normalized finite-difference ascent on {x : ||x||_s = 1}."""

    def __init__(self, objective: Callable[[np.ndarray], float], space: GradedSpace, grade: int,
                 restarts: int = 16, seed: int = 0, max_steps: int = MAX_STEPS):
        if restarts < 1:
            raise ValueError("restarts must be at least 1")
        self.objective = objective
        self.space = space
        self.grade = check_grade(space, grade)
        self.restarts = restarts
        self.seed = seed
        self.max_steps = max_steps
        self.evaluations = 0
        self._scale = weight_vector(space, self.grade)

    def _point(self, y: np.ndarray) -> np.ndarray:
        # y lives on the Euclidean sphere; y / w_s lies on the grade-s sphere
        return (y / np.linalg.norm(y)) / self._scale

    def _value(self, y: np.ndarray) -> float:
        self.evaluations += 1
        v = float(self.objective(self._point(y)))
        return -math.inf if math.isnan(v) else v

    def _gradient(self, y: np.ndarray) -> np.ndarray:
        grad = np.zeros_like(y)
        for i in range(y.size):
            e = np.zeros_like(y)
            e[i] = FD_STEP
            grad[i] = (self._value(y + e) - self._value(y - e)) / (2 * FD_STEP)
        return grad

    def _climb(self, y: np.ndarray):
        fy = self._value(y)
        step = 0.25
        for _ in range(self.max_steps):
            if not math.isfinite(fy):
                break
            grad = self._gradient(y)
            if not np.all(np.isfinite(grad)):
                break
            gnorm = float(np.linalg.norm(grad))
            if gnorm == 0.0:
                break
            direction = grad / gnorm
            improved = False
            while step >= MIN_STEP:
                candidate = y + step * direction
                candidate /= np.linalg.norm(candidate)
                fc = self._value(candidate)
                if fc > fy:
                    gain = (fc - fy) / max(abs(fy), np.finfo(float).tiny)
                    y, fy = candidate, fc
                    step = min(2 * step, 1.0)
                    improved = True
                    break
                step /= 2
            if not improved or gain < REL_IMPROVEMENT:
                break
        return y, fy

    def maximize(self) -> AscentResult:
        rng = np.random.default_rng(self.seed)
        best_value, best_y = -math.inf, None
        for r in range(self.restarts):
            y = rng.standard_normal(self.space.dim)
            while not np.any(y):
                y = rng.standard_normal(self.space.dim)
            y /= np.linalg.norm(y)
            y, fy = self._climb(y)
            logger.debug("ascent restart %d: %.12g", r, fy)
            if fy > best_value:
                best_value, best_y = fy, y
            if best_value == math.inf:
                break
        maximizer = self._point(best_y) if best_y is not None else None
        return AscentResult(best_value, maximizer, self.evaluations, self.restarts)


def residual_ascent(objective: Callable[[np.ndarray], float], space: GradedSpace, grade: int,
                    restarts: int = 16, seed: int = 0) -> AscentResult:
    """
    Estimate sup of ``objective`` over the grade-s unit sphere of ``space``.

    Args:
        objective: black-box real function of a vector of length space.dim
        space, grade: the sphere {x : ||x||_grade = 1}
        restarts: number of seeded random starts (>= 1)
        seed: seed of the start generator; results are deterministic given it

    Returns:
        AscentResult with the best value found (a lower estimate of the supremum)
    """
    return ResidualAscent(objective, space, grade, restarts, seed).maximize()
