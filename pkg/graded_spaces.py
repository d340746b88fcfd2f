"""
Graded weighted-norm spaces for frameguard.
A finite-dimensional stand-in for a ladder of nested Banach spaces X_0 ⊇ X_1 ⊇ ...:
one vector space carrying a monotone family of diagonal-weighted Euclidean norms.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from scipy.linalg import svdvals

from errors import DimensionMismatch, GradingViolation, InvalidGrade, InvalidSpec, InvalidWeights

logger = logging.getLogger(__name__)

WEIGHT_FLOOR = 1e-12


@dataclass(frozen=True, eq=False)
class GradedSpace:
    """Vector space of dimension ``dim`` with one weight vector per grade.

    ``weights[s, i]`` is w_s(i); the grade-s norm is sqrt(sum (w_s(i) f_i)^2).
    The weight array is read-only after construction.
    """
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise InvalidWeights(f"weight ladder must be a non-empty grades x dim array, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidWeights("weight ladder contains non-finite entries")
        if np.any(w < WEIGHT_FLOOR):
            s, i = np.argwhere(w < WEIGHT_FLOOR)[0]
            raise InvalidWeights(f"weight w_{s}({i + 1}) = {w[s, i]!r} is below the floor {WEIGHT_FLOOR}")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def s_max(self) -> int:
        return self.weights.shape[0] - 1

    @property
    def grades(self) -> range:
        return range(self.s_max + 1)

    @classmethod
    def unit(cls, dim: int, s_max: int = 0) -> "GradedSpace":
        """All weights one: every grade carries the Euclidean norm."""
        return cls(np.ones((s_max + 1, dim)))

    @classmethod
    def polynomial(cls, dim: int, s_max: int, exponent_step: int = 1) -> "GradedSpace":
        """Sobolev-like ladder w_s(i) = (i+1)^(s * exponent_step), i 1-based."""
        if exponent_step < 0:
            raise InvalidSpec("exponent_step must be nonnegative")
        base = np.arange(1, dim + 1, dtype=float) + 1.0
        exponents = exponent_step * np.arange(s_max + 1, dtype=float)
        return cls(base[None, :] ** exponents[:, None])

    @classmethod
    def from_ladder(cls, weights: Sequence[Sequence[float]]) -> "GradedSpace":
        return cls(np.asarray(weights, dtype=float))

    @classmethod
    def from_json(cls, data: Dict, dim: Optional[int] = None, s_max: Optional[int] = None) -> "GradedSpace":
        """Build from ``{"weights": [[...], ...]}`` or a generator spec.

        Generator specs (``{"kind": "polynomial", "exponent_step": 1}`` or
        ``{"kind": "unit"}``) need ``dim`` and ``s_max``.
        """
        if "weights" in data:
            return cls.from_ladder(data["weights"])
        kind = data.get("kind")
        if dim is None or s_max is None:
            raise InvalidSpec(f"generator spec {data!r} needs dim and s_max")
        if kind == "unit":
            return cls.unit(dim, s_max)
        if kind == "polynomial":
            return cls.polynomial(dim, s_max, int(data.get("exponent_step", 1)))
        raise InvalidSpec(f"unknown weight generator kind {kind!r}")

    def to_json(self) -> Dict[str, List[List[float]]]:
        return {"weights": self.weights.tolist()}


@dataclass(frozen=True)
class GradedOperatorNorms:
    """Per-grade operator bounds K_s of an F-bounded operator."""
    values: tuple

    def __getitem__(self, s: int) -> float:
        return self.values[s]

    def __len__(self) -> int:
        return len(self.values)

    def max(self) -> float:
        return max(self.values)


def check_grade(space: GradedSpace, s: int) -> int:
    if not isinstance(s, (int, np.integer)) or s < 0 or s > space.s_max:
        raise InvalidGrade(f"grade {s!r} outside [0, {space.s_max}]")
    return int(s)


def _vector(space: GradedSpace, f) -> np.ndarray:
    v = np.asarray(f, dtype=float)
    if v.ndim != 1 or v.shape[0] != space.dim:
        raise DimensionMismatch(f"expected a vector of length {space.dim}, got shape {v.shape}")
    return v


def weight_vector(space: GradedSpace, s: int, dual: bool = False) -> np.ndarray:
    """Diagonal of D_s: w_s for the primal norm, 1/w_s for the dual norm."""
    w = space.weights[check_grade(space, s)]
    return 1.0 / w if dual else w


def norm(space: GradedSpace, f, s: int) -> float:
    """Grade-s norm sqrt(sum (w_s(i) f_i)^2)."""
    v = _vector(space, f)
    return float(np.linalg.norm(weight_vector(space, s) * v))


def dual_norm(space: GradedSpace, g, s: int) -> float:
    """Grade-s dual norm sqrt(sum (g_i / w_s(i))^2)."""
    v = _vector(space, g)
    return float(np.linalg.norm(weight_vector(space, s, dual=True) * v))


def norm_batch(space: GradedSpace, F: np.ndarray, s: int, dual: bool = False) -> np.ndarray:
    """Norms of the rows of F, all at grade s."""
    F = np.atleast_2d(np.asarray(F, dtype=float))
    if F.shape[1] != space.dim:
        raise DimensionMismatch(f"expected rows of length {space.dim}, got shape {F.shape}")
    return np.linalg.norm(F * weight_vector(space, s, dual)[None, :], axis=1)


def norming_functional(space: GradedSpace, x, s: int) -> np.ndarray:
    """The g with g(x) = ||x||_s and dual_norm(g, s) = 1."""
    v = _vector(space, x)
    nx = norm(space, v, s)
    if nx == 0.0:
        raise ValueError("zero vector has no norming functional")
    return weight_vector(space, s) ** 2 * v / nx


def validate_grading(space: GradedSpace) -> None:
    """Raise GradingViolation at the first (grade, index) where w_s(i) < w_{s-1}(i)."""
    for s in range(1, space.s_max + 1):
        drops = np.nonzero(space.weights[s] < space.weights[s - 1])[0]
        if drops.size:
            raise GradingViolation(s, int(drops[0]) + 1)


def is_graded(space: GradedSpace) -> bool:
    try:
        validate_grading(space)
    except GradingViolation:
        return False
    return True


def normalized_matrix(M, from_space: GradedSpace, s_from: int, to_space: GradedSpace, s_to: int,
                      dual_from: bool = False, dual_to: bool = False) -> np.ndarray:
    """D_to · M · D_from^-1, whose Euclidean geometry is the graded one."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.shape != (to_space.dim, from_space.dim):
        raise DimensionMismatch(
            f"operator of shape {M.shape} does not map dim {from_space.dim} to dim {to_space.dim}"
        )
    left = weight_vector(to_space, s_to, dual_to)
    right = weight_vector(from_space, s_from, dual_from)
    return left[:, None] * M / right[None, :]


def singular_values(M, from_space: GradedSpace, s_from: int, to_space: GradedSpace, s_to: int,
                    dual_from: bool = False, dual_to: bool = False) -> np.ndarray:
    """Singular values of the weight-normalized matrix, descending."""
    return svdvals(normalized_matrix(M, from_space, s_from, to_space, s_to, dual_from, dual_to))


def op_norm(M, from_space: GradedSpace, s_from: int, to_space: GradedSpace, s_to: int,
            dual_from: bool = False, dual_to: bool = False) -> float:
    """
    Operator norm of M between graded spaces.

    Args:
        M: matrix mapping from_space.dim -> to_space.dim
        from_space, s_from: domain space and grade
        to_space, s_to: codomain space and grade
        dual_from, dual_to: use the dual norm on that side

    Returns:
        sup_{f != 0} ||M f|| / ||f||, the largest singular value of D_to M D_from^-1
    """
    sv = singular_values(M, from_space, s_from, to_space, s_to, dual_from, dual_to)
    return float(sv[0]) if sv.size else 0.0
