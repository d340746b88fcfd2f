"""
Frame families over graded spaces.
Analysis and synthesis, optimal per-grade frame bounds, reconstruction operators,
dual families, the coefficient projection and the norming-functional frame.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import pinv

from errors import DimensionMismatch, ExpansionFailure, FrameDeficient, NotLeftInverse, ZeroSample
from graded_spaces import (
    GradedOperatorNorms,
    GradedSpace,
    check_grade,
    norm_batch,
    norming_functional,
    op_norm,
    singular_values,
)

logger = logging.getLogger(__name__)

RANK_TOL = 1e-12
IDENTITY_TOL = 1e-10
NORM_MATCH_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class FrameFamily:
    """Analysis matrix G (row i is the functional g_i) with its graded domain and coefficient space."""
    G: np.ndarray
    X: GradedSpace
    Theta: GradedSpace

    def __post_init__(self):
        G = np.array(np.atleast_2d(self.G), dtype=float)
        if G.ndim != 2 or G.shape[0] < 1 or G.shape[1] < 1:
            raise DimensionMismatch(f"analysis matrix must be m x n with m, n >= 1, got shape {G.shape}")
        if G.shape[1] != self.X.dim:
            raise DimensionMismatch(f"G has {G.shape[1]} columns but X has dim {self.X.dim}")
        if G.shape[0] != self.Theta.dim:
            raise DimensionMismatch(f"G has {G.shape[0]} rows but Theta has dim {self.Theta.dim}")
        if self.X.s_max != self.Theta.s_max:
            raise DimensionMismatch(f"X has {self.X.s_max + 1} grades but Theta has {self.Theta.s_max + 1}")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)

    @property
    def m(self) -> int:
        return self.G.shape[0]

    @property
    def n(self) -> int:
        return self.G.shape[1]

    @property
    def s_max(self) -> int:
        return self.X.s_max

    @property
    def grades(self) -> range:
        return self.X.grades

    def with_matrix(self, H) -> "FrameFamily":
        """Same graded spaces, different functionals."""
        return FrameFamily(np.asarray(H, dtype=float), self.X, self.Theta)

    @classmethod
    def unit(cls, G) -> "FrameFamily":
        """Single grade, unit weights on both sides."""
        G = np.atleast_2d(np.asarray(G, dtype=float))
        return cls(G, GradedSpace.unit(G.shape[1]), GradedSpace.unit(G.shape[0]))

    @classmethod
    def from_json(cls, data: Dict, s_max: Optional[int] = None) -> "FrameFamily":
        """Ladders or generator specs for X and Theta; generators take their dims from G.

        Without ``s_max``, a generator follows the grade count of an explicit ladder on
        the other side, or a single grade when both sides are generators.
        """
        G = np.atleast_2d(np.asarray(data["G"], dtype=float))
        if s_max is None:
            ladders = [len(side["weights"]) - 1 for side in (data["X"], data["Theta"]) if "weights" in side]
            s_max = ladders[0] if ladders else 0
        return cls(
            G,
            GradedSpace.from_json(data["X"], G.shape[1], s_max),
            GradedSpace.from_json(data["Theta"], G.shape[0], s_max),
        )

    def to_json(self) -> Dict:
        return {"G": self.G.tolist(), "X": self.X.to_json(), "Theta": self.Theta.to_json()}


@dataclass(frozen=True)
class FrameBounds:
    """Optimal per-grade constants with A_s ||f||_s <= |||Gf|||_s <= B_s ||f||_s."""
    A: tuple
    B: tuple
    convention: str = "linear"

    @property
    def is_bessel(self) -> bool:
        return all(np.isfinite(b) for b in self.B)

    def is_pre_frame(self, tol: float = 0.0) -> bool:
        return min(self.A) > tol

    def tight_grades(self, tol: float) -> Tuple[int, ...]:
        return tuple(s for s, (a, b) in enumerate(zip(self.A, self.B)) if abs(a - b) <= tol * b)

    def hilbert(self) -> "FrameBounds":
        """Squared (Hilbert-space) convention: A_H = A^2, B_H = B^2."""
        if self.convention == "hilbert":
            return self
        return FrameBounds(tuple(a * a for a in self.A), tuple(b * b for b in self.B), "hilbert")


@dataclass(frozen=True)
class PreFrameVerdict:
    is_pre_frame: bool
    tight_grades: Tuple[int, ...]
    bounds: FrameBounds

    @property
    def is_tight(self) -> bool:
        return self.is_pre_frame and len(self.tight_grades) == len(self.bounds.A)


@dataclass(frozen=True, eq=False)
class ReconstructionOp:
    """Left inverse S of the analysis matrix, S({g_i(f)}) = f, with norms Theta_s -> X_s."""
    S: np.ndarray
    norms: GradedOperatorNorms

    @classmethod
    def from_matrix(cls, frame: FrameFamily, S) -> "ReconstructionOp":
        """Wrap a supplied reconstruction matrix, checking S·G = I."""
        S = np.asarray(S, dtype=float)
        if S.shape != (frame.n, frame.m):
            raise DimensionMismatch(f"reconstruction must be {frame.n} x {frame.m}, got {S.shape}")
        residual = left_inverse_residual(S, frame.G)
        if residual > IDENTITY_TOL:
            raise NotLeftInverse(f"||S G - I||_F = {residual:.3e} exceeds {IDENTITY_TOL}")
        return cls(S, f_bounded_check(S, frame.Theta, frame.X))


@dataclass(frozen=True, eq=False)
class DualFamily:
    """Columns of F are the expansion vectors f_i with f = sum g_i(f) f_i."""
    F: np.ndarray
    signal_residual: float = 0.0
    functional_residual: float = 0.0

    def vector(self, i: int) -> np.ndarray:
        return self.F[:, i]


@dataclass(frozen=True, eq=False)
class CoefficientProjection:
    """Projection U = G·S of Theta onto range(G)."""
    U: np.ndarray
    norms: GradedOperatorNorms
    idempotence_residual: float


@dataclass(frozen=True)
class SynthesisReport:
    """Per grade: ||G^T|| from Theta_s* to X_s* next to B_s."""
    synthesis_norms: tuple
    upper_bounds: tuple
    agrees: tuple

    @property
    def all_agree(self) -> bool:
        return all(self.agrees)


@dataclass(frozen=True, eq=False)
class NormingFrame:
    """Frame of grade-s norming functionals of the samples, with its coverage report."""
    frame: FrameFamily
    grade: int
    sample_ratios: np.ndarray
    probe_ratios: np.ndarray
    exact_on_samples: bool

    @property
    def min_coverage(self) -> float:
        return float(self.probe_ratios.min()) if self.probe_ratios.size else 1.0


def left_inverse_residual(S: np.ndarray, G: np.ndarray) -> float:
    return float(np.linalg.norm(S @ G - np.eye(G.shape[1]), "fro"))


def identity_frame(n: int, m: Optional[int] = None) -> FrameFamily:
    """Rows e_1..e_n (padded with zero rows when m > n), unit weights."""
    return FrameFamily.unit(np.eye(m or n, n))


def stretched_basis_matrix(n: int) -> np.ndarray:
    """Rows e1, e1, 2e2, 3e3, ..., n e_n: expands every f but is no l2 frame in infinite dimension."""
    G = np.zeros((n + 1, n))
    G[0, 0] = 1.0
    for i in range(n):
        G[i + 1, i] = i + 1.0
    return G


def stretched_basis_frame(n: int) -> FrameFamily:
    return FrameFamily.unit(stretched_basis_matrix(n))


def stretched_basis_expansion(n: int) -> np.ndarray:
    """The non-canonical expansion sequence {e1, 0, e2/2, e3/3, ...} as columns."""
    F = np.zeros((n, n + 1))
    F[0, 0] = 1.0
    for i in range(1, n):
        F[i, i + 1] = 1.0 / (i + 1)
    return F


def analyze(frame: FrameFamily, f) -> np.ndarray:
    """Coefficients {g_i(f)} = G·f."""
    v = np.asarray(f, dtype=float)
    if v.ndim != 1 or v.shape[0] != frame.n:
        raise DimensionMismatch(f"expected a vector of length {frame.n}, got shape {v.shape}")
    return frame.G @ v


def synthesize(frame: FrameFamily, d) -> np.ndarray:
    """The functional sum d_i g_i = G^T d."""
    v = np.asarray(d, dtype=float)
    if v.ndim != 1 or v.shape[0] != frame.m:
        raise DimensionMismatch(f"expected a coefficient vector of length {frame.m}, got shape {v.shape}")
    return frame.G.T @ v


def grade_bounds(G, X: GradedSpace, Theta: GradedSpace, s: int) -> Tuple[float, float]:
    """(A_s, B_s): extreme singular values of diag(v_s) G diag(w_s)^-1; A_s = 0 when m < n."""
    sv = singular_values(G, X, s, Theta, s)
    upper = float(sv[0]) if sv.size else 0.0
    lower = float(sv[-1]) if sv.size == X.dim else 0.0
    return lower, upper


def frame_bounds(frame: FrameFamily) -> FrameBounds:
    """Optimal lower and upper frame bounds at every grade, linear convention."""
    pairs = [grade_bounds(frame.G, frame.X, frame.Theta, s) for s in frame.grades]
    return FrameBounds(tuple(a for a, _ in pairs), tuple(b for _, b in pairs))


def is_pre_F_frame(frame: FrameFamily, tol: float = 1e-12) -> PreFrameVerdict:
    """Pre-F-frame iff A_s > tol at every grade; tight at s when |A_s - B_s| <= tol·B_s."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    bounds = frame_bounds(frame)
    verdict = PreFrameVerdict(bounds.is_pre_frame(tol), bounds.tight_grades(tol), bounds)
    logger.debug("pre-F-frame=%s tight=%s bounds=%s", verdict.is_pre_frame, verdict.tight_grades, bounds)
    return verdict


def has_full_rank(G, X: GradedSpace, Theta: GradedSpace, s: int = 0) -> bool:
    """Numerical rank test sigma_min > RANK_TOL·sigma_max on the grade-s normalization."""
    sv = singular_values(G, X, s, Theta, s)
    if sv.size < X.dim or sv[0] == 0.0:
        return False
    return bool(sv[-1] > RANK_TOL * sv[0])


def f_bounded_check(M, from_space: GradedSpace, to_space: GradedSpace) -> GradedOperatorNorms:
    """Per-grade bounds K_s = ||M||_{s -> s}."""
    if from_space.s_max != to_space.s_max:
        raise DimensionMismatch("graded spaces have different grade counts")
    return GradedOperatorNorms(
        tuple(op_norm(M, from_space, s, to_space, s) for s in from_space.grades)
    )


def canonical_reconstruction(frame: FrameFamily) -> ReconstructionOp:
    """
    Moore-Penrose left inverse S = (G^T G)^-1 G^T.

    Raises:
        FrameDeficient: when rank(G) < n at grade 0 normalization
    """
    if not has_full_rank(frame.G, frame.X, frame.Theta, 0):
        raise FrameDeficient(f"analysis matrix of shape {frame.G.shape} has rank below {frame.n}")
    S = pinv(frame.G)
    residual = left_inverse_residual(S, frame.G)
    if residual > IDENTITY_TOL:
        raise FrameDeficient(f"pseudoinverse is not a left inverse (residual {residual:.3e})")
    return ReconstructionOp(S, f_bounded_check(S, frame.Theta, frame.X))


def verify_expansion(frame: FrameFamily, F) -> DualFamily:
    """Check a supplied dual family: F·G = I (signal side) and G·F·G = G (functional side)."""
    F = np.asarray(F, dtype=float)
    if F.shape != (frame.n, frame.m):
        raise DimensionMismatch(f"dual family must be {frame.n} x {frame.m}, got {F.shape}")
    signal = left_inverse_residual(F, frame.G)
    functional = float(np.linalg.norm(frame.G @ F @ frame.G - frame.G, "fro"))
    if signal > IDENTITY_TOL or functional > IDENTITY_TOL:
        raise ExpansionFailure(
            f"expansion residuals signal={signal:.3e}, functional={functional:.3e} exceed {IDENTITY_TOL}"
        )
    return DualFamily(F, signal, functional)


def dual_family(frame: FrameFamily, recon: ReconstructionOp) -> DualFamily:
    """f_i = S(e_i), the columns of the reconstruction matrix."""
    return verify_expansion(frame, recon.S)


def dual_frame_bounds(frame: FrameFamily, dual: DualFamily) -> FrameBounds:
    """Bounds of g -> {g(f_i)} from X_s* to Theta_s*; the dual family is a Theta_s*-frame for X_s*."""
    pairs = []
    for s in frame.grades:
        sv = singular_values(dual.F.T, frame.X, s, frame.Theta, s, dual_from=True, dual_to=True)
        pairs.append((float(sv[-1]) if sv.size == frame.n else 0.0, float(sv[0])))
    return FrameBounds(tuple(a for a, _ in pairs), tuple(b for _, b in pairs))


def coefficient_projection(frame: FrameFamily, recon: ReconstructionOp) -> CoefficientProjection:
    """U = G·S, idempotent onto range(G); per-grade norms certify continuity."""
    U = frame.G @ recon.S
    residual = float(np.linalg.norm(U @ U - U, "fro"))
    if residual > IDENTITY_TOL:
        raise FrameDeficient(f"G·S is not idempotent (residual {residual:.3e})")
    return CoefficientProjection(U, f_bounded_check(U, frame.Theta, frame.Theta), residual)


def synthesis_norm_check(frame: FrameFamily) -> SynthesisReport:
    """||G^T||_{Theta_s* -> X_s*} equals B_s at every grade."""
    bounds = frame_bounds(frame)
    norms = tuple(
        op_norm(frame.G.T, frame.Theta, s, frame.X, s, dual_from=True, dual_to=True) for s in frame.grades
    )
    agrees = tuple(
        abs(t - b) <= NORM_MATCH_TOL * max(abs(b), np.finfo(float).tiny) or t == b
        for t, b in zip(norms, bounds.B)
    )
    return SynthesisReport(norms, bounds.B, agrees)


def coverage_ratios(frame: FrameFamily, probes: np.ndarray, s: int) -> np.ndarray:
    """sup_j |g_j(f)| / ||f||_s for each probe row f."""
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    zero = ~np.any(probes, axis=1)
    if np.any(zero):
        raise ZeroSample(f"probe {int(np.argmax(zero))} is the zero vector")
    values = np.abs(probes @ frame.G.T).max(axis=1)
    return values / norm_batch(frame.X, probes, s)


def norming_frame(space: GradedSpace, samples: Sequence, s: int, probes: Optional[np.ndarray] = None,
                  num_probes: int = 256, seed: int = 0) -> NormingFrame:
    """
    Frame of grade-s norming functionals g_j = w_s^2 x_j / ||x_j||_s.

    Args:
        space: graded signal space
        samples: nonzero vectors x_j
        s: grade whose norm the functionals attain
        probes: rows to measure coverage on; seeded Gaussian probes when omitted

    Returns:
        NormingFrame with coefficient space unit-weighted at every grade
    """
    s = check_grade(space, s)
    rows: List[np.ndarray] = []
    for j, x in enumerate(samples):
        x = np.asarray(x, dtype=float)
        if x.shape != (space.dim,):
            raise DimensionMismatch(f"sample {j} has shape {x.shape}, expected ({space.dim},)")
        if not np.any(x):
            raise ZeroSample(f"sample {j} is the zero vector")
        rows.append(norming_functional(space, x, s))
    if not rows:
        raise ZeroSample("norming frame needs at least one sample")

    G = np.vstack(rows)
    frame = FrameFamily(G, space, GradedSpace.unit(len(rows), space.s_max))
    X_samples = np.vstack([np.asarray(x, dtype=float) for x in samples])

    # Each functional attains its own sample's norm and no other functional beats it
    sample_values = np.abs(X_samples @ G.T)
    sample_norms = norm_batch(space, X_samples, s)
    sample_ratios = sample_values.max(axis=1) / sample_norms
    own = np.abs(np.diag(sample_values))
    exact = bool(
        np.allclose(own, sample_norms, rtol=1e-12, atol=0.0)
        and np.all(sample_values.max(axis=1) <= sample_norms * (1 + 1e-12))
    )

    if probes is None:
        rng = np.random.default_rng(seed)
        probes = rng.standard_normal((num_probes, space.dim))
    probe_ratios = coverage_ratios(frame, probes, s)
    logger.debug("norming frame: %d functionals, grade %d, min coverage %.6f", len(rows), s,
                 probe_ratios.min() if probe_ratios.size else 1.0)
    return NormingFrame(frame, s, sample_ratios, probe_ratios, exact)
