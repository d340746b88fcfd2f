"""
Perturbation certifiers for Fréchet frames.
Each certifier takes the original frame data and a perturbed candidate, obtains the
hypothesis constants (exactly when a single constant is free, otherwise by residual
ascent), checks the hypothesis, predicts the interval the perturbed bounds must lie in,
measures the actual bounds and records whether the prediction held.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import LinAlgError, inv, pinv, svdvals

from ascent import residual_ascent
from errors import DimensionMismatch, FrameDeficient, InvalidEnvelope, NotLeftInverse, RankDeficient
from frame_core import (
    IDENTITY_TOL,
    RANK_TOL,
    FrameFamily,
    ReconstructionOp,
    frame_bounds,
    grade_bounds,
    has_full_rank,
    left_inverse_residual,
)
from graded_spaces import GradedSpace, norm_batch, op_norm, singular_values, weight_vector

logger = logging.getLogger(__name__)

SOUNDNESS_TOL = 1e-9
STRICT_MARGIN = 1e-12
DEFAULT_PROBES = 1000
DEFAULT_RESTARTS = 16

PerGrade = Union[float, Sequence[float]]


class Theorem(str, Enum):
    CC = "cc"
    KATO = "kato"
    KATO_INVERSE = "kato_inverse"
    BESSEL = "bessel"
    BESSEL_CONVERSE = "bessel_converse"
    MIN_CONDITION = "min_condition"
    MIN_CONDITION_CONVERSE = "min_condition_converse"
    WEIGHTED = "weighted"
    RECONSTRUCTION = "reconstruction"
    FUNCTIONAL = "functional"


# Certifiers a scenario can request; the others only appear as related certificates
CERTIFIERS = ("cc", "kato", "bessel", "min_condition", "weighted", "reconstruction", "functional")

# Constants a caller may fix per certifier
FIXED_CONSTANTS = {
    "cc": ("lambda1", "lambda2"),
    "kato": ("lambda2",),
    "bessel": (),
    "min_condition": (),
    "weighted": ("lambda", "mu"),
    "reconstruction": ("lambda1", "lambda2"),
    "functional": ("lambda",),
}


@dataclass(frozen=True)
class Certificate:
    """One theorem checked at every grade.

    ``sound[s]`` is None where the hypothesis failed; otherwise it says whether the
    measured bounds fell inside the predicted interval (relative tolerance).
    """
    theorem: str
    constants: Dict[str, tuple]
    constants_mode: str
    hypothesis_ok: tuple
    predicted: tuple
    measured: tuple
    sound: tuple
    convention: str = "linear"
    notes: tuple = ()
    related: tuple = ()

    @property
    def grades(self) -> range:
        return range(len(self.hypothesis_ok))

    @property
    def exact(self) -> bool:
        return self.constants_mode == "exact"

    @property
    def violations(self) -> Tuple[int, ...]:
        """Grades where the hypothesis held but the prediction failed."""
        return tuple(s for s in self.grades if self.hypothesis_ok[s] and self.sound[s] is False)

    @property
    def is_sound(self) -> bool:
        return not self.violations

    def walk(self) -> Iterator["Certificate"]:
        """This certificate followed by its related certificates."""
        yield self
        for cert in self.related:
            yield from cert.walk()

    def to_json(self) -> Dict:
        return {
            "theorem": self.theorem,
            "constants": {k: [_json_real(v) for v in vals] for k, vals in self.constants.items()},
            "constants_mode": self.constants_mode,
            "hypothesis_ok": list(self.hypothesis_ok),
            "predicted": [[_json_real(lo), _json_real(hi)] for lo, hi in self.predicted],
            "measured": [[_json_real(a), _json_real(b)] for a, b in self.measured],
            "sound": list(self.sound),
            "convention": self.convention,
            "notes": list(self.notes),
            "related": [cert.to_json() for cert in self.related],
        }


@dataclass(frozen=True, eq=False)
class WeightEnvelope:
    """Positive weight sequences alpha, beta with 0 < inf <= sup < inf."""
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float).ravel()
        beta = np.asarray(self.beta, dtype=float).ravel()
        for name, seq in (("alpha", alpha), ("beta", beta)):
            if seq.size == 0:
                raise InvalidEnvelope(f"{name} is empty")
            if not np.all(np.isfinite(seq)) or np.any(seq <= 0):
                raise InvalidEnvelope(f"{name} must be positive and finite")
        if alpha.size != beta.size:
            raise InvalidEnvelope(f"alpha has {alpha.size} entries but beta has {beta.size}")
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "beta", beta)

    @classmethod
    def ones(cls, m: int) -> "WeightEnvelope":
        return cls(np.ones(m), np.ones(m))

    @property
    def inf_alpha(self) -> float:
        return float(self.alpha.min())

    @property
    def sup_alpha(self) -> float:
        return float(self.alpha.max())

    @property
    def inf_beta(self) -> float:
        return float(self.beta.min())

    @property
    def sup_beta(self) -> float:
        return float(self.beta.max())


def _json_real(x: float) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None


def _per_grade(value: PerGrade, count: int, name: str, upper: Optional[float] = None) -> Tuple[float, ...]:
    if np.ndim(value) == 0:
        values = (float(value),) * count
    else:
        values = tuple(float(v) for v in value)
        if len(values) != count:
            raise DimensionMismatch(f"{name} has {len(values)} entries for {count} grades")
    for v in values:
        if not v >= 0.0:
            raise ValueError(f"{name} must be nonnegative, got {v}")
        if upper is not None and v >= upper:
            raise ValueError(f"{name} must be below {upper}, got {v}")
    return values


def _same_shape(G: np.ndarray, H, name: str = "H") -> np.ndarray:
    H = np.asarray(H, dtype=float)
    if H.shape != G.shape:
        raise DimensionMismatch(f"{name} has shape {H.shape}, expected {G.shape}")
    return H


def within(predicted: Tuple[float, float], measured: Tuple[float, float], tol: float = SOUNDNESS_TOL) -> bool:
    """predicted.lower <= A and B <= predicted.upper, each up to a relative tolerance."""
    lower, upper = predicted
    a, b = measured
    if any(math.isnan(v) for v in (lower, upper, a, b)):
        return False
    ok_lower = lower <= a + tol * max(abs(a), abs(lower))
    ok_upper = b <= upper + tol * max(abs(b), abs(upper)) if math.isfinite(upper) else True
    return bool(ok_lower and ok_upper)


def _assemble(theorem: Theorem, constants: Dict[str, Sequence[float]], mode: str, hypothesis_ok: Sequence[bool],
              predicted: Sequence[Tuple[float, float]], measured: Sequence[Tuple[float, float]], tol: float,
              convention: str = "linear", notes: Sequence[str] = (), related: Sequence[Certificate] = (),
              unsound_grades: Sequence[int] = ()) -> Certificate:
    sound: List[Optional[bool]] = []
    for s, ok in enumerate(hypothesis_ok):
        if not ok:
            sound.append(None)
        else:
            sound.append(within(predicted[s], measured[s], tol) and s not in unsound_grades)
    cert = Certificate(
        theorem=theorem.value,
        constants={k: tuple(float(v) for v in vals) for k, vals in constants.items()},
        constants_mode=mode,
        hypothesis_ok=tuple(bool(ok) for ok in hypothesis_ok),
        predicted=tuple((float(lo), float(hi)) for lo, hi in predicted),
        measured=tuple((float(a), float(b)) for a, b in measured),
        sound=tuple(sound),
        convention=convention,
        notes=tuple(notes),
        related=tuple(related),
    )
    if cert.violations:
        if cert.exact:
            logger.error("%s: prediction violated at grades %s with exact constants", cert.theorem, cert.violations)
        else:
            logger.warning("%s: estimated constants gave a violated prediction at grades %s",
                           cert.theorem, cert.violations)
    return cert


def _measured(frame: FrameFamily, H: np.ndarray) -> List[Tuple[float, float]]:
    return [grade_bounds(H, frame.X, frame.Theta, s) for s in frame.grades]


def _estimate(objective: Callable[[np.ndarray], float], space: GradedSpace, s: int,
              restarts: int, seed: int) -> float:
    """Residual-ascent estimate clipped at zero (a zero constant already satisfies the inequality)."""
    result = residual_ascent(objective, space, s, restarts=restarts, seed=seed + s)
    logger.debug("estimated constant at grade %d: %.12g after %d evaluations", s, result.value, result.evaluations)
    return max(0.0, result.value)


def _safe_ratio(numerator: float, denominator: float) -> float:
    if denominator > 0.0:
        return numerator / denominator
    return math.inf if numerator > 0.0 else 0.0


# Predicted intervals, one per theorem.  Each widens as its perturbation constant grows.

def cc_interval(A: float, B: float, lambda1: float, lambda2: float, mu: float) -> Tuple[float, float]:
    """Hilbert-convention bounds [A(1-(l1+l2+mu/sqrtA)/(1+l2))^2, B(1+(l1+l2+mu/sqrtB)/(1-l2))^2]."""
    # Past the hypothesis the factor would turn negative and its square grow again
    lower = A * max(0.0, 1.0 - (lambda1 + lambda2 + mu / math.sqrt(A)) / (1.0 + lambda2)) ** 2
    upper = B * (1.0 + (lambda1 + lambda2 + mu / math.sqrt(B)) / (1.0 - lambda2)) ** 2 if lambda2 < 1 else math.inf
    return lower, upper


def kato_interval(lambda1: float, lambda2: float) -> Tuple[float, float]:
    """Range of ||Ux|| / ||x||."""
    upper = (1.0 + lambda1) / (1.0 - lambda2) if lambda2 < 1 else math.inf
    return (1.0 - lambda1) / (1.0 + lambda2), upper


def kato_inverse_interval(lambda1: float, lambda2: float) -> Tuple[float, float]:
    """Range of ||U^-1 x|| / ||x||."""
    upper = (1.0 + lambda2) / (1.0 - lambda1) if lambda1 < 1 else math.inf
    return (1.0 - lambda2) / (1.0 + lambda1), upper


def bessel_interval(B: float, mu_tilde: float) -> Tuple[float, float]:
    return 0.0, B + mu_tilde


def min_condition_interval(A: float, B: float, lam: float) -> Tuple[float, float]:
    if not math.isfinite(lam):
        return 0.0, math.inf
    return A / (1.0 + lam), (1.0 + lam) * B


def weighted_interval(S_norm: float, B: float, lam: float, mu: float, gamma: float,
                      env: WeightEnvelope) -> Tuple[float, float]:
    lower = ((1.0 - lam) * env.inf_alpha / S_norm - gamma) / ((1.0 + mu) * env.sup_beta)
    upper = ((1.0 + lam) * B * env.sup_alpha + gamma) / ((1.0 - mu) * env.inf_beta)
    return lower, upper


def reconstruction_interval(A: float, B: float, lambda1: float, lambda2: float, mu: float) -> Tuple[float, float]:
    # Upper denominator 1 - (lambda1 + mu B), matching the hypothesis max{lambda2, lambda1 + mu B} < 1
    shift = lambda1 + mu * B
    lower = A * (1.0 - lambda2) / (1.0 + shift)
    upper = B * (1.0 + lambda2) / (1.0 - shift) if shift < 1 else math.inf
    return lower, upper


def functional_interval(S_norm: float, B: float, lam: float, mu: float) -> Tuple[float, float]:
    lower = (1.0 - (lam * B + mu) * S_norm) / S_norm
    return lower, B * (1.0 + lam) + mu


def cc_perturb_certify(F_synth, G_synth, lambda1: float = 0.0, lambda2: float = 0.0,
                       tol: float = SOUNDNESS_TOL, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> Certificate:
    """
    Hilbert-space perturbation of a frame given by synthesis matrices (columns are the frame vectors).

    Args:
        F_synth: n x m synthesis matrix of the original frame, rank n
        G_synth: n x m synthesis matrix of the perturbed sequence
        lambda1, lambda2: fixed nonnegative constants of the perturbation inequality

    Returns:
        Certificate in the Hilbert (squared) convention at a single grade
    """
    F = np.atleast_2d(np.asarray(F_synth, dtype=float))
    G = _same_shape(F, G_synth, "G_synth")
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("lambda1 and lambda2 must be nonnegative")
    n, m = F.shape
    sv_F = svdvals(F)
    if m < n or sv_F[0] == 0.0 or sv_F[-1] <= RANK_TOL * sv_F[0]:
        raise RankDeficient(f"synthesis matrix of shape {F.shape} has rank below {n}")
    A, B = float(sv_F[-1]) ** 2, float(sv_F[0]) ** 2

    D = F - G
    if lambda1 == 0.0 and lambda2 == 0.0:
        mu = float(svdvals(D)[0])
        mode = "exact"
    else:
        def residual(c: np.ndarray) -> float:
            return (np.linalg.norm(D @ c) - lambda1 * np.linalg.norm(F @ c)
                    - lambda2 * np.linalg.norm(G @ c))
        mu = _estimate(residual, GradedSpace.unit(m), 0, restarts, seed)
        mode = "estimated"

    ok = lambda2 < 1.0 and lambda1 + mu / math.sqrt(A) < 1.0
    predicted = cc_interval(A, B, lambda1, lambda2, mu)
    sv_G = svdvals(G)
    measured = (float(sv_G[-1]) ** 2 if m >= n else 0.0, float(sv_G[0]) ** 2)
    notes = [
        "linear convention: predicted [%.17g, %.17g], measured (%.17g, %.17g)"
        % (math.sqrt(max(predicted[0], 0.0)), math.sqrt(predicted[1]), math.sqrt(measured[0]), math.sqrt(measured[1]))
    ]
    if not ok:
        notes.append("hypothesis failed: lambda1 + mu/sqrt(A) = %.6g, lambda2 = %.6g" % (
            lambda1 + mu / math.sqrt(A), lambda2))
    return _assemble(
        Theorem.CC,
        {"lambda1": [lambda1], "lambda2": [lambda2], "mu": [mu]},
        mode, [ok], [predicted], [measured], tol, convention="hilbert", notes=notes,
    )


def kato_certify(U, space: GradedSpace, lambda2: float = 0.0, tol: float = SOUNDNESS_TOL,
                 probes: int = DEFAULT_PROBES, restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> Certificate:
    """
    Invertibility of U with ||x - Ux||_s <= lambda1 ||x||_s + lambda2 ||Ux||_s.

    With lambda2 = 0 the constant lambda1_s = ||I - U||_s is exact. The sandwich on
    U^-1 is returned as the related ``kato_inverse`` certificate.
    """
    U = np.atleast_2d(np.asarray(U, dtype=float))
    if U.shape != (space.dim, space.dim):
        raise DimensionMismatch(f"U has shape {U.shape}, expected ({space.dim}, {space.dim})")
    if lambda2 < 0:
        raise ValueError("lambda2 must be nonnegative")
    n = space.dim
    identity = np.eye(n)
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((probes, n))

    lambda1s, oks, forward, backward, fwd_measured, bwd_measured = [], [], [], [], [], []
    unsound, notes = [], []
    mode = "exact" if lambda2 == 0.0 else "estimated"
    U_inv = None
    for s in space.grades:
        if lambda2 == 0.0:
            lam1 = op_norm(identity - U, space, s, space, s)
        else:
            def residual(x: np.ndarray, s=s) -> float:
                Ux = U @ x
                w = weight_vector(space, s)
                return np.linalg.norm(w * (x - Ux)) - lambda2 * np.linalg.norm(w * Ux)
            lam1 = _estimate(residual, space, s, restarts, seed)
        ok = lam1 < 1.0 and lambda2 < 1.0
        lambda1s.append(lam1)
        oks.append(ok)
        forward.append(kato_interval(lam1, lambda2))
        backward.append(kato_inverse_interval(lam1, lambda2))

        sv = singular_values(U, space, s, space, s)
        fwd_measured.append((float(sv[-1]), float(sv[0])))
        bwd_measured.append((_safe_ratio(1.0, float(sv[0])), _safe_ratio(1.0, float(sv[-1]))))
        if not ok:
            continue

        if U_inv is None:
            try:
                U_inv = inv(U)
            except LinAlgError:
                U_inv = None
        if U_inv is None or not has_full_rank(U, space, space, s):
            notes.append(f"grade {s}: U is singular although the hypothesis holds")
            unsound.append(s)
            continue

        # All four sandwich inequalities on the probes
        x_norms = norm_batch(space, X, s)
        fwd_ratio = norm_batch(space, X @ U.T, s) / x_norms
        bwd_ratio = norm_batch(space, X @ U_inv.T, s) / x_norms
        fwd_bad = int(np.sum(~_inside(fwd_ratio, forward[-1], tol)))
        bwd_bad = int(np.sum(~_inside(bwd_ratio, backward[-1], tol)))
        if fwd_bad or bwd_bad:
            notes.append(f"grade {s}: {fwd_bad} forward and {bwd_bad} inverse probe violations")
            unsound.append(s)

    constants = {"lambda1": lambda1s, "lambda2": [lambda2] * len(lambda1s)}
    inverse_cert = _assemble(Theorem.KATO_INVERSE, constants, mode, oks, backward, bwd_measured, tol,
                             unsound_grades=unsound)
    notes.append(f"{probes} probes per grade")
    return _assemble(Theorem.KATO, constants, mode, oks, forward, fwd_measured, tol,
                     notes=notes, related=[inverse_cert], unsound_grades=unsound)


def _inside(ratios: np.ndarray, interval: Tuple[float, float], tol: float) -> np.ndarray:
    lower, upper = interval
    ok = ratios >= lower - tol * np.maximum(np.abs(ratios), abs(lower))
    if math.isfinite(upper):
        ok &= ratios <= upper + tol * np.maximum(np.abs(ratios), abs(upper))
    return ok


def bessel_perturb_certify(frameG: FrameFamily, H, tol: float = SOUNDNESS_TOL) -> Certificate:
    """
    F-Bessel perturbation: |||(G - H)f|||_s <= mu~_s ||f||_s gives B_s(H) <= B_s(G) + mu~_s.

    The converse direction (G from H with the same mu~_s) is the related
    ``bessel_converse`` certificate.
    """
    H = _same_shape(frameG.G, H)
    mu = [op_norm(frameG.G - H, frameG.X, s, frameG.Theta, s) for s in frameG.grades]
    bounds_G = _measured(frameG, frameG.G)
    bounds_H = _measured(frameG, H)
    oks = [True] * len(mu)
    constants = {"mu_tilde": mu}
    converse = _assemble(
        Theorem.BESSEL_CONVERSE, constants, "exact", oks,
        [bessel_interval(b, m) for (_, b), m in zip(bounds_H, mu)], bounds_G, tol,
    )
    return _assemble(
        Theorem.BESSEL, constants, "exact", oks,
        [bessel_interval(b, m) for (_, b), m in zip(bounds_G, mu)], bounds_H, tol,
        related=[converse],
    )


def _min_ratio_objective(frame: FrameFamily, H: np.ndarray, s: int) -> Callable[[np.ndarray], float]:
    v = weight_vector(frame.Theta, s)
    D = frame.G - H

    def ratio(f: np.ndarray) -> float:
        denominator = min(np.linalg.norm(v * (frame.G @ f)), np.linalg.norm(v * (H @ f)))
        return _safe_ratio(float(np.linalg.norm(v * (D @ f))), float(denominator))
    return ratio


def min_condition_certify(frameG: FrameFamily, recon: ReconstructionOp, H, tol: float = SOUNDNESS_TOL,
                          estimate: bool = True, restarts: int = 8, seed: int = 0,
                          probes: int = DEFAULT_PROBES) -> Certificate:
    """
    Stability under |||(G - H)f|||_s <= lambda_s min{|||Gf|||_s, |||Hf|||_s}.

    lambda_s comes two ways: a rigorous certificate ||G - H||_s / min(A_s(G), A_s(H)),
    available when H has a positive lower bound, and (``estimate=True``) a residual
    ascent estimate of the true supremum. The converse constant
    max(1 + B'_s/A_s, 1 + B_s/A'_s) is the related ``min_condition_converse`` certificate.
    """
    H = _same_shape(frameG.G, H)
    bounds_G = _measured(frameG, frameG.G)
    if min(a for a, _ in bounds_G) <= 0.0:
        raise FrameDeficient("original family is not a pre-F-frame")
    bounds_H = _measured(frameG, H)

    certified, estimated, oks, predicted, notes = [], [], [], [], []
    for s in frameG.grades:
        (A, B), (A_h, B_h) = bounds_G[s], bounds_H[s]
        h_ok = A_h > RANK_TOL * max(B_h, np.finfo(float).tiny)
        K = op_norm(frameG.G - H, frameG.X, s, frameG.Theta, s)
        lam = K / min(A, A_h) if h_ok else math.nan
        est = (_estimate(_min_ratio_objective(frameG, H, s), frameG.X, s, restarts, seed)
               if estimate else math.nan)
        if not h_ok:
            notes.append(f"grade {s}: H has no positive lower bound, certified lambda unavailable")
        certified.append(lam)
        estimated.append(est)
        oks.append(h_ok)
        predicted.append(min_condition_interval(A, B, lam if h_ok else est))

    # V = S D with D = G pinv(H) maps {h_n(f)} back to f
    if has_full_rank(H, frameG.X, frameG.Theta, 0):
        V = recon.S @ frameG.G @ pinv(H)
        residual = left_inverse_residual(V, H)
        notes.append(f"V = S D reconstructs from H with residual {residual:.3e}")
        if residual > IDENTITY_TOL:
            notes.append("V is not a left inverse of H")

    converse = _min_condition_converse(frameG, H, bounds_G, bounds_H, tol, probes, seed)
    return _assemble(
        Theorem.MIN_CONDITION, {"lambda": certified, "lambda_estimate": estimated}, "exact",
        oks, predicted, bounds_H, tol, notes=notes, related=[converse],
    )


def _min_condition_converse(frameG: FrameFamily, H: np.ndarray, bounds_G, bounds_H, tol: float,
                            probes: int, seed: int) -> Certificate:
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((probes, frameG.n))
    lams, oks, predicted, unsound, notes = [], [], [], [], []
    for s in frameG.grades:
        (A, B), (A_h, B_h) = bounds_G[s], bounds_H[s]
        ok = A > 0.0 and A_h > RANK_TOL * max(B_h, np.finfo(float).tiny)
        lam = max(1.0 + B_h / A, 1.0 + B / A_h) if ok else math.nan
        lams.append(lam)
        oks.append(ok)
        predicted.append(min_condition_interval(A, B, lam) if ok else (0.0, math.inf))
        if not ok:
            continue
        gf = norm_batch(frameG.Theta, F @ frameG.G.T, s)
        hf = norm_batch(frameG.Theta, F @ H.T, s)
        df = norm_batch(frameG.Theta, F @ (frameG.G - H).T, s)
        bad = int(np.sum(df > lam * np.minimum(gf, hf) * (1.0 + tol)))
        if bad:
            notes.append(f"grade {s}: min-condition inequality fails on {bad} probes")
            unsound.append(s)
    return _assemble(Theorem.MIN_CONDITION_CONVERSE, {"lambda": lams}, "exact", oks, predicted, bounds_H, tol,
                     notes=notes, unsound_grades=unsound)


def weighted_perturb_certify(frameG: FrameFamily, recon: ReconstructionOp, H, env: WeightEnvelope,
                             lambda_s: PerGrade = 0.0, mu_s: PerGrade = 0.0, tol: float = SOUNDNESS_TOL,
                             restarts: int = DEFAULT_RESTARTS, seed: int = 0) -> Certificate:
    """
    Perturbation with positive weights alpha, beta:
    |||(alpha G - beta H)f|||_s <= lambda_s |||alpha G f|||_s + mu_s |||beta H f|||_s + gamma_s ||f||_s.

    Hypothesis ||S||_s gamma_s < (1 - lambda_s) inf alpha.
    """
    H = _same_shape(frameG.G, H)
    if env.alpha.size != frameG.m:
        raise DimensionMismatch(f"envelope has {env.alpha.size} weights for {frameG.m} functionals")
    count = frameG.s_max + 1
    lams = _per_grade(lambda_s, count, "lambda_s", upper=1.0)
    mus = _per_grade(mu_s, count, "mu_s", upper=1.0)
    aG = env.alpha[:, None] * frameG.G
    bH = env.beta[:, None] * H
    delta = aG - bH
    bounds_G = _measured(frameG, frameG.G)
    exact = all(l == 0.0 for l in lams) and all(m == 0.0 for m in mus)

    gammas, oks, predicted = [], [], []
    for s in frameG.grades:
        lam, mu = lams[s], mus[s]
        if lam == 0.0 and mu == 0.0:
            gamma = op_norm(delta, frameG.X, s, frameG.Theta, s)
        else:
            v = weight_vector(frameG.Theta, s)

            def residual(f: np.ndarray, v=v, lam=lam, mu=mu) -> float:
                return (np.linalg.norm(v * (delta @ f)) - lam * np.linalg.norm(v * (aG @ f))
                        - mu * np.linalg.norm(v * (bH @ f)))
            gamma = _estimate(residual, frameG.X, s, restarts, seed)
        S_norm = recon.norms[s]
        gammas.append(gamma)
        oks.append(S_norm * gamma < (1.0 - lam) * env.inf_alpha)
        predicted.append(weighted_interval(S_norm, bounds_G[s][1], lam, mu, gamma, env))

    notes = []
    if all(oks) and has_full_rank(H, frameG.X, frameG.Theta, 0):
        residual = left_inverse_residual(pinv(H), H)
        notes.append(f"canonical reconstruction for H has residual {residual:.3e}")
    return _assemble(
        Theorem.WEIGHTED,
        {"lambda": lams, "mu": mus, "gamma": gammas},
        "exact" if exact else "estimated", oks, predicted, _measured(frameG, H), tol, notes=notes,
    )


def perturbed_functionals(frameG: FrameFamily, S_new) -> np.ndarray:
    """h_i = g_i ∘ L^-1 with L = S_new·G, so that S_new·H = I."""
    L = np.asarray(S_new, dtype=float) @ frameG.G
    return frameG.G @ inv(L)


def reconstruction_perturb_certify(frameG: FrameFamily, V: ReconstructionOp, S_new,
                                   lambda1_s: PerGrade = 0.0, lambda2_s: PerGrade = 0.0,
                                   tol: float = SOUNDNESS_TOL, restarts: int = DEFAULT_RESTARTS,
                                   seed: int = 0) -> Certificate:
    """
    Perturbation of the reconstruction operator: a new S close to V in the sense
    ||(S - V)c||_s <= lambda1 ||Vc||_s + lambda2 ||Sc||_s + mu_s |||c|||_s admits
    functionals h_i = g_i ∘ L^-1 with (h, S) a Fréchet frame.
    """
    G = frameG.G
    residual = left_inverse_residual(V.S, G)
    if residual > IDENTITY_TOL:
        raise NotLeftInverse(f"||V G - I||_F = {residual:.3e} exceeds {IDENTITY_TOL}")
    S_new = np.asarray(S_new, dtype=float)
    if S_new.shape != V.S.shape:
        raise DimensionMismatch(f"S_new has shape {S_new.shape}, expected {V.S.shape}")
    count = frameG.s_max + 1
    lam1s = _per_grade(lambda1_s, count, "lambda1_s")
    lam2s = _per_grade(lambda2_s, count, "lambda2_s")
    D = S_new - V.S
    bounds_G = _measured(frameG, G)
    exact = all(l == 0.0 for l in lam1s) and all(l == 0.0 for l in lam2s)

    mus, oks, predicted = [], [], []
    for s in frameG.grades:
        l1, l2 = lam1s[s], lam2s[s]
        if l1 == 0.0 and l2 == 0.0:
            mu = op_norm(D, frameG.Theta, s, frameG.X, s)
        else:
            w = weight_vector(frameG.X, s)

            def residual_fn(c: np.ndarray, w=w, l1=l1, l2=l2) -> float:
                return (np.linalg.norm(w * (D @ c)) - l1 * np.linalg.norm(w * (V.S @ c))
                        - l2 * np.linalg.norm(w * (S_new @ c)))
            mu = _estimate(residual_fn, frameG.Theta, s, restarts, seed)
        A, B = bounds_G[s]
        mus.append(mu)
        oks.append(max(l2, l1 + mu * B) < 1.0)
        predicted.append(reconstruction_interval(A, B, l1, l2, mu))

    notes: List[str] = []
    unsound: List[int] = []
    L = S_new @ G
    if has_full_rank(L, frameG.X, frameG.X, 0):
        H = perturbed_functionals(frameG, S_new)
        measured = _measured(frameG, H)
        res = left_inverse_residual(S_new, H)
        notes.append(f"S_new H = I with residual {res:.3e}")
        if res > IDENTITY_TOL:
            notes.append("S_new is not a left inverse of the constructed H")
    else:
        measured = [(math.nan, math.nan)] * count
        if any(oks):
            notes.append("SingularL: L = S_new G is singular although the hypothesis holds")
            unsound = [s for s in frameG.grades if oks[s]]
    return _assemble(
        Theorem.RECONSTRUCTION,
        {"lambda1": lam1s, "lambda2": lam2s, "mu": mus},
        "exact" if exact else "estimated", oks, predicted, measured, tol, notes=notes, unsound_grades=unsound,
    )


def functional_perturb_certify(frameG: FrameFamily, recon: ReconstructionOp, H, lambda_s: PerGrade = 0.0,
                               tol: float = SOUNDNESS_TOL, restarts: int = DEFAULT_RESTARTS,
                               seed: int = 0) -> Certificate:
    """
    Perturbation of the functionals: |||(G - H)f|||_s <= lambda_s |||Gf|||_s + mu_s ||f||_s
    with lambda_s ||U||_s + mu_s < ||S||_s^-1 yields T = (S H)^-1 S with T H = I.

    The hypothesis is enforced strictly; equality does not force S H to be invertible.
    """
    H = _same_shape(frameG.G, H)
    residual = left_inverse_residual(recon.S, frameG.G)
    if residual > IDENTITY_TOL:
        raise NotLeftInverse(f"||S G - I||_F = {residual:.3e} exceeds {IDENTITY_TOL}")
    count = frameG.s_max + 1
    lams = _per_grade(lambda_s, count, "lambda_s")
    D = frameG.G - H
    bounds_G = _measured(frameG, frameG.G)
    exact = all(l == 0.0 for l in lams)

    mus, oks, predicted = [], [], []
    for s in frameG.grades:
        lam = lams[s]
        if lam == 0.0:
            mu = op_norm(D, frameG.X, s, frameG.Theta, s)
        else:
            v = weight_vector(frameG.Theta, s)

            def residual_fn(f: np.ndarray, v=v, lam=lam) -> float:
                return np.linalg.norm(v * (D @ f)) - lam * np.linalg.norm(v * (frameG.G @ f))
            mu = _estimate(residual_fn, frameG.X, s, restarts, seed)
        B = bounds_G[s][1]
        S_norm = recon.norms[s]
        mus.append(mu)
        oks.append(lam * B + mu < 1.0 / S_norm - STRICT_MARGIN)
        predicted.append(functional_interval(S_norm, B, lam, mu))

    notes: List[str] = []
    unsound: List[int] = []
    SV = recon.S @ H
    if has_full_rank(SV, frameG.X, frameG.X, 0):
        T = inv(SV) @ recon.S
        res = left_inverse_residual(T, H)
        notes.append(f"T = (S H)^-1 S satisfies T H = I with residual {res:.3e}")
        if res > IDENTITY_TOL:
            notes.append("T is not a left inverse of H")
            logger.warning("functional: ||T H - I||_F = %.3e exceeds %.1e", res, IDENTITY_TOL)
    elif any(oks):
        notes.append("SingularSV: S H is singular although the hypothesis holds")
        unsound = [s for s in frameG.grades if oks[s]]
    return _assemble(
        Theorem.FUNCTIONAL,
        {"lambda": lams, "mu": mus},
        "exact" if exact else "estimated", oks, predicted, _measured(frameG, H), tol,
        notes=notes, unsound_grades=unsound,
    )
