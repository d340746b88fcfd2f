"""
Brute-force grid checks in dimension 2 and 3.
Suprema and infima of ratios over a deterministic grid on the unit sphere, used to
cross-check the singular-value path without touching an SVD.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, List, Optional, Tuple

import numpy as np
from scipy.linalg import pinv

from errors import DimensionMismatch, ZeroDenominator
from frame_core import FrameFamily, canonical_reconstruction, frame_bounds
from graded_spaces import GradedSpace, norm_batch, weight_vector
from perturbation import (
    WeightEnvelope,
    bessel_perturb_certify,
    cc_perturb_certify,
    functional_perturb_certify,
    kato_certify,
    min_condition_certify,
    reconstruction_perturb_certify,
    weighted_perturb_certify,
)
from utils import box_muller_normals, derive_seed, make_rng

logger = logging.getLogger(__name__)

DEFAULT_RESOLUTION = {2: 2000, 3: 400}
CONVERGENCE_DRIFT = 1e-4
MAX_DOUBLINGS = 3
AGREEMENT_TOL = 1e-3
ONE_SIDED_TOL = 1e-9
CHUNK = 200_000

BatchFn = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class GridSphere:
    """Deterministic grid on the unit sphere of R^2 or R^3."""
    dim: int
    resolution: Optional[int] = None

    def __post_init__(self):
        if self.dim not in DEFAULT_RESOLUTION:
            raise DimensionMismatch(f"grid sphere supports dim 2 or 3, got {self.dim}")
        if self.resolution is None:
            object.__setattr__(self, "resolution", DEFAULT_RESOLUTION[self.dim])
        if self.resolution < 4:
            raise ValueError("resolution must be at least 4")

    def doubled(self) -> "GridSphere":
        return GridSphere(self.dim, 2 * self.resolution)

    @property
    def size(self) -> int:
        if self.dim == 2:
            return self.resolution
        return (self.resolution + 1) * self.resolution

    def chunks(self, size: int = CHUNK) -> Iterator[np.ndarray]:
        """Grid points in a fixed order, as (N, dim) blocks."""
        res = self.resolution
        if self.dim == 2:
            theta = 2.0 * np.pi * np.arange(res) / res
            for start in range(0, res, size):
                t = theta[start:start + size]
                yield np.column_stack([np.cos(t), np.sin(t)])
            return
        # polar angles j*pi/res include both poles, so the coordinate axes are on the grid
        azimuth = 2.0 * np.pi * np.arange(res) / res
        rows_per_chunk = max(1, size // res)
        for start in range(0, res + 1, rows_per_chunk):
            polar = np.pi * np.arange(start, min(start + rows_per_chunk, res + 1)) / res
            p, a = np.meshgrid(polar, azimuth, indexing="ij")
            yield np.column_stack([
                (np.sin(p) * np.cos(a)).ravel(),
                (np.sin(p) * np.sin(a)).ravel(),
                np.cos(p).ravel(),
            ])

    def points(self) -> np.ndarray:
        return np.vstack(list(self.chunks()))


@dataclass(frozen=True)
class ConvergedEstimate:
    value: Tuple[float, ...]
    resolution: int
    drift: float
    converged: bool


@dataclass(frozen=True)
class AgreementCheck:
    name: str
    dim: int
    grade: int
    primary: float
    oracle: float
    gap: float
    ok: bool


@dataclass
class AgreementReport:
    seed: int
    checks: List[AgreementCheck] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(check.ok for check in self.checks)

    @property
    def failures(self) -> List[AgreementCheck]:
        return [check for check in self.checks if not check.ok]


def _ratio_extremes(numerator: BatchFn, denominator: BatchFn, sphere: GridSphere) -> Tuple[float, float]:
    low, high = math.inf, -math.inf
    for P in sphere.chunks():
        den = np.asarray(denominator(P), dtype=float)
        if np.any(den <= 0.0):
            k = int(np.argmax(den <= 0.0))
            raise ZeroDenominator(f"denominator is {den[k]!r} at grid point {P[k].tolist()}")
        ratio = np.asarray(numerator(P), dtype=float) / den
        low = min(low, float(ratio.min()))
        high = max(high, float(ratio.max()))
    return low, high


def grid_sup_ratio(numerator: BatchFn, denominator: BatchFn, sphere: GridSphere) -> float:
    """
    Max of numerator/denominator over the grid; never above the true supremum.

    Args:
        numerator, denominator: batch callables mapping an (N, dim) array to N values
        sphere: the grid

    Raises:
        ZeroDenominator: when the denominator is not positive at some grid point
    """
    return _ratio_extremes(numerator, denominator, sphere)[1]


def _frame_ratio(frame: FrameFamily, s: int) -> Tuple[BatchFn, BatchFn]:
    # Grid points p map to f = p / w_s, so the grid is uniform on the grade-s sphere
    w = weight_vector(frame.X, s)

    def numerator(P: np.ndarray) -> np.ndarray:
        return norm_batch(frame.Theta, (P / w) @ frame.G.T, s)

    def denominator(P: np.ndarray) -> np.ndarray:
        return norm_batch(frame.X, P / w, s)
    return numerator, denominator


def grid_frame_bounds(frame: FrameFamily, s: int, sphere: GridSphere) -> Tuple[float, float]:
    """(A_est, B_est): min and max of |||Gf|||_s / ||f||_s over the grid."""
    if frame.n != sphere.dim:
        raise DimensionMismatch(f"frame dimension {frame.n} does not match grid dimension {sphere.dim}")
    return _ratio_extremes(*_frame_ratio(frame, s), sphere)


def grid_op_norm(M, space_from: GradedSpace, space_to: GradedSpace, s: int, sphere: GridSphere) -> float:
    """Grid estimate of ||M|| from grade s of space_from to grade s of space_to."""
    M = np.asarray(M, dtype=float)
    if space_from.dim != sphere.dim:
        raise DimensionMismatch(f"domain dimension {space_from.dim} does not match grid dimension {sphere.dim}")
    w = weight_vector(space_from, s)
    return grid_sup_ratio(
        lambda P: norm_batch(space_to, (P / w) @ M.T, s),
        lambda P: norm_batch(space_from, P / w, s),
        sphere,
    )


def _converge(estimate: Callable[[GridSphere], Tuple[float, ...]], sphere: GridSphere,
              drift_tol: float = CONVERGENCE_DRIFT, max_doublings: int = MAX_DOUBLINGS) -> ConvergedEstimate:
    current = estimate(sphere)
    drift = math.inf
    for _ in range(max_doublings):
        sphere = sphere.doubled()
        refined = estimate(sphere)
        drift = max(abs(a - b) for a, b in zip(refined, current))
        current = refined
        if drift < drift_tol:
            return ConvergedEstimate(current, sphere.resolution, drift, True)
    logger.warning("grid estimate did not settle below %.1e after %d doublings (drift %.3e)",
                   drift_tol, max_doublings, drift)
    return ConvergedEstimate(current, sphere.resolution, drift, False)


def converged_sup_ratio(numerator: BatchFn, denominator: BatchFn, dim: int,
                        resolution: Optional[int] = None) -> ConvergedEstimate:
    """grid_sup_ratio with resolution doubling until the value moves by less than 1e-4."""
    return _converge(lambda sph: (grid_sup_ratio(numerator, denominator, sph),), GridSphere(dim, resolution))


def converged_frame_bounds(frame: FrameFamily, s: int, resolution: Optional[int] = None) -> ConvergedEstimate:
    return _converge(lambda sph: grid_frame_bounds(frame, s, sph), GridSphere(frame.n, resolution))


def converged_op_norm(M, space_from: GradedSpace, space_to: GradedSpace, s: int,
                      resolution: Optional[int] = None) -> ConvergedEstimate:
    return _converge(lambda sph: (grid_op_norm(M, space_from, space_to, s, sph),),
                     GridSphere(space_from.dim, resolution))


def min_condition_ratio(G, H, X: GradedSpace, Theta: GradedSpace, s: int) -> Tuple[BatchFn, BatchFn]:
    """|||(G - H)f|||_s and min(|||Gf|||_s, |||Hf|||_s) as batch callables over grid points."""
    G, H = np.asarray(G, dtype=float), np.asarray(H, dtype=float)
    w = weight_vector(X, s)

    def numerator(P: np.ndarray) -> np.ndarray:
        return norm_batch(Theta, (P / w) @ (G - H).T, s)

    def denominator(P: np.ndarray) -> np.ndarray:
        F = P / w
        return np.minimum(norm_batch(Theta, F @ G.T, s), norm_batch(Theta, F @ H.T, s))
    return numerator, denominator


def _check(name: str, dim: int, s: int, primary: float, oracle: float, upper_side: bool,
           tol: float) -> AgreementCheck:
    gap = abs(primary - oracle)
    # The grid is a subset of the sphere: sup estimates stay below, inf estimates above
    one_sided = oracle <= primary + ONE_SIDED_TOL if upper_side else oracle >= primary - ONE_SIDED_TOL
    return AgreementCheck(name, dim, s, primary, oracle, gap, bool(gap <= tol and one_sided))


def _bound_check(name: str, dim: int, s: int, bound: float, oracle: float) -> AgreementCheck:
    """The grid supremum must not exceed a certified upper bound; no closeness required."""
    ok = math.isfinite(bound) and oracle <= bound + ONE_SIDED_TOL * max(1.0, abs(bound))
    return AgreementCheck(name, dim, s, bound, oracle, bound - oracle, bool(ok))


def _converged_check(name: str, dim: int, s: int, primary: float, estimate: ConvergedEstimate,
                     tol: float) -> AgreementCheck:
    check = _check(name, dim, s, primary, estimate.value[0], True, tol)
    if not estimate.converged:
        return AgreementCheck(check.name, dim, s, primary, check.oracle, check.gap, False)
    return check


def _diagonal_min_condition(tol: float, resolution: Optional[int]) -> AgreementCheck:
    # G = I, H = diag(1, 0.8): the certified constant 0.2 / 0.8 is attained at e2
    frame = FrameFamily.unit(np.eye(2))
    H = np.diag([1.0, 0.8])
    cert = min_condition_certify(frame, canonical_reconstruction(frame), H, estimate=False)
    estimate = converged_sup_ratio(*min_condition_ratio(frame.G, H, frame.X, frame.Theta, 0), 2, resolution)
    return _converged_check("min_condition_diagonal", 2, 0, cert.constants["lambda"][0], estimate, tol)


def agreement_suite(seed: int = 0, frames_per_dim: int = 2, tol: float = AGREEMENT_TOL,
                    resolution: Optional[int] = None) -> AgreementReport:
    """
    Compare every exact-mode constant with its grid supremum.

    Frames are seeded Gaussian perturbations of padded identities in dims 2 and 3 over a
    two-grade polynomial ladder, conditioned well enough for the grid to resolve A_s.
    Covered: frame bounds, Bessel mu~, Kato lambda1, cc mu, weighted gamma (non-unit
    envelope), reconstruction mu (when the coefficient space has dim <= 3), functional mu
    and the certified min-condition lambda, which may only sit above the grid value.
    """
    report = AgreementReport(seed)
    index = 0
    for dim in (2, 3):
        X = GradedSpace.polynomial(dim, 1)
        for _ in range(frames_per_dim):
            rng = make_rng(derive_seed(seed, index))
            index += 1
            m = dim + int(rng.integers(0, 2))
            Theta = GradedSpace.unit(m, 1)
            N = box_muller_normals(rng, (m, dim))
            G = np.eye(m, dim) + 0.3 * N / np.linalg.norm(N, 2)
            frame = FrameFamily(G, X, Theta)
            E = box_muller_normals(rng, (m, dim))
            H = G + 0.1 * E / np.linalg.norm(E, 2)
            U = np.eye(dim) + 0.3 * box_muller_normals(rng, (dim, dim)) / dim
            env = WeightEnvelope(0.8 + 0.4 * rng.random(m), 0.8 + 0.4 * rng.random(m))

            recon = canonical_reconstruction(frame)
            bounds = frame_bounds(frame)
            kato = kato_certify(U, X, probes=64, seed=seed)
            bessel = bessel_perturb_certify(frame, H)
            weighted = weighted_perturb_certify(frame, recon, H, env, seed=seed)
            functional = functional_perturb_certify(frame, recon, H, seed=seed)
            reconstruction = reconstruction_perturb_certify(frame, recon, pinv(H), seed=seed)
            min_condition = min_condition_certify(frame, recon, H, estimate=False, probes=64, seed=seed)

            cc = cc_perturb_certify(G.T, H.T, seed=seed)
            flat_X, flat_Theta = GradedSpace.unit(dim), GradedSpace.unit(m)
            report.checks.append(_converged_check("cc_mu", dim, 0, cc.constants["mu"][0],
                                                  converged_op_norm(G - H, flat_X, flat_Theta, 0, resolution), tol))

            weighted_delta = env.alpha[:, None] * G - env.beta[:, None] * H
            for s in frame.grades:
                grid = converged_frame_bounds(frame, s, resolution)
                report.checks.append(_check("A", dim, s, bounds.A[s], grid.value[0], False, tol))
                report.checks.append(_check("B", dim, s, bounds.B[s], grid.value[1], True, tol))
                report.checks.append(_converged_check("mu_tilde", dim, s, bessel.constants["mu_tilde"][s],
                                                      converged_op_norm(G - H, X, Theta, s, resolution), tol))
                report.checks.append(_converged_check("lambda1", dim, s, kato.constants["lambda1"][s],
                                                      converged_op_norm(np.eye(dim) - U, X, X, s, resolution), tol))
                report.checks.append(_converged_check("gamma", dim, s, weighted.constants["gamma"][s],
                                                      converged_op_norm(weighted_delta, X, Theta, s, resolution),
                                                      tol))
                report.checks.append(_converged_check("functional_mu", dim, s, functional.constants["mu"][s],
                                                      converged_op_norm(G - H, X, Theta, s, resolution), tol))
                if m in DEFAULT_RESOLUTION:
                    D = pinv(H) - recon.S
                    report.checks.append(_converged_check(
                        "reconstruction_mu", m, s, reconstruction.constants["mu"][s],
                        converged_op_norm(D, Theta, X, s, resolution), tol,
                    ))
                ratio = converged_sup_ratio(*min_condition_ratio(G, H, X, Theta, s), dim, resolution)
                report.checks.append(_bound_check("min_condition", dim, s, min_condition.constants["lambda"][s],
                                                  ratio.value[0]))
    report.checks.append(_diagonal_min_condition(tol, resolution))
    for check in report.failures:
        logger.error("oracle disagreement: %s dim=%d grade=%d primary=%.12g grid=%.12g",
                     check.name, check.dim, check.grade, check.primary, check.oracle)
    logger.info("oracle agreement: %d checks, %d failures", len(report.checks), len(report.failures))
    return report
