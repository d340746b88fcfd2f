"""
Scenario configs, seeded generation and batch execution.
A config file holds one scenario object or an array of them. Each scenario builds a
frame G over graded spaces and a perturbed family H, then runs the requested
certifiers or the norming-frame construction.
"""

import json
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from scipy.linalg import pinv
from tqdm import tqdm

from errors import ConfigError, FrameGuardError, InvalidSpec
from frame_core import (
    FrameBounds,
    FrameFamily,
    NormingFrame,
    canonical_reconstruction,
    frame_bounds,
    norming_frame,
    stretched_basis_matrix,
)
from graded_spaces import GradedSpace, validate_grading
from perturbation import (
    CERTIFIERS,
    FIXED_CONSTANTS,
    SOUNDNESS_TOL,
    Certificate,
    WeightEnvelope,
    bessel_perturb_certify,
    cc_perturb_certify,
    functional_perturb_certify,
    kato_certify,
    min_condition_certify,
    reconstruction_perturb_certify,
    weighted_perturb_certify,
)
from utils import box_muller_normals, calculate_summary, derive_seed, make_rng

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VIOLATION = 2
EXIT_INVALID = 3

NORMING_PROBES = 256

Ladder = List[List[float]]
ConstantValue = Union[float, List[float]]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class WeightGenerator(_Strict):
    kind: Literal["unit", "polynomial"]
    exponent_step: int = Field(default=1, ge=0)


class WeightLadder(_Strict):
    weights: Ladder


class FrameSpec(_Strict):
    kind: Literal["identity", "random_gaussian", "example_2_6", "explicit"]
    matrix: Optional[Ladder] = None

    @model_validator(mode="after")
    def _matrix_only_when_explicit(self):
        if (self.kind == "explicit") != (self.matrix is not None):
            raise ValueError("matrix is required for kind 'explicit' and not allowed otherwise")
        return self


class PerturbationSpec(_Strict):
    kind: Literal["none", "additive_gaussian", "diagonal", "explicit"] = "none"
    scale: Optional[float] = Field(default=None, ge=0.0)
    entries: Optional[List[float]] = None
    matrix: Optional[Ladder] = None

    @model_validator(mode="after")
    def _fields_match_kind(self):
        needed = {"additive_gaussian": "scale", "diagonal": "entries", "explicit": "matrix"}.get(self.kind)
        for name in ("scale", "entries", "matrix"):
            present = getattr(self, name) is not None
            if present != (name == needed):
                raise ValueError(f"field {name!r} does not fit perturbation kind {self.kind!r}")
        return self


class EnvelopeSpec(_Strict):
    alpha: List[float]
    beta: List[float]


class ScenarioConfig(_Strict):
    seed: int = Field(ge=0, lt=2 ** 64)
    dim: int = Field(ge=1)
    num_functionals: int = Field(ge=1)
    grades: int = Field(default=0, ge=0)
    x_weights: Union[Ladder, WeightLadder, WeightGenerator] = WeightGenerator(kind="unit")
    theta_weights: Union[Ladder, WeightLadder, WeightGenerator] = WeightGenerator(kind="unit")
    frame: FrameSpec
    perturbation: PerturbationSpec = PerturbationSpec()
    theorems: List[Literal["cc", "kato", "bessel", "min_condition", "weighted", "reconstruction", "functional"]] = []
    constants: Dict[str, Dict[str, ConstantValue]] = {}
    envelope: Optional[EnvelopeSpec] = None
    tolerance: float = Field(default=SOUNDNESS_TOL, gt=0.0)
    replicates: int = Field(default=1, ge=1)

    @field_validator("constants")
    @classmethod
    def _known_constants(cls, value: Dict[str, Dict[str, ConstantValue]]):
        for theorem, fixed in value.items():
            if theorem not in FIXED_CONSTANTS:
                raise ValueError(f"unknown theorem {theorem!r} in constants")
            for name in fixed:
                if name not in FIXED_CONSTANTS[theorem]:
                    allowed = ", ".join(FIXED_CONSTANTS[theorem]) or "none"
                    raise ValueError(f"constant {name!r} cannot be fixed for {theorem} (allowed: {allowed})")
        return value

    @model_validator(mode="after")
    def _shapes(self):
        if self.frame.kind == "example_2_6" and self.num_functionals != self.dim + 1:
            raise ValueError("example_2_6 needs num_functionals = dim + 1")
        return self


@dataclass(frozen=True, eq=False)
class Scenario:
    scenario_id: int
    config: ScenarioConfig
    seed: int
    frame: FrameFamily
    H: np.ndarray

    @property
    def perturbed(self) -> FrameFamily:
        return self.frame.with_matrix(self.H)


@dataclass(eq=False)
class ScenarioResult:
    scenario_id: int
    seed: int
    config: Dict
    bounds_original: FrameBounds
    bounds_perturbed: FrameBounds
    certificates: List[Certificate] = field(default_factory=list)
    norming: List[NormingFrame] = field(default_factory=list)
    wall_time: float = 0.0

    def all_certificates(self) -> List[Certificate]:
        return [cert for top in self.certificates for cert in top.walk()]


@dataclass(eq=False)
class Report:
    results: List[ScenarioResult] = field(default_factory=list)
    error: Optional[str] = None

    def summary(self) -> Dict[str, int]:
        verdicts = [sound for r in self.results for cert in r.all_certificates() for sound in cert.sound]
        summary = calculate_summary(verdicts)
        summary["scenarios"] = len(self.results)
        summary["exact_violations"] = sum(
            len(cert.violations) for r in self.results for cert in r.all_certificates() if cert.exact
        )
        return summary

    @property
    def exit_code(self) -> int:
        if self.error is not None:
            return EXIT_INVALID
        return EXIT_VIOLATION if self.summary()["exact_violations"] else EXIT_OK

    def to_json(self) -> Dict:
        return {
            "summary": self.summary(),
            "scenarios": [
                {
                    "scenario_id": r.scenario_id,
                    "seed": r.seed,
                    "config": r.config,
                    "bounds_original": {"A": list(r.bounds_original.A), "B": list(r.bounds_original.B)},
                    "bounds_perturbed": {"A": list(r.bounds_perturbed.A), "B": list(r.bounds_perturbed.B)},
                    "certificates": [cert.to_json() for cert in r.certificates],
                    "wall_time": r.wall_time,
                }
                for r in self.results
            ],
        }


def load_configs(config_path: Union[str, Path]) -> List[ScenarioConfig]:
    """Read a JSON config file holding one scenario object or an array of them."""
    path = Path(config_path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigError(f"cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from e
    items = data if isinstance(data, list) else [data]
    try:
        return [ScenarioConfig.model_validate(item) for item in items]
    except ValidationError as e:
        raise ConfigError(f"{path}: {e}") from e


def _weights(spec: Union[Ladder, WeightLadder, WeightGenerator], dim: int, s_max: int, name: str) -> GradedSpace:
    if isinstance(spec, (WeightGenerator, WeightLadder)):
        space = GradedSpace.from_json(spec.model_dump(), dim, s_max)
    else:
        space = GradedSpace.from_ladder(spec)
    if not isinstance(spec, WeightGenerator):
        if space.weights.shape != (s_max + 1, dim):
            raise InvalidSpec(f"{name} ladder has shape {space.weights.shape}, expected ({s_max + 1}, {dim})")
    validate_grading(space)
    return space


def _explicit(matrix: Ladder, shape: Tuple[int, int], name: str) -> np.ndarray:
    M = np.asarray(matrix, dtype=float)
    if M.shape != shape:
        raise InvalidSpec(f"{name} has shape {M.shape}, expected {shape}")
    return M


def frame_matrix(spec: FrameSpec, n: int, m: int, rng: np.random.Generator) -> np.ndarray:
    """Analysis matrix (m x n) for a frame generator spec."""
    if spec.kind == "identity":
        return np.eye(m, n)
    if spec.kind == "example_2_6":
        if m != n + 1:
            raise InvalidSpec("example_2_6 needs num_functionals = dim + 1")
        return stretched_basis_matrix(n)
    if spec.kind == "random_gaussian":
        return box_muller_normals(rng, (m, n)) / np.sqrt(m)
    return _explicit(spec.matrix, (m, n), "frame matrix")


def perturbation_matrix(spec: PerturbationSpec, G: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """The perturbed family H for G."""
    if spec.kind == "none":
        return G.copy()
    if spec.kind == "additive_gaussian":
        N = box_muller_normals(rng, G.shape)
        top = np.linalg.norm(N, 2)
        return G + spec.scale * N / top if top > 0 else G.copy()
    if spec.kind == "diagonal":
        entries = np.asarray(spec.entries, dtype=float)
        if entries.shape != (G.shape[0],):
            raise InvalidSpec(f"diagonal perturbation needs {G.shape[0]} entries, got {entries.size}")
        return entries[:, None] * G
    return _explicit(spec.matrix, G.shape, "perturbation matrix")


def generate(config: ScenarioConfig, seed: int) -> Tuple[FrameFamily, np.ndarray]:
    """
    Build (G with its graded spaces, H) for one scenario.

    The same (config, seed) reproduces the same matrices bit for bit on one platform:
    draws come from a PCG64 generator with Box-Muller normals, frame first, then perturbation.
    """
    n, m, s_max = config.dim, config.num_functionals, config.grades
    X = _weights(config.x_weights, n, s_max, "x_weights")
    Theta = _weights(config.theta_weights, m, s_max, "theta_weights")
    rng = make_rng(seed)
    G = frame_matrix(config.frame, n, m, rng)
    H = perturbation_matrix(config.perturbation, G, rng)
    return FrameFamily(G, X, Theta), H


def expand(configs: List[ScenarioConfig], seed_override: Optional[int] = None) -> List[Scenario]:
    """One scenario per (config, replicate); replicate k runs on derive_seed(seed, k)."""
    scenarios = []
    for config in configs:
        base = config.seed if seed_override is None else seed_override
        for k in range(config.replicates):
            seed = derive_seed(base, k)
            frame, H = generate(config, seed)
            scenarios.append(Scenario(len(scenarios), config, seed, frame, H))
    return scenarios


def _constants(config: ScenarioConfig, theorem: str) -> Dict[str, ConstantValue]:
    return dict(config.constants.get(theorem, {}))


def _scalar(value: ConstantValue, name: str) -> float:
    if isinstance(value, list):
        raise InvalidSpec(f"{name} must be a single number for cc")
    return float(value)


def certify_scenario(scenario: Scenario) -> List[Certificate]:
    """Run every requested certifier; hypothesis failures stay inside the certificates."""
    config = scenario.config
    frame, H = scenario.frame, scenario.H
    tol = config.tolerance
    seed = scenario.seed
    recon = canonical_reconstruction(frame) if config.theorems else None
    certificates = []
    for theorem in config.theorems:
        fixed = _constants(config, theorem)
        if theorem == "cc":
            cert = cc_perturb_certify(
                frame.G.T, H.T,
                lambda1=_scalar(fixed.get("lambda1", 0.0), "lambda1"),
                lambda2=_scalar(fixed.get("lambda2", 0.0), "lambda2"),
                tol=tol, seed=seed,
            )
        elif theorem == "kato":
            cert = kato_certify(recon.S @ H, frame.X, lambda2=_scalar(fixed.get("lambda2", 0.0), "lambda2"),
                                tol=tol, seed=seed)
        elif theorem == "bessel":
            cert = bessel_perturb_certify(frame, H, tol=tol)
        elif theorem == "min_condition":
            cert = min_condition_certify(frame, recon, H, tol=tol, seed=seed)
        elif theorem == "weighted":
            env = (WeightEnvelope(config.envelope.alpha, config.envelope.beta) if config.envelope
                   else WeightEnvelope.ones(frame.m))
            cert = weighted_perturb_certify(frame, recon, H, env, fixed.get("lambda", 0.0), fixed.get("mu", 0.0),
                                            tol=tol, seed=seed)
        elif theorem == "reconstruction":
            cert = reconstruction_perturb_certify(frame, recon, pinv(H), fixed.get("lambda1", 0.0),
                                                  fixed.get("lambda2", 0.0), tol=tol, seed=seed)
        elif theorem == "functional":
            cert = functional_perturb_certify(frame, recon, H, fixed.get("lambda", 0.0), tol=tol, seed=seed)
        else:
            raise InvalidSpec(f"unknown theorem {theorem!r}; expected one of {', '.join(CERTIFIERS)}")
        logger.info("scenario %d %s: hypothesis %s sound %s", scenario.scenario_id, theorem,
                    cert.hypothesis_ok, cert.sound)
        certificates.append(cert)
    return certificates


def norming_scenario(scenario: Scenario) -> List[NormingFrame]:
    """Norming frame of num_functionals seeded Gaussian samples at every grade."""
    space = scenario.frame.X
    rng = make_rng(derive_seed(scenario.seed, 1))
    samples = box_muller_normals(rng, (scenario.config.num_functionals, space.dim))
    return [
        norming_frame(space, list(samples), s, num_probes=NORMING_PROBES, seed=derive_seed(scenario.seed, 2 + s))
        for s in space.grades
    ]


def run_scenario(scenario: Scenario, mode: str = "certify") -> ScenarioResult:
    start = time.perf_counter()
    logger.info("scenario %d: seed %d, n=%d, m=%d, grades 0..%d", scenario.scenario_id, scenario.seed,
                scenario.frame.n, scenario.frame.m, scenario.frame.s_max)
    result = ScenarioResult(
        scenario_id=scenario.scenario_id,
        seed=scenario.seed,
        config=scenario.config.model_dump(mode="json"),
        bounds_original=frame_bounds(scenario.frame),
        bounds_perturbed=frame_bounds(scenario.perturbed),
    )
    if mode == "certify":
        result.certificates = certify_scenario(scenario)
    elif mode == "norming":
        result.norming = norming_scenario(scenario)
    result.wall_time = time.perf_counter() - start
    return result


def run(config_path: Union[str, Path], jobs: int = 1, seed_override: Optional[int] = None,
        mode: str = "certify") -> Tuple[Report, int]:
    """
    Load, generate and execute every scenario in a config file.

    Args:
        config_path: JSON file with one scenario or an array of scenarios
        jobs: worker threads; results are ordered by scenario index regardless
        seed_override: replaces every config seed when given
        mode: "certify", "bounds" or "norming"

    Returns:
        (report, exit code) with 0 = no exact-mode violation, 2 = violation, 3 = invalid input
    """
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    try:
        scenarios = expand(load_configs(config_path), seed_override)
        # Reconstruction is a precondition for certifying, so a deficient frame is invalid input
        if mode == "certify":
            for scenario in scenarios:
                if scenario.config.theorems:
                    canonical_reconstruction(scenario.frame)
    except FrameGuardError as e:
        logger.error("invalid input: %s", e)
        report = Report(error=str(e))
        return report, report.exit_code

    progress = tqdm(total=len(scenarios), desc=mode, unit="scenario", disable=None, leave=False)
    try:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = []
            for result in pool.map(lambda sc: run_scenario(sc, mode), scenarios):
                results.append(result)
                progress.update(1)
    except (FrameGuardError, ValueError) as e:
        logger.error("invalid input: %s", e)
        report = Report(error=str(e))
        return report, report.exit_code
    finally:
        progress.close()

    report = Report(results)
    summary = report.summary()
    logger.info("%d scenarios: %d grades with hypothesis satisfied, %d sound, %d violations",
                summary["scenarios"], summary["hypothesis_ok"], summary["sound"], summary["violations"])
    return report, report.exit_code
