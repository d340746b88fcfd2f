import json
import math

import numpy as np
import pytest
from pydantic import ValidationError

import perturbation
from errors import ConfigError, GradingViolation, InvalidSpec
from scenarios import (
    EXIT_INVALID,
    EXIT_OK,
    EXIT_VIOLATION,
    FrameSpec,
    ScenarioConfig,
    expand,
    frame_matrix,
    generate,
    load_configs,
    run,
)
from utils import box_muller_normals, derive_seed, make_rng


def write_config(tmp_path, data, name="scenario.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def base_config(**overrides):
    data = {
        "seed": 11,
        "dim": 3,
        "num_functionals": 5,
        "grades": 1,
        "x_weights": {"kind": "polynomial", "exponent_step": 1},
        "theta_weights": {"kind": "unit"},
        "frame": {"kind": "random_gaussian"},
        "perturbation": {"kind": "additive_gaussian", "scale": 0.05},
        "theorems": ["bessel", "kato", "min_condition", "weighted", "reconstruction", "functional", "cc"],
    }
    data.update(overrides)
    return data


def test_generate_identity_and_stretched_frames():
    rng = make_rng(0)
    np.testing.assert_array_equal(frame_matrix(FrameSpec(kind="identity"), 3, 3, rng), np.eye(3))
    np.testing.assert_array_equal(
        frame_matrix(FrameSpec(kind="example_2_6"), 3, 4, rng),
        [[1, 0, 0], [1, 0, 0], [0, 2, 0], [0, 0, 3]],
    )


def test_generate_is_deterministic():
    config = ScenarioConfig.model_validate(base_config())
    frame_a, H_a = generate(config, 99)
    frame_b, H_b = generate(config, 99)
    np.testing.assert_array_equal(frame_a.G, frame_b.G)
    np.testing.assert_array_equal(H_a, H_b)
    frame_c, _ = generate(config, 100)
    assert not np.array_equal(frame_a.G, frame_c.G)


def test_additive_perturbation_has_requested_size():
    config = ScenarioConfig.model_validate(base_config())
    frame, H = generate(config, 5)
    assert np.linalg.norm(H - frame.G, 2) == pytest.approx(0.05, rel=1e-12)


def test_diagonal_perturbation():
    config = ScenarioConfig.model_validate(base_config(
        frame={"kind": "identity"}, perturbation={"kind": "diagonal", "entries": [1.0, 2.0, 3.0, 4.0, 5.0]},
    ))
    frame, H = generate(config, 0)
    np.testing.assert_allclose(H, np.diag([1.0, 2.0, 3.0, 4.0, 5.0]) @ frame.G)


def test_box_muller_normals_are_standard():
    z = box_muller_normals(make_rng(1), (20000,))
    assert abs(z.mean()) < 0.05
    assert abs(z.std() - 1.0) < 0.05
    assert box_muller_normals(make_rng(1), (3, 5)).shape == (3, 5)


def test_seed_split():
    assert derive_seed(42, 0) == 42
    assert derive_seed(42, 1) == 42 ^ 0x9E3779B97F4A7C15
    assert 0 <= derive_seed(2 ** 64 - 1, 7) < 2 ** 64


def test_replicates_and_seed_override():
    config = ScenarioConfig.model_validate(base_config(replicates=3))
    scenarios = expand([config])
    assert [sc.seed for sc in scenarios] == [derive_seed(11, k) for k in range(3)]
    assert [sc.scenario_id for sc in scenarios] == [0, 1, 2]
    overridden = expand([config], seed_override=5)
    assert overridden[0].seed == 5


def test_config_rejects_unknown_fields():
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(base_config(colour="red"))
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(base_config(constants={"bessel": {"lambda": 0.1}}))
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(base_config(frame={"kind": "example_2_6"}))
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(base_config(perturbation={"kind": "diagonal", "scale": 0.1}))


def test_load_configs_accepts_arrays(tmp_path):
    path = write_config(tmp_path, [base_config(), base_config(seed=12)])
    configs = load_configs(path)
    assert [c.seed for c in configs] == [11, 12]


def test_load_configs_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_configs(bad)
    with pytest.raises(ConfigError):
        load_configs(tmp_path / "missing.json")


def test_grading_violation_is_reported():
    config = ScenarioConfig.model_validate(base_config(x_weights=[[1.0, 3.0, 1.0], [1.0, 2.0, 1.0]]))
    with pytest.raises(GradingViolation):
        generate(config, 0)


def test_run_identity_bessel(tmp_path):
    path = write_config(tmp_path, base_config(
        dim=2, num_functionals=2, grades=0, x_weights={"kind": "unit"},
        frame={"kind": "identity"}, perturbation={"kind": "none"}, theorems=["bessel"],
    ))
    report, code = run(path)
    assert code == EXIT_OK
    cert = report.results[0].certificates[0]
    assert cert.theorem == "bessel"
    assert cert.constants["mu_tilde"] == (0.0,)
    assert cert.sound == (True,)


def test_run_with_ladder_objects(tmp_path):
    path = write_config(tmp_path, base_config(
        dim=2, num_functionals=2, grades=1,
        x_weights={"weights": [[1.0, 1.0], [1.0, 2.0]]},
        theta_weights={"weights": [[1.0, 1.0], [1.0, 1.5]]},
        frame={"kind": "identity"}, perturbation={"kind": "none"}, theorems=["bessel"],
    ))
    report, code = run(path)
    assert code == EXIT_OK
    assert report.results[0].config["x_weights"] == {"weights": [[1.0, 1.0], [1.0, 2.0]]}
    assert report.results[0].certificates[0].sound == (True, True)


def test_ladder_object_shape_and_grading_are_checked():
    config = ScenarioConfig.model_validate(base_config(x_weights={"weights": [[1.0, 1.0], [1.0, 2.0]]}))
    with pytest.raises(InvalidSpec):
        generate(config, 0)
    config = ScenarioConfig.model_validate(base_config(x_weights={"weights": [[1.0, 3.0, 1.0], [1.0, 2.0, 1.0]]}))
    with pytest.raises(GradingViolation):
        generate(config, 0)
    with pytest.raises(ValidationError):
        ScenarioConfig.model_validate(base_config(x_weights={"weights": [[1.0] * 3] * 2, "kind": "unit"}))


def test_run_stretched_bounds_only(tmp_path):
    path = write_config(tmp_path, base_config(
        dim=4, num_functionals=5, grades=0, x_weights={"kind": "unit"},
        frame={"kind": "example_2_6"}, perturbation={"kind": "none"}, theorems=[],
    ))
    report, code = run(path, mode="bounds")
    assert code == EXIT_OK
    bounds = report.results[0].bounds_original
    assert bounds.A[0] == pytest.approx(math.sqrt(2.0), rel=1e-12)
    assert bounds.B[0] == pytest.approx(4.0, rel=1e-12)


def test_run_invalid_inputs(tmp_path):
    path = write_config(tmp_path, base_config(x_weights=[[1.0, 3.0, 1.0], [1.0, 2.0, 1.0]]))
    report, code = run(path)
    assert code == EXIT_INVALID
    assert "GradingViolation(1, 2)" in report.error

    path = write_config(tmp_path, base_config(unexpected=1), name="extra.json")
    assert run(path)[1] == EXIT_INVALID

    path = write_config(tmp_path, base_config(frame={"kind": "explicit", "matrix": [[1.0, 1.0, 1.0]] * 5}),
                        name="deficient.json")
    assert run(path)[1] == EXIT_INVALID

    path = write_config(tmp_path, base_config(theorems=["weighted"], constants={"weighted": {"lambda": 1.5}}),
                        name="lambda.json")
    assert run(path)[1] == EXIT_INVALID


def test_full_certifier_run_is_sound(tmp_path):
    path = write_config(tmp_path, base_config(replicates=3))
    report, code = run(path)
    assert code == EXIT_OK
    summary = report.summary()
    assert summary["scenarios"] == 3
    assert summary["violations"] == 0
    assert summary["hypothesis_ok"] > 0


def test_fixed_constants_give_estimated_certificates(tmp_path):
    path = write_config(tmp_path, base_config(
        theorems=["functional", "kato"], constants={"functional": {"lambda": 0.01}, "kato": {"lambda2": 0.01}},
    ))
    report, code = run(path)
    assert code == EXIT_OK
    modes = {cert.theorem: cert.constants_mode for cert in report.results[0].certificates}
    assert modes == {"functional": "estimated", "kato": "estimated"}


def test_forced_bound_violation_exits_with_two(tmp_path, monkeypatch):
    monkeypatch.setattr(perturbation, "bessel_interval", lambda B, mu: (0.0, 0.5 * B))
    path = write_config(tmp_path, base_config(theorems=["bessel"]))
    report, code = run(path)
    assert code == EXIT_VIOLATION
    assert report.summary()["exact_violations"] > 0


def test_worker_count_does_not_change_results(tmp_path):
    path = write_config(tmp_path, [base_config(seed=s, theorems=["bessel", "functional", "kato"]) for s in range(6)])
    serial, _ = run(path, jobs=1)
    parallel, _ = run(path, jobs=4)
    assert [r.scenario_id for r in parallel.results] == list(range(6))
    for a, b in zip(serial.results, parallel.results):
        assert a.seed == b.seed
        for ca, cb in zip(a.certificates, b.certificates):
            assert ca.to_json() == cb.to_json()


def test_norming_mode(tmp_path):
    path = write_config(tmp_path, base_config(theorems=[]))
    report, code = run(path, mode="norming")
    assert code == EXIT_OK
    built = report.results[0].norming
    assert [b.grade for b in built] == [0, 1]
    assert all(b.exact_on_samples for b in built)
    assert all(0.0 < b.min_coverage <= 1.0 + 1e-12 for b in built)
