import math

import numpy as np
import pytest

from errors import DimensionMismatch, ZeroDenominator
from frame_core import FrameFamily, canonical_reconstruction, frame_bounds, identity_frame, stretched_basis_matrix
from graded_spaces import GradedSpace, op_norm
from oracle import (
    GridSphere,
    agreement_suite,
    converged_frame_bounds,
    converged_op_norm,
    converged_sup_ratio,
    grid_frame_bounds,
    grid_op_norm,
    grid_sup_ratio,
    min_condition_ratio,
)
from perturbation import (
    WeightEnvelope,
    min_condition_certify,
    reconstruction_perturb_certify,
    weighted_perturb_certify,
)


def euclidean(P):
    return np.linalg.norm(P, axis=1)


def test_points_lie_on_unit_sphere():
    for dim, resolution in ((2, 100), (3, 40)):
        sphere = GridSphere(dim, resolution)
        P = sphere.points()
        assert P.shape == (sphere.size, dim)
        np.testing.assert_allclose(euclidean(P), 1.0, rtol=0, atol=1e-15)


def test_grid_is_deterministic():
    np.testing.assert_array_equal(GridSphere(3, 30).points(), GridSphere(3, 30).points())


def test_grid_sphere_dimension_limits():
    with pytest.raises(DimensionMismatch):
        GridSphere(4)
    assert GridSphere(2).resolution == 2000
    assert GridSphere(3).resolution == 400


def test_sup_ratio_of_diagonal_operator():
    M = np.diag([1.0, 2.0])
    value = grid_sup_ratio(lambda P: euclidean(P @ M.T), euclidean, GridSphere(2))
    assert 2.0 - 1e-6 < value <= 2.0 + 1e-12


def test_sup_ratio_of_constant():
    value = grid_sup_ratio(lambda P: np.full(len(P), 0.3), lambda P: np.ones(len(P)), GridSphere(3, 20))
    assert value == 0.3


def test_sup_ratio_of_min_condition_example():
    G, H = np.eye(2), np.diag([1.0, 0.8])

    def numerator(P):
        return euclidean(P @ (G - H).T)

    def denominator(P):
        return np.minimum(euclidean(P @ G.T), euclidean(P @ H.T))
    value = grid_sup_ratio(numerator, denominator, GridSphere(2))
    assert 0.25 - 1e-6 < value <= 0.25 + 1e-12


def test_zero_denominator():
    with pytest.raises(ZeroDenominator):
        grid_sup_ratio(euclidean, lambda P: P[:, 0], GridSphere(2, 16))


def test_grid_frame_bounds_examples():
    assert grid_frame_bounds(identity_frame(2), 0, GridSphere(2)) == pytest.approx((1.0, 1.0))
    doubled = FrameFamily.unit([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert grid_frame_bounds(doubled, 0, GridSphere(2)) == pytest.approx((1.0, math.sqrt(2.0)), abs=1e-4)
    stretched = FrameFamily.unit(stretched_basis_matrix(2))
    assert grid_frame_bounds(stretched, 0, GridSphere(2)) == pytest.approx((math.sqrt(2.0), 2.0), abs=1e-4)


def test_grid_frame_bounds_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        grid_frame_bounds(identity_frame(3), 0, GridSphere(2))


def test_converged_bounds_agree_in_three_dimensions():
    rng = np.random.default_rng(7)
    X = GradedSpace.from_ladder([[1.0, 1.0, 1.0], [1.1, 1.2, 1.3]])
    Theta = GradedSpace.from_ladder([[1.0] * 4, [1.0, 1.1, 1.2, 1.1]])
    N = rng.standard_normal((4, 3))
    frame = FrameFamily(np.eye(4, 3) + 0.3 * N / np.linalg.norm(N, 2), X, Theta)
    bounds = frame_bounds(frame)
    for s in frame.grades:
        estimate = converged_frame_bounds(frame, s)
        A_est, B_est = estimate.value
        assert estimate.converged
        assert abs(A_est - bounds.A[s]) < 1e-3 and A_est >= bounds.A[s] - 1e-9
        assert abs(B_est - bounds.B[s]) < 1e-3 and B_est <= bounds.B[s] + 1e-9


def test_grid_op_norm_matches_exact_constant():
    rng = np.random.default_rng(3)
    X = GradedSpace.polynomial(2, 1)
    Theta = GradedSpace.unit(3, 1)
    D = rng.standard_normal((3, 2))
    for s in X.grades:
        exact = op_norm(D, X, s, Theta, s)
        grid = grid_op_norm(D, X, Theta, s, GridSphere(2))
        assert grid <= exact + 1e-9
        assert exact - grid < 1e-3


def test_converged_sup_ratio_settles():
    M = np.diag([1.0, 3.0, 2.0])
    estimate = converged_sup_ratio(lambda P: euclidean(P @ M.T), euclidean, 3)
    assert estimate.converged
    assert estimate.value[0] == pytest.approx(3.0, abs=1e-4)


def test_agreement_suite_passes():
    report = agreement_suite(seed=0)
    assert report.checks
    assert report.ok, report.failures
    assert {check.dim for check in report.checks} == {2, 3}


def test_agreement_suite_covers_every_exact_constant():
    report = agreement_suite(seed=1, frames_per_dim=1)
    names = {check.name for check in report.checks}
    assert {
        "A", "B", "mu_tilde", "lambda1", "cc_mu", "gamma", "functional_mu",
        "reconstruction_mu", "min_condition", "min_condition_diagonal",
    } <= names
    assert report.ok, report.failures


def test_weighted_gamma_matches_grid_with_uneven_envelope():
    X = GradedSpace.polynomial(2, 1)
    Theta = GradedSpace.unit(3, 1)
    G = np.array([[1.0, 0.1], [0.2, 0.9], [0.3, -0.4]])
    frame = FrameFamily(G, X, Theta)
    H = G + 0.05 * np.array([[1.0, -0.5], [0.3, 0.8], [-0.6, 0.2]])
    env = WeightEnvelope([1.0, 1.2, 0.9], [1.1, 1.0, 0.8])
    cert = weighted_perturb_certify(frame, canonical_reconstruction(frame), H, env)
    delta = env.alpha[:, None] * G - env.beta[:, None] * H
    for s in frame.grades:
        estimate = converged_op_norm(delta, X, Theta, s)
        assert estimate.converged
        assert estimate.value[0] <= cert.constants["gamma"][s] + 1e-9
        assert cert.constants["gamma"][s] - estimate.value[0] < 1e-3


def test_reconstruction_mu_matches_grid_over_coefficients():
    frame = FrameFamily(np.array([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]]), GradedSpace.polynomial(2, 1),
                        GradedSpace.from_ladder([[1.0, 1.0, 1.0], [1.0, 1.5, 2.0]]))
    recon = canonical_reconstruction(frame)
    S_new = recon.S + 0.05 * np.array([[1.0, -1.0, 0.5], [0.2, 0.4, -0.3]])
    cert = reconstruction_perturb_certify(frame, recon, S_new)
    for s in frame.grades:
        estimate = converged_op_norm(S_new - recon.S, frame.Theta, frame.X, s)
        assert estimate.value[0] <= cert.constants["mu"][s] + 1e-9
        assert cert.constants["mu"][s] - estimate.value[0] < 1e-3


def test_min_condition_grid_ratio_below_certified_constant():
    frame = FrameFamily.unit(np.eye(2))
    H = np.diag([1.0, 0.8])
    cert = min_condition_certify(frame, canonical_reconstruction(frame), H, estimate=False)
    estimate = converged_sup_ratio(*min_condition_ratio(frame.G, H, frame.X, frame.Theta, 0), 2)
    assert estimate.value[0] == pytest.approx(cert.constants["lambda"][0], abs=1e-9)

    rng = np.random.default_rng(5)
    G = np.eye(3, 2) + 0.2 * rng.standard_normal((3, 2))
    H = G + 0.1 * rng.standard_normal((3, 2))
    frame = FrameFamily(G, GradedSpace.polynomial(2, 1), GradedSpace.unit(3, 1))
    cert = min_condition_certify(frame, canonical_reconstruction(frame), H, estimate=False)
    for s in frame.grades:
        ratio = grid_sup_ratio(*min_condition_ratio(G, H, frame.X, frame.Theta, s), GridSphere(2))
        assert ratio <= cert.constants["lambda"][s] + 1e-9
