from dataclasses import replace

import numpy as np
import pytest
from roughsk.core.exceptions import NonFiniteField, SingularSystem
from roughsk.core.linalg import (
    LyapunovSide,
    area_correction_integrand,
    covariance_J,
    friction_inverse,
    friction_inverse_gradient,
    lyapunov_integral,
    noise_induced_drift,
    psd_sqrt,
    solve_lyapunov,
)
from roughsk.core.models import builtin_model


def test_identity_friction():
    np.testing.assert_allclose(covariance_J(np.eye(2)), 0.5 * np.eye(2), atol=1e-14)


def test_rotating_friction_keeps_isotropic_covariance():
    m = np.array([[1.0, 1.0], [-1.0, 1.0]])
    np.testing.assert_allclose(covariance_J(m), 0.5 * np.eye(2), atol=1e-14)


def test_scalar_friction():
    np.testing.assert_allclose(covariance_J(np.array([[3.0]])), [[1.0 / 6.0]])


def test_residual_on_random_corpus(stable_corpus):
    for m in stable_corpus:
        d = m.shape[0]
        J = covariance_J(m)
        residual = np.linalg.norm(m @ J + J @ m.T - np.eye(d))
        assert residual <= 1e-10
        np.testing.assert_allclose(J, J.T, atol=0)


def test_hand_solved_upper_triangular_friction():
    m = np.array([[1.0, 1.0], [0.0, 1.0]])
    np.testing.assert_allclose(covariance_J(m), [[0.75, -0.25], [-0.25, 0.5]], atol=1e-14)


def test_covariance_spectrum_is_bounded_by_ellipticity(stable_corpus):
    for m in stable_corpus:
        lam = np.linalg.eigvalsh(0.5 * (m + m.T))[0]
        eigs = np.linalg.eigvalsh(covariance_J(m))
        assert eigs[0] > 0
        assert eigs[-1] <= 1.0 / (2.0 * lam) * (1 + 1e-10)


def test_stiff_friction_meets_residual_bound_or_raises():
    # symmetric part 1e-3, skew part 1e4
    m = np.array([[1e-3, 1e4], [-1e4, 1e-3]])
    b = np.eye(2)
    try:
        solution = solve_lyapunov(m, b)
    except SingularSystem:
        return
    residual = np.linalg.norm(m @ solution.matrix + solution.matrix @ m.T - b)
    assert residual <= 1e-10 * (1 + np.linalg.norm(b))
    assert solution.residual_norm <= 1e-10 * (1 + np.linalg.norm(b))


@pytest.mark.slow
def test_quadrature_agrees_with_direct_solve(stable_corpus):
    for m in stable_corpus:
        d = m.shape[0]
        np.testing.assert_allclose(
            lyapunov_integral(m, np.eye(d)), covariance_J(m), atol=1e-6
        )


def test_covariation_identity(stable_corpus):
    for m in stable_corpus:
        J = covariance_J(m)
        inv = np.linalg.inv(m)
        np.testing.assert_allclose(inv @ inv.T, inv @ J + J @ inv.T, atol=1e-10)


def test_transposed_side(rng):
    m = np.array([[2.0, 1.0], [-0.5, 1.5]])
    b = rng.normal(size=(2, 2))
    solution = solve_lyapunov(m, b, LyapunovSide.MTA_AM)
    np.testing.assert_allclose(m.T @ solution.matrix + solution.matrix @ m, b, atol=1e-12)
    assert solution.residual_norm <= 1e-12


def test_batched_solve_matches_single(stable_corpus):
    batch = np.stack([m for m in stable_corpus if m.shape[0] == 3][:10])
    together = covariance_J(batch)
    for m, J in zip(batch, together):
        np.testing.assert_allclose(J, covariance_J(m), rtol=1e-12, atol=1e-14)


def test_skew_friction_is_singular():
    with pytest.raises(SingularSystem):
        covariance_J(np.array([[0.0, 1.0], [-1.0, 0.0]]))


def test_non_finite_input():
    with pytest.raises(NonFiniteField):
        covariance_J(np.array([[np.nan]]))


def test_psd_sqrt_squares_back(stable_corpus):
    for m in stable_corpus[:50]:
        s = m @ m.T
        root = psd_sqrt(s)
        np.testing.assert_allclose(root @ root, s, atol=1e-9 * (1 + np.abs(s).max()))


def test_constant_friction_has_no_noise_induced_drift():
    model = builtin_model("const_rot2")
    np.testing.assert_allclose(noise_induced_drift(model, np.zeros((3, 2))), 0.0)


def test_scalar_noise_induced_drift():
    # S = (1/m)' J = -m' / (2 m^3); at x = 0: m = 2, m' = 1
    model = builtin_model("scalar_sin")
    np.testing.assert_allclose(noise_induced_drift(model, np.array([0.0])), [-1.0 / 16.0])


def test_area_correction_for_rotating_friction():
    model = builtin_model("const_rot2")
    np.testing.assert_allclose(
        area_correction_integrand(model, np.zeros(2)),
        [[0.0, 0.25], [-0.25, 0.0]],
        atol=1e-14,
    )


def test_area_correction_vanishes_for_symmetric_friction():
    model = builtin_model("diag_tanh")
    np.testing.assert_allclose(
        area_correction_integrand(model, np.array([[0.3, -1.2]])), 0.0, atol=1e-14
    )


def test_friction_inverse():
    model = builtin_model("const_rot2")
    np.testing.assert_allclose(
        friction_inverse(model, np.zeros(2)), 0.5 * np.array([[1.0, -1.0], [1.0, 1.0]])
    )


@pytest.mark.parametrize("name", ["scalar_sin", "diag_tanh"])
def test_inverse_gradient_declared_matches_differences(name, rng):
    model = builtin_model(name)
    x = rng.uniform(-2.0, 2.0, size=(10, model.dim))
    analytic = friction_inverse_gradient(model, x)
    numeric = friction_inverse_gradient(replace(model, friction_grad=None), x)
    assert analytic.shape == (10, model.dim, model.dim, model.dim)
    np.testing.assert_allclose(analytic, numeric, atol=1e-8)
