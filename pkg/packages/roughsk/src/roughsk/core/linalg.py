"""
Dense small-matrix kernel: Lyapunov solves, noise-induced drift and the
antisymmetric level-2 correction.

Lyapunov equations are vectorised to a d^2 x d^2 linear system with
Kronecker structure and solved by LU with partial pivoting. Dimensions are
small (d <= ~6), so the dense solve is cheap and robust. The residual of
the original matrix equation is the correctness contract; no closed form is
trusted. All kernels accept leading batch axes.
"""

from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING

import numpy as np
from common.logger import get_logger
from scipy.integrate import quad_vec
from scipy.linalg import expm

from roughsk.core.exceptions import NonFiniteField, SingularSystem

if TYPE_CHECKING:
    from roughsk.core.models import ModelSpec

logger = get_logger(__name__)

INVERSE_GRAD_STEP = 1e-5
RESIDUAL_RTOL = 1e-10
MAX_CONDITION = 1e12


class LyapunovSide(str, Enum):
    MJ_JMT = "MJ_JMt"  # M X + X M^T = B
    MTA_AM = "MtA_AM"  # M^T X + X M = B


@dataclass
class LyapunovSolution:
    matrix: np.ndarray
    residual_norm: float


def _transpose(a: np.ndarray) -> np.ndarray:
    return np.swapaxes(a, -1, -2)


def _kronecker_operator(n: np.ndarray) -> np.ndarray:
    """
    Row-major vectorisation of X -> N X + X N^T:
    vec(N X) = (N kron I) vec(X), vec(X N^T) = (I kron N) vec(X).
    """
    d = n.shape[-1]
    eye = np.eye(d)
    left = np.einsum("...ij,kl->...ikjl", n, eye)
    right = np.einsum("ij,...kl->...ikjl", eye, n)
    return (left + right).reshape(n.shape[:-2] + (d * d, d * d))


def solve_lyapunov(
    M: np.ndarray, B: np.ndarray, side: LyapunovSide = LyapunovSide.MJ_JMT
) -> LyapunovSolution:
    """
    Solve M X + X M^T = B (MJ_JMt) or M^T X + X M = B (MtA_AM).

    `M` may carry leading batch axes; `B` broadcasts against it. The
    reported residual is the largest Frobenius residual over the batch.
    """
    M = np.asarray(M, dtype=float)
    B = np.asarray(B, dtype=float)
    side = LyapunovSide(side)
    d = M.shape[-1]
    n = M if side is LyapunovSide.MJ_JMT else _transpose(M)
    batch = np.broadcast_shapes(M.shape[:-2], B.shape[:-2])
    n = np.broadcast_to(n, batch + (d, d))
    rhs = np.broadcast_to(B, batch + (d, d))

    if not (np.isfinite(n).all() and np.isfinite(rhs).all()):
        raise NonFiniteField("Lyapunov coefficients are not finite")

    operator = _kronecker_operator(n)
    if np.any(np.linalg.cond(operator) > MAX_CONDITION):
        raise SingularSystem(
            "Lyapunov operator is numerically singular; "
            "the symmetric part of M is not positive definite"
        )
    target = rhs.reshape(batch + (d * d, 1))
    try:
        # LAPACK gesv: LU with partial pivoting, then one refinement step
        vec = np.linalg.solve(operator, target)
        vec = vec + np.linalg.solve(operator, target - operator @ vec)
    except np.linalg.LinAlgError as e:
        raise SingularSystem(f"Lyapunov operator is singular: {e}") from e
    solution = vec.reshape(batch + (d, d))

    if np.array_equal(rhs, _transpose(rhs)):
        solution = 0.5 * (solution + _transpose(solution))

    residual = n @ solution + solution @ _transpose(n) - rhs
    res_norm = np.linalg.norm(residual, axis=(-2, -1))
    allowed = RESIDUAL_RTOL * (1.0 + np.linalg.norm(rhs, axis=(-2, -1)))
    if not np.isfinite(solution).all() or np.any(res_norm > allowed):
        raise SingularSystem(
            f"Lyapunov residual {float(np.max(res_norm)):.3e} exceeds tolerance"
        )
    return LyapunovSolution(matrix=solution, residual_norm=float(np.max(res_norm)))


def covariance_J(M: np.ndarray) -> np.ndarray:
    """Solution of M J + J M^T = id; the stationary covariance of dY = -MY dt + dW."""
    M = np.asarray(M, dtype=float)
    return solve_lyapunov(M, np.eye(M.shape[-1]), LyapunovSide.MJ_JMT).matrix


def lyapunov_integral(
    M: np.ndarray, B: np.ndarray, upper: float = 40.0, tol: float = 1e-10
) -> np.ndarray:
    """
    Adaptive quadrature of int_0^upper exp(-Mt) B exp(-M^T t) dt. Cross-check
    for `solve_lyapunov` with the MJ_JMt convention.
    """
    M = np.asarray(M, dtype=float)
    B = np.asarray(B, dtype=float)

    def integrand(t: float) -> np.ndarray:
        e = expm(-M * t)
        return e @ B @ e.T

    value, _ = quad_vec(integrand, 0.0, upper, epsabs=tol, epsrel=tol)
    return value


def psd_sqrt(S: np.ndarray) -> np.ndarray:
    """Symmetric square root of a positive semidefinite matrix (batched)."""
    S = np.asarray(S, dtype=float)
    w, v = np.linalg.eigh(0.5 * (S + _transpose(S)))
    root = np.sqrt(np.clip(w, 0.0, None))
    return (v * root[..., None, :]) @ _transpose(v)


def friction_inverse(model: "ModelSpec", x: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.inv(model.friction(x))
    except np.linalg.LinAlgError as e:
        raise SingularSystem(f"friction matrix is singular: {e}") from e


def friction_inverse_gradient(model: "ModelSpec", x: np.ndarray) -> np.ndarray:
    """
    d(M^-1)/dx_j as (..., j, d, d). Uses -M^-1 (dM/dx_j) M^-1 when the model
    declares dM, else central differences of M^-1 with h=1e-5.
    """
    x = np.asarray(x, dtype=float)
    if model.friction_grad is not None:
        inverse = friction_inverse(model, x)
        grad = model.friction_grad(x)
        return -np.einsum("...ab,...jbc,...cd->...jad", inverse, grad, inverse)

    dim = x.shape[-1]
    shift = INVERSE_GRAD_STEP * np.eye(dim)
    forward = friction_inverse(model, x[..., None, :] + shift)
    backward = friction_inverse(model, x[..., None, :] - shift)
    return (forward - backward) / (2.0 * INVERSE_GRAD_STEP)


def noise_induced_drift(model: "ModelSpec", x: np.ndarray) -> np.ndarray:
    """S_j(x) = sum_{k,l} (d_l M^-1)_{jk}(x) J_{kl}(x)."""
    x = np.asarray(x, dtype=float)
    J = covariance_J(model.friction(x))
    d_inverse = friction_inverse_gradient(model, x)
    return np.einsum("...ljk,...kl->...j", d_inverse, J)


def area_correction_integrand(model: "ModelSpec", x: np.ndarray) -> np.ndarray:
    """1/2 (J M^-T - M^-1 J), the drift of the limit lift's level-2 correction."""
    x = np.asarray(x, dtype=float)
    friction = model.friction(x)
    J = covariance_J(friction)
    inverse = friction_inverse(model, x)
    return 0.5 * (J @ _transpose(inverse) - inverse @ J)
