"""
Averaging of fast-variable observables against the frozen OU law N(0, J(x)).

Observables have one of two quadratic forms in the fast variable y:

    XYY:  f(x, y) = x_i y_k y_l g(x)
    YY:   f(x, y) = y_k y_l g(x)

Their averages are f_bar(x) = x_i g(x) J_kl(x) (resp. g(x) J_kl(x)), and the
Poisson equation -L^x phi = f - f_bar of the frozen generator

    L^x phi(x, y) = (D_y phi, -M(x) y) + 1/2 Tr D_yy phi

is solved by phi(x, y) = c(x) (y^T A(x) y - Tr[A(x) J(x)]) with c(x) the
prefactor of the form and M^T A + A M = (e_k e_l^T + e_l e_k^T)/2.
Indices i, k, l are 1-based.
"""

from collections.abc import Callable
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from common.logger import get_logger

from roughsk.core.exceptions import GridMismatch, InsufficientData, NonFiniteField
from roughsk.core.linalg import LyapunovSide, covariance_J, solve_lyapunov
from roughsk.core.models import ModelSpec
from roughsk.core.sde import SamplePath

logger = get_logger(__name__)

GRADIENT_STEP = 1e-5
HESSIAN_STEP = 1e-4
MIN_SAMPLES = 1000
BURN_IN_FRACTION = 0.2

ScalarField = Callable[[np.ndarray], np.ndarray]


class ObservableKind(str, Enum):
    XYY = "XYY"
    YY = "YY"


def _g_one(x: np.ndarray) -> np.ndarray:
    return np.ones(np.shape(x)[:-1])


def _g_one_grad(x: np.ndarray) -> np.ndarray:
    return np.zeros(np.shape(x))


def _g_cos(x: np.ndarray) -> np.ndarray:
    return np.cos(np.asarray(x)[..., 0])


def _g_cos_grad(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    out = np.zeros(x.shape)
    out[..., 0] = -np.sin(x[..., 0])
    return out


def _g_gauss(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    return np.exp(-0.5 * np.sum(x * x, axis=-1))


def _g_gauss_grad(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x)
    return -x * _g_gauss(x)[..., None]


G_FUNCTIONS: dict[str, tuple[ScalarField, ScalarField]] = {
    "one": (_g_one, _g_one_grad),
    "cos": (_g_cos, _g_cos_grad),
    "gauss": (_g_gauss, _g_gauss_grad),
}


@dataclass(frozen=True)
class ScalarObservableSpec:
    kind: ObservableKind
    k: int
    l: int
    i: int = 1
    g: ScalarField = field(default=_g_one)
    g_grad: ScalarField | None = field(default=_g_one_grad)

    @staticmethod
    def named(kind: str, k: int, l: int, i: int = 1, g: str = "one") -> "ScalarObservableSpec":
        """Observable with g taken from the named registry (config/CLI use)."""
        if g not in G_FUNCTIONS:
            raise ValueError(f"Unknown g '{g}', expected one of: {', '.join(G_FUNCTIONS)}")
        fn, grad = G_FUNCTIONS[g]
        return ScalarObservableSpec(ObservableKind(kind), k=k, l=l, i=i, g=fn, g_grad=grad)

    def validate(self, dim: int) -> None:
        indices = (self.i, self.k, self.l) if self.kind is ObservableKind.XYY else (self.k, self.l)
        if any(not 1 <= idx <= dim for idx in indices):
            raise ValueError(f"observable indices {indices} out of range 1..{dim}")

    def prefactor(self, x: np.ndarray) -> np.ndarray:
        """x_i g(x) for XYY, g(x) for YY."""
        x = np.asarray(x, dtype=float)
        g = self.g(x)
        if not np.all(np.isfinite(g)):
            raise NonFiniteField("observable g is not finite")
        if self.kind is ObservableKind.XYY:
            return x[..., self.i - 1] * g
        return g

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        return self.prefactor(x) * y[..., self.k - 1] * y[..., self.l - 1]

    def symmetric_unit(self, dim: int) -> np.ndarray:
        """(e_k e_l^T + e_l e_k^T) / 2."""
        b = np.zeros((dim, dim))
        b[self.k - 1, self.l - 1] += 0.5
        b[self.l - 1, self.k - 1] += 0.5
        return b


def fbar(obs: ScalarObservableSpec, model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Average of f(x, .) under N(0, J(x))."""
    x = np.asarray(x, dtype=float)
    J = covariance_J(model.friction(x))
    return obs.prefactor(x) * J[..., obs.k - 1, obs.l - 1]


@dataclass(frozen=True)
class PoissonSolution:
    observable: ScalarObservableSpec
    model: ModelSpec

    def A_field(self, x: np.ndarray) -> np.ndarray:
        rhs = self.observable.symmetric_unit(self.model.dim)
        return solve_lyapunov(self.model.friction(x), rhs, LyapunovSide.MTA_AM).matrix

    def evaluate(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        A = self.A_field(x)
        J = covariance_J(self.model.friction(x))
        quad = np.einsum("...a,...ab,...b->...", y, A, y)
        trace = np.einsum("...ab,...ba->...", A, J)
        return self.observable.prefactor(x) * (quad - trace)

    def grad_y(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        A = self.A_field(x)
        return 2.0 * self.observable.prefactor(x)[..., None] * np.einsum(
            "...ab,...b->...a", A, np.asarray(y, dtype=float)
        )

    def hess_y(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        return 2.0 * self.observable.prefactor(x)[..., None, None] * self.A_field(x)


def poisson_solution(obs: ScalarObservableSpec, model: ModelSpec) -> PoissonSolution:
    obs.validate(model.dim)
    return PoissonSolution(observable=obs, model=model)


def _finite_difference_derivatives(phi, x, y) -> tuple[np.ndarray, np.ndarray]:
    y = np.asarray(y, dtype=float)
    dim = y.shape[-1]
    grad = np.zeros(dim)
    hess = np.zeros((dim, dim))
    h, H = GRADIENT_STEP, HESSIAN_STEP
    base = phi(x, y)
    for a in range(dim):
        ea = np.eye(dim)[a]
        grad[a] = (phi(x, y + h * ea) - phi(x, y - h * ea)) / (2 * h)
        hess[a, a] = (phi(x, y + H * ea) - 2 * base + phi(x, y - H * ea)) / H**2
        for b in range(a):
            eb = np.eye(dim)[b]
            hess[a, b] = hess[b, a] = (
                phi(x, y + H * (ea + eb))
                - phi(x, y + H * (ea - eb))
                - phi(x, y - H * (ea - eb))
                + phi(x, y - H * (ea + eb))
            ) / (4 * H**2)
    return grad, hess


def generator_apply(phi, M_at_x: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """
    Frozen generator (D_y phi, -M y) + 1/2 Tr D_yy phi.

    `phi` either exposes `grad_y(x, y)` and `hess_y(x, y)` (analytic, batched)
    or is a plain callable phi(x, y) differentiated by central differences
    (gradient h=1e-5, Hessian h=1e-4) at a single point.
    """
    M = np.asarray(M_at_x, dtype=float)
    y = np.asarray(y, dtype=float)
    if hasattr(phi, "grad_y") and hasattr(phi, "hess_y"):
        grad, hess = phi.grad_y(x, y), phi.hess_y(x, y)
    else:
        grad, hess = _finite_difference_derivatives(phi, x, y)
    drift = -np.einsum("...ab,...b->...a", M, y)
    value = np.einsum("...a,...a->...", grad, drift) + 0.5 * np.trace(hess, axis1=-2, axis2=-1)
    if not np.all(np.isfinite(value)):
        raise NonFiniteField("generator value is not finite")
    return value


def _split_probes(probes, dim: int) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(probes, tuple) and len(probes) == 2 and np.ndim(probes[0]) == 2:
        xs, ys = probes
    else:
        pairs = list(probes)
        xs = np.array([np.atleast_1d(p[0]) for p in pairs], dtype=float)
        ys = np.array([np.atleast_1d(p[1]) for p in pairs], dtype=float)
    xs = np.asarray(xs, dtype=float).reshape(-1, dim)
    ys = np.asarray(ys, dtype=float).reshape(-1, dim)
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise NonFiniteField("probes must be finite")
    return xs, ys


def poisson_residual(obs: ScalarObservableSpec, model: ModelSpec, probes) -> float:
    """max over probes of |L^x phi + f - f_bar| for the explicit corrector."""
    xs, ys = _split_probes(probes, model.dim)
    solution = poisson_solution(obs, model)
    generator = generator_apply(solution, model.friction(xs), xs, ys)
    residual = generator + obs.evaluate(xs, ys) - fbar(obs, model, xs)
    worst = float(np.max(np.abs(residual)))
    logger.debug(
        f"poisson_residual model={model.name} kind={obs.kind.value} "
        f"k={obs.k} l={obs.l} residual={worst:.3e}"
    )
    return worst


def polynomial_growth_constant(solution: PoissonSolution, xs: np.ndarray, ys: np.ndarray) -> float:
    """Smallest C with |phi(x, y)| <= C (1 + |x|^3 + |y|^3) on the given points."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    growth = 1.0 + np.linalg.norm(xs, axis=-1) ** 3 + np.linalg.norm(ys, axis=-1) ** 3
    return float(np.max(np.abs(solution.evaluate(xs, ys)) / growth))


def averaging_error(
    x_path: SamplePath, y_path: SamplePath, obs: ScalarObservableSpec, model: ModelSpec
) -> float | np.ndarray:
    """
    |int_0^T f(X_s, Y_s) - f_bar(X_s) ds| by left-point quadrature. Batched
    paths give one value per path.
    """
    if not x_path.same_grid(y_path):
        raise GridMismatch("position and fast paths do not share a grid")
    if x_path.n == 0:
        return 0.0 if x_path.values.ndim == 2 else np.zeros(x_path.values.shape[:-2])
    xs = x_path.values[..., :-1, :]
    ys = y_path.values[..., :-1, :]
    integrand = obs.evaluate(xs, ys) - fbar(obs, model, xs)
    error = np.abs(x_path.dt * np.sum(integrand, axis=-1))
    return float(error) if np.ndim(error) == 0 else error


def _post_burn_in(path: SamplePath, burn_in_fraction: float) -> np.ndarray:
    if not 0.0 <= burn_in_fraction < 1.0:
        raise ValueError(f"burn_in_fraction must lie in [0, 1), got {burn_in_fraction}")
    values = path.values
    if values.ndim != 2:
        raise GridMismatch("invariant statistics take a single (unbatched) path")
    start = int(burn_in_fraction * len(values))
    samples = values[start:]
    if len(samples) < MIN_SAMPLES:
        raise InsufficientData(
            f"need at least {MIN_SAMPLES} post-burn-in points, got {len(samples)}"
        )
    return samples


def empirical_invariant_covariance(
    frozen_path: SamplePath, burn_in_fraction: float = BURN_IN_FRACTION
) -> np.ndarray:
    """Sample covariance of the post-burn-in states."""
    samples = _post_burn_in(frozen_path, burn_in_fraction)
    return np.atleast_2d(np.cov(samples, rowvar=False))


def covariance_standard_error(
    frozen_path: SamplePath,
    burn_in_fraction: float = BURN_IN_FRACTION,
    n_batches: int = 20,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Sample covariance with batch-means standard errors, which account for
    the autocorrelation of consecutive OU states.
    """
    samples = _post_burn_in(frozen_path, burn_in_fraction)
    batches = np.array_split(samples, n_batches)
    covs = np.stack([np.atleast_2d(np.cov(b, rowvar=False)) for b in batches])
    stderr = covs.std(axis=0, ddof=1) / np.sqrt(n_batches)
    return np.atleast_2d(np.cov(samples, rowvar=False)), stderr
