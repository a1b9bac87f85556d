"""
Time stepping for the rescaled fast-slow pair

    dX = (1/eps) Y dt
    dY = -(1/eps^2) M(X) Y dt + (1/eps) F(X) dt + (1/eps) dW,

its small-mass limit

    dX = [S(X) + M^-1(X) F(X)] dt + M^-1(X) dW,

and the frozen Ornstein-Uhlenbeck process dY = -M Y dt + dW.

All simulations start at zero and are driven by a `NoiseBundle`. Passing
the same bundle to `simulate_fast_slow` and `simulate_limit` couples them
through index-aligned Brownian increments. Bundles and paths may carry
leading batch axes: increments (..., n, d), values (..., n+1, d).

Exponential Euler (frozen coefficients per step, exact in law):

    E   = exp(-M dt / eps^2)
    Y'  = E Y + eps M^-1 (I - E) F + eta
    X'  = X + M^-1 (dW + F dt) - eps M^-1 (Y' - Y)

eta is Gaussian with covariance J - E J E^T (J solves M J + J M^T = I) and
cross-covariance eps M^-1 (I - E) with dW. It is drawn as the regression on
dW plus an independent remainder from the bundle's auxiliary normals.
"""

import math
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
from common.logger import get_logger
from scipy.linalg import expm

from roughsk.core.exceptions import BlowUp, GridMismatch, StabilityViolation
from roughsk.core.linalg import (
    covariance_J,
    friction_inverse,
    noise_induced_drift,
    psd_sqrt,
)
from roughsk.core.models import ModelSpec, probe_cloud

logger = get_logger(__name__)

BLOWUP_THRESHOLD = 1e8
STABILITY_FACTOR = 0.1


class Scheme(str, Enum):
    EULER_MARUYAMA = "EulerMaruyama"
    EXPONENTIAL_EULER = "ExponentialEuler"


@dataclass(frozen=True)
class NoiseBundle:
    dt: float
    increments: np.ndarray
    seed: int = 0
    auxiliary: np.ndarray | None = None
    stream: tuple[int, ...] = ()

    @property
    def n(self) -> int:
        return self.increments.shape[-2]

    @property
    def d(self) -> int:
        return self.increments.shape[-1]

    @property
    def batch_shape(self) -> tuple[int, ...]:
        return self.increments.shape[:-2]

    def auxiliary_normals(self) -> np.ndarray:
        if self.auxiliary is None:
            return np.zeros_like(self.increments)
        return self.auxiliary

    @staticmethod
    def zeros(n: int, d: int, dt: float) -> "NoiseBundle":
        return NoiseBundle(dt=dt, increments=np.zeros((n, d)))

    @staticmethod
    def stack(bundles: list["NoiseBundle"]) -> "NoiseBundle":
        """Stack single-path bundles along a new leading batch axis."""
        if not bundles:
            raise ValueError("cannot stack an empty list of bundles")
        first = bundles[0]
        if any(b.dt != first.dt or b.increments.shape != first.increments.shape
               for b in bundles):
            raise GridMismatch("bundles must share dt and shape to be stacked")
        return NoiseBundle(
            dt=first.dt,
            increments=np.stack([b.increments for b in bundles]),
            seed=first.seed,
            auxiliary=np.stack([b.auxiliary_normals() for b in bundles]),
        )


@dataclass(frozen=True)
class SamplePath:
    t0: float
    dt: float
    values: np.ndarray

    @property
    def n(self) -> int:
        """Number of grid steps (points minus one)."""
        return self.values.shape[-2] - 1

    @property
    def d(self) -> int:
        return self.values.shape[-1]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.n + 1)

    @property
    def horizon(self) -> float:
        return self.dt * self.n

    def unstack(self) -> list["SamplePath"]:
        """Split a batched path (b, n+1, d) into single paths."""
        if self.values.ndim == 2:
            return [self]
        flat = self.values.reshape((-1,) + self.values.shape[-2:])
        return [replace(self, values=v) for v in flat]

    def same_grid(self, other: "SamplePath") -> bool:
        return (
            self.values.shape == other.values.shape
            and math.isclose(self.dt, other.dt, rel_tol=1e-12)
            and math.isclose(self.t0, other.t0, abs_tol=1e-12)
        )

    def __sub__(self, other: "SamplePath") -> "SamplePath":
        if not self.same_grid(other):
            raise GridMismatch("paths do not share a grid")
        return replace(self, values=self.values - other.values)


def sample_noise(
    n: int, d: int, dt: float, seed: int, stream: tuple[int, ...] = ()
) -> NoiseBundle:
    """
    Brownian increments N(0, dt id) on n steps.

    The generator is Philox (counter-based) keyed by SeedSequence(seed,
    spawn_key=stream), so path k of a batch uses its own reproducible stream
    independent of how paths are distributed over workers. Row i is the
    i-th block of the stream; auxiliary normals follow the increments.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=tuple(stream))
    generator = np.random.Generator(np.random.Philox(sequence))
    increments = math.sqrt(dt) * generator.standard_normal((n, d))
    auxiliary = generator.standard_normal((n, d))
    return NoiseBundle(
        dt=dt, increments=increments, seed=seed, auxiliary=auxiliary, stream=stream
    )


def friction_scale(model: ModelSpec) -> float:
    """Declared bound on |M(x)|_2, or its maximum over the default probe cloud."""
    if model.friction_bound is not None:
        return model.friction_bound
    probes = probe_cloud(model.dim)
    return float(np.max(np.linalg.norm(model.friction(probes), ord=2, axis=(1, 2))))


def _guard(x: np.ndarray, y: np.ndarray | None, step: int, threshold: float) -> None:
    norms = np.linalg.norm(x, axis=-1)
    if y is not None:
        norms = np.maximum(norms, np.linalg.norm(y, axis=-1))
    flat = np.ravel(norms)
    bad = ~np.isfinite(flat) | (flat > threshold)
    if bad.any():
        index = int(np.argmax(bad))
        raise BlowUp(
            f"state norm exceeded {threshold:g} at step {step} (path {index}); "
            "the time step is probably too large",
            path_index=index,
            step=step,
        )


def _check_dimensions(model: ModelSpec, noise: NoiseBundle) -> None:
    if noise.d != model.dim:
        raise GridMismatch(
            f"noise dimension {noise.d} does not match model dimension {model.dim}"
        )


def simulate_fast_slow(
    model: ModelSpec,
    epsilon: float,
    noise: NoiseBundle,
    scheme: Scheme = Scheme.EXPONENTIAL_EULER,
    stability_factor: float = STABILITY_FACTOR,
    blowup_threshold: float = BLOWUP_THRESHOLD,
) -> tuple[SamplePath, SamplePath]:
    """Simulate (X^eps, Y^eps) from zero initial data on the noise grid."""
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon}")
    _check_dimensions(model, noise)
    scheme = Scheme(scheme)
    dt = noise.dt
    eps2 = epsilon * epsilon

    if scheme is Scheme.EULER_MARUYAMA:
        limit = stability_factor * eps2 / friction_scale(model)
        if dt > limit:
            raise StabilityViolation(
                f"EulerMaruyama needs dt <= {limit:.3e} at epsilon={epsilon:g}, "
                f"got dt={dt:.3e}"
            )
    elif dt > epsilon:
        raise StabilityViolation(
            f"ExponentialEuler needs dt <= epsilon={epsilon:g}, got dt={dt:.3e}"
        )

    batch = noise.batch_shape
    d = model.dim
    xs = np.zeros(batch + (noise.n + 1, d))
    ys = np.zeros(batch + (noise.n + 1, d))
    x = np.zeros(batch + (d,))
    y = np.zeros(batch + (d,))
    eye = np.eye(d)
    auxiliary = noise.auxiliary_normals()
    logger.debug(
        f"simulate_fast_slow model={model.name} eps={epsilon:g} scheme={scheme.value} "
        f"steps={noise.n} dt={dt:.3e} batch={batch}"
    )

    for i in range(noise.n):
        dw = noise.increments[..., i, :]
        friction = model.friction(x)
        force = model.force(x)

        if scheme is Scheme.EULER_MARUYAMA:
            x_next = x + (dt / epsilon) * y
            y = (
                y
                - (dt / eps2) * np.einsum("...ij,...j->...i", friction, y)
                + (dt / epsilon) * force
                + dw / epsilon
            )
            x = x_next
        else:
            inverse = friction_inverse(model, x)
            decay = expm(-friction * (dt / eps2))
            J = covariance_J(friction)
            sigma = J - decay @ J @ np.swapaxes(decay, -1, -2)
            cross = epsilon * inverse @ (eye - decay)
            remainder = psd_sqrt(sigma - cross @ np.swapaxes(cross, -1, -2) / dt)
            eta = np.einsum("...ij,...j->...i", cross, dw) / dt + np.einsum(
                "...ij,...j->...i", remainder, auxiliary[..., i, :]
            )
            y_next = (
                np.einsum("...ij,...j->...i", decay, y)
                + np.einsum("...ij,...j->...i", cross, force)
                + eta
            )
            x = x + np.einsum(
                "...ij,...j->...i", inverse, dw + force * dt - epsilon * (y_next - y)
            )
            y = y_next

        _guard(x, y, i + 1, blowup_threshold)
        xs[..., i + 1, :] = x
        ys[..., i + 1, :] = y

    return SamplePath(0.0, dt, xs), SamplePath(0.0, dt, ys)


def simulate_limit(
    model: ModelSpec, noise: NoiseBundle, blowup_threshold: float = BLOWUP_THRESHOLD
) -> SamplePath:
    """Ito Euler-Maruyama for dX = [S + M^-1 F] dt + M^-1 dW from zero."""
    _check_dimensions(model, noise)
    dt = noise.dt
    batch = noise.batch_shape
    xs = np.zeros(batch + (noise.n + 1, model.dim))
    x = np.zeros(batch + (model.dim,))
    logger.debug(
        f"simulate_limit model={model.name} steps={noise.n} dt={dt:.3e} batch={batch}"
    )

    for i in range(noise.n):
        inverse = friction_inverse(model, x)
        drift = noise_induced_drift(model, x) + np.einsum(
            "...ij,...j->...i", inverse, model.force(x)
        )
        x = x + drift * dt + np.einsum(
            "...ij,...j->...i", inverse, noise.increments[..., i, :]
        )
        _guard(x, None, i + 1, blowup_threshold)
        xs[..., i + 1, :] = x

    return SamplePath(0.0, dt, xs)


def simulate_frozen(
    M_at_x: np.ndarray, noise: NoiseBundle, y0: np.ndarray | None = None
) -> SamplePath:
    """
    Exact OU stepping for dY = -M Y dt + dW at frozen M:
    Y' = exp(-M dt) Y + L dW / sqrt(dt), with L L^T = J - exp(-M dt) J exp(-M dt)^T.
    """
    M = np.asarray(M_at_x, dtype=float)
    d = M.shape[-1]
    if noise.d != d:
        raise GridMismatch(f"noise dimension {noise.d} does not match M ({d}x{d})")
    dt = noise.dt
    decay = expm(-M * dt)
    J = covariance_J(M)
    # int_0^dt e^{-Ms} e^{-M^T s} ds = J - e^{-M dt} J e^{-M^T dt}
    root = psd_sqrt(J - decay @ J @ decay.T)

    batch = noise.batch_shape
    ys = np.zeros(batch + (noise.n + 1, d))
    y = np.zeros(batch + (d,)) if y0 is None else np.broadcast_to(y0, batch + (d,))
    ys[..., 0, :] = y
    # row-vector form: y' = y E^T + dW L^T / sqrt(dt)
    scaled = noise.increments @ root.T / math.sqrt(dt)
    for i in range(noise.n):
        y = y @ decay.T + scaled[..., i, :]
        ys[..., i + 1, :] = y
    return SamplePath(0.0, dt, ys)


def change_of_variables(
    x_path: SamplePath, y_path: SamplePath, epsilon: float
) -> tuple[SamplePath, SamplePath]:
    """Velocity V = Y/eps and momentum P = eps Y of the fast-slow pair."""
    if not x_path.same_grid(y_path):
        raise GridMismatch("position and fast paths do not share a grid")
    velocity = replace(y_path, values=y_path.values / epsilon)
    momentum = replace(y_path, values=y_path.values * epsilon)
    return velocity, momentum


def coarsen(path: SamplePath, factor: int) -> SamplePath:
    """Every `factor`-th grid point; the step count must be divisible by it."""
    if factor < 1 or path.n % factor:
        raise GridMismatch(
            f"coarsen factor {factor} does not divide the {path.n}-step grid"
        )
    return SamplePath(path.t0, path.dt * factor, path.values[..., ::factor, :])
