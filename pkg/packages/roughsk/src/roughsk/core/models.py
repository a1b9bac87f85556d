"""
Problem instances for the damped Langevin system: friction field M(x),
force F(x) and their derivatives, plus a probe-based check of the standing
assumptions.

Every field is vectorised over leading axes. For points `x` of shape
(..., d):

  friction(x)       -> (..., d, d)
  friction_grad(x)  -> (..., d, d, d), entry [..., j, :, :] is dM/dx_j
  force(x)          -> (..., d)

Global Lipschitz and boundedness assumptions cannot be verified on all of
R^d; `check_assumptions` evaluates them on a finite probe cloud, so a pass
is a necessary condition only.
"""

import math
from collections.abc import Callable
from dataclasses import asdict, dataclass, field

import numpy as np
from common.logger import get_logger

from roughsk.core.exceptions import NonFiniteField, UnknownModel

logger = get_logger(__name__)

FRICTION_GRAD_STEP = 1e-5
GRADIENT_RTOL = 1e-5
PRODUCT_RULE_RTOL = 1e-4
LIPSCHITZ_PAIRS = 2000
PERTURBATION = 1e-3
SINGULAR_COND = 1e12

Field = Callable[[np.ndarray], np.ndarray]

_model_registry: dict[str, Callable[[], "ModelSpec"]] = {}


@dataclass(frozen=True)
class ModelSpec:
    name: str
    dim: int
    friction: Field
    force: Field
    lam: float
    horizon: float = 1.0
    friction_grad: Field | None = None
    force_bound: float = math.inf
    friction_bound: float | None = None
    lipschitz_bound: float = 10.0

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError(f"dim must be positive, got {self.dim}")
        if self.lam <= 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    value: float
    bound: float
    witness: tuple[float, ...] | None = None
    evaluated: bool = True


@dataclass
class AssumptionReport:
    model: str
    probes: int
    checks: list[AssumptionCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def get(self, name: str) -> AssumptionCheck:
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def failed(self) -> list[AssumptionCheck]:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "probes": self.probes,
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
        }


def register_model(name: str) -> Callable:
    """
    Decorator to register a zero-argument model factory by name.
    Registered models are selectable from experiment configs and the CLI.
    """

    def decorator(fn):
        _model_registry[name] = fn
        return fn

    return decorator


def builtin_model(name: str) -> ModelSpec:
    """Build a registered model by name."""
    factory = _model_registry.get(name)
    if factory is None:
        raise UnknownModel(
            f"Unknown model '{name}', expected one of: {', '.join(list_models())}"
        )
    return factory()


def list_models() -> list[str]:
    return sorted(_model_registry)


def _constant(matrix: np.ndarray) -> Field:
    def friction(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(matrix, x.shape[:-1] + matrix.shape).copy()

    return friction


def _zero_gradient(dim: int) -> Field:
    def friction_grad(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.zeros(x.shape[:-1] + (dim, dim, dim))

    return friction_grad


def _zero_force(x: np.ndarray) -> np.ndarray:
    return np.zeros_like(np.asarray(x, dtype=float))


@register_model("const_iso")
def const_iso() -> ModelSpec:
    dim = 2
    return ModelSpec(
        name="const_iso",
        dim=dim,
        friction=_constant(np.eye(dim)),
        friction_grad=_zero_gradient(dim),
        force=_zero_force,
        lam=1.0,
        force_bound=0.0,
        friction_bound=1.0,
    )


@register_model("const_rot2")
def const_rot2() -> ModelSpec:
    # symmetric part is the identity, antisymmetric part a rotation generator
    m = np.array([[1.0, 1.0], [-1.0, 1.0]])
    return ModelSpec(
        name="const_rot2",
        dim=2,
        friction=_constant(m),
        friction_grad=_zero_gradient(2),
        force=_zero_force,
        lam=1.0,
        force_bound=0.0,
        friction_bound=math.sqrt(2.0),
    )


@register_model("scalar_sin")
def scalar_sin() -> ModelSpec:
    def friction(x):
        x = np.asarray(x, dtype=float)
        return (2.0 + np.sin(x))[..., None]

    def friction_grad(x):
        x = np.asarray(x, dtype=float)
        return np.cos(x)[..., None, None]

    def force(x):
        return np.sin(np.asarray(x, dtype=float))

    return ModelSpec(
        name="scalar_sin",
        dim=1,
        friction=friction,
        friction_grad=friction_grad,
        force=force,
        lam=1.0,
        force_bound=1.0,
        friction_bound=3.0,
    )


@register_model("diag_tanh")
def diag_tanh() -> ModelSpec:
    def friction(x):
        x = np.asarray(x, dtype=float)
        diag = 2.0 + np.tanh(x)
        return diag[..., :, None] * np.eye(2)

    def friction_grad(x):
        x = np.asarray(x, dtype=float)
        sech2 = 1.0 / np.cosh(x) ** 2
        out = np.zeros(x.shape[:-1] + (2, 2, 2))
        out[..., 0, 0, 0] = sech2[..., 0]
        out[..., 1, 1, 1] = sech2[..., 1]
        return out

    def force(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.stack([np.sin(x[..., 1]), np.cos(x[..., 0])], axis=-1)

    return ModelSpec(
        name="diag_tanh",
        dim=2,
        friction=friction,
        friction_grad=friction_grad,
        force=force,
        lam=1.0,
        force_bound=0.5 * math.sqrt(2.0),
        friction_bound=3.0,
    )


def probe_cloud(
    dim: int, n: int = 200, low: float = -5.0, high: float = 5.0, seed: int = 0
) -> np.ndarray:
    """Uniform probe points in the box [low, high]^dim."""
    rng = np.random.default_rng(seed)
    return rng.uniform(low, high, size=(n, dim))


def _as_points(model: ModelSpec, points) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1 and model.dim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[1] != model.dim:
        raise ValueError(f"probes must have shape (n, {model.dim}), got {arr.shape}")
    if len(arr) == 0:
        raise ValueError("probes must be nonempty")
    return arr


def _require_finite(name: str, values: np.ndarray, points: np.ndarray) -> None:
    bad = ~np.isfinite(values.reshape(len(points), -1)).all(axis=1)
    if bad.any():
        witness = tuple(points[np.argmax(bad)])
        raise NonFiniteField(f"{name} is not finite at x={witness}")


def _safe_inverse(friction: np.ndarray, points: np.ndarray) -> np.ndarray:
    try:
        inverse = np.linalg.inv(friction)
    except np.linalg.LinAlgError:
        singular = np.abs(np.linalg.det(friction)) == 0.0
        witness = tuple(points[np.argmax(singular)])
        raise NonFiniteField(f"friction is singular at x={witness}") from None
    _require_finite("friction inverse", inverse, points)
    return inverse


def finite_difference_gradient(fn: Field, x: np.ndarray, h: float) -> np.ndarray:
    """
    Central differences of a matrix field. Returns (..., d, ...) where the
    axis after the batch axes indexes the differentiation direction.
    """
    x = np.asarray(x, dtype=float)
    dim = x.shape[-1]
    shift = h * np.eye(dim)
    forward = fn(x[..., None, :] + shift)
    backward = fn(x[..., None, :] - shift)
    return (forward - backward) / (2.0 * h)


def friction_gradient(model: ModelSpec, x: np.ndarray) -> np.ndarray:
    """Declared dM/dx_j, or central differences with h=1e-5 when absent."""
    if model.friction_grad is not None:
        return model.friction_grad(x)
    return finite_difference_gradient(model.friction, x, FRICTION_GRAD_STEP)


def _relative_gap(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(1.0, float(np.max(np.abs(b))))
    return float(np.max(np.abs(a - b))) / scale


def _lipschitz(values_a, values_b, points_a, points_b) -> tuple[float, int]:
    n = len(points_a)
    num = np.linalg.norm((values_a - values_b).reshape(n, -1), axis=1)
    den = np.linalg.norm(points_a - points_b, axis=1)
    quotients = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    worst = int(np.argmax(quotients))
    return float(quotients[worst]), worst


def _singular_mask(friction: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.linalg.cond(friction)
    return ~(cond < SINGULAR_COND)


def _not_evaluated(name: str, bound: float) -> AssumptionCheck:
    return AssumptionCheck(name, passed=False, value=math.nan, bound=bound, evaluated=False)


def _point(x: np.ndarray) -> tuple[float, ...]:
    return tuple(float(v) for v in x)


def check_assumptions(
    model: ModelSpec, probes, rng_seed: int = 0
) -> AssumptionReport:
    """
    Check ellipticity, gradient consistency, Lipschitz and boundedness
    assumptions of `model` on the probe points. Lipschitz quotients are
    taken over seeded random probe pairs and over a small perturbation of
    every probe.

    A1 runs first. When M is singular at a probe (or at its perturbation)
    A1 fails with that point as witness and the checks that need M^-1 are
    reported with `evaluated=False`.
    """
    points = _as_points(model, probes)
    n = len(points)
    logger.debug(f"Checking assumptions for model={model.name} probes={n}")

    friction = model.friction(points)
    force = model.force(points)
    _require_finite("friction", friction, points)
    _require_finite("force", force, points)

    rng = np.random.default_rng(rng_seed)
    if n >= 2:
        count = min(LIPSCHITZ_PAIRS, n * (n - 1) // 2)
        first = rng.integers(0, n, size=count)
        second = (first + rng.integers(1, n, size=count)) % n
    else:
        first = second = np.zeros(0, dtype=int)
    direction = rng.normal(size=points.shape)
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    nearby = points + PERTURBATION * direction
    near_friction = model.friction(nearby)
    near_force = model.force(nearby)
    _require_finite("friction", near_friction, nearby)
    _require_finite("force", near_force, nearby)

    report = AssumptionReport(model=model.name, probes=n)

    sym = 0.5 * (friction + np.swapaxes(friction, -1, -2))
    smallest = np.linalg.eigvalsh(sym)[:, 0]
    worst = int(np.argmin(smallest))
    singular = _singular_mask(friction) | _singular_mask(near_friction)
    if singular.any():
        worst = int(np.argmax(singular))
        logger.warning(f"Friction of model={model.name} is singular near x={_point(points[worst])}")
    report.checks.append(
        AssumptionCheck(
            name="A1",
            passed=bool(smallest[worst] >= model.lam - 1e-12) and not singular.any(),
            value=float(smallest[worst]),
            bound=model.lam,
            witness=_point(points[worst]),
        )
    )

    grad = friction_gradient(model, points)
    _require_finite("friction gradient", grad, points)
    near_grad = friction_gradient(model, nearby)

    if model.friction_grad is not None:
        fd = finite_difference_gradient(model.friction, points, FRICTION_GRAD_STEP)
        gap = _relative_gap(grad, fd)
        report.checks.append(
            AssumptionCheck("A2-gradient", gap <= GRADIENT_RTOL, gap, GRADIENT_RTOL)
        )

    pairs_a = np.concatenate([points[first], points])
    pairs_b = np.concatenate([points[second], nearby])

    def lipschitz_check(name: str, at_probes: np.ndarray, at_nearby: np.ndarray) -> AssumptionCheck:
        values_a = np.concatenate([at_probes[first], at_probes])
        values_b = np.concatenate([at_probes[second], at_nearby])
        quotient, idx = _lipschitz(values_a, values_b, pairs_a, pairs_b)
        return AssumptionCheck(
            name=name,
            passed=quotient <= model.lipschitz_bound,
            value=quotient,
            bound=model.lipschitz_bound,
            witness=_point(pairs_a[idx]),
        )

    if singular.any():
        if model.friction_grad is None:
            report.checks.append(_not_evaluated("A2-gradient", PRODUCT_RULE_RTOL))
        report.checks.append(lipschitz_check("A3-lipschitz-M", friction, near_friction))
        report.checks.append(_not_evaluated("A3-lipschitz-Minv", model.lipschitz_bound))
        report.checks.append(_not_evaluated("A3-lipschitz-dMinv", model.lipschitz_bound))
        report.checks.append(lipschitz_check("A4-lipschitz-F", force, near_force))
        report.checks.append(_not_evaluated("A3-bounded-inverse", 1.0 / model.lam))
    else:
        inverse = _safe_inverse(friction, points)
        near_inverse = _safe_inverse(near_friction, nearby)
        # d(M^-1)/dx_j = -M^-1 (dM/dx_j) M^-1
        inv_grad = -np.einsum("nab,njbc,ncd->njad", inverse, grad, inverse)
        near_inv_grad = -np.einsum("nab,njbc,ncd->njad", near_inverse, near_grad, near_inverse)

        if model.friction_grad is None:
            fd_inv = finite_difference_gradient(
                lambda p: np.linalg.inv(model.friction(p)), points, FRICTION_GRAD_STEP
            )
            gap = _relative_gap(inv_grad, fd_inv)
            report.checks.append(
                AssumptionCheck("A2-gradient", gap <= PRODUCT_RULE_RTOL, gap, PRODUCT_RULE_RTOL)
            )

        for name, at_probes, at_nearby in (
            ("A3-lipschitz-M", friction, near_friction),
            ("A3-lipschitz-Minv", inverse, near_inverse),
            ("A3-lipschitz-dMinv", inv_grad, near_inv_grad),
            ("A4-lipschitz-F", force, near_force),
        ):
            report.checks.append(lipschitz_check(name, at_probes, at_nearby))

        # |M^-1| <= 1/lambda follows from ellipticity
        inv_norms = np.linalg.norm(inverse, ord=2, axis=(1, 2))
        worst = int(np.argmax(inv_norms))
        report.checks.append(
            AssumptionCheck(
                name="A3-bounded-inverse",
                passed=bool(inv_norms[worst] <= 1.0 / model.lam + 1e-12),
                value=float(inv_norms[worst]),
                bound=1.0 / model.lam,
                witness=_point(points[worst]),
            )
        )

    force_norms = np.linalg.norm(force, axis=1)
    worst = int(np.argmax(force_norms))
    report.checks.append(
        AssumptionCheck(
            name="A4-bounded-force",
            passed=bool(force_norms[worst] <= model.force_bound + 1e-12),
            value=float(force_norms[worst]),
            bound=model.force_bound,
            witness=_point(points[worst]),
        )
    )

    for check in report.failed():
        if not check.evaluated:
            continue
        logger.warning(
            f"Assumption {check.name} violated for model={model.name}: "
            f"value={check.value:.6g} bound={check.bound:.6g} witness={check.witness}"
        )
    return report
