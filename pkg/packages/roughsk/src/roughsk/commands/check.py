from itertools import product
from typing import Annotated, Optional

import numpy as np
import typer
from common.checks import check_python
from common.logger import get_logger

from roughsk.commands.options import QuietOption, VerboseOption
from roughsk.core.averaging import ObservableKind, ScalarObservableSpec, poisson_residual
from roughsk.core.exceptions import ConfigError, UnknownModel
from roughsk.core.linalg import covariance_J, friction_inverse, lyapunov_integral, solve_lyapunov
from roughsk.core.models import ModelSpec, builtin_model, check_assumptions, list_models, probe_cloud
from roughsk.utils.formatter import print_checks

logger = get_logger(__name__)

LYAPUNOV_TOL = 1e-10
QUADRATURE_TOL = 1e-6
COVARIATION_TOL = 1e-10
POISSON_TOL = 1e-7
QUADRATURE_PROBES = 5
POISSON_PROBES = 100


def self_test(model: ModelSpec, seed: int = 0) -> list[tuple[str, bool, str]]:
    """Assumption checks, Lyapunov residual and quadrature, covariation identity, Poisson residuals."""
    rows = []
    probes = probe_cloud(model.dim, n=200, seed=seed)
    report = check_assumptions(model, probes, rng_seed=seed)
    for c in report.checks:
        detail = f"{c.value:.3g} (bound {c.bound:.3g})" if c.evaluated else "not evaluated"
        rows.append((c.name, c.passed, detail))

    friction = model.friction(probes)
    eye = np.eye(model.dim)
    residual = solve_lyapunov(friction, eye).residual_norm
    rows.append(("lyapunov-residual", residual <= LYAPUNOV_TOL, f"{residual:.3e}"))

    J = covariance_J(friction)
    quad = max(
        float(np.max(np.abs(lyapunov_integral(friction[n], eye) - J[n])))
        for n in range(QUADRATURE_PROBES)
    )
    rows.append(("lyapunov-quadrature", quad <= QUADRATURE_TOL, f"{quad:.3e}"))

    inverse = friction_inverse(model, probes)
    inverse_t = np.swapaxes(inverse, -1, -2)
    covariation = float(np.max(np.abs(inverse @ inverse_t - (inverse @ J + J @ inverse_t))))
    rows.append(("covariation-identity", covariation <= COVARIATION_TOL, f"{covariation:.3e}"))

    rng = np.random.default_rng(seed)
    xs = probes[:POISSON_PROBES]
    ys = rng.normal(size=xs.shape)
    worst = 0.0
    for kind, k, l in product(ObservableKind, range(1, model.dim + 1), range(1, model.dim + 1)):
        obs = ScalarObservableSpec(kind, k=k, l=l)
        worst = max(worst, poisson_residual(obs, model, (xs, ys)))
    rows.append(("poisson-residual", worst <= POISSON_TOL, f"{worst:.3e}"))
    return rows


def check(
    model: Annotated[
        Optional[list[str]], typer.Option("-m", "--model", help="Model(s) to test; default all")
    ] = None,
    seed: Annotated[int, typer.Option("-s", "--seed", help="Probe cloud seed")] = 0,
    environment: Annotated[
        bool, typer.Option("--environment", help="Log interpreter and package versions")
    ] = False,
    quiet: QuietOption = False,
    verbose: VerboseOption = 0,
):
    """Numerical self-test of the models and kernels."""
    if environment:
        check_python(("numpy", "scipy", "typer", "rich"))
    names = model or list_models()
    failed = []
    for name in names:
        try:
            spec = builtin_model(name)
        except UnknownModel as e:
            raise ConfigError(str(e)) from e
        rows = self_test(spec, seed=seed)
        if not quiet:
            print_checks(rows, title=f"self-test: {name}")
        failed += [f"{name}:{row[0]}" for row in rows if not row[1]]

    if failed:
        logger.error(f"Self-test failed: {', '.join(failed)}")
        raise typer.Exit(code=2)
    logger.info(f"Self-test passed for {len(names)} model(s)")
