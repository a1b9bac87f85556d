from pathlib import Path
from typing import Annotated, Optional

import typer
from common.logger import get_logger

from roughsk.commands.options import (
    ConfigOption,
    EpsOption,
    ModelOption,
    QuietOption,
    SeedOption,
    VerboseOption,
    build_config,
)
from roughsk.core.roughpath import ito_lift, limit_lift
from roughsk.core.sde import sample_noise, simulate_fast_slow, simulate_limit
from roughsk.utils.io import write_lift_csv, write_path_csv

logger = get_logger(__name__)


def simulate(
    out: Annotated[Path, typer.Option("-o", "--out", help="Output CSV for (X, Y)")] = Path(
        "path.csv"
    ),
    config: ConfigOption = None,
    model: ModelOption = None,
    eps: EpsOption = None,
    seed: SeedOption = None,
    limit: Annotated[
        Optional[Path], typer.Option("--limit", help="Also write the limit SDE path (shared noise)")
    ] = None,
    lift: Annotated[
        Optional[Path], typer.Option("--lift", help="Also write the Ito lift areas of X")
    ] = None,
    all_pairs: Annotated[
        bool, typer.Option("--all-pairs", help="Write lift areas for every pair of coarse points")
    ] = False,
    quiet: QuietOption = False,
    verbose: VerboseOption = 0,
):
    """Simulate one fast-slow path and write it as CSV."""
    cfg = build_config(config, seed=seed, model=model, eps=eps[:1] if eps else None)
    spec = cfg.model()
    epsilon = cfg.epsilons[0]
    steps, dt = cfg.fine_dt_rule.grid(epsilon, cfg.horizon, cfg.coarsen)
    logger.info(f"simulate model={spec.name} eps={epsilon:g} steps={steps} seed={cfg.seed}")

    noise = sample_noise(steps, spec.dim, dt, cfg.seed, stream=(0, 0))
    x_path, y_path = simulate_fast_slow(
        spec,
        epsilon,
        noise,
        scheme=cfg.scheme,
        stability_factor=cfg.stability_factor,
        blowup_threshold=cfg.blowup_threshold,
    )
    write_path_csv(out, x_path, y_path)
    logger.info(f"Path written to {out}")

    if limit:
        x_limit = simulate_limit(spec, noise, blowup_threshold=cfg.blowup_threshold)
        write_path_csv(limit, x_limit)
        logger.info(f"Limit path written to {limit}")
        if lift:
            write_lift_csv(
                lift.with_name(f"{lift.stem}_limit{lift.suffix}"),
                limit_lift(x_limit, spec, cfg.coarsen),
                all_pairs=all_pairs,
            )
    if lift:
        write_lift_csv(lift, ito_lift(x_path, cfg.coarsen), all_pairs=all_pairs)
        logger.info(f"Lift written to {lift}")
