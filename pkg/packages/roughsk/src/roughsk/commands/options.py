from pathlib import Path
from typing import Annotated, Optional

import typer
from common.callbacks import quiet_callback, verbose_callback

from roughsk.harness.config import ExperimentConfig, load_config

ConfigOption = Annotated[
    Optional[Path], typer.Option("-c", "--config", help="JSON experiment config")
]
SeedOption = Annotated[Optional[int], typer.Option("-s", "--seed", help="Override the seed")]
ModelOption = Annotated[
    Optional[str], typer.Option("-m", "--model", help="Registry model name")
]
EpsOption = Annotated[
    Optional[list[float]],
    typer.Option("-e", "--eps", help="Epsilon value (repeatable, descending)"),
]
OutOption = Annotated[Optional[Path], typer.Option("-o", "--out", help="Output directory")]
ThreadsOption = Annotated[
    Optional[int], typer.Option("-t", "--threads", help="Maximum number of worker processes")
]
DiagnosticsOption = Annotated[
    bool, typer.Option("-d", "--diagnostics", help="Enable resource usage reporting")
]
TimingOption = Annotated[
    bool, typer.Option("--timing", help="Record wall time in the report")
]
QuietOption = Annotated[
    bool,
    typer.Option(
        "-q", "--quiet", is_eager=True, callback=quiet_callback, help="Errors only, no tables"
    ),
]
VerboseOption = Annotated[
    int, typer.Option("-v", "--verbose", count=True, callback=verbose_callback)
]


def build_config(
    config: Path | None,
    seed: int | None = None,
    model: str | None = None,
    eps: list[float] | None = None,
    out: Path | None = None,
    holder_eps: float | None = None,
) -> ExperimentConfig:
    """Load the config file (or defaults), apply CLI overrides and validate."""
    loaded = load_config(config)
    return loaded.with_overrides(
        seed=seed,
        model_name=model,
        epsilons=eps,
        outputs=out,
        holder_epsilon=holder_eps,
    ).validate()
