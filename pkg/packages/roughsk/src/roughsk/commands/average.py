from dataclasses import replace
from typing import Annotated, Optional

import typer
from common.logger import get_logger

from roughsk.commands.options import (
    ConfigOption,
    DiagnosticsOption,
    EpsOption,
    ModelOption,
    OutOption,
    QuietOption,
    SeedOption,
    ThreadsOption,
    TimingOption,
    VerboseOption,
    build_config,
)
from roughsk.harness.experiments import run_averaging_validation
from roughsk.harness.report import write_outputs
from roughsk.utils.formatter import print_report
from roughsk.utils.resource_monitor import with_resource_monitoring

logger = get_logger(__name__)


def average(
    config: ConfigOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    eps: EpsOption = None,
    out: OutOption = None,
    kind: Annotated[Optional[str], typer.Option("--kind", help="Observable form: XYY or YY")] = None,
    i: Annotated[Optional[int], typer.Option("--i", help="Index i (XYY only, 1-based)")] = None,
    k: Annotated[Optional[int], typer.Option("--k", help="Index k (1-based)")] = None,
    l: Annotated[Optional[int], typer.Option("--l", help="Index l (1-based)")] = None,
    g: Annotated[Optional[str], typer.Option("--g", help="g from the registry: one, cos, gauss")] = None,
    threads: ThreadsOption = None,
    diagnostics: DiagnosticsOption = False,
    timing: TimingOption = False,
    quiet: QuietOption = False,
    verbose: VerboseOption = 0,
):
    """Monte Carlo validation of the averaging principle along the epsilon ladder."""
    cfg = build_config(config, seed=seed, model=model, eps=eps, out=out)
    overrides = {"kind": kind, "i": i, "k": k, "l": l, "g": g}
    observable = replace(cfg.observable, **{key: v for key, v in overrides.items() if v is not None})
    cfg = replace(cfg, observable=observable).validate()
    obs = observable.build()

    report = with_resource_monitoring(enabled=diagnostics)(run_averaging_validation)(
        cfg, obs, threads=threads
    )
    write_outputs(report, cfg.outputs, timing=timing)
    if not quiet:
        print_report(report)
