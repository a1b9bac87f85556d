from typing import Annotated, Optional

import typer
from common.logger import get_logger

from roughsk.commands.options import (
    ConfigOption,
    DiagnosticsOption,
    ModelOption,
    OutOption,
    QuietOption,
    SeedOption,
    ThreadsOption,
    TimingOption,
    VerboseOption,
    build_config,
)
from roughsk.harness.experiments import run_holder_scaling
from roughsk.harness.report import write_outputs
from roughsk.utils.formatter import print_report
from roughsk.utils.resource_monitor import with_resource_monitoring

logger = get_logger(__name__)


def holder(
    config: ConfigOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    eps: Annotated[
        Optional[float], typer.Option("-e", "--eps", help="Epsilon of the simulated path")
    ] = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
    diagnostics: DiagnosticsOption = False,
    timing: TimingOption = False,
    quiet: QuietOption = False,
    verbose: VerboseOption = 0,
):
    """Log-log slopes of level-1 and level-2 increment moments over dyadic gaps."""
    cfg = build_config(config, seed=seed, model=model, out=out, holder_eps=eps)
    report = with_resource_monitoring(enabled=diagnostics)(run_holder_scaling)(cfg, threads=threads)
    write_outputs(report, cfg.outputs, timing=timing)
    if not quiet:
        print_report(report)
