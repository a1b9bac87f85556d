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
from roughsk.harness.experiments import run_convergence
from roughsk.harness.report import write_outputs
from roughsk.utils.formatter import print_report
from roughsk.utils.resource_monitor import with_resource_monitoring

logger = get_logger(__name__)


def converge(
    config: ConfigOption = None,
    seed: SeedOption = None,
    model: ModelOption = None,
    eps: EpsOption = None,
    out: OutOption = None,
    threads: ThreadsOption = None,
    diagnostics: DiagnosticsOption = False,
    timing: TimingOption = False,
    quiet: QuietOption = False,
    verbose: VerboseOption = 0,
):
    """Rough path convergence of the fast-slow system to its small-mass limit."""
    cfg = build_config(config, seed=seed, model=model, eps=eps, out=out)
    report = with_resource_monitoring(enabled=diagnostics)(run_convergence)(cfg, threads=threads)
    logger.info(f"converge finished in {report.wall_time:.1f}s")
    write_outputs(report, cfg.outputs, timing=timing)
    if not quiet:
        print_report(report)
