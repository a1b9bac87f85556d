from rich.console import Console
from rich.table import Table

from roughsk.harness.report import ExperimentReport

console = Console()


def print_report(report: ExperimentReport) -> None:
    """Per-epsilon metrics as mean ± stderr, one column per epsilon."""
    table = Table(title=f"{report.kind} ({report.config.model_name}, seed={report.config.seed})")
    table.add_column("metric", style="magenta")
    for record in report.per_epsilon:
        table.add_column(f"ε={record.epsilon:g}", justify="right")

    names = list(report.per_epsilon[0].metrics) if report.per_epsilon else []
    for name in names:
        cells = []
        for record in report.per_epsilon:
            m = record.metrics[name]
            cells.append(f"{m.mean:.4g} [dim]± {m.stderr:.2g}[/dim]")
        trend = report.summary.get(name)
        label = name
        if isinstance(trend, dict) and "decreasing" in trend:
            label += " [green]↓[/green]" if trend["decreasing"] else " [red]✗[/red]"
        table.add_row(label, *cells)
    console.print(table)


def print_checks(rows: list[tuple[str, bool, str]], title: str = "self-test") -> None:
    table = Table(title=title)
    table.add_column("check", style="magenta")
    table.add_column("status")
    table.add_column("value", justify="right")
    for name, passed, value in rows:
        status = "[bold green]PASS[/bold green]" if passed else "[bold red]FAIL[/bold red]"
        table.add_row(name, status, value)
    console.print(table)
