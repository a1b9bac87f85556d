import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Any

from common.logger import get_logger

from roughsk.harness.statistics import MetricSummary
from roughsk.utils.io import format_float

if TYPE_CHECKING:
    from roughsk.harness.config import ExperimentConfig

logger = get_logger(__name__)

TABLE_FIELDS = ["epsilon", "metric", "mean", "stderr", "n"]


@dataclass
class EpsilonRecord:
    epsilon: float
    fine_steps: int
    fine_dt: float
    coarse_steps: int
    metrics: dict[str, MetricSummary] = field(default_factory=dict)
    extras: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        return {
            "epsilon": self.epsilon,
            "fine_steps": self.fine_steps,
            "fine_dt": self.fine_dt,
            "coarse_steps": self.coarse_steps,
            "metrics": {name: m.to_dict() for name, m in self.metrics.items()},
        } | self.extras


@dataclass
class ExperimentReport:
    kind: str
    config: "ExperimentConfig"
    per_epsilon: list[EpsilonRecord]
    summary: dict[str, Any] = field(default_factory=dict)
    wall_time: float | None = None

    def record(self, epsilon: float) -> EpsilonRecord:
        for r in self.per_epsilon:
            if r.epsilon == epsilon:
                return r
        raise KeyError(f"no record for epsilon={epsilon}")

    def means(self, metric: str) -> list[float]:
        return [r.metrics[metric].mean for r in self.per_epsilon]

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        meta = {
            "kind": self.kind,
            "config_hash": self.config.config_hash(),
            "seed": self.config.seed,
            "model": self.config.model_name,
            "config": self.config.to_dict(),
        }
        meta["config"].pop("outputs")
        if timing and self.wall_time is not None:
            meta["wall_time"] = self.wall_time
        return {
            "meta": meta,
            "per_epsilon": [r.to_dict() for r in self.per_epsilon],
            "summary": self.summary,
        }


def write_report(report: ExperimentReport, path: Path, timing: bool = False) -> Path:
    """JSON report; floats use the shortest round-trip representation."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(report.to_dict(timing=timing), indent=2, allow_nan=False)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info(f"Report written to {path}")
    return path


def write_table(report: ExperimentReport, path: Path) -> Path:
    """One CSV row per (epsilon, metric), floats written with 17 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.DictWriter(f, fieldnames=TABLE_FIELDS, lineterminator="\n")
        writer.writeheader()
        for record in report.per_epsilon:
            for name, metric in record.metrics.items():
                writer.writerow(
                    {
                        "epsilon": format_float(record.epsilon),
                        "metric": name,
                        "mean": format_float(metric.mean),
                        "stderr": format_float(metric.stderr),
                        "n": metric.n,
                    }
                )
    logger.info(f"Table written to {path}")
    return path


def write_outputs(report: ExperimentReport, outputs: Path, timing: bool = False) -> tuple[Path, Path]:
    """`<kind>_report.json` and `<kind>_table.csv` under the output directory."""
    outputs = Path(outputs)
    return (
        write_report(report, outputs / f"{report.kind}_report.json", timing=timing),
        write_table(report, outputs / f"{report.kind}_table.csv"),
    )
