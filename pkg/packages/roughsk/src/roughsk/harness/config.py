import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from enum import Enum
from pathlib import Path
from typing import Any

from common.logger import get_logger

from roughsk.core.averaging import G_FUNCTIONS, ScalarObservableSpec
from roughsk.core.exceptions import ConfigError, UnknownModel
from roughsk.core.models import ModelSpec, builtin_model
from roughsk.core.sde import Scheme

logger = get_logger(__name__)

DEFAULT_EPSILONS = [0.5, 0.354, 0.25, 0.177, 0.125]


class DtRuleKind(str, Enum):
    FIXED = "fixed"
    EPS_SCALED = "eps_scaled"


class HolderSource(str, Enum):
    FAST_SLOW = "fast_slow"
    LIMIT = "limit"


def _reject_unknown(data: dict[str, Any], cls, where: str) -> None:
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ConfigError(f"Unknown key(s) in {where}: {', '.join(unknown)}")


def _as_int(value: Any, name: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int | float):
        raise TypeError(f"{name} must be an integer, got {value!r}")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"{name} must be an integer, got {value!r}")
    return int(value)


def _require_object(data: Any, where: str) -> dict[str, Any]:
    if not isinstance(data, dict):
        raise ConfigError(f"{where} must be a JSON object, got {type(data).__name__}")
    return data


@dataclass
class DtRule:
    """Fine simulation step: dt = c eps^2 (eps_scaled) or a fixed dt."""

    kind: DtRuleKind = DtRuleKind.EPS_SCALED
    c: float = 0.05
    dt: float | None = None

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "DtRule":
        d = _require_object(d, "fine_dt_rule")
        _reject_unknown(d, DtRule, "fine_dt_rule")
        try:
            return DtRule(
                kind=DtRuleKind(d.get("kind", DtRuleKind.EPS_SCALED.value)),
                c=float(d.get("c", 0.05)),
                dt=None if d.get("dt") is None else float(d["dt"]),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid fine_dt_rule: {e}") from e

    def to_dict(self) -> dict[str, Any]:
        if self.kind is DtRuleKind.FIXED:
            return {"kind": self.kind.value, "dt": self.dt}
        return {"kind": self.kind.value, "c": self.c}

    def validate(self) -> None:
        if self.kind is DtRuleKind.FIXED:
            if self.dt is None or not self.dt > 0:
                raise ConfigError("fine_dt_rule 'fixed' needs a positive dt")
        elif not self.c > 0:
            raise ConfigError("fine_dt_rule 'eps_scaled' needs a positive c")

    def raw_dt(self, epsilon: float) -> float:
        if self.kind is DtRuleKind.FIXED:
            return self.dt
        return self.c * epsilon * epsilon

    def grid(self, epsilon: float, horizon: float, coarsen: int) -> tuple[int, float]:
        """(fine steps, fine dt); steps rounded up to a multiple of `coarsen`."""
        steps = math.ceil(horizon / self.raw_dt(epsilon) / coarsen - 1e-9) * coarsen
        steps = max(steps, coarsen)
        return steps, horizon / steps


@dataclass
class ObservableConfig:
    kind: str = "XYY"
    i: int = 1
    k: int = 1
    l: int = 1
    g: str = "one"

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "ObservableConfig":
        d = _require_object(d, "observable")
        _reject_unknown(d, ObservableConfig, "observable")
        try:
            return ObservableConfig(
                kind=str(d.get("kind", "XYY")),
                i=_as_int(d.get("i", 1), "i"),
                k=_as_int(d.get("k", 1), "k"),
                l=_as_int(d.get("l", 1), "l"),
                g=str(d.get("g", "one")),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid observable: {e}") from e

    def build(self) -> ScalarObservableSpec:
        try:
            return ScalarObservableSpec.named(self.kind, k=self.k, l=self.l, i=self.i, g=self.g)
        except ValueError as e:
            raise ConfigError(f"Invalid observable: {e}") from e


@dataclass
class ExperimentConfig:
    model_name: str = "scalar_sin"
    epsilons: list[float] = field(default_factory=lambda: list(DEFAULT_EPSILONS))
    fine_dt_rule: DtRule = field(default_factory=DtRule)
    coarsen: int = 16
    horizon: float = 1.0
    n_paths: int = 100
    alpha: float = 0.4
    p_moments: list[int] = field(default_factory=lambda: [2])
    seed: int = 0
    scheme: Scheme = Scheme.EXPONENTIAL_EULER
    outputs: Path = Path("outputs")
    observable: ObservableConfig = field(default_factory=ObservableConfig)
    holder_epsilon: float = 0.25
    holder_source: HolderSource = HolderSource.FAST_SLOW
    batch_size: int = 32
    stability_factor: float = 0.1
    blowup_threshold: float = 1e8

    @staticmethod
    def from_dict(d: dict[str, Any]) -> "ExperimentConfig":
        d = _require_object(d, "config")
        _reject_unknown(d, ExperimentConfig, "config")
        base = ExperimentConfig()
        try:
            return ExperimentConfig(
                model_name=str(d.get("model_name", base.model_name)),
                epsilons=[float(e) for e in d.get("epsilons", base.epsilons)],
                fine_dt_rule=DtRule.from_dict(d.get("fine_dt_rule", {})),
                coarsen=_as_int(d.get("coarsen", base.coarsen), "coarsen"),
                horizon=float(d.get("horizon", base.horizon)),
                n_paths=_as_int(d.get("n_paths", base.n_paths), "n_paths"),
                alpha=float(d.get("alpha", base.alpha)),
                p_moments=[_as_int(p, "p_moments") for p in d.get("p_moments", base.p_moments)],
                seed=_as_int(d.get("seed", base.seed), "seed"),
                scheme=Scheme(d.get("scheme", base.scheme.value)),
                outputs=Path(d.get("outputs", base.outputs)),
                observable=ObservableConfig.from_dict(d.get("observable", {})),
                holder_epsilon=float(d.get("holder_epsilon", base.holder_epsilon)),
                holder_source=HolderSource(d.get("holder_source", base.holder_source.value)),
                batch_size=_as_int(d.get("batch_size", base.batch_size), "batch_size"),
                stability_factor=float(d.get("stability_factor", base.stability_factor)),
                blowup_threshold=float(d.get("blowup_threshold", base.blowup_threshold)),
            )
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid config value: {e}") from e

    def to_dict(self) -> dict[str, Any]:
        data = asdict(self)
        data["fine_dt_rule"] = self.fine_dt_rule.to_dict()
        data["scheme"] = self.scheme.value
        data["holder_source"] = self.holder_source.value
        data["outputs"] = str(self.outputs)
        return data

    def config_hash(self) -> str:
        """sha256 of the canonical JSON form, output directory excluded."""
        data = self.to_dict()
        data.pop("outputs")
        canonical = json.dumps(data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_overrides(
        self,
        seed: int | None = None,
        model_name: str | None = None,
        epsilons: list[float] | None = None,
        outputs: Path | None = None,
        holder_epsilon: float | None = None,
    ) -> "ExperimentConfig":
        changes = {
            "seed": seed,
            "model_name": model_name,
            "epsilons": list(epsilons) if epsilons else None,
            "outputs": outputs,
            "holder_epsilon": holder_epsilon,
        }
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

    def model(self) -> ModelSpec:
        try:
            return builtin_model(self.model_name)
        except UnknownModel as e:
            raise ConfigError(str(e)) from e

    def validate(self) -> "ExperimentConfig":
        if not self.epsilons:
            raise ConfigError("epsilons must not be empty")
        if any(not 0.0 < e <= 1.0 for e in self.epsilons):
            raise ConfigError(f"epsilons must lie in (0, 1], got {self.epsilons}")
        if any(a <= b for a, b in zip(self.epsilons, self.epsilons[1:])):
            raise ConfigError(f"epsilons must be strictly decreasing, got {self.epsilons}")
        if not 1.0 / 3.0 < self.alpha < 0.5:
            raise ConfigError(f"alpha must lie in (1/3, 1/2), got {self.alpha}")
        if self.seed < 0:
            raise ConfigError(f"seed must be >= 0, got {self.seed}")
        if self.n_paths < 2:
            raise ConfigError(f"n_paths must be >= 2, got {self.n_paths}")
        if self.coarsen < 2:
            raise ConfigError(f"coarsen must be >= 2, got {self.coarsen}")
        if not self.horizon > 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if not self.p_moments or any(p < 1 for p in self.p_moments):
            raise ConfigError(f"p_moments must be integers >= 1, got {self.p_moments}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not 0.0 < self.holder_epsilon <= 1.0:
            raise ConfigError(f"holder_epsilon must lie in (0, 1], got {self.holder_epsilon}")
        if not self.stability_factor > 0 or not self.blowup_threshold > 0:
            raise ConfigError("stability_factor and blowup_threshold must be positive")
        if self.observable.g not in G_FUNCTIONS:
            raise ConfigError(
                f"observable g must be one of {', '.join(G_FUNCTIONS)}, got '{self.observable.g}'"
            )
        self.fine_dt_rule.validate()
        model = self.model()
        try:
            self.observable.build().validate(model.dim)
        except ValueError as e:
            raise ConfigError(f"Invalid observable: {e}") from e
        return self


def load_config(path: Path | None) -> ExperimentConfig:
    """Read a UTF-8 JSON config file; no path gives the documented defaults."""
    if path is None:
        return ExperimentConfig()
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Config file not found: {path}")
    try:
        with path.open(encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
        raise ConfigError(f"Failed to read config {path}: {e}") from e
    config = ExperimentConfig.from_dict(raw)
    logger.info(f"Loaded config from {path} (model={config.model_name}, n_paths={config.n_paths})")
    return config
