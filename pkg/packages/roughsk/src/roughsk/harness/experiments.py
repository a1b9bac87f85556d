"""
Monte Carlo drivers.

Paths are grouped in batches of `config.batch_size` consecutive indices;
each batch is one worker job and is simulated as a single vectorised
array. Path k at ladder index e draws its noise from the stream (e, k) of
the configured seed, so results do not depend on the worker count, and
per-path values are aggregated in path order.
"""

import time
from dataclasses import dataclass
from typing import Any

import numpy as np
from common.logger import get_logger
from more_itertools import chunked

from roughsk.core.averaging import ScalarObservableSpec, averaging_error
from roughsk.core.exceptions import BlowUp, InsufficientData, PathFailure
from roughsk.core.models import ModelSpec
from roughsk.core.roughpath import (
    holder_norm,
    ito_lift,
    limit_lift,
    rough_distance,
    stratonovich_lift,
)
from roughsk.core.sde import (
    NoiseBundle,
    SamplePath,
    coarsen,
    sample_noise,
    simulate_fast_slow,
    simulate_limit,
)
from roughsk.harness.config import ExperimentConfig, HolderSource
from roughsk.harness.executor import resolve_workers, run_jobs
from roughsk.harness.report import EpsilonRecord, ExperimentReport
from roughsk.harness.statistics import (
    MetricSummary,
    SlopeFit,
    fit_slope,
    fitted_rate,
    is_decreasing,
    summarize,
    summarize_matrix,
)

logger = get_logger(__name__)

MIN_GAPS = 4
SMOOTH_SLOPE_TOLERANCE = 0.1


@dataclass(frozen=True)
class PathJob:
    config: ExperimentConfig
    epsilon_index: int
    epsilon: float
    start: int
    stop: int
    observable: ScalarObservableSpec | None = None

    @property
    def size(self) -> int:
        return self.stop - self.start


def _jobs(
    config: ExperimentConfig,
    epsilon_index: int,
    epsilon: float,
    observable: ScalarObservableSpec | None = None,
) -> list[PathJob]:
    return [
        PathJob(config, epsilon_index, epsilon, chunk[0], chunk[-1] + 1, observable)
        for chunk in chunked(range(config.n_paths), config.batch_size)
    ]


def _batch_noise(job: PathJob, model: ModelSpec) -> NoiseBundle:
    config = job.config
    steps, dt = config.fine_dt_rule.grid(job.epsilon, config.horizon, config.coarsen)
    return NoiseBundle.stack(
        [
            sample_noise(steps, model.dim, dt, config.seed, stream=(job.epsilon_index, k))
            for k in range(job.start, job.stop)
        ]
    )


def _simulate_batch(job: PathJob, with_limit: bool = True):
    config = job.config
    model = config.model()
    noise = _batch_noise(job, model)
    try:
        x_eps, y_eps = simulate_fast_slow(
            model,
            job.epsilon,
            noise,
            scheme=config.scheme,
            stability_factor=config.stability_factor,
            blowup_threshold=config.blowup_threshold,
        )
        x_lim = (
            simulate_limit(model, noise, blowup_threshold=config.blowup_threshold)
            if with_limit
            else None
        )
    except BlowUp as e:
        raise PathFailure(job.epsilon, job.start + e.path_index, e) from e
    return model, x_eps, y_eps, x_lim


def _sup_norm(values: np.ndarray) -> np.ndarray:
    return np.max(np.linalg.norm(values, axis=-1), axis=-1)


def convergence_worker(job: PathJob) -> dict[str, Any]:
    """Per-path convergence metrics for one batch plus fast-variable moment sums."""
    config = job.config
    model, x_eps, y_eps, x_lim = _simulate_batch(job)
    obs = config.observable.build()
    avg_errors = np.atleast_1d(averaging_error(x_eps, y_eps, obs, model))
    sup_x = _sup_norm(x_eps.values)
    y_norms = np.linalg.norm(y_eps.values, axis=-1)

    records = []
    for offset, (path_eps, path_lim) in enumerate(zip(x_eps.unstack(), x_lim.unstack())):
        rp_eps = ito_lift(path_eps, config.coarsen)
        rp_lim = limit_lift(path_lim, model, config.coarsen)
        level1, level2 = rough_distance(rp_eps, rp_lim, config.alpha)
        sup_error = float(_sup_norm(rp_eps.base.values - rp_lim.base.values))
        area_eps = rp_eps.cumulative_areas[-1]
        area_strat = stratonovich_lift(path_lim, config.coarsen).cumulative_areas[-1]
        holder_x = holder_norm(rp_eps.base, config.alpha)

        record: dict[str, Any] = {
            "averaging_error": float(avg_errors[offset]),
            "area_gap": float(np.linalg.norm(area_eps - area_strat)),
            "levy_area": 0.5 * (area_eps - area_eps.T),
        }
        for p in config.p_moments:
            record[f"rho_p{p}"] = (level1 + level2) ** p
            record[f"level1_p{p}"] = level1**p
            record[f"level2_p{p}"] = level2**p
            record[f"sup_error_p{p}"] = sup_error**p
            record[f"sup_x_p{p}"] = float(sup_x[offset]) ** p
            record[f"holder_x_p{p}"] = holder_x**p
        records.append(record)

    moments = {
        p: (np.sum(y_norms**p, axis=0), np.sum(y_norms ** (2 * p), axis=0))
        for p in config.p_moments
    }
    logger.debug(
        f"convergence batch eps={job.epsilon:g} paths={job.start}..{job.stop - 1} done"
    )
    return {"paths": records, "y_moments": moments, "size": job.size}


def _sup_time_moment(batches: list[dict[str, Any]], p: int) -> MetricSummary:
    """sup_t E|Y_t|^p on the fine grid, with the standard error at the maximiser."""
    n = sum(b["size"] for b in batches)
    sums = sum(b["y_moments"][p][0] for b in batches)
    squares = sum(b["y_moments"][p][1] for b in batches)
    means = sums / n
    t = int(np.argmax(means))
    variance = max(squares[t] / n - means[t] ** 2, 0.0) * n / (n - 1)
    return MetricSummary(mean=float(means[t]), stderr=float(np.sqrt(variance / n)), n=n)


def _record(config: ExperimentConfig, epsilon: float, metrics: dict, extras: dict | None = None):
    steps, dt = config.fine_dt_rule.grid(epsilon, config.horizon, config.coarsen)
    return EpsilonRecord(
        epsilon=epsilon,
        fine_steps=steps,
        fine_dt=dt,
        coarse_steps=steps // config.coarsen,
        metrics=metrics,
        extras=extras or {},
    )


def _trend_summary(records: list[EpsilonRecord], metric_names: list[str]) -> dict[str, Any]:
    epsilons = [r.epsilon for r in records]
    summary = {}
    for name in metric_names:
        means = [r.metrics[name].mean for r in records]
        summary[name] = {"rate": fitted_rate(epsilons, means), "decreasing": is_decreasing(means)}
    return summary


def run_convergence(config: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """
    For each epsilon, simulate the fast-slow pair and the limit SDE on shared
    noise, lift both (Ito lift and limit lift) and aggregate rough path
    distances, sup-norm errors, averaging errors and moment estimates.
    """
    config.validate()
    started = time.perf_counter()
    records = []
    for index, epsilon in enumerate(config.epsilons):
        jobs = _jobs(config, index, epsilon)
        workers = resolve_workers(len(jobs), threads)
        logger.info(
            f"converge model={config.model_name} eps={epsilon:g} "
            f"paths={config.n_paths} jobs={len(jobs)} workers={workers}"
        )
        batches = run_jobs(convergence_worker, jobs, workers, label=f"eps={epsilon:g}")
        paths = [record for batch in batches for record in batch["paths"]]

        scalar_names = [k for k in paths[0] if k != "levy_area"]
        metrics = {name: summarize([r[name] for r in paths]) for name in scalar_names}
        for p in config.p_moments:
            metrics[f"sup_t_y_p{p}"] = _sup_time_moment(batches, p)
        levy_mean, levy_stderr = summarize_matrix([r["levy_area"] for r in paths])
        extras = {"levy_area_mean": levy_mean.tolist(), "levy_area_stderr": levy_stderr.tolist()}
        records.append(_record(config, epsilon, metrics, extras))

        rho = metrics[f"rho_p{config.p_moments[0]}"]
        logger.info(f"eps={epsilon:g} rho_p{config.p_moments[0]}={rho.mean:.4g}±{rho.stderr:.2g}")

    trend_names = [f"{m}_p{p}" for p in config.p_moments for m in ("rho", "level1", "level2", "sup_error")]
    trend_names += ["averaging_error", "area_gap"]
    report = ExperimentReport(
        kind="convergence",
        config=config,
        per_epsilon=records,
        summary=_trend_summary(records, trend_names),
    )
    for p in config.p_moments:
        means = report.means(f"holder_x_p{p}")
        # stays bounded in epsilon
        report.summary[f"holder_x_p{p}"] = {"max": max(means), "max_over_min": max(means) / min(means)}
    report.wall_time = time.perf_counter() - started
    return report


@dataclass
class HolderFit:
    p: int
    gaps: list[float]
    level1_means: list[float]
    level2_means: list[float]
    level1: SlopeFit
    level2: SlopeFit

    @property
    def smooth_scaling(self) -> bool:
        """Level-1 moments scale like a smooth path (slope close to p)."""
        return abs(self.level1.slope - self.p) < SMOOTH_SLOPE_TOLERANCE

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "gaps": self.gaps,
            "level1_means": self.level1_means,
            "level2_means": self.level2_means,
            "level1": self.level1.to_dict() | {"target": self.p / 2},
            "level2": self.level2.to_dict() | {"target": float(self.p)},
            "smooth_scaling": self.smooth_scaling,
        }


def dyadic_gaps(n: int) -> list[int]:
    """Gaps 1, 2, 4, ... strictly below the number of coarse steps."""
    gaps, gap = [], 1
    while gap < n:
        gaps.append(gap)
        gap *= 2
    return gaps


def gap_moments(
    path: SamplePath, ps: list[int], refinement: int
) -> tuple[list[int], np.ndarray, np.ndarray]:
    """
    Per dyadic gap g, the averages over s of |X_{s,s+g}|^p and |XX_{s,s+g}|^p
    for the Ito lift on the coarse grid. Returns (gaps, level1, level2) with
    moment arrays shaped (len(ps), len(gaps)).
    """
    rp = ito_lift(path, refinement)
    values = rp.base.values
    gaps = dyadic_gaps(rp.n)
    level1 = np.zeros((len(ps), len(gaps)))
    level2 = np.zeros((len(ps), len(gaps)))
    for j, gap in enumerate(gaps):
        s = np.arange(0, rp.n - gap + 1)
        norms1 = np.linalg.norm(values[s + gap] - values[s], axis=-1)
        norms2 = np.linalg.norm(rp.areas(s, s + gap), axis=(-2, -1))
        for i, p in enumerate(ps):
            level1[i, j] = np.mean(norms1**p)
            level2[i, j] = np.mean(norms2**p)
    return gaps, level1, level2


def _fit_holder(
    gaps: list[int], coarse_dt: float, level1: np.ndarray, level2: np.ndarray, p: int
) -> HolderFit:
    if len(gaps) < MIN_GAPS:
        raise InsufficientData(f"need at least {MIN_GAPS} dyadic gaps, got {len(gaps)}")
    if np.any(level1 <= 0) or np.any(level2 <= 0):
        raise InsufficientData("increment moments vanish; cannot fit a log-log slope")
    log_gap = np.log(np.asarray(gaps, dtype=float) * coarse_dt)
    return HolderFit(
        p=p,
        gaps=[g * coarse_dt for g in gaps],
        level1_means=[float(v) for v in level1],
        level2_means=[float(v) for v in level2],
        level1=fit_slope(log_gap, np.log(level1)),
        level2=fit_slope(log_gap, np.log(level2)),
    )


def holder_slopes(paths: list[SamplePath], p: int, refinement: int) -> HolderFit:
    """Regress log E|X_{s,t}|^p and log E|XX_{s,t}|^p on log|t - s| over dyadic gaps."""
    if not paths:
        raise InsufficientData("no paths to fit")
    results = [gap_moments(path, [p], refinement) for path in paths]
    gaps = results[0][0]
    level1 = np.mean([r[1][0] for r in results], axis=0)
    level2 = np.mean([r[2][0] for r in results], axis=0)
    return _fit_holder(gaps, paths[0].dt * refinement, level1, level2, p)


def holder_worker(job: PathJob) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Gap moments of each path of a batch, stacked along the first axis."""
    config = job.config
    with_limit = config.holder_source is HolderSource.LIMIT
    _, x_eps, _, x_lim = _simulate_batch(job, with_limit=with_limit)
    source = x_lim if with_limit else x_eps
    results = [gap_moments(path, config.p_moments, config.coarsen) for path in source.unstack()]
    return (
        results[0][0],
        np.stack([r[1] for r in results]),
        np.stack([r[2] for r in results]),
    )


def run_holder_scaling(config: ExperimentConfig, threads: int | None = None) -> ExperimentReport:
    """Hölder moment scaling at `holder_epsilon` for every configured p."""
    config.validate()
    started = time.perf_counter()
    epsilon = config.holder_epsilon
    steps, dt = config.fine_dt_rule.grid(epsilon, config.horizon, config.coarsen)
    if len(dyadic_gaps(steps // config.coarsen)) < MIN_GAPS:
        raise InsufficientData(
            f"{steps // config.coarsen} coarse steps give fewer than {MIN_GAPS} dyadic gaps"
        )

    jobs = _jobs(config, 0, epsilon)
    workers = resolve_workers(len(jobs), threads)
    logger.info(
        f"holder model={config.model_name} eps={epsilon:g} source={config.holder_source.value} "
        f"paths={config.n_paths} workers={workers}"
    )
    batches = run_jobs(holder_worker, jobs, workers, label="holder")
    gaps = batches[0][0]
    level1 = np.concatenate([b[1] for b in batches]).mean(axis=0)
    level2 = np.concatenate([b[2] for b in batches]).mean(axis=0)

    fits = {}
    slopes = {}
    for i, p in enumerate(config.p_moments):
        fit = _fit_holder(gaps, dt * config.coarsen, level1[i], level2[i], p)
        fits[f"p{p}"] = fit.to_dict()
        # table rows: slope as mean, regression standard error as stderr, gap count as n
        slopes[f"level1_slope_p{p}"] = MetricSummary(fit.level1.slope, fit.level1.stderr, len(gaps))
        slopes[f"level2_slope_p{p}"] = MetricSummary(fit.level2.slope, fit.level2.stderr, len(gaps))
        logger.info(
            f"p={p} level1_slope={fit.level1.slope:.3f} (target {p / 2:g}) "
            f"level2_slope={fit.level2.slope:.3f} (target {p:g})"
        )
        if fit.smooth_scaling:
            logger.warning(f"p={p}: level-1 slope is close to {p}; the paths look smooth")

    report = ExperimentReport(
        kind="holder",
        config=config,
        per_epsilon=[_record(config, epsilon, slopes)],
        summary={"source": config.holder_source.value, "fits": fits},
    )
    report.wall_time = time.perf_counter() - started
    return report


def averaging_worker(job: PathJob) -> list[float]:
    model, x_eps, y_eps, _ = _simulate_batch(job, with_limit=False)
    obs = job.observable or job.config.observable.build()
    return [float(v) for v in np.atleast_1d(averaging_error(x_eps, y_eps, obs, model))]


def run_averaging_validation(
    config: ExperimentConfig,
    obs: ScalarObservableSpec | None = None,
    threads: int | None = None,
) -> ExperimentReport:
    """Monte Carlo mean of the averaging error per epsilon, with a decreasing-trend flag."""
    config.validate()
    if obs is not None:
        obs.validate(config.model().dim)
    started = time.perf_counter()
    records = []
    for index, epsilon in enumerate(config.epsilons):
        jobs = _jobs(config, index, epsilon, obs)
        workers = resolve_workers(len(jobs), threads)
        batches = run_jobs(averaging_worker, jobs, workers, label=f"eps={epsilon:g}")
        errors = [e for batch in batches for e in batch]
        summary = summarize(errors)
        logger.info(f"average eps={epsilon:g} error={summary.mean:.4g}±{summary.stderr:.2g}")
        records.append(_record(config, epsilon, {"averaging_error": summary}))

    report = ExperimentReport(
        kind="averaging",
        config=config,
        per_epsilon=records,
        summary=_trend_summary(records, ["averaging_error"]),
    )
    report.wall_time = time.perf_counter() - started
    return report
