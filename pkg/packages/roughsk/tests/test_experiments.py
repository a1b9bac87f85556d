import json
import math
from dataclasses import replace

import numpy as np
import pytest
from roughsk.core.averaging import ObservableKind, ScalarObservableSpec
from roughsk.core.exceptions import ConfigError, InsufficientData, PathFailure
from roughsk.core.sde import SamplePath
from roughsk.harness.config import ExperimentConfig, HolderSource, ObservableConfig
from roughsk.harness.executor import resolve_workers, run_jobs
from roughsk.harness.experiments import (
    holder_slopes,
    run_averaging_validation,
    run_convergence,
    run_holder_scaling,
)
from roughsk.harness.report import write_outputs, write_report
from roughsk.harness.statistics import fitted_rate, is_decreasing, summarize


def _square(x: int) -> int:
    return x * x


def _fail_on_three(x: int) -> int:
    if x == 3:
        raise ValueError("three")
    return x


def test_run_jobs_preserves_order():
    assert run_jobs(_square, list(range(10)), workers=1) == [x * x for x in range(10)]
    assert run_jobs(_square, list(range(10)), workers=3) == [x * x for x in range(10)]


def test_run_jobs_fails_fast():
    with pytest.raises(ValueError, match="three"):
        run_jobs(_fail_on_three, list(range(8)), workers=2)


def test_resolve_workers(monkeypatch):
    monkeypatch.setenv("ROUGHSK_THREADS", "2")
    assert 1 <= resolve_workers(10) <= 2
    assert resolve_workers(10, threads=3) == 3
    assert resolve_workers(1, threads=8) == 1


def test_summary_statistics():
    s = summarize([1.0, 2.0, 3.0, 4.0])
    assert s.mean == 2.5
    assert s.stderr == pytest.approx(np.std([1, 2, 3, 4], ddof=1) / 2)
    assert is_decreasing([3.0, 2.0, 1.0])
    assert not is_decreasing([3.0, 3.0, 1.0])
    assert fitted_rate([0.5, 0.25], [4.0, 1.0]) == pytest.approx(2.0)
    assert fitted_rate([0.5], [1.0]) is None


def test_convergence_report_structure(tiny_config):
    report = run_convergence(tiny_config, threads=1)
    assert [r.epsilon for r in report.per_epsilon] == tiny_config.epsilons
    alpha = tiny_config.alpha
    for record in report.per_epsilon:
        assert record.coarse_steps * tiny_config.coarsen == record.fine_steps
        for metric in record.metrics.values():
            assert math.isfinite(metric.stderr)
            assert metric.n == tiny_config.n_paths
        # |.|_inf <= T^alpha |.|_alpha holds path by path
        assert record.metrics["rho_p2"].mean >= record.metrics["sup_error_p2"].mean / tiny_config.horizon ** (2 * alpha)
        assert {"sup_t_y_p2", "sup_x_p2", "averaging_error", "area_gap", "holder_x_p2"} <= set(record.metrics)
        assert np.shape(record.extras["levy_area_mean"]) == (2, 2)
    assert set(report.summary["rho_p2"]) == {"rate", "decreasing"}
    assert report.summary["holder_x_p2"]["max_over_min"] >= 1.0


def test_standard_error_shrinks_with_path_count(tiny_config):
    config = replace(tiny_config, epsilons=[0.5])
    small = run_convergence(replace(config, n_paths=32), threads=1).record(0.5)
    large = run_convergence(replace(config, n_paths=128), threads=1).record(0.5)
    # four times the paths halves the standard error, up to a factor 2
    ratio = small.metrics["sup_x_p2"].stderr / large.metrics["sup_x_p2"].stderr
    assert 1.0 <= ratio <= 4.0


def test_convergence_is_deterministic(tiny_config, tmp_path):
    first = write_report(run_convergence(tiny_config, threads=1), tmp_path / "a.json")
    second = write_report(run_convergence(tiny_config, threads=2), tmp_path / "b.json")
    assert first.read_bytes() == second.read_bytes()


def test_report_outputs(tiny_config):
    config = replace(tiny_config, epsilons=[0.5])
    json_path, csv_path = write_outputs(run_convergence(config, threads=1), config.outputs)
    data = json.loads(json_path.read_text(encoding="utf-8"))
    assert data["meta"]["config_hash"] == config.config_hash()
    assert data["meta"]["seed"] == 11
    assert "wall_time" not in data["meta"]
    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == "epsilon,metric,mean,stderr,n"
    assert any(line.startswith("0.5,rho_p2,") for line in lines)


def test_table_floats_use_seventeen_digits(tiny_config):
    config = replace(tiny_config, epsilons=[0.5])
    report = run_convergence(config, threads=1)
    _, csv_path = write_outputs(report, config.outputs)
    rows = {line.split(",")[1]: line.split(",") for line in csv_path.read_text(encoding="utf-8").splitlines()[1:]}
    metric = report.record(0.5).metrics["rho_p2"]
    assert rows["rho_p2"][2] == format(metric.mean, ".17g")
    assert float(rows["rho_p2"][2]) == metric.mean


def test_timing_is_opt_in(tiny_config, tmp_path):
    report = run_convergence(replace(tiny_config, epsilons=[0.5]), threads=1)
    data = json.loads(write_report(report, tmp_path / "t.json", timing=True).read_text())
    assert data["meta"]["wall_time"] >= 0.0


def test_invalid_alpha_fails_before_simulation(tiny_config):
    with pytest.raises(ConfigError):
        run_convergence(replace(tiny_config, alpha=0.6))


def test_blow_up_identifies_path(tiny_config):
    with pytest.raises(PathFailure, match=r"epsilon=0.5 k=0"):
        run_convergence(replace(tiny_config, blowup_threshold=1e-9), threads=1)


def test_holder_slopes_of_linear_path():
    n = 256
    path = SamplePath(0.0, 1.0 / n, np.linspace(0.0, 1.0, n + 1)[:, None])
    fit = holder_slopes([path], p=2, refinement=4)
    assert fit.level1.slope == pytest.approx(2.0, abs=1e-9)
    assert fit.smooth_scaling


def test_holder_slopes_need_enough_gaps():
    path = SamplePath(0.0, 1.0 / 32, np.linspace(0.0, 1.0, 33)[:, None])
    with pytest.raises(InsufficientData):
        holder_slopes([path], p=2, refinement=4)


def test_holder_scaling_report(tiny_config):
    config = replace(tiny_config, holder_epsilon=0.25, holder_source=HolderSource.LIMIT)
    report = run_holder_scaling(config, threads=1)
    fit = report.summary["fits"]["p2"]
    assert fit["level1"]["target"] == 1.0
    assert len(fit["gaps"]) >= 4
    assert "level1_slope_p2" in report.per_epsilon[0].metrics


def test_averaging_validation_report(tiny_config):
    obs = ScalarObservableSpec(ObservableKind.YY, k=1, l=2)
    report = run_averaging_validation(tiny_config, obs, threads=1)
    assert len(report.per_epsilon) == 2
    assert isinstance(report.summary["averaging_error"]["decreasing"], bool)


@pytest.mark.slow
def test_brownian_holder_scaling():
    config = ExperimentConfig(
        model_name="const_iso",
        holder_source=HolderSource.LIMIT,
        n_paths=200,
        coarsen=4,
    )
    fit = run_holder_scaling(config).summary["fits"]["p2"]
    assert fit["level1"]["slope"] == pytest.approx(1.0, abs=0.1)
    assert 1.7 <= fit["level2"]["slope"] <= 2.3


@pytest.mark.slow
def test_fast_slow_holder_scaling():
    # gaps of at least 0.2, several fast relaxation times at eps = 0.25
    config = ExperimentConfig(
        model_name="scalar_sin", n_paths=500, holder_epsilon=0.25, horizon=4.0, coarsen=64
    )
    fit = run_holder_scaling(config).summary["fits"]["p2"]
    assert 0.85 <= fit["level1"]["slope"] <= 1.15
    assert 1.7 <= fit["level2"]["slope"] <= 2.3


@pytest.mark.slow
def test_level_one_convergence():
    config = ExperimentConfig(model_name="scalar_sin", n_paths=500)
    means = run_convergence(config).means("level1_p2")
    assert is_decreasing(means)
    assert means[-1] <= 0.5 * means[0]


@pytest.mark.slow
def test_holder_norm_moment_stays_bounded():
    config = ExperimentConfig(model_name="scalar_sin", n_paths=500)
    report = run_convergence(config)
    means = report.means("holder_x_p2")
    assert all(math.isfinite(m) and m > 0 for m in means)
    assert report.summary["holder_x_p2"]["max_over_min"] <= 3.0


@pytest.mark.slow
def test_ito_lift_tends_to_stratonovich_in_one_dimension():
    config = ExperimentConfig(model_name="scalar_sin", n_paths=500)
    assert is_decreasing(run_convergence(config).means("area_gap"))


@pytest.mark.slow
def test_area_anomaly_of_rotating_friction():
    config = ExperimentConfig(model_name="const_rot2", epsilons=[0.125], n_paths=2000)
    record = run_convergence(config).per_epsilon[0]
    mean = np.array(record.extras["levy_area_mean"])
    stderr = np.array(record.extras["levy_area_stderr"])
    expected = np.array([[0.0, 0.25], [-0.25, 0.0]])
    assert np.all(np.abs(mean - expected) <= 3 * stderr + 1e-12)


@pytest.mark.slow
def test_averaging_principle():
    config = ExperimentConfig(
        model_name="scalar_sin",
        epsilons=[0.5, 0.25, 0.125],
        n_paths=500,
        observable=ObservableConfig(kind="XYY", i=1, k=1, l=1),
    )
    means = run_averaging_validation(config).means("averaging_error")
    assert is_decreasing(means)
    assert means[-1] <= 0.5 * means[0]
