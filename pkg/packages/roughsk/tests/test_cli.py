import json

import pytest
from roughsk import app, cli_main
from typer.testing import CliRunner

runner = CliRunner()

TINY = {
    "model_name": "const_iso",
    "epsilons": [0.5, 0.25],
    "coarsen": 4,
    "n_paths": 4,
    "batch_size": 2,
    "seed": 3,
}


def _write_config(tmp_path, **changes):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY | changes), encoding="utf-8")
    return path


def test_check_passes_for_isotropic_model():
    assert cli_main(["check", "--model", "const_iso", "--quiet"]) == 0


def test_check_prints_table():
    result = runner.invoke(app, ["check", "-m", "scalar_sin"])
    assert result.exit_code == 0
    assert "poisson-residual" in result.output
    assert "FAIL" not in result.output


@pytest.mark.parametrize(
    "argv",
    [
        ["converge", "--config", "missing.json"],
        ["converge", "--bogus"],
        ["converge", "--seed", "abc"],
        ["teleport"],
        ["check", "--model", "nope"],
        ["simulate", "--model", "nope"],
        ["simulate", "--seed", "-1"],
        ["holder", "--eps", "1.5"],
    ],
)
def test_usage_and_config_errors_exit_one(argv):
    assert cli_main(argv) == 1


def test_invalid_alpha_exits_one(tmp_path):
    assert cli_main(["converge", "-c", str(_write_config(tmp_path, alpha=0.6))]) == 1


def test_unknown_config_key_exits_one(tmp_path):
    assert cli_main(["holder", "-c", str(_write_config(tmp_path, colour="red"))]) == 1


def test_runtime_failure_exits_two(tmp_path):
    config = _write_config(tmp_path, blowup_threshold=1e-9)
    assert cli_main(["converge", "-c", str(config), "-o", str(tmp_path / "out"), "-t", "1", "-q"]) == 2


def test_converge_writes_report_and_table(tmp_path):
    out = tmp_path / "out"
    code = cli_main(["converge", "-c", str(_write_config(tmp_path)), "-o", str(out), "-t", "1", "-q"])
    assert code == 0
    report = json.loads((out / "convergence_report.json").read_text(encoding="utf-8"))
    assert [r["epsilon"] for r in report["per_epsilon"]] == [0.5, 0.25]
    assert (out / "convergence_table.csv").read_text(encoding="utf-8").startswith(
        "epsilon,metric,mean,stderr,n"
    )


def test_cli_overrides_config(tmp_path):
    out = tmp_path / "out"
    argv = ["average", "-c", str(_write_config(tmp_path)), "-o", str(out), "-e", "0.5"]
    assert cli_main(argv + ["--seed", "8", "--kind", "YY", "--k", "1", "--l", "2", "-t", "1", "-q"]) == 0
    report = json.loads((out / "averaging_report.json").read_text(encoding="utf-8"))
    assert report["meta"]["seed"] == 8
    assert report["meta"]["config"]["observable"]["kind"] == "YY"
    assert len(report["per_epsilon"]) == 1


def test_simulate_is_deterministic(tmp_path):
    first, second = tmp_path / "p1.csv", tmp_path / "p2.csv"
    for path in (first, second):
        argv = ["simulate", "--model", "scalar_sin", "--eps", "0.25", "--seed", "7", "--out", str(path)]
        assert cli_main(argv) == 0
    assert first.read_bytes() == second.read_bytes()
    assert first.read_text(encoding="utf-8").splitlines()[0] == "t,x1,y1"


def test_simulate_writes_limit_and_lift(tmp_path):
    argv = [
        "simulate",
        "--model", "const_rot2",
        "--eps", "0.5",
        "--out", str(tmp_path / "p.csv"),
        "--limit", str(tmp_path / "limit.csv"),
        "--lift", str(tmp_path / "lift.csv"),
    ]
    assert cli_main(argv) == 0
    assert (tmp_path / "limit.csv").read_text(encoding="utf-8").startswith("t,x1,x2\n")
    assert (tmp_path / "lift.csv").read_text(encoding="utf-8").startswith("i,j,a11,a12,a21,a22\n")
    assert (tmp_path / "lift_limit.csv").exists()


def test_simulate_writes_all_pair_areas(tmp_path):
    argv = ["simulate", "-m", "const_rot2", "-e", "0.5", "-o", str(tmp_path / "p.csv"), "--lift", str(tmp_path / "lift.csv")]
    assert cli_main(argv + ["--all-pairs"]) == 0
    rows = (tmp_path / "lift.csv").read_text(encoding="utf-8").splitlines()[1:]
    pairs = {tuple(int(v) for v in row.split(",")[:2]) for row in rows}
    n = max(j for _, j in pairs)
    assert len(pairs) == n * (n + 1) // 2


def test_holder_eps_overrides_config(tmp_path):
    out = tmp_path / "out"
    argv = ["holder", "-c", str(_write_config(tmp_path)), "-o", str(out), "--eps", "0.5", "-t", "1", "-q"]
    assert cli_main(argv) == 0
    report = json.loads((out / "holder_report.json").read_text(encoding="utf-8"))
    assert report["meta"]["config"]["holder_epsilon"] == 0.5


def test_no_arguments_shows_help():
    result = runner.invoke(app, [])
    assert "converge" in result.output
