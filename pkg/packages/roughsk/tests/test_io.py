import numpy as np
import pytest
from roughsk.core.exceptions import GridMismatch
from roughsk.core.roughpath import stratonovich_lift
from roughsk.core.sde import SamplePath
from roughsk.utils.io import read_path_csv, write_lift_csv, write_path_csv


def test_path_csv_is_exact(tmp_path, random_walk):
    x = random_walk(20, d=2, dt=0.05)
    y = SamplePath(0.0, 0.05, np.sin(x.values))
    x_back, y_back = read_path_csv(write_path_csv(tmp_path / "p.csv", x, y))
    np.testing.assert_array_equal(x_back.values, x.values)
    np.testing.assert_array_equal(y_back.values, y.values)
    assert x_back.dt == pytest.approx(0.05)


def test_position_only_csv(tmp_path, random_walk):
    x_back, y_back = read_path_csv(write_path_csv(tmp_path / "p.csv", random_walk(4, d=1)))
    assert y_back is None
    assert x_back.values.shape == (5, 1)


def test_path_csv_rejects_mismatched_grids(tmp_path, random_walk):
    with pytest.raises(GridMismatch):
        write_path_csv(tmp_path / "p.csv", random_walk(4), random_walk(5))


def test_lift_csv_rows(tmp_path, random_walk):
    rp = stratonovich_lift(random_walk(8, d=2), refinement=2)
    lines = write_lift_csv(tmp_path / "lift.csv", rp).read_text(encoding="utf-8").splitlines()
    assert lines[0] == "i,j,a11,a12,a21,a22"
    assert len(lines) == rp.n + 1
    row = [float(v) for v in lines[2].split(",")]
    assert row[:2] == [1.0, 2.0]
    np.testing.assert_array_equal(np.reshape(row[2:], (2, 2)), rp.step_areas[1])


def test_lift_csv_all_pairs(tmp_path, random_walk):
    rp = stratonovich_lift(random_walk(8, d=2), refinement=2)
    lines = write_lift_csv(tmp_path / "lift.csv", rp, all_pairs=True).read_text(encoding="utf-8").splitlines()
    assert len(lines) == 1 + rp.n * (rp.n + 1) // 2
    rows = {tuple(int(v) for v in line.split(",")[:2]): line for line in lines[1:]}
    whole = [float(v) for v in rows[(0, rp.n)].split(",")[2:]]
    np.testing.assert_allclose(np.reshape(whole, (2, 2)), rp.cumulative_areas[-1], rtol=1e-15, atol=1e-15)
    step = [float(v) for v in rows[(1, 2)].split(",")[2:]]
    np.testing.assert_allclose(np.reshape(step, (2, 2)), rp.step_areas[1], atol=1e-15)
