import csv
from pathlib import Path

import numpy as np

from roughsk.core.exceptions import GridMismatch
from roughsk.core.roughpath import GridRoughPath
from roughsk.core.sde import SamplePath


def format_float(value: float) -> str:
    return format(float(value), ".17g")


def write_path_csv(path: Path, x_path: SamplePath, y_path: SamplePath | None = None) -> Path:
    """Columns t,x1..xd[,y1..yd], 17 significant digits."""
    if x_path.values.ndim != 2:
        raise GridMismatch("path CSV takes a single (unbatched) path")
    if y_path is not None and not x_path.same_grid(y_path):
        raise GridMismatch("position and fast paths do not share a grid")
    d = x_path.d
    header = ["t"] + [f"x{i + 1}" for i in range(d)]
    columns = [x_path.times[:, None], x_path.values]
    if y_path is not None:
        header += [f"y{i + 1}" for i in range(d)]
        columns.append(y_path.values)
    rows = np.hstack(columns)

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        writer.writerows([format_float(v) for v in row] for row in rows)
    return path


def read_path_csv(path: Path) -> tuple[SamplePath, SamplePath | None]:
    with Path(path).open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = np.array([[float(v) for v in row] for row in reader])
    xs = [i for i, name in enumerate(header) if name.startswith("x")]
    ys = [i for i, name in enumerate(header) if name.startswith("y")]
    times = rows[:, 0]
    dt = float(times[1] - times[0]) if len(times) > 1 else 0.0
    x_path = SamplePath(float(times[0]), dt, rows[:, xs])
    y_path = SamplePath(float(times[0]), dt, rows[:, ys]) if ys else None
    return x_path, y_path


def write_lift_csv(path: Path, rp: GridRoughPath, all_pairs: bool = False) -> Path:
    """
    Rows i,j,a11..add with the level-2 area over [t_i, t_j]: one row per
    coarse step, or every pair i < j of coarse grid points with `all_pairs`.
    """
    d = rp.d
    header = ["i", "j"] + [f"a{a + 1}{b + 1}" for a in range(d) for b in range(d)]
    if all_pairs:
        table = rp.pair_areas(np.arange(rp.n))
        rows = ((s, t, table[s, t]) for s in range(rp.n) for t in range(s + 1, rp.n + 1))
    else:
        rows = ((m, m + 1, area) for m, area in enumerate(rp.step_areas))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for s, t, area in rows:
            writer.writerow([s, t] + [format_float(v) for v in area.ravel()])
    return path
