"""
Level-2 rough paths on a uniform grid.

A `GridRoughPath` stores its base path on the coarse grid together with
one area matrix per coarse step. Areas of arbitrary grid pairs follow from
the Chen relation

    XX_{s,u} = XX_{s,t} + XX_{t,u} + X_{s,t} (x) X_{t,u},

so the object satisfies it by construction. Lifts of simulated paths are
built on two scales: the fine simulation grid supplies the sub-increments
that are summed into each coarse step's area (an Ito lift computed on its
own finest grid has zero areas).

Hölder norms are grid norms: suprema over pairs of grid points. Pairs are
enumerated exhaustively up to EXHAUSTIVE_LIMIT steps, otherwise over
dyadic gaps 1, 2, 4, ... plus all pairs anchored at the first grid point;
the dyadic value is a lower bound of the exhaustive one.
"""

from collections.abc import Iterator
from dataclasses import dataclass
from enum import Enum
from functools import cached_property, reduce

import numpy as np
from common.logger import get_logger
from more_itertools import chunked

from roughsk.core.exceptions import GridMismatch
from roughsk.core.linalg import area_correction_integrand
from roughsk.core.models import ModelSpec
from roughsk.core.sde import SamplePath, coarsen

logger = get_logger(__name__)

EXHAUSTIVE_LIMIT = 2048
BLOCK_ROWS = 256


class LiftConvention(str, Enum):
    ITO = "Ito"
    STRATONOVICH = "Stratonovich"
    LIMIT = "LimitLift"


class PairMode(str, Enum):
    AUTO = "auto"
    EXHAUSTIVE = "exhaustive"
    DYADIC = "dyadic"


@dataclass(frozen=True)
class GridRoughPath:
    base: SamplePath
    step_areas: np.ndarray
    convention: LiftConvention

    def __post_init__(self):
        if self.base.values.ndim != 2:
            raise GridMismatch("rough paths hold a single (unbatched) base path")
        if self.step_areas.shape != (self.base.n, self.base.d, self.base.d):
            raise GridMismatch(
                f"expected {self.base.n} step areas of shape "
                f"({self.base.d}, {self.base.d}), got {self.step_areas.shape}"
            )

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def d(self) -> int:
        return self.base.d

    @cached_property
    def increments(self) -> np.ndarray:
        return np.diff(self.base.values, axis=0)

    @cached_property
    def cumulative_areas(self) -> np.ndarray:
        """XX_{0,t} at every grid point t, (n+1, d, d)."""
        offsets = self.base.values[:-1] - self.base.values[0]
        steps = self.step_areas + np.einsum("ma,mb->mab", offsets, self.increments)
        out = np.zeros((self.n + 1, self.d, self.d))
        np.cumsum(steps, axis=0, out=out[1:])
        return out

    def areas(self, s: np.ndarray, t: np.ndarray) -> np.ndarray:
        """XX_{s,t} for index arrays s, t via the Chen relation from 0."""
        values = self.base.values
        zero = values[0]
        z = self.cumulative_areas
        return z[t] - z[s] - np.einsum("...a,...b->...ab", values[s] - zero, values[t] - values[s])

    def pair_areas(self, starts) -> np.ndarray:
        """XX_{s,t} for each s in `starts` and every grid t; zero where t <= s."""
        s = np.asarray(starts, dtype=int)[:, None]
        t = np.arange(self.n + 1)[None, :]
        out = self.areas(np.broadcast_to(s, (len(s), self.n + 1)), np.broadcast_to(t, (len(s), self.n + 1)))
        out[np.broadcast_to(t <= s, out.shape[:2])] = 0.0
        return out


def _split_steps(path: SamplePath, refinement: int) -> tuple[np.ndarray, np.ndarray, int]:
    if path.values.ndim != 2:
        raise GridMismatch("lifts take a single (unbatched) path")
    if path.n < 1:
        raise GridMismatch("a lift needs at least two grid points")
    if refinement < 1 or path.n % refinement:
        raise GridMismatch(
            f"refinement {refinement} does not divide the {path.n}-step grid"
        )
    m = path.n // refinement
    fine = path.values
    increments = np.diff(fine, axis=0).reshape(m, refinement, path.d)
    starts = fine[:-1:refinement]
    offsets = fine[:-1].reshape(m, refinement, path.d) - starts[:, None, :]
    return offsets, increments, m


def ito_lift(path: SamplePath, refinement: int = 1) -> GridRoughPath:
    """
    Left-point sums: each coarse step of `refinement` fine steps gets the
    area sum_j (X_{u_j} - X_s) (x) dX_j over its sub-increments.
    """
    offsets, increments, _ = _split_steps(path, refinement)
    areas = np.einsum("mra,mrb->mab", offsets, increments)
    return GridRoughPath(coarsen(path, refinement), areas, LiftConvention.ITO)


def stratonovich_lift(path: SamplePath, refinement: int = 1) -> GridRoughPath:
    """Midpoint sums: increments weighted by (X_{u_j} + X_{u_j+1})/2 - X_s."""
    offsets, increments, _ = _split_steps(path, refinement)
    areas = np.einsum("mra,mrb->mab", offsets + 0.5 * increments, increments)
    return GridRoughPath(coarsen(path, refinement), areas, LiftConvention.STRATONOVICH)


def limit_lift(
    path: SamplePath, model: ModelSpec, refinement: int = 1
) -> GridRoughPath:
    """
    Stratonovich lift plus the left-point quadrature of
    1/2 int (J M^-T - M^-1 J)(X_u) du over each coarse step.
    """
    strat = stratonovich_lift(path, refinement)
    m = strat.n
    correction = area_correction_integrand(model, path.values[:-1])
    correction = correction.reshape(m, refinement, path.d, path.d).sum(axis=1)
    return GridRoughPath(
        strat.base, strat.step_areas + path.dt * correction, LiftConvention.LIMIT
    )


def _combine(
    left: tuple[np.ndarray, np.ndarray], right: tuple[np.ndarray, np.ndarray]
) -> tuple[np.ndarray, np.ndarray]:
    (x1, a1), (x2, a2) = left, right
    return x1 + x2, a1 + a2 + np.outer(x1, x2)


def _balanced(pieces: list[tuple[np.ndarray, np.ndarray]]):
    if len(pieces) == 1:
        return pieces[0]
    mid = len(pieces) // 2
    return _combine(_balanced(pieces[:mid]), _balanced(pieces[mid:]))


def chen_area(rp: GridRoughPath, i: int, j: int, balanced: bool = False) -> np.ndarray:
    """XX_{t_i, t_j} by folding step areas with the Chen relation."""
    if not 0 <= i < j <= rp.n:
        raise IndexError(f"need 0 <= i < j <= {rp.n}, got i={i} j={j}")
    pieces = [(rp.increments[m], rp.step_areas[m]) for m in range(i, j)]
    if balanced:
        return _balanced(pieces)[1]
    return reduce(_combine, pieces)[1]


def _resolve_mode(n: int, mode: PairMode | str) -> PairMode:
    mode = PairMode(mode)
    if mode is PairMode.AUTO:
        return PairMode.EXHAUSTIVE if n <= EXHAUSTIVE_LIMIT else PairMode.DYADIC
    return mode


def pair_indices(n: int, mode: PairMode | str = PairMode.AUTO) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Blocks of grid index pairs (s, t), s < t, scanned by the Hölder norms."""
    mode = _resolve_mode(n, mode)
    if mode is PairMode.EXHAUSTIVE:
        for rows in chunked(range(n), BLOCK_ROWS):
            s, t = np.meshgrid(np.asarray(rows), np.arange(n + 1), indexing="ij")
            keep = t > s
            yield s[keep], t[keep]
        return

    gap = 1
    while gap <= n:
        s = np.arange(0, n - gap + 1)
        yield s, s + gap
        gap *= 2
    t = np.arange(1, n + 1)
    yield np.zeros_like(t), t


def _scaled_max(norms: np.ndarray, s: np.ndarray, t: np.ndarray, dt: float, exponent: float) -> float:
    if norms.size == 0:
        return 0.0
    return float(np.max(norms / ((t - s) * dt) ** exponent))


def holder_norm(path: SamplePath, alpha: float, mode: PairMode | str = PairMode.AUTO) -> float:
    """max over grid pairs s < t of |X_t - X_s| / |t - s|^alpha."""
    values = path.values
    best = 0.0
    for s, t in pair_indices(path.n, mode):
        norms = np.linalg.norm(values[t] - values[s], axis=-1)
        best = max(best, _scaled_max(norms, s, t, path.dt, alpha))
    return best


def level2_norm(rp: GridRoughPath, alpha: float, mode: PairMode | str = PairMode.AUTO) -> float:
    """max over grid pairs of |XX_{s,t}| / |t - s|^(2 alpha), Frobenius norm."""
    best = 0.0
    for s, t in pair_indices(rp.n, mode):
        norms = np.linalg.norm(rp.areas(s, t), axis=(-2, -1))
        best = max(best, _scaled_max(norms, s, t, rp.base.dt, 2.0 * alpha))
    return best


def rough_distance(
    rp1: GridRoughPath, rp2: GridRoughPath, alpha: float, mode: PairMode | str = PairMode.AUTO
) -> tuple[float, float]:
    """(|X - Y|_alpha, |XX - YY|_2alpha) on a shared grid."""
    if not rp1.base.same_grid(rp2.base):
        raise GridMismatch("rough paths do not share a grid")
    diff = rp1.base.values - rp2.base.values
    dt = rp1.base.dt
    level1 = level2 = 0.0
    for s, t in pair_indices(rp1.n, mode):
        norms = np.linalg.norm(diff[t] - diff[s], axis=-1)
        level1 = max(level1, _scaled_max(norms, s, t, dt, alpha))
        gaps = np.linalg.norm(rp1.areas(s, t) - rp2.areas(s, t), axis=(-2, -1))
        level2 = max(level2, _scaled_max(gaps, s, t, dt, 2.0 * alpha))
    return level1, level2


def rho_alpha(
    rp1: GridRoughPath, rp2: GridRoughPath, alpha: float, mode: PairMode | str = PairMode.AUTO
) -> float:
    """Inhomogeneous rough path distance |X - Y|_alpha + |XX - YY|_2alpha."""
    level1, level2 = rough_distance(rp1, rp2, alpha, mode)
    return level1 + level2
