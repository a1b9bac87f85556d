import numpy as np
import pytest
from roughsk.core.exceptions import GridMismatch
from roughsk.core.models import builtin_model
from roughsk.core.roughpath import (
    PairMode,
    chen_area,
    holder_norm,
    ito_lift,
    level2_norm,
    limit_lift,
    pair_indices,
    rho_alpha,
    rough_distance,
    stratonovich_lift,
)
from roughsk.core.sde import SamplePath


def test_chen_fold_matches_cumulative_reconstruction(random_walk):
    rp = stratonovich_lift(random_walk(64), refinement=4)
    for i, j in [(0, 16), (3, 11), (7, 8), (0, 1)]:
        expected = rp.areas(np.array(i), np.array(j))
        np.testing.assert_allclose(chen_area(rp, i, j), expected, atol=1e-12)
        np.testing.assert_allclose(chen_area(rp, i, j, balanced=True), expected, atol=1e-12)


def test_chen_relation_holds_for_every_split(random_walk):
    rp = ito_lift(random_walk(48), refinement=3)
    s, t, u = 2, 9, 15
    x = rp.base.values
    left = rp.areas(np.array(s), np.array(u))
    right = (
        rp.areas(np.array(s), np.array(t))
        + rp.areas(np.array(t), np.array(u))
        + np.outer(x[t] - x[s], x[u] - x[t])
    )
    np.testing.assert_allclose(left, right, atol=1e-12)


def test_chen_area_rejects_bad_indices(random_walk):
    rp = ito_lift(random_walk(8))
    with pytest.raises(IndexError):
        chen_area(rp, 3, 3)
    with pytest.raises(IndexError):
        chen_area(rp, 0, 9)


def test_ito_lift_on_its_own_grid_has_zero_areas(random_walk):
    rp = ito_lift(random_walk(16), refinement=1)
    np.testing.assert_array_equal(rp.step_areas, 0.0)


def test_stratonovich_symmetric_part_is_half_square(random_walk):
    rp = stratonovich_lift(random_walk(64), refinement=8)
    s, t = np.array([0, 2, 5]), np.array([8, 4, 6])
    areas = rp.areas(s, t)
    inc = rp.base.values[t] - rp.base.values[s]
    sym = 0.5 * (areas + np.swapaxes(areas, -1, -2))
    np.testing.assert_allclose(sym, 0.5 * np.einsum("na,nb->nab", inc, inc), atol=1e-12)


def test_ito_and_stratonovich_differ_by_half_quadratic_variation(random_walk):
    path = random_walk(32)
    gap = stratonovich_lift(path, 8).cumulative_areas[-1] - ito_lift(path, 8).cumulative_areas[-1]
    steps = np.diff(path.values, axis=0)
    np.testing.assert_allclose(gap, 0.5 * steps.T @ steps, atol=1e-12)


def test_limit_lift_adds_constant_area_drift(random_walk):
    model = builtin_model("const_rot2")
    path = random_walk(64, d=2, dt=1.0 / 64)
    gap = (
        limit_lift(path, model, 4).cumulative_areas[-1]
        - stratonovich_lift(path, 4).cumulative_areas[-1]
    )
    np.testing.assert_allclose(gap, [[0.0, 0.25], [-0.25, 0.0]], atol=1e-12)


def test_refinement_must_divide_grid(random_walk):
    with pytest.raises(GridMismatch):
        ito_lift(random_walk(10), refinement=4)


def test_pair_areas_zero_below_diagonal(random_walk):
    rp = ito_lift(random_walk(12), 2)
    block = rp.pair_areas([1, 3])
    assert block.shape == (2, rp.n + 1, 2, 2)
    np.testing.assert_array_equal(block[0, :2], 0.0)
    np.testing.assert_allclose(block[1, 5], rp.areas(np.array(3), np.array(5)))


def test_linear_path_holder_norm():
    n = 32
    path = SamplePath(0.0, 1.0 / n, np.linspace(0.0, 1.0, n + 1)[:, None])
    assert holder_norm(path, 0.4) == pytest.approx(1.0)
    assert holder_norm(path, 0.4, PairMode.DYADIC) == pytest.approx(1.0)


def test_dyadic_is_lower_bound_of_exhaustive(random_walk):
    path = random_walk(100)
    rp = ito_lift(path)
    assert holder_norm(path, 0.4, PairMode.DYADIC) <= holder_norm(path, 0.4, PairMode.EXHAUSTIVE)
    assert level2_norm(rp, 0.4, PairMode.DYADIC) <= level2_norm(rp, 0.4, PairMode.EXHAUSTIVE)


@pytest.mark.parametrize("mode", [PairMode.EXHAUSTIVE, PairMode.DYADIC])
def test_sup_norm_bounded_by_holder_norm(random_walk, mode):
    path = random_walk(50, dt=0.02)
    sup = np.max(np.linalg.norm(path.values, axis=-1))
    assert sup <= path.horizon**0.4 * holder_norm(path, 0.4, mode) + 1e-12


def test_exhaustive_pairs_cover_every_pair():
    pairs = {(int(a), int(b)) for s, t in pair_indices(6, "exhaustive") for a, b in zip(s, t)}
    assert pairs == {(a, b) for a in range(6) for b in range(a + 1, 7)}


def test_distance_to_itself_is_zero(random_walk):
    rp = stratonovich_lift(random_walk(40), 4)
    assert rho_alpha(rp, rp, 0.4) == 0.0


def test_distance_components(random_walk):
    path = random_walk(32)
    shifted = SamplePath(path.t0, path.dt, path.values * 2.0)
    level1, level2 = rough_distance(ito_lift(path, 4), ito_lift(shifted, 4), 0.4)
    assert level1 == pytest.approx(holder_norm(path, 0.4))
    assert level2 == pytest.approx(3.0 * level2_norm(ito_lift(path, 4), 0.4))


def test_distance_requires_shared_grid(random_walk):
    with pytest.raises(GridMismatch):
        rho_alpha(ito_lift(random_walk(8)), ito_lift(random_walk(16)), 0.4)


def test_distance_is_symmetric_and_satisfies_triangle_inequality(random_walk):
    a, b, c = (stratonovich_lift(random_walk(64), 4) for _ in range(3))
    assert rho_alpha(a, b, 0.4) == pytest.approx(rho_alpha(b, a, 0.4), rel=1e-14)
    assert rho_alpha(a, c, 0.4) <= rho_alpha(a, b, 0.4) + rho_alpha(b, c, 0.4) + 1e-12


@pytest.mark.parametrize("mode", [PairMode.EXHAUSTIVE, PairMode.DYADIC])
def test_holder_norm_grows_with_exponent_on_unit_interval(random_walk, mode):
    path = random_walk(64)
    assert path.horizon == pytest.approx(1.0)
    assert holder_norm(path, 0.3, mode) <= holder_norm(path, 0.45, mode) * (1 + 1e-12)


def test_ito_lift_of_linear_path():
    v = np.array([1.0, -2.0])
    path = SamplePath(0.0, 0.5, np.stack([0.0 * v, 0.5 * v, v]))
    rp = ito_lift(path, refinement=2)
    np.testing.assert_allclose(rp.step_areas[0], 0.25 * np.outer(v, v), atol=1e-15)
