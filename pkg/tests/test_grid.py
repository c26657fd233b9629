import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corank.grid import GridSpec, build_grid, build_rays, factorize, make_grid, write_grid_csv


def _rule_by_hand(n):
    # direct evaluation of the documented selection rule
    n_R = math.isqrt(n)
    while True:
        n_S = n // n_R
        n_0 = n - n_R * n_S
        if n_0 < min(n_R, n_S):
            return n_R, n_S, n_0
        n_R -= 1


def test_factorize_univariate():
    spec = factorize(10, 1)
    assert (spec.n_S, spec.n_R, spec.n_0) == (2, 5, 0)


def test_factorize_square_product():
    spec = factorize(12, 2)
    assert (spec.n_R, spec.n_S, spec.n_0) == (3, 4, 0)


def test_factorize_216_in_three_dimensions():
    spec = factorize(216, 3)
    assert spec.n_R * spec.n_S + spec.n_0 == 216
    assert spec.n_0 < min(spec.n_R, spec.n_S)
    assert _rule_by_hand(216) == (14, 15, 6)
    assert (spec.n_R, spec.n_S, spec.n_0) == (14, 15, 6)


@pytest.mark.parametrize("n", [0, 1, 3])
def test_factorize_rejects_small_n(n):
    with pytest.raises(ValueError):
        factorize(n, 2)


@pytest.mark.parametrize("n", range(4, 500))
def test_factorize_follows_rule(n):
    spec = factorize(n, 2)
    assert (spec.n_R, spec.n_S, spec.n_0) == _rule_by_hand(n)


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec(d=2, n=13, n_R=3, n_S=4, n_0=0)
    with pytest.raises(ValueError):
        GridSpec(d=2, n=15, n_R=3, n_S=4, n_0=3)
    with pytest.raises(ValueError):
        GridSpec(d=1, n=12, n_R=4, n_S=3, n_0=0)


def test_rays_univariate():
    np.testing.assert_array_equal(build_rays(1, 2, seed=11), [[-1.0], [1.0]])


def test_rays_planar_equiangular():
    rays = build_rays(2, 4, seed=3)
    angles = np.mod(np.arctan2(rays[:, 1], rays[:, 0]), 2 * np.pi)
    np.testing.assert_allclose(angles, [0, np.pi / 2, np.pi, 3 * np.pi / 2], atol=1e-15)


def test_rays_sphere_gap_statistics():
    rays = build_rays(3, 100, seed=7)
    assert rays.shape == (100, 3)
    np.testing.assert_allclose(np.linalg.norm(rays, axis=1), 1.0, atol=1e-14)
    dist = np.linalg.norm(rays[:, None] - rays[None], axis=-1)
    np.fill_diagonal(dist, np.inf)
    gaps = dist.min(axis=1)
    assert gaps.max() < 2 * gaps.mean()


def test_rays_sphere_ignore_seed():
    np.testing.assert_array_equal(build_rays(3, 50, seed=0), build_rays(3, 50, seed=99))


def test_grid_univariate_points():
    grid = build_grid(GridSpec(d=1, n=4, n_R=2, n_S=2, n_0=0))
    np.testing.assert_allclose(sorted(grid.points[:, 0]), [-2 / 3, -1 / 3, 1 / 3, 2 / 3])


def test_grid_univariate_with_origin():
    grid = build_grid(GridSpec(d=1, n=5, n_R=2, n_S=2, n_0=1))
    np.testing.assert_allclose(sorted(grid.points[:, 0]), [-2 / 3, -1 / 3, 0, 1 / 3, 2 / 3])


def test_grid_planar_single_radius():
    grid = build_grid(GridSpec(d=2, n=4, n_R=1, n_S=4, n_0=0))
    np.testing.assert_allclose(np.linalg.norm(grid.points, axis=1), 0.5)
    angles = np.mod(np.arctan2(grid.points[:, 1], grid.points[:, 0]), 2 * np.pi)
    np.testing.assert_allclose(np.sort(angles), [0, np.pi / 2, np.pi, 3 * np.pi / 2], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(4, 400), d=st.integers(1, 5), seed=st.integers(0, 2**16))
def test_grid_invariants(n, d, seed):
    grid = make_grid(n, d, seed)
    spec = grid.spec
    assert grid.points.shape == (n, d)
    norms = np.linalg.norm(grid.points, axis=1)
    assert np.all(norms < 1)
    assert np.unique(grid.points, axis=0).shape[0] == n
    regular = grid.radius_index > 0
    assert regular.sum() == spec.n_R * spec.n_S
    np.testing.assert_allclose(norms[regular], grid.radius_index[regular] / (spec.n_R + 1), rtol=1e-12)
    if d >= 2:
        np.testing.assert_allclose(norms[~regular], 1 / (2 * (spec.n_R + 1)), rtol=1e-12)
        # the inner points sit on distinct rays
        assert np.unique(grid.ray_index[~regular]).size == spec.n_0


@pytest.mark.parametrize("n", [100, 400, 1600])
def test_grid_empirical_measure_proxy(n):
    pts = make_grid(n, 2).points
    assert np.linalg.norm(pts.mean(axis=0)) < 3 / math.sqrt(n)
    if n == 1600:
        assert abs(np.mean(np.sum(pts**2, axis=1)) - 1 / 3) < 0.05


def test_grid_deterministic():
    a = make_grid(137, 4, seed=5)
    b = make_grid(137, 4, seed=5)
    np.testing.assert_array_equal(a.points, b.points)
    np.testing.assert_array_equal(a.ray_index, b.ray_index)


def test_grid_csv_layout():
    grid = make_grid(10, 2)
    buf = io.StringIO()
    write_grid_csv(grid, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "ray_index,radius_index,coord_1,coord_2"
    assert len(lines) == 11
    row = lines[1].split(",")
    assert float(row[2]) == grid.points[0, 0]
