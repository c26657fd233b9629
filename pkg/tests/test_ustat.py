import dataclasses

import numpy as np
import pytest

from corank.grid import make_grid
from corank.kernels import KernelId, group_for, symmetrized_kernel
from corank.scores import sign_score, vdw_score, wilcoxon_score
from corank.testing import PairedSample
from corank.ustat import (
    compute_statistic,
    scored_images,
    sgsc,
    sgsc_bruteforce,
    sgsc_dcov,
    sgsc_kendall,
    sgsc_proj_r,
)

MULTI = [KernelId.DCOV, KernelId.HOEFF_M, KernelId.PROJ_D, KernelId.PROJ_R, KernelId.TAU_STAR]


def _rel_gap(fast, brute):
    return abs(fast - brute) if abs(brute) <= 1e-12 else abs(fast - brute) / abs(brute)


def _rotation(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)))
    return q * np.sign(np.diag(r))


@pytest.mark.parametrize("k", list(KernelId))
def test_bruteforce_constant_side_is_zero(k):
    rng = np.random.default_rng(0)
    d = 1 if k is KernelId.KENDALL else 2
    Y1 = np.ones((k.order + 1, d))
    Y2 = rng.normal(size=(k.order + 1, d))
    assert sgsc_bruteforce(k, Y1, Y2) == 0.0


def test_bruteforce_kendall_concordant():
    Y = np.array([[1.0], [2.0], [3.0]])
    assert sgsc_bruteforce("kendall", Y, Y) == 1.0


@pytest.mark.parametrize("k", list(KernelId))
def test_bruteforce_single_subset(k):
    rng = np.random.default_rng(1)
    d = 1 if k is KernelId.KENDALL else 2
    Y1 = rng.normal(size=(k.order, d))
    Y2 = rng.normal(size=(k.order, d))
    ref = symmetrized_kernel(k, group_for(k), list(zip(Y1, Y2)))
    assert sgsc_bruteforce(k, Y1, Y2) == pytest.approx(ref, rel=1e-12, abs=1e-15)


def test_bruteforce_size_limits():
    with pytest.raises(ValueError):
        sgsc_bruteforce("dcov", np.zeros((3, 1)), np.zeros((3, 1)))
    with pytest.raises(ValueError):
        sgsc_bruteforce("dcov", np.zeros((13, 1)), np.zeros((13, 1)))


@pytest.mark.parametrize(
    "k, n", [("dcov", 8), ("proj_d", 7), ("hoeff_m", 7), ("proj_r", 8), ("tau_star", 8), ("kendall", 10)]
)
def test_fast_matches_bruteforce(k, n):
    rng = np.random.default_rng(2)
    d = 1 if k == "kendall" else 2
    for d2 in sorted({d, 1 if k == "kendall" else 3}):
        Y1 = rng.normal(size=(n, d))
        Y2 = rng.normal(size=(n, d2)) + (Y1[:, :1] if d2 else 0)
        assert _rel_gap(sgsc(k, Y1, Y2), sgsc_bruteforce(k, Y1, Y2)) < 1e-10


@pytest.mark.parametrize("k", MULTI)
def test_fast_constant_side_is_zero(k):
    rng = np.random.default_rng(3)
    n = k.order + 4
    Y = rng.normal(size=(n, 2))
    C = np.tile([0.3, -0.1], (n, 1))
    assert abs(sgsc(k, C, Y)) < 1e-15
    assert abs(sgsc(k, Y, C)) < 1e-15


@pytest.mark.parametrize("k", MULTI)
def test_fast_rejects_too_few_rows(k):
    Y = np.random.default_rng(4).normal(size=(k.order - 1, 2))
    with pytest.raises(ValueError):
        sgsc(k, Y, Y)


def test_fast_rejects_row_mismatch():
    with pytest.raises(ValueError):
        sgsc_dcov(np.zeros((6, 1)), np.zeros((7, 1)))


def test_dcov_positive_on_identical_sides():
    Y = np.random.default_rng(5).normal(size=(6, 1))
    assert sgsc_dcov(Y, Y) > 0


def test_tau_star_positive_on_collinear_identical_sides():
    Y = np.arange(1.0, 9.0)[:, None]
    assert sgsc("tau_star", Y, Y) > 0
    assert sgsc_bruteforce("tau_star", Y, Y) > 0


def test_kendall_extremes_and_dimension():
    x = np.arange(12.0)
    assert sgsc_kendall(x, x) == 1.0
    assert sgsc_kendall(x, -x) == -1.0
    with pytest.raises(ValueError):
        sgsc_kendall(np.zeros((5, 2)), np.zeros((5, 1)))


def test_kendall_matches_oracle_exactly():
    rng = np.random.default_rng(6)
    x, y = rng.normal(size=10), rng.normal(size=10)
    assert sgsc_kendall(x, y) == pytest.approx(sgsc_bruteforce("kendall", x, y), abs=1e-15)


def _sample(n, d1, d2, seed, dep=0.0):
    rng = np.random.default_rng(seed)
    X1 = rng.normal(size=(n, d1))
    X2 = rng.normal(size=(n, d2))
    X2[:, 0] += dep * X1[:, 0]
    return PairedSample(X1, X2)


def test_compute_statistic_reproducible_and_scaled():
    s = _sample(40, 2, 2, 7)
    g1, g2 = make_grid(40, 2), make_grid(40, 2, seed=1)
    a = compute_statistic("dcov", s, g1, g2, wilcoxon_score(), sign_score())
    b = compute_statistic("dcov", s, g1, g2, wilcoxon_score(), sign_score())
    assert a.value == b.value and np.isfinite(a.value)
    assert a.scaled == 40 * a.value
    assert a.grid1["n_R"] == g1.spec.n_R


def test_compute_statistic_grid_size_check():
    s = _sample(40, 2, 2, 7)
    with pytest.raises(ValueError):
        compute_statistic("dcov", s, make_grid(41, 2), make_grid(40, 2), wilcoxon_score(), wilcoxon_score())


@pytest.mark.parametrize("k", MULTI)
def test_shift_scale_invariance(k):
    n = 24
    s = _sample(n, 2, 3, 8, dep=1.0)
    g1, g2 = make_grid(n, 2), make_grid(n, 3)
    J1, J2 = wilcoxon_score(), vdw_score(3)
    t = PairedSample(3.0 + 0.25 * s.X1, np.array([-1.0, 2.0, 5.0]) + 7.0 * s.X2)
    a = compute_statistic(k, s, g1, g2, J1, J2).value
    b = compute_statistic(k, t, g1, g2, J1, J2).value
    assert _rel_gap(b, a) < 1e-10


@pytest.mark.parametrize("k", [KernelId.DCOV, KernelId.PROJ_D, KernelId.PROJ_R, KernelId.TAU_STAR])
def test_orthogonal_invariance_with_co_rotated_grids(k):
    n = 24
    rng = np.random.default_rng(9)
    s = _sample(n, 3, 3, 10, dep=1.0)
    g1, g2 = make_grid(n, 3), make_grid(n, 3)
    Q1, Q2 = _rotation(rng, 3), _rotation(rng, 3)
    r1 = dataclasses.replace(g1, rays=g1.rays @ Q1.T, points=g1.points @ Q1.T)
    r2 = dataclasses.replace(g2, rays=g2.rays @ Q2.T, points=g2.points @ Q2.T)
    t = PairedSample(1.0 + 2.0 * s.X1 @ Q1.T, -4.0 + 0.5 * s.X2 @ Q2.T)
    J = wilcoxon_score()
    a = compute_statistic(k, s, g1, g2, J, J).value
    b = compute_statistic(k, t, r1, r2, J, J).value
    assert _rel_gap(b, a) < 1e-10


def test_proj_r_tracks_dcov_over_sixteen():
    # univariate Wilcoxon ranks: the population identity is exact, the finite-n gap shrinks
    gaps = []
    for n in (60, 200):
        rng = np.random.default_rng(11)
        x = rng.normal(size=n)
        y = x + rng.normal(size=n)
        g = make_grid(n, 1)
        Y1 = scored_images(x, g, wilcoxon_score())
        Y2 = scored_images(y, g, wilcoxon_score())
        ref = sgsc_dcov(Y1, Y2) / 16
        gaps.append(abs(sgsc_proj_r(Y1, Y2) - ref) / ref)
    assert gaps[1] < gaps[0]
    assert gaps[1] < 0.03


def test_null_statistic_does_not_drift_with_n():
    J = wilcoxon_score()
    summary = {}
    for n in (50, 100, 200):
        g = make_grid(n, 2)
        vals = []
        for rep in range(100):
            s = _sample(n, 2, 2, 1000 * n + rep)
            vals.append(compute_statistic("dcov", s, g, g, J, J).scaled)
        q1, q3 = np.percentile(vals, [25, 75])
        summary[n] = (np.mean(vals), q3 - q1)
    base_mean, base_iqr = summary[50]
    for n in (100, 200):
        assert abs(summary[n][0] - base_mean) < 3 * base_iqr
