import io
import math

import numpy as np
import pytest
from scipy.stats import kendalltau

from corank.datagen import (
    GaussianExampleConfig,
    KonijnModel,
    MixtureModel,
    gaussian_covariance,
    gen_cauchy_example,
    gen_gaussian_example,
    gen_konijn,
    gen_mixture,
    power_study,
    write_power_csv,
)
from corank.errors import CalibrationMismatch
from corank.nulldist import resample_null
from corank.scores import wilcoxon_score


def test_covariance_layout():
    S = gaussian_covariance(3, 2, 0.5, 0.15)
    assert S[0, 1] == S[1, 0] == 0.5
    assert S[0, 3] == S[3, 0] == 0.15
    assert np.count_nonzero(S - np.diag(np.diag(S))) == 4


def test_independent_sides_have_small_cross_covariance():
    n = 5000
    s = gen_gaussian_example(GaussianExampleConfig(3, 2, n=n, seed=0))
    C = (s.X1 - s.X1.mean(0)).T @ (s.X2 - s.X2.mean(0)) / n
    assert np.max(np.abs(C)) < 4 / math.sqrt(n)


def test_between_and_within_correlations():
    n = 5000
    s = gen_gaussian_example(GaussianExampleConfig(2, 2, tau=0.9, rho=0.15, n=n, seed=1))
    assert abs(np.corrcoef(s.X1[:, 0], s.X2[:, 0])[0, 1] - 0.15) < 4 / math.sqrt(n)
    assert abs(np.corrcoef(s.X1[:, 0], s.X1[:, 1])[0, 1] - 0.9) < 4 / math.sqrt(n)


def test_non_positive_definite_rejected():
    with pytest.raises(ValueError):
        gen_gaussian_example(GaussianExampleConfig(2, 2, tau=0.9, rho=0.9, n=10))


def test_gaussian_deterministic():
    cfg = GaussianExampleConfig(2, 3, tau=0.5, rho=0.1, n=50, seed=4)
    np.testing.assert_array_equal(gen_gaussian_example(cfg).X2, gen_gaussian_example(cfg).X2)


def test_cauchy_medians_near_zero():
    n = 4000
    s = gen_cauchy_example(GaussianExampleConfig(2, 2, tau=0.5, n=n, seed=2))
    # median CLT for the standard Cauchy: sd = 1 / (2 f(0)) / sqrt(n) with f(0) = 1/pi
    tol = 4 * (math.pi / 2) / math.sqrt(n)
    assert np.all(np.abs(np.median(np.hstack([s.X1, s.X2]), axis=0)) < tol)


def test_cauchy_transform_fixes_zero():
    cfg = GaussianExampleConfig(1, 1, n=1)
    s = gen_cauchy_example(cfg, z=np.zeros((1, 2)))
    assert s.X1[0, 0] == 0.0 and s.X2[0, 0] == 0.0


def test_cauchy_keeps_kendall_tau():
    cfg = GaussianExampleConfig(2, 2, tau=0.5, rho=0.4, n=500, seed=3)
    g, c = gen_gaussian_example(cfg), gen_cauchy_example(cfg)
    assert kendalltau(g.X1[:, 0], g.X2[:, 0])[0] == pytest.approx(kendalltau(c.X1[:, 0], c.X2[:, 0])[0], abs=1e-12)


def test_konijn_zero_delta_is_identity():
    model = KonijnModel(np.ones((2, 3)), np.ones((3, 2)), 0.0)
    s = gen_konijn(model, 40, seed=5)
    rng = np.random.default_rng(5)
    np.testing.assert_array_equal(s.X1, rng.standard_normal((40, 2)))
    np.testing.assert_array_equal(s.X2, rng.standard_normal((40, 3)))


def test_konijn_cross_covariance():
    n, delta = 40_000, 0.1
    s = gen_konijn(KonijnModel(np.eye(2), np.eye(2), delta), n, seed=6)
    C = s.X1.T @ s.X2 / n
    np.testing.assert_allclose(C, 2 * delta * np.eye(2), atol=0.03)


def test_konijn_linearity():
    rng = np.random.default_rng(7)
    M1, M2 = rng.normal(size=(2, 3)), rng.normal(size=(3, 2))
    a = gen_konijn(KonijnModel(M1, M2, 0.1), 30, seed=8)
    b = gen_konijn(KonijnModel(M1 / 2, M2 / 2, 0.2), 30, seed=8)
    np.testing.assert_allclose(a.X1, b.X1, rtol=1e-15)
    np.testing.assert_allclose(a.X2, b.X2, rtol=1e-15)


def test_konijn_singular_rejected():
    with pytest.raises(ValueError):
        KonijnModel(np.eye(2), np.eye(2), 1.0)


def test_konijn_shape_check():
    with pytest.raises(ValueError):
        KonijnModel(np.ones((2, 3)), np.ones((2, 3)), 0.1)


def _mixture(delta):
    indep = lambda rng, n: (rng.normal(size=(n, 2)), rng.normal(size=(n, 1)))  # noqa: E731

    def dep(rng, n):
        z = rng.normal(size=(n, 2))
        return z + 100.0, z[:, :1] + 100.0

    return MixtureModel(delta, indep, dep)


@pytest.mark.parametrize("delta, frac", [(0.0, 0.0), (1.0, 1.0)])
def test_mixture_extremes(delta, frac):
    s, lab = gen_mixture(_mixture(delta), 200, seed=9, return_labels=True)
    assert lab.mean() == frac
    assert np.mean(s.X1[:, 0] > 50) == frac


def test_mixture_fraction():
    _, lab = gen_mixture(_mixture(0.3), 10_000, seed=10, return_labels=True)
    assert abs(lab.mean() - 0.3) < 0.02


def test_mixture_delta_range():
    with pytest.raises(ValueError):
        _mixture(1.2)


def _design(**kw):
    base = dict(example="gaussian", n=30, d1=2, d2=2, tau=0.0, rho=[0.0, 0.5],
                methods=["wilcoxon_dcov", "raw_dcov"], reps=40, alpha=0.05, seed=11, B=300)
    base.update(kw)
    return base


def test_power_study_deterministic_and_formatted():
    rows = power_study(_design())
    assert rows == power_study(_design())
    assert [(r["method"], r["rho"]) for r in rows] == [
        ("wilcoxon_dcov", 0.0), ("wilcoxon_dcov", 0.5), ("raw_dcov", 0.0), ("raw_dcov", 0.5)]
    for r in rows:
        assert r["se"] == pytest.approx(math.sqrt(r["power"] * (1 - r["power"]) / 40))
    buf = io.StringIO()
    write_power_csv(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "method,rho,power,se" and len(lines) == 5


def test_power_study_se_shrinks_by_root_two_when_reps_double():
    d = dict(methods=["wilcoxon_dcov"], rho=[0.5])
    small = power_study(_design(reps=100, **d))[0]
    big = power_study(_design(reps=200, **d))[0]
    assert 0.2 < small["power"] < 0.8
    assert big["se"] / small["se"] == pytest.approx(1 / math.sqrt(2), rel=0.10)


def test_power_study_uses_supplied_calibration():
    W = wilcoxon_score()
    cal = resample_null("dcov", (W, W), 30, 2, 2, B=300, seed=11)
    rows = power_study(_design(methods=["wilcoxon_dcov"], require_calibration=True),
                       calibrations={"wilcoxon_dcov": cal})
    assert rows == power_study(_design(methods=["wilcoxon_dcov"]))


def test_power_study_missing_calibration():
    with pytest.raises(CalibrationMismatch):
        power_study(_design(methods=["wilcoxon_dcov"], require_calibration=True))


def test_power_study_wrong_calibration():
    W = wilcoxon_score()
    cal = resample_null("dcov", (W, W), 31, 2, 2, B=300, seed=11)
    with pytest.raises(CalibrationMismatch):
        power_study(_design(methods=["wilcoxon_dcov"]), calibrations={"wilcoxon_dcov": cal})


def test_power_study_unknown_method():
    with pytest.raises(ValueError):
        power_study(_design(methods=["lrt"]))
