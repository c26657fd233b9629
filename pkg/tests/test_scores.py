import math
from statistics import NormalDist

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corank.scores import (
    ScoreFunction,
    apply_scored_map,
    chi2_cdf,
    chi2_inv_cdf,
    eval_score,
    parse_score,
    sign_score,
    squared_integral,
    table_score,
    vdw_score,
    wilcoxon_score,
)


def test_eval_examples():
    assert eval_score(sign_score(), 0.73) == 1.0
    assert eval_score(wilcoxon_score(), 0.25) == 0.25
    assert eval_score(vdw_score(2), 0.5) == pytest.approx(math.sqrt(-2 * math.log(0.5)), abs=1e-10)
    assert eval_score(vdw_score(2), 0.5) == pytest.approx(1.1774100226, abs=1e-9)


@pytest.mark.parametrize("u", [-0.1, 1.0, 1.5, float("nan")])
def test_eval_rejects_out_of_range(u):
    with pytest.raises(ValueError):
        eval_score(wilcoxon_score(), u)


def test_chi2_quantile_two_dof():
    assert chi2_inv_cdf(2, 0.5) == pytest.approx(1.3862943611, abs=1e-10)


def test_chi2_quantile_one_dof_against_normal():
    oracle = NormalDist().inv_cdf((1 + 0.9) / 2) ** 2
    assert chi2_inv_cdf(1, 0.9) == pytest.approx(oracle, abs=1e-10)
    assert chi2_inv_cdf(1, 0.9) == pytest.approx(2.7055434541, abs=1e-9)


@pytest.mark.parametrize("d", [1, 2, 3, 5, 8, 20])
def test_chi2_quantile_is_right_inverse(d):
    u = np.linspace(0, 0.999, 1000)
    x = chi2_inv_cdf(d, u)
    assert np.max(np.abs(chi2_cdf(d, x) - u)) < 1e-9


def test_chi2_quantile_zero():
    assert chi2_inv_cdf(3, 0.0) == 0.0


@pytest.mark.parametrize("d", [1, 2, 3, 5])
def test_vdw_squared_integral_equals_dimension(d):
    assert abs(squared_integral(vdw_score(d)) - d) < 1e-6


def test_wilcoxon_and_sign_integrals():
    assert squared_integral(wilcoxon_score()) == pytest.approx(1 / 3, abs=1e-12)
    assert squared_integral(sign_score()) == pytest.approx(1.0, abs=1e-12)


def test_scored_map_examples():
    np.testing.assert_allclose(apply_scored_map(wilcoxon_score(), [[0.3, 0.4]]), [[0.3, 0.4]])
    np.testing.assert_allclose(apply_scored_map(sign_score(), [[0.3, 0.4]]), [[0.6, 0.8]])
    np.testing.assert_array_equal(apply_scored_map(vdw_score(2), [[0.0, 0.0]]), [[0.0, 0.0]])


def test_scored_map_rejects_outside_ball():
    with pytest.raises(ValueError):
        apply_scored_map(sign_score(), [[0.6, 0.8]])


_points = st.lists(
    st.tuples(st.floats(-0.7, 0.7), st.floats(-0.7, 0.7)), min_size=1, max_size=20
)


@settings(max_examples=100, deadline=None)
@given(pts=_points, kind=st.sampled_from(["sign", "wilcoxon", "vdw"]))
def test_scored_map_keeps_direction(pts, kind):
    P = np.array(pts)
    out = apply_scored_map(parse_score(kind, 2), P)
    cross = P[:, 0] * out[:, 1] - P[:, 1] * out[:, 0]
    assert np.all(np.abs(cross) <= 1e-14 * (1 + np.abs(out).sum(axis=1)))
    assert np.all(np.sum(P * out, axis=1) >= 0)


@settings(max_examples=100, deadline=None)
@given(a=st.floats(0.001, 0.99), b=st.floats(0.001, 0.99), kind=st.sampled_from(["wilcoxon", "vdw"]))
def test_scored_map_monotone(a, b, kind):
    if a == b:
        return
    J = parse_score(kind, 3)
    lo, hi = sorted([a, b])
    na = np.linalg.norm(apply_scored_map(J, [[lo, 0, 0]]))
    nb = np.linalg.norm(apply_scored_map(J, [[0, hi, 0]]))
    assert na < nb


def test_regularity_flags():
    assert wilcoxon_score().regularity == "strong"
    assert sign_score().regularity == "weak"
    assert vdw_score(2).regularity == "weak"


def test_table_score_interpolates():
    J = table_score([0, 0.5, 1], [0, 1, 3])
    assert eval_score(J, 0.25) == pytest.approx(0.5)
    assert eval_score(J, 0.75) == pytest.approx(2.0)


@pytest.mark.parametrize(
    "knots, values",
    [
        ([0, 0.5, 1], [0, 0, 0]),
        ([0, 0.5, 1], [1, -1, 1]),
        ([0, 0.5, 0.5, 1], [1, 1, 1, 1]),
        ([0.1, 1], [1, 1]),
    ],
)
def test_table_score_validation(knots, values):
    with pytest.raises(ValueError):
        table_score(knots, values)


def test_parse_score_unknown():
    with pytest.raises(ValueError):
        parse_score("median", 2)


def test_scores_hashable_and_equal():
    assert vdw_score(3) == ScoreFunction("vdw", d=3)
    assert len({vdw_score(3), vdw_score(3), sign_score()}) == 2
