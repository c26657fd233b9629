import io

import pytest

from corank.oracle_suite import (
    CHECKS,
    CheckReport,
    check_assignment_optimal,
    check_distribution_freeness,
    check_fast_vs_bruteforce,
    check_uniform_arrangement,
    run_suite,
    write_summary_csv,
)


def test_dcov_oracle_check_passes():
    rep = check_fast_vs_bruteforce("dcov", trials=20, n_values=range(4, 11))
    assert rep.passed and rep.value <= 1e-10


def test_proj_r_oracle_check_passes():
    rep = check_fast_vs_bruteforce("proj_r", trials=10, n_values=range(6, 10))
    assert rep.passed


def test_injected_normalization_fault_is_caught():
    rep = check_fast_vs_bruteforce("tau_star", trials=3, n_values=range(4, 8), inject_fault=True)
    assert not rep.passed
    assert rep.value > rep.tol


def test_assignment_check_six_by_six():
    rep = check_assignment_optimal(trials=50, n_values=[6])
    assert rep.passed and rep.value == 0.0


def test_assignment_check_trivial_size():
    assert check_assignment_optimal(trials=3, n_values=[1]).passed


def test_distribution_freeness_refuses_few_replicates():
    with pytest.raises(ValueError):
        check_distribution_freeness(reps=999)


def test_distribution_freeness_negative_control():
    rep = check_distribution_freeness(reps=1000, alternative_rho=0.6)
    assert not rep.passed
    assert rep.value < rep.tol


def test_uniform_arrangement_small_run():
    assert check_uniform_arrangement(n=30, runs=500, seed=1).passed


def test_report_line_and_fields():
    rep = CheckReport("x", False, 0.5, 0.1, 3, 1.25)
    assert rep.line() == "FAIL x: value=0.5 tol=0.1 (1.2s)"
    assert CheckReport("y", True, 0.0, 0.1, 0, 0.0).line().startswith("PASS y")


def test_every_acceptance_criterion_has_a_check():
    assert list(CHECKS) == [
        "fast_vs_bruteforce", "assignment_optimal", "distribution_freeness",
        "transformation_invariance", "size_control", "uniform_arrangement",
        "eigen_structure", "vdw_integral", "power_ordering", "complexity_scaling",
    ]


def test_run_suite_and_summary():
    reports = run_suite(["vdw_integral", "assignment_optimal"], quick=True)
    assert [r.name for r in reports] == ["assignment_optimal", "vdw_integral"]
    buf = io.StringIO()
    write_summary_csv(reports, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "check,pass,value,tol,seconds"
    assert lines[1].startswith("assignment_optimal,true,")


def test_run_suite_unknown_name():
    with pytest.raises(ValueError):
        run_suite(["nope"])
