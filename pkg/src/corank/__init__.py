"""Distribution-free independence tests from center-outward ranks."""

from .assignment import RankVectors, center_outward_ranks, solve_assignment
from .errors import CalibrationMismatch, TieError
from .grid import CenterOutwardGrid, GridSpec, build_grid, factorize, make_grid
from .kernels import KernelId
from .nulldist import NullCalibration, eigen_null, resample_null
from .scores import ScoreFunction, parse_score, sign_score, vdw_score, wilcoxon_score
from .testing import PairedSample, TestDecision, permutation_test_dcov, run_test
from .ustat import SgscStatistic, compute_statistic, sgsc

__all__ = [
    "CalibrationMismatch",
    "CenterOutwardGrid",
    "GridSpec",
    "KernelId",
    "NullCalibration",
    "PairedSample",
    "RankVectors",
    "ScoreFunction",
    "SgscStatistic",
    "TestDecision",
    "TieError",
    "build_grid",
    "center_outward_ranks",
    "compute_statistic",
    "eigen_null",
    "factorize",
    "make_grid",
    "parse_score",
    "permutation_test_dcov",
    "resample_null",
    "run_test",
    "sgsc",
    "sign_score",
    "solve_assignment",
    "vdw_score",
    "wilcoxon_score",
]
