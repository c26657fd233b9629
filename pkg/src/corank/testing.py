"""Independence tests built on the rank-based statistics.

:func:`run_test` is the distribution-free test ``1(n W > q_{1-alpha})``
with a precomputed :class:`~corank.nulldist.NullCalibration`.  The two
permutation baselines apply the plain distance covariance to raw data or
to componentwise ranks.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .errors import CalibrationMismatch, TieError
from .grid import build_grid
from .kernels import KernelId
from .nulldist import STREAM_PERMUTATION, NullCalibration, empirical_quantile, replicate_rng
from .scores import ScoreFunction
from .ustat import SgscStatistic, compute_statistic, dcov_centered

__all__ = [
    "PairedSample",
    "TestDecision",
    "run_test",
    "permutation_test_dcov",
    "marginal_rank_transform",
]


def _matrix(X, name: str) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[1] == 0:
        raise ValueError(f"{name} must be an (n, d) matrix")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite values")
    return X


@dataclass(frozen=True)
class PairedSample:
    """``n`` joint observations split into an ``X1`` block and an ``X2`` block."""

    X1: np.ndarray
    X2: np.ndarray

    def __post_init__(self):
        X1 = _matrix(self.X1, "X1")
        X2 = _matrix(self.X2, "X2")
        if X1.shape[0] != X2.shape[0]:
            raise ValueError(f"X1 has {X1.shape[0]} rows but X2 has {X2.shape[0]}")
        for name, X in (("X1", X1), ("X2", X2)):
            if np.unique(X, axis=0).shape[0] != X.shape[0]:
                raise TieError(f"{name} has repeated rows; add jitter or deduplicate")
        object.__setattr__(self, "X1", X1)
        object.__setattr__(self, "X2", X2)

    @property
    def n(self) -> int:
        return self.X1.shape[0]

    @property
    def d1(self) -> int:
        return self.X1.shape[1]

    @property
    def d2(self) -> int:
        return self.X2.shape[1]


@dataclass(frozen=True)
class TestDecision:
    statistic: SgscStatistic
    critical_value: float
    p_value: float
    reject: bool
    alpha: float
    calibration: NullCalibration | None = None
    method: str = "rank"
    seed: int | None = None

    __test__ = False  # keep pytest from collecting this class


def run_test(
    sample: PairedSample,
    kernel,
    scores: Sequence[ScoreFunction],
    alpha: float,
    calibration: NullCalibration,
) -> TestDecision:
    """Rank-based test at level ``alpha`` with a matching calibration."""
    k = KernelId.parse(kernel)
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    s1, s2 = scores
    calibration.check_matches(k, s1, s2, sample.n, sample.d1, sample.d2)
    spec1, spec2 = calibration.grid_specs()
    if (spec1.n, spec1.d, spec2.n, spec2.d) != (sample.n, sample.d1, sample.n, sample.d2):
        raise CalibrationMismatch("calibration grids do not fit the sample")
    stat = compute_statistic(k, sample, build_grid(spec1), build_grid(spec2), s1, s2)
    crit = calibration.critical_value(alpha)
    return TestDecision(
        statistic=stat,
        critical_value=crit,
        p_value=calibration.p_value(stat.scaled),
        reject=bool(stat.scaled > crit),
        alpha=alpha,
        calibration=calibration,
    )


def marginal_rank_transform(X) -> np.ndarray:
    """Columnwise ranks divided by ``n + 1``."""
    X = _matrix(X, "X")
    n = X.shape[0]
    out = np.empty_like(X)
    for j in range(X.shape[1]):
        if np.unique(X[:, j]).size != n:
            raise TieError(f"column {j} has tied values")
        out[:, j] = rankdata(X[:, j]) / (n + 1)
    return out


def permutation_test_dcov(
    sample: PairedSample,
    B: int | None = None,
    seed: int = 0,
    variant: str = "raw",
    alpha: float = 0.05,
) -> TestDecision:
    """Permutation test with the unbiased distance covariance.

    ``variant="marginal_rank"`` first replaces every coordinate by its
    marginal rank.  ``B`` defaults to ``n`` permutations, but never fewer
    than 100.
    """
    if variant not in ("raw", "marginal_rank"):
        raise ValueError("variant must be 'raw' or 'marginal_rank'")
    n = sample.n
    B = max(n, 100) if B is None else B
    if B < 100:
        raise ValueError("use at least 100 permutations")
    X1, X2 = sample.X1, sample.X2
    if variant == "marginal_rank":
        X1, X2 = marginal_rank_transform(X1), marginal_rank_transform(X2)
    A1 = dcov_centered(X1)
    A2 = dcov_centered(X2)
    norm = n * (n - 3)
    observed = float(np.sum(A1 * A2) / norm)
    perm = np.empty(B)
    for b in range(B):
        q = replicate_rng(seed, STREAM_PERMUTATION, b).permutation(n)
        perm[b] = np.sum(A1 * A2[np.ix_(q, q)]) / norm
    perm_scaled = np.sort(n * perm)
    stat = SgscStatistic(
        kernel=KernelId.DCOV,
        score1=None,
        score2=None,
        value=observed,
        n=n,
        d1=sample.d1,
        d2=sample.d2,
    )
    crit = empirical_quantile(perm_scaled, 1.0 - alpha)
    p = (1 + np.count_nonzero(perm_scaled >= stat.scaled)) / (B + 1)
    return TestDecision(
        statistic=stat,
        critical_value=crit,
        p_value=float(p),
        reject=bool(stat.scaled > crit),
        alpha=alpha,
        method=f"permutation_{variant}",
        seed=seed,
    )
