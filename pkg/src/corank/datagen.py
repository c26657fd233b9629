"""Synthetic data for size and power experiments.

Gaussian blocks with within-block correlation ``tau`` and one cross
correlation ``rho``; their componentwise Cauchy transform; linear
cross-mixing alternatives ``X = A_delta X*``; and two-component mixtures.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .grid import build_grid, factorize
from .errors import CalibrationMismatch
from .nulldist import STREAM_DATA, replicate_rng, resample_null
from .assignment import center_outward_ranks
from .scores import apply_scored_map, parse_score
from .testing import PairedSample, permutation_test_dcov
from .ustat import sgsc

__all__ = [
    "GaussianExampleConfig",
    "KonijnModel",
    "MixtureModel",
    "gaussian_covariance",
    "gen_gaussian_example",
    "gen_cauchy_example",
    "gen_konijn",
    "gen_mixture",
    "power_study",
    "write_power_csv",
    "RANK_METHODS",
    "PERMUTATION_METHODS",
]

Sampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class GaussianExampleConfig:
    d1: int
    d2: int
    tau: float = 0.0
    rho: float = 0.0
    n: int = 100
    seed: int = 0

    def covariance(self) -> np.ndarray:
        return gaussian_covariance(self.d1, self.d2, self.tau, self.rho)


def gaussian_covariance(d1: int, d2: int, tau: float, rho: float) -> np.ndarray:
    """Identity plus ``tau`` at (1, 2) and ``rho`` at (1, d1 + 1), symmetrized."""
    d = d1 + d2
    S = np.eye(d)
    if d1 >= 2:
        S[0, 1] = S[1, 0] = tau
    S[0, d1] = S[d1, 0] = rho
    return S


def _cholesky(S: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise ValueError("covariance matrix is not positive definite") from None


def _gaussian_rows(cfg: GaussianExampleConfig, z: np.ndarray | None = None) -> np.ndarray:
    L = _cholesky(cfg.covariance())
    if z is None:
        z = np.random.default_rng(cfg.seed).standard_normal((cfg.n, cfg.d1 + cfg.d2))
    return z @ L.T


def gen_gaussian_example(cfg: GaussianExampleConfig, z: np.ndarray | None = None) -> PairedSample:
    """``n`` Gaussian rows; ``z`` optionally supplies the standard normals."""
    X = _gaussian_rows(cfg, z)
    return PairedSample(X[:, : cfg.d1], X[:, cfg.d1 :])


def _cauchy_quantile_of_normal(x: np.ndarray) -> np.ndarray:
    return np.tan(np.pi * (ndtr(x) - 0.5))


def gen_cauchy_example(cfg: GaussianExampleConfig, z: np.ndarray | None = None) -> PairedSample:
    """Gaussian example with every coordinate mapped to a standard Cauchy marginal."""
    X = _cauchy_quantile_of_normal(_gaussian_rows(cfg, z))
    return PairedSample(X[:, : cfg.d1], X[:, cfg.d1 :])


def _gaussian_sampler(d: int) -> Sampler:
    return lambda rng, n: rng.standard_normal((n, d))


@dataclass(frozen=True)
class KonijnModel:
    """``X1 = X1* + delta M1 X2*`` and ``X2 = delta M2 X1* + X2*``."""

    M1: np.ndarray
    M2: np.ndarray
    delta: float
    base1: Sampler | None = None
    base2: Sampler | None = None

    def __post_init__(self):
        M1 = np.atleast_2d(np.asarray(self.M1, dtype=float))
        M2 = np.atleast_2d(np.asarray(self.M2, dtype=float))
        d1, d2 = M1.shape
        if M2.shape != (d2, d1):
            raise ValueError(f"M2 must have shape {(d2, d1)}, got {M2.shape}")
        object.__setattr__(self, "M1", M1)
        object.__setattr__(self, "M2", M2)
        if self.base1 is None:
            object.__setattr__(self, "base1", _gaussian_sampler(d1))
        if self.base2 is None:
            object.__setattr__(self, "base2", _gaussian_sampler(d2))
        if abs(np.linalg.det(self.matrix())) < 1e-8:
            raise ValueError("A_delta is singular at this delta")

    @property
    def d1(self) -> int:
        return self.M1.shape[0]

    @property
    def d2(self) -> int:
        return self.M1.shape[1]

    def matrix(self) -> np.ndarray:
        d1, d2 = self.d1, self.d2
        return np.block(
            [[np.eye(d1), self.delta * self.M1], [self.delta * self.M2, np.eye(d2)]]
        )


def gen_konijn(model: KonijnModel, n: int, seed=0) -> PairedSample:
    rng = np.random.default_rng(seed)
    S1 = np.asarray(model.base1(rng, n), dtype=float).reshape(n, model.d1)
    S2 = np.asarray(model.base2(rng, n), dtype=float).reshape(n, model.d2)
    X1 = S1 + model.delta * S2 @ model.M1.T
    X2 = model.delta * S1 @ model.M2.T + S2
    return PairedSample(X1, X2)


@dataclass(frozen=True)
class MixtureModel:
    """Rows from ``(1 - delta) q1 q2 + delta q*`` by composition.

    ``independent_sampler`` and ``dependent_sampler`` map ``(rng, n)`` to a
    pair of ``(n, d1)`` and ``(n, d2)`` arrays.
    """

    delta: float
    independent_sampler: Callable
    dependent_sampler: Callable

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError("delta must lie in [0, 1]")


def gen_mixture(model: MixtureModel, n: int, seed=0, return_labels: bool = False):
    rng = np.random.default_rng(seed)
    dependent = rng.random(n) < model.delta
    k = int(dependent.sum())
    A1, A2 = model.independent_sampler(rng, n - k)
    B1, B2 = model.dependent_sampler(rng, k)
    d1 = np.asarray(A1).reshape(n - k, -1).shape[1] if n - k else np.asarray(B1).reshape(k, -1).shape[1]
    d2 = np.asarray(A2).reshape(n - k, -1).shape[1] if n - k else np.asarray(B2).reshape(k, -1).shape[1]
    X1 = np.empty((n, d1))
    X2 = np.empty((n, d2))
    X1[~dependent] = np.asarray(A1).reshape(n - k, d1)
    X2[~dependent] = np.asarray(A2).reshape(n - k, d2)
    X1[dependent] = np.asarray(B1).reshape(k, d1)
    X2[dependent] = np.asarray(B2).reshape(k, d2)
    sample = PairedSample(X1, X2)
    return (sample, dependent) if return_labels else sample


RANK_METHODS = {
    "wilcoxon_dcov": ("dcov", "wilcoxon"),
    "vdw_dcov": ("dcov", "vdw"),
    "sign_dcov": ("dcov", "sign"),
    "wilcoxon_proj_d": ("proj_d", "wilcoxon"),
    "vdw_proj_d": ("proj_d", "vdw"),
}
PERMUTATION_METHODS = {"raw_dcov": "raw", "marginal_rank_dcov": "marginal_rank"}


def _generator(example: str):
    if example == "gaussian":
        return gen_gaussian_example
    if example == "cauchy":
        return gen_cauchy_example
    raise ValueError(f"unknown example {example!r}; use 'gaussian' or 'cauchy'")


def power_study(design: dict, calibrations: dict | None = None) -> list[dict]:
    """Empirical rejection rates over a ``rho`` grid.

    ``design`` keys: ``example`` (gaussian | cauchy), ``n``, ``d1``, ``d2``,
    ``tau``, ``rho`` (list), ``methods``, ``reps``, ``alpha``, ``seed`` and
    optionally ``B`` (calibration replicates) and ``B_perm``.  Replicate
    ``r`` reuses the same standard normals for every ``rho``.

    ``calibrations`` maps a rank method name to a :class:`NullCalibration`;
    missing ones are computed by resampling with ``design["B"]`` replicates
    unless ``design["require_calibration"]`` is true.
    """
    gen = _generator(design.get("example", "gaussian"))
    n, d1, d2 = int(design["n"]), int(design["d1"]), int(design["d2"])
    tau = float(design.get("tau", 0.0))
    rhos = [float(r) for r in design.get("rho", [0.0])]
    methods = list(design["methods"])
    reps = int(design["reps"])
    alpha = float(design.get("alpha", 0.05))
    seed = int(design.get("seed", 0))
    B = int(design.get("B", 2000))
    B_perm = design.get("B_perm")
    calibrations = dict(calibrations or {})
    grid_seed = int(design.get("grid_seed", 0))

    for m in methods:
        if m not in RANK_METHODS and m not in PERMUTATION_METHODS:
            raise ValueError(f"unknown method {m!r}")
    g1 = build_grid(factorize(n, d1, grid_seed))
    g2 = build_grid(factorize(n, d2, grid_seed))

    crit = {}
    scores = {}
    for m in methods:
        if m not in RANK_METHODS:
            continue
        kname, sname = RANK_METHODS[m]
        s1, s2 = parse_score(sname, d1), parse_score(sname, d2)
        scores[m] = (kname, s1, s2)
        cal = calibrations.get(m)
        if cal is None:
            if design.get("require_calibration", False):
                raise CalibrationMismatch(f"no calibration supplied for {m}")
            cal = resample_null(kname, (s1, s2), n, d1, d2, B=B, seed=seed, grid_seed=grid_seed)
        else:
            cal.check_matches(kname, s1, s2, n, d1, d2, g1.spec, g2.spec)
        crit[m] = cal.critical_value(alpha)

    hits = {(m, r): 0 for m in methods for r in rhos}
    for rep in range(reps):
        z = replicate_rng(seed, STREAM_DATA, rep).standard_normal((n, d1 + d2))
        for rho in rhos:
            cfg = GaussianExampleConfig(d1=d1, d2=d2, tau=tau, rho=rho, n=n, seed=seed)
            sample = gen(cfg, z)
            im1 = im2 = None
            for m in methods:
                if m in RANK_METHODS:
                    if im1 is None:
                        im1 = center_outward_ranks(sample.X1, g1).images
                        im2 = center_outward_ranks(sample.X2, g2).images
                    kname, s1, s2 = scores[m]
                    stat = n * sgsc(kname, apply_scored_map(s1, im1), apply_scored_map(s2, im2))
                    hits[(m, rho)] += stat > crit[m]
                else:
                    dec = permutation_test_dcov(
                        sample,
                        B=None if B_perm is None else int(B_perm),
                        seed=seed * 1_000_003 + rep,
                        variant=PERMUTATION_METHODS[m],
                        alpha=alpha,
                    )
                    hits[(m, rho)] += dec.reject
    rows = []
    for m in methods:
        for rho in rhos:
            p = hits[(m, rho)] / reps
            rows.append({"method": m, "rho": rho, "power": p, "se": math.sqrt(p * (1 - p) / reps)})
    return rows


def write_power_csv(rows: list[dict], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["method", "rho", "power", "se"])
    for r in rows:
        w.writerow([r["method"], repr(float(r["rho"])), repr(float(r["power"])), repr(float(r["se"]))])
