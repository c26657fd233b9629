"""Null calibration of rank-based statistics.

Two routes are offered:

``resampling``
    Under independence the pair of rank-image sequences is a uniformly
    random arrangement of the two grids, whatever the data law.  Drawing
    such arrangements gives the exact finite-sample null law by Monte Carlo
    without touching data or solving any assignment.

``eigen``
    The limiting law of ``n * W`` is ``sum_v lambda_v (xi_v^2 - 1)``.  The
    eigenvalues are estimated from an ``N x N`` Monte-Carlo discretization
    of the product kernel ``g1 * g2`` and the quadratic form is simulated.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .errors import CalibrationMismatch
from .grid import GridSpec, build_grid, factorize
from .kernels import KernelId, arc_matrix, h_star, signed_sum_batch
from .scores import ScoreFunction, apply_scored_map, table_score
from . import ustat

__all__ = [
    "NullCalibration",
    "EigenModel",
    "DEFAULT_ALPHAS",
    "replicate_rng",
    "sample_spherical_uniform",
    "sample_scored",
    "g_function",
    "g_matrix",
    "g_second_moment",
    "eigen_estimate",
    "quadratic_form_sample",
    "quadratic_form_quantile",
    "empirical_quantile",
    "resample_null",
    "eigen_null",
    "score_label",
    "score_from_label",
]

DEFAULT_ALPHAS = (0.1, 0.05, 0.01)

# stream tags for replicate_rng
STREAM_NULL = 1
STREAM_DATA = 2
STREAM_PERMUTATION = 3


def replicate_rng(seed: int, *counter: int) -> np.random.Generator:
    """Generator for replicate ``counter`` of a run with master ``seed``.

    Streams depend only on ``(seed, counter)``, never on scheduling.  The
    trailing length word keeps ``(s, 1)`` and ``(s, 1, 0)`` apart, which the
    zero padding of :class:`numpy.random.SeedSequence` would otherwise merge.
    """
    key = [int(seed), *map(int, counter), 1000 + len(counter)]
    return np.random.default_rng(np.random.SeedSequence(key))


def score_label(J: ScoreFunction) -> str:
    if J.kind == "table":
        return "table:" + json.dumps([list(J.knots), list(J.values)])
    if J.kind == "vdw":
        return f"vdw{J.d}"
    return J.kind


def score_from_label(label: str) -> ScoreFunction:
    if label.startswith("table:"):
        knots, values = json.loads(label[len("table:") :])
        return table_score(knots, values)
    if label.startswith("vdw"):
        return ScoreFunction("vdw", d=int(label[3:]))
    return ScoreFunction(label)


def empirical_quantile(sorted_values: np.ndarray, level: float) -> float:
    """``inf{x : F_B(x) >= level}`` for the empirical law of the sample."""
    B = len(sorted_values)
    idx = max(0, math.ceil(level * B - 1e-12) - 1)
    return float(sorted_values[min(idx, B - 1)])


@dataclass
class NullCalibration:
    method: str
    kernel: str
    score1: str
    score2: str
    n: int
    d1: int
    d2: int
    grid1: dict
    grid2: dict
    B: int
    seed: int
    alphas: list
    critical_values: list
    null_samples: list | None = None
    lambdas: list | None = None
    N: int | None = None

    def critical_value(self, alpha: float) -> float:
        for a, c in zip(self.alphas, self.critical_values):
            if math.isclose(a, alpha, rel_tol=0, abs_tol=1e-12):
                return c
        if self.null_samples is not None:
            return empirical_quantile(np.sort(self.null_samples), 1.0 - alpha)
        return quadratic_form_quantile(self.lambdas, alpha, self.B, self.seed)

    def p_value(self, scaled: float) -> float:
        """Add-one Monte-Carlo p-value of an observed ``n * W``."""
        if self.null_samples is not None:
            draws = np.asarray(self.null_samples)
        else:
            draws = quadratic_form_sample(self.lambdas, self.B, self.seed)
        return float((1 + np.count_nonzero(draws >= scaled)) / (len(draws) + 1))

    def grid_specs(self) -> tuple[GridSpec, GridSpec]:
        return GridSpec(**self.grid1), GridSpec(**self.grid2)

    def to_dict(self) -> dict:
        d = asdict(self)
        g1, g2 = self.grid1, self.grid2
        d["n_R"] = [g1["n_R"], g2["n_R"]]
        d["n_S"] = [g1["n_S"], g2["n_S"]]
        d["n_0"] = [g1["n_0"], g2["n_0"]]
        return d

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def from_dict(cls, d: dict) -> "NullCalibration":
        known = {f for f in cls.__dataclass_fields__}
        missing = {"method", "kernel", "score1", "score2", "n", "d1", "d2", "grid1", "grid2"} - set(d)
        if missing:
            raise CalibrationMismatch(f"calibration file lacks fields {sorted(missing)}")
        return cls(**{k: v for k, v in d.items() if k in known})

    @classmethod
    def from_json(cls, path) -> "NullCalibration":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def check_matches(self, kernel, score1, score2, n, d1, d2, grid1=None, grid2=None) -> None:
        """Raise :class:`CalibrationMismatch` unless every field agrees exactly."""
        expected = {
            "kernel": KernelId.parse(kernel).value,
            "score1": score_label(score1),
            "score2": score_label(score2),
            "n": n,
            "d1": d1,
            "d2": d2,
        }
        if grid1 is not None:
            expected["grid1"] = grid1.as_dict()
        if grid2 is not None:
            expected["grid2"] = grid2.as_dict()
        for key, want in expected.items():
            have = getattr(self, key)
            if have != want:
                raise CalibrationMismatch(f"calibration {key}={have!r}, test needs {want!r}")


@dataclass
class EigenModel:
    kernel: str
    score1: str
    score2: str
    d1: int
    d2: int
    lambdas: np.ndarray
    N: int
    seed: int
    negative_mass: float = 0.0
    all_eigenvalues: np.ndarray = field(default=None, repr=False)


def sample_spherical_uniform(d: int, count: int, seed=None) -> np.ndarray:
    """``count`` draws from the spherical uniform law on the unit ball."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    radius = rng.random(count)
    z = rng.standard_normal((count, d))
    norms = np.linalg.norm(z, axis=1)
    norms[norms == 0] = 1.0
    return radius[:, None] * z / norms[:, None]


def sample_scored(score: ScoreFunction, d: int, count: int, seed=None) -> np.ndarray:
    return apply_scored_map(score, sample_spherical_uniform(d, count, seed))


def _pairwise_dist(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    return cdist(A, B)


def g_function(k, side: int, score: ScoreFunction, w1, w2, mc=(2000, 0)) -> float:
    """Monte-Carlo value of ``g(w1, w2) = E[2 f_H(w1, w2, W_3, ..., W_m)]``.

    For dcov the closed form ``|w1 - w2| - E|w1 - W| - E|W - w2| +
    E|W - W'|`` is used with one shared pool; other kernels average the
    signed sum over windows drawn from the pool.
    """
    k = KernelId.parse(k)
    if k is KernelId.KENDALL:
        raise ValueError("g is defined for the H* kernels only")
    w1 = np.atleast_1d(np.asarray(w1, dtype=float))
    w2 = np.atleast_1d(np.asarray(w2, dtype=float))
    N_g, seed = mc
    rng = np.random.default_rng(seed)
    d = w1.shape[0]
    if k is KernelId.DCOV:
        pool = sample_scored(score, d, N_g, rng)
        e1 = np.mean(np.linalg.norm(pool - w1, axis=1))
        e2 = np.mean(np.linalg.norm(pool - w2, axis=1))
        D = _pairwise_dist(pool, pool)
        e12 = D.sum() / (N_g * (N_g - 1))
        return float(np.linalg.norm(w1 - w2) - e1 - e2 + e12)
    m = k.order
    pool = sample_scored(score, d, N_g * (m - 2), rng).reshape(N_g, m - 2, d)
    W = np.empty((N_g, m, d))
    W[:, 0] = w1
    W[:, 1] = w2
    W[:, 2:] = pool
    return float(2.0 * np.mean(signed_sum_batch(k, side, h_star(m), W)))


def g_second_moment(k, score: ScoreFunction, d: int, pairs: int = 20_000, N_g: int = 8_000, seed: int = 0) -> float:
    """Independent Monte-Carlo estimate of ``Var g(W, W') = E g(W, W')^2``.

    Fresh pairs and a fresh pool are drawn; the discretized operator is not
    involved.  dcov uses its closed form, other kernels the direct signed-sum
    expectation (slow, keep ``pairs`` small).
    """
    k = KernelId.parse(k)
    rng = np.random.default_rng(seed)
    A = sample_scored(score, d, pairs, rng)
    Bv = sample_scored(score, d, pairs, rng)
    if k is KernelId.DCOV:
        pool = sample_scored(score, d, N_g, rng)
        e12 = _pairwise_dist(pool, pool).sum() / (N_g * (N_g - 1))
        g = np.empty(pairs)
        for lo in range(0, pairs, 2000):
            hi = min(pairs, lo + 2000)
            g[lo:hi] = (
                np.linalg.norm(A[lo:hi] - Bv[lo:hi], axis=1)
                - _pairwise_dist(A[lo:hi], pool).mean(axis=1)
                - _pairwise_dist(Bv[lo:hi], pool).mean(axis=1)
                + e12
            )
    else:
        g = np.array(
            [g_function(k, 1, score, a, b, mc=(N_g, int(rng.integers(2**32)))) for a, b in zip(A, Bv)]
        )
    return float(np.var(g))


def _angle_matrix(W: np.ndarray, p: np.ndarray) -> np.ndarray:
    D = W - p
    return arc_matrix(D, D)


def g_matrix(k, side: int, W: np.ndarray, pivots: np.ndarray | None = None) -> np.ndarray:
    """``G[i, j] = g(W_i, W_j)`` with expectations replaced by sample means.

    Inner expectations over free arguments are taken over the sample
    itself (double centering) and, for the pivot-based kernels, over a
    separate pivot pool.  Every term is a centered conditionally negative
    definite kernel, so ``G`` is exactly semidefinite.

    For tau* the angles of a nondegenerate triangle sum to ``pi``, which
    turns its ``g`` into six times the ``g`` of proj_d; that form is used
    when ``pivots`` are given.
    """
    k = KernelId.parse(k)
    N = W.shape[0]
    J = np.eye(N) - 1.0 / N
    if k is KernelId.DCOV:
        return J @ _pairwise_dist(W, W) @ J
    if k is KernelId.KENDALL:
        raise ValueError("g is defined for the H* kernels only")
    if pivots is None:
        raise ValueError(f"{k.value} needs a pivot pool")
    A = np.zeros((N, N))
    for p in pivots:
        if k is KernelId.HOEFF_M:
            below = np.all(W <= p, axis=1).astype(float)
            A += np.outer(below, below)
        else:
            A += _angle_matrix(W, p)
    A /= len(pivots)
    G = J @ A @ J
    return 6.0 * G if k is KernelId.TAU_STAR else G


def eigen_estimate(
    k,
    scores: Sequence[ScoreFunction],
    d1: int,
    d2: int,
    N: int = 2000,
    seed: int = 0,
    n_pivots: int = 200,
) -> EigenModel:
    """Eigenvalues of the discretized integral operator with kernel ``g1 g2``."""
    k = KernelId.parse(k)
    if N < 100:
        raise ValueError("N must be at least 100")
    s1, s2 = scores
    if k is KernelId.TAU_STAR and any(
        s.kind == "sign" and d == 1 for s, d in ((s1, d1), (s2, d2))
    ):
        raise ValueError("tau* eigenvalues need an atomless scored law")
    rng = np.random.default_rng(seed)
    W1 = sample_scored(s1, d1, N, rng)
    W2 = sample_scored(s2, d2, N, rng)
    piv1 = piv2 = None
    if k is not KernelId.DCOV:
        piv1 = sample_scored(s1, d1, n_pivots, rng)
        piv2 = sample_scored(s2, d2, n_pivots, rng)
    G1 = g_matrix(k, 1, W1, piv1)
    G2 = g_matrix(k, 2, W2, piv2)
    K = G1 * G2 / N
    K = 0.5 * (K + K.T)
    ev = np.linalg.eigvalsh(K)[::-1]
    ev = ev[np.argsort(-np.abs(ev), kind="stable")]
    lam_max = np.max(np.abs(ev))
    keep = np.abs(ev) > 1e-6 * lam_max
    neg = -np.sum(ev[ev < 0])
    return EigenModel(
        kernel=k.value,
        score1=score_label(s1),
        score2=score_label(s2),
        d1=d1,
        d2=d2,
        lambdas=ev[keep],
        N=N,
        seed=seed,
        negative_mass=float(neg / np.sum(np.abs(ev))),
        all_eigenvalues=ev,
    )


def quadratic_form_sample(lambdas, B: int = 100_000, seed: int = 0, chunk: int = 2_000) -> np.ndarray:
    """``B`` draws of ``sum_v lambda_v (xi_v^2 - 1)``; zero weights are dropped."""
    lam = np.asarray(lambdas if lambdas is not None else [], dtype=float)
    lam = lam[lam != 0]
    if lam.size == 0:
        raise ValueError("need at least one nonzero eigenvalue")
    rng = np.random.default_rng(seed)
    out = np.empty(B)
    for start in range(0, B, chunk):
        m = min(chunk, B - start)
        xi = rng.standard_normal((m, lam.size))
        out[start : start + m] = (xi * xi - 1.0) @ lam
    return out


def quadratic_form_quantile(lambdas, alpha: float, B: int = 100_000, seed: int = 0) -> float:
    """Monte-Carlo ``(1 - alpha)`` quantile of the limiting quadratic form."""
    if B < 10_000:
        raise ValueError("use at least 10^4 draws")
    draws = np.sort(quadratic_form_sample(lambdas, B, seed))
    return empirical_quantile(draws, 1.0 - alpha)


class _PermutedStatistic:
    """Statistic of ``(Y1[p1], Y2[p2])`` with reusable centered arrays."""

    def __init__(self, k: KernelId, Y1: np.ndarray, Y2: np.ndarray):
        self.k = k
        self.Y1 = Y1
        self.Y2 = Y2
        n = Y1.shape[0]
        self.n = n
        if k is KernelId.DCOV:
            self.A1 = ustat.dcov_centered(Y1)
            self.A2 = ustat.dcov_centered(Y2)
            self.norm = n * (n - 3)
        elif k in (KernelId.PROJ_D, KernelId.HOEFF_M):
            kind = "arc" if k is KernelId.PROJ_D else "orthant"
            self.A1 = ustat.triple_centered(Y1, kind)
            self.A2 = ustat.triple_centered(Y2, kind)
            self.norm = n * (n - 1) * (n - 4)

    def __call__(self, p1: np.ndarray, p2: np.ndarray) -> float:
        k = self.k
        if k is KernelId.DCOV or k in (KernelId.PROJ_D, KernelId.HOEFF_M):
            # relabel so side 1 keeps its order: q = p2 o p1^{-1}
            inv = np.empty_like(p1)
            inv[p1] = np.arange(self.n)
            q = p2[inv]
            if k is KernelId.DCOV:
                return float(np.sum(self.A1 * self.A2[np.ix_(q, q)]) / self.norm)
            return float(np.sum(self.A1 * self.A2[np.ix_(q, q, q)]) / self.norm)
        return ustat.sgsc(k, self.Y1[p1], self.Y2[p2])


def _grid_pair(n, d1, d2, grid_seed, specs=None):
    if specs is None:
        specs = (factorize(n, d1, grid_seed), factorize(n, d2, grid_seed))
    s1, s2 = specs
    if (s1.n, s1.d, s2.n, s2.d) != (n, d1, n, d2):
        raise ValueError("grid specs do not match n, d1, d2")
    return build_grid(s1), build_grid(s2)


def resample_null(
    k,
    scores: Sequence[ScoreFunction],
    n: int,
    d1: int,
    d2: int,
    B: int = 2000,
    seed: int = 0,
    alphas=DEFAULT_ALPHAS,
    grid_seed: int = 0,
    threads: int = 1,
    grid_specs: tuple[GridSpec, GridSpec] | None = None,
) -> NullCalibration:
    """Exact-in-law null distribution of ``n * W`` by random arrangements."""
    k = KernelId.parse(k)
    if B < 200:
        raise ValueError("use at least 200 replicates")
    s1, s2 = scores
    g1, g2 = _grid_pair(n, d1, d2, grid_seed, grid_specs)
    Y1 = apply_scored_map(s1, g1.points)
    Y2 = apply_scored_map(s2, g2.points)
    stat = _PermutedStatistic(k, Y1, Y2)

    def one(b: int) -> float:
        rng = replicate_rng(seed, STREAM_NULL, b)
        p1 = rng.permutation(n)
        p2 = rng.permutation(n)
        return n * stat(p1, p2)

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(threads) as ex:
            values = list(ex.map(one, range(B)))
    else:
        values = [one(b) for b in range(B)]
    null = np.sort(np.asarray(values))
    alphas = sorted(float(a) for a in alphas)[::-1]
    crit = [empirical_quantile(null, 1.0 - a) for a in alphas]
    return NullCalibration(
        method="resampling",
        kernel=k.value,
        score1=score_label(s1),
        score2=score_label(s2),
        n=n,
        d1=d1,
        d2=d2,
        grid1=g1.spec.as_dict(),
        grid2=g2.spec.as_dict(),
        B=B,
        seed=seed,
        alphas=alphas,
        critical_values=crit,
        null_samples=null.tolist(),
    )


def eigen_null(
    k,
    scores: Sequence[ScoreFunction],
    n: int,
    d1: int,
    d2: int,
    N: int = 2000,
    B: int = 100_000,
    seed: int = 0,
    alphas=DEFAULT_ALPHAS,
    grid_seed: int = 0,
    grid_specs: tuple[GridSpec, GridSpec] | None = None,
) -> NullCalibration:
    """Asymptotic calibration from estimated eigenvalues."""
    k = KernelId.parse(k)
    s1, s2 = scores
    model = eigen_estimate(k, scores, d1, d2, N=N, seed=seed)
    draws = np.sort(quadratic_form_sample(model.lambdas, B, seed))
    alphas = sorted(float(a) for a in alphas)[::-1]
    crit = [empirical_quantile(draws, 1.0 - a) for a in alphas]
    g1, g2 = _grid_pair(n, d1, d2, grid_seed, grid_specs)
    return NullCalibration(
        method="eigen",
        kernel=k.value,
        score1=score_label(s1),
        score2=score_label(s2),
        n=n,
        d1=d1,
        d2=d2,
        grid1=g1.spec.as_dict(),
        grid2=g2.spec.as_dict(),
        B=B,
        seed=seed,
        alphas=alphas,
        critical_values=crit,
        lambdas=model.lambdas.tolist(),
        N=N,
    )
