"""Sample generalized symmetric covariances (U-statistics).

``sgsc_bruteforce`` enumerates every ordered m-tuple and applies the raw
kernel definitions; it is the reference for the fast estimators below.
The fast routines use U-centered arrays:

* dcov     -- U-centered distance matrices, O(n^2)
* proj_d   -- U-centered angle arrays ``A[s, l, r]``, O(n^3)
* hoeff_m  -- same centering applied to the orthant indicator, O(n^3)
* proj_r   -- U-centered four-index arrays streamed over one index, O(n^4)
* tau_star -- direct signed sum over ordered 4-tuples, O(n^4)
* kendall  -- pairwise signs, O(n^2)
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .assignment import center_outward_ranks
from .grid import CenterOutwardGrid
from .kernels import KernelId, arc_matrix, group_for, signed_sum_batch
from .scores import ScoreFunction, apply_scored_map

__all__ = [
    "SgscStatistic",
    "sgsc_bruteforce",
    "sgsc_dcov",
    "sgsc_proj_d",
    "sgsc_hoeff_m",
    "sgsc_proj_r",
    "sgsc_tau_star",
    "sgsc_kendall",
    "sgsc",
    "dcov_centered",
    "triple_centered",
    "scored_images",
    "compute_statistic",
]

BRUTEFORCE_MAX_N = 12


@dataclass(frozen=True)
class SgscStatistic:
    kernel: KernelId
    score1: ScoreFunction | None
    score2: ScoreFunction | None
    value: float
    n: int
    d1: int
    d2: int
    grid1: dict = field(default_factory=dict)
    grid2: dict = field(default_factory=dict)

    @property
    def scaled(self) -> float:
        return self.n * self.value


def _as_matrix(Y) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    if Y.ndim != 2:
        raise ValueError("expected an (n, d) matrix")
    return Y


def _check_pair(Y1, Y2, min_n: int) -> tuple[np.ndarray, np.ndarray]:
    Y1 = _as_matrix(Y1)
    Y2 = _as_matrix(Y2)
    if Y1.shape[0] != Y2.shape[0]:
        raise ValueError(f"row counts differ: {Y1.shape[0]} vs {Y2.shape[0]}")
    if Y1.shape[0] < min_n:
        raise ValueError(f"need at least {min_n} observations, got {Y1.shape[0]}")
    return Y1, Y2


def sgsc_bruteforce(k, Y1, Y2, chunk: int = 20_000) -> float:
    """U-statistic by exhaustive enumeration of ordered m-tuples.

    Averaging the dependence kernel over the ``m!`` orderings of each subset
    equals averaging over all ordered tuples of distinct indices, which is
    what is enumerated here.  Restricted to ``n <= 12``.
    """
    k = KernelId.parse(k)
    m = k.order
    Y1, Y2 = _check_pair(Y1, Y2, m)
    n = Y1.shape[0]
    if n > BRUTEFORCE_MAX_N:
        raise ValueError(f"brute force is limited to n <= {BRUTEFORCE_MAX_N}, got {n}")
    if k is KernelId.KENDALL and (Y1.shape[1] != 1 or Y2.shape[1] != 1):
        raise ValueError("kendall needs univariate inputs")
    H = group_for(k)
    tuples = np.array(list(itertools.permutations(range(n), m)), dtype=np.int64)
    parts = []
    for start in range(0, len(tuples), chunk):
        idx = tuples[start : start + chunk]
        s1 = signed_sum_batch(k, 1, H, Y1[idx])
        s2 = signed_sum_batch(k, 2, H, Y2[idx])
        parts.append(np.sum(s1 * s2))
    return float(np.sum(parts) / len(tuples))


def dcov_centered(Y) -> np.ndarray:
    """U-centered Euclidean distance matrix (zero diagonal)."""
    Y = _as_matrix(Y)
    n = Y.shape[0]
    A = cdist(Y, Y)
    row = A.sum(axis=1) / (n - 2)
    A -= row[:, None]
    A -= row[None, :]
    A += row.sum() / (n - 1)
    np.fill_diagonal(A, 0.0)
    return A


def _row_blocks(n: int, width: int = 32_768):
    step = max(1, width // n)
    for lo in range(0, n, step):
        yield lo, min(n, lo + step)


def sgsc_dcov(Y1, Y2) -> float:
    """Unbiased distance covariance, O(n^2) time and O(n) extra memory.

    Distances are recomputed in row blocks that stay in cache: one pass
    for row sums, a second for the centered inner product.
    """
    Y1, Y2 = _check_pair(Y1, Y2, 4)
    n = Y1.shape[0]
    r1 = np.empty(n)
    r2 = np.empty(n)
    for lo, hi in _row_blocks(n):
        r1[lo:hi] = cdist(Y1[lo:hi], Y1).sum(axis=1)
        r2[lo:hi] = cdist(Y2[lo:hi], Y2).sum(axis=1)
    c1 = r1.sum() / ((n - 1) * (n - 2))
    c2 = r2.sum() / ((n - 1) * (n - 2))
    r1 /= n - 2
    r2 /= n - 2
    total = 0.0
    for lo, hi in _row_blocks(n):
        A1 = cdist(Y1[lo:hi], Y1)
        A1 -= r1[lo:hi, None]
        A1 -= r1[None, :]
        A1 += c1
        A2 = cdist(Y2[lo:hi], Y2)
        A2 -= r2[lo:hi, None]
        A2 -= r2[None, :]
        A2 += c2
        rows = np.arange(hi - lo)
        A1[rows, rows + lo] = 0.0
        total += float(np.vdot(A1, A2))
    return total / (n * (n - 3))


def _arc_slices(Y: np.ndarray, s: int) -> np.ndarray:
    """``Arc(y_l - y_s, y_r - y_s)`` over all ``(l, r)``; zero rows at ``s``."""
    D = Y - Y[s]
    out = arc_matrix(D, D)
    # identical directions must give exactly zero
    np.fill_diagonal(out, 0.0)
    return out


def _orthant_slice(Y: np.ndarray, s: int) -> np.ndarray:
    below = np.all(Y <= Y[s], axis=1).astype(float)
    return np.outer(below, below)


def _block_size(n: int) -> int:
    return max(1, 1_000_000 // (n * n))


def _raw_block(Y: np.ndarray, kind: str, ss: np.ndarray) -> np.ndarray:
    """``a[s, l, r]`` for the pivots ``ss``, zero unless ``s, l, r`` are distinct."""
    n = Y.shape[0]
    if kind == "arc":
        D = Y[None, :, :] - Y[ss, None, :]
        norms = np.sqrt(np.sum(D * D, axis=-1))
        ok = norms > 0
        U = np.divide(D, norms[..., None], out=np.zeros_like(D), where=ok[..., None])
        minus = np.zeros((len(ss), n, n))
        plus = np.zeros((len(ss), n, n))
        for c in range(Y.shape[1]):
            col = U[:, :, c]
            minus += (col[:, :, None] - col[:, None, :]) ** 2
            plus += (col[:, :, None] + col[:, None, :]) ** 2
        a = np.arctan2(np.sqrt(minus), np.sqrt(plus)) / np.pi
        a *= ok[:, :, None] & ok[:, None, :]
    else:
        below = np.all(Y[None, :, :] <= Y[ss, None, :], axis=-1).astype(float)
        a = below[:, :, None] * below[:, None, :]
    _zero_block(a, ss)
    return a


def _zero_block(a: np.ndarray, ss: np.ndarray) -> None:
    b = np.arange(len(ss))
    idx = np.arange(a.shape[1])
    a[b, ss, :] = 0.0
    a[b, :, ss] = 0.0
    a[:, idx, idx] = 0.0


def _center_block(a: np.ndarray, ss: np.ndarray) -> np.ndarray:
    n = a.shape[1]
    row = a.sum(axis=2)
    col = a.sum(axis=1)
    tot = row.sum(axis=1)
    A = (
        a
        - row[:, :, None] / (n - 3)
        - col[:, None, :] / (n - 3)
        + tot[:, None, None] / ((n - 2) * (n - 3))
    )
    _zero_block(A, ss)
    return A


def _pivot_blocks(n: int):
    step = _block_size(n)
    for lo in range(0, n, step):
        yield np.arange(lo, min(n, lo + step))


def triple_centered(Y, kind: str = "arc") -> np.ndarray:
    """U-centered three-index array ``A[s, l, r]`` for proj_d (``"arc"``)
    or hoeff_m (``"orthant"``)."""
    Y = _as_matrix(Y)
    n = Y.shape[0]
    out = np.empty((n, n, n))
    for ss in _pivot_blocks(n):
        out[ss] = _center_block(_raw_block(Y, kind, ss), ss)
    return out


def _sgsc_triple(Y1, Y2, kind: str) -> float:
    Y1, Y2 = _check_pair(Y1, Y2, 5)
    n = Y1.shape[0]
    total = 0.0
    for ss in _pivot_blocks(n):
        A1 = _center_block(_raw_block(Y1, kind, ss), ss)
        A2 = _center_block(_raw_block(Y2, kind, ss), ss)
        total += float(np.sum(A1 * A2))
    return total / (n * (n - 1) * (n - 4))


def _zero_slice(sl: np.ndarray, s: int) -> np.ndarray:
    sl[s, :] = 0.0
    sl[:, s] = 0.0
    np.fill_diagonal(sl, 0.0)
    return sl


def sgsc_proj_d(Y1, Y2) -> float:
    """Projection-averaging Hoeffding D statistic, O(n^3)."""
    return _sgsc_triple(Y1, Y2, "arc")


def sgsc_hoeff_m(Y1, Y2) -> float:
    """Marginal-ordering Hoeffding D statistic, O(n^3)."""
    return _sgsc_triple(Y1, Y2, "orthant")


def _quad_slices(a_s: np.ndarray, s: int, n: int) -> np.ndarray:
    """U-centered ``B[t, l, r]`` for one pivot ``s`` of the first side.

    ``a_s`` holds ``Arc(y_l - y_s, y_r - y_s)`` already zeroed on the
    diagonal and on row/column ``s``.
    """
    b = np.broadcast_to(a_s, (n, n, n)).copy()
    t = np.arange(n)
    b[t, t, :] = 0.0
    b[t, :, t] = 0.0
    row = b.sum(axis=2)
    col = b.sum(axis=1)
    tot = b.sum(axis=(1, 2))
    B = (
        b
        - row[:, :, None] / (n - 4)
        - col[:, None, :] / (n - 4)
        + tot[:, None, None] / ((n - 3) * (n - 4))
    )
    B[t, t, :] = 0.0
    B[t, :, t] = 0.0
    B[:, s, :] = 0.0
    B[:, :, s] = 0.0
    B[s] = 0.0
    idx = np.arange(n)
    B[:, idx, idx] = 0.0
    return B


def sgsc_proj_r(Y1, Y2) -> float:
    """Projection-averaging Blum-Kiefer-Rosenblatt R statistic, O(n^4).

    The four-index arrays are built one pivot at a time, so memory stays
    at ``n^3`` entries.
    """
    Y1, Y2 = _check_pair(Y1, Y2, 6)
    n = Y1.shape[0]
    # side 2 pivots on the fourth index t, side 1 on the third index s
    a2 = np.empty((n, n, n))
    for t in range(n):
        a2[t] = _zero_slice(_arc_slices(Y2, t), t)
    parts = np.empty(n)
    for s in range(n):
        B1 = _quad_slices(_zero_slice(_arc_slices(Y1, s), s), s, n)  # [t, l, r]
        # B2 for fixed s: the roles swap, pivot t varies and s is excluded
        b2 = a2.copy()
        b2[:, s, :] = 0.0
        b2[:, :, s] = 0.0
        row = b2.sum(axis=2)
        col = b2.sum(axis=1)
        tot = b2.sum(axis=(1, 2))
        B2 = (
            b2
            - row[:, :, None] / (n - 4)
            - col[:, None, :] / (n - 4)
            + tot[:, None, None] / ((n - 3) * (n - 4))
        )
        t = np.arange(n)
        B2[t, t, :] = 0.0
        B2[t, :, t] = 0.0
        B2[:, s, :] = 0.0
        B2[:, :, s] = 0.0
        B2[s] = 0.0
        B2[:, t, t] = 0.0
        parts[s] = np.sum(B1 * B2)
    return float(np.sum(parts) / (n * (n - 1) * (n - 2) * (n - 5)))


def _tau_table(Y: np.ndarray) -> np.ndarray:
    """``T[a, b, c] = Arc(y_a - y_b, y_b - y_c)``."""
    n = Y.shape[0]
    T = np.empty((n, n, n))
    for b in range(n):
        u = Y - Y[b]  # y_a - y_b, indexed by a; y_b - y_c is -u
        T[:, b, :] = arc_matrix(u, -u)
    return T


def _tau_signed(T: np.ndarray, p: int) -> np.ndarray:
    """Signed H*-sum for first index ``p`` over ``(i2, i3, i4)``."""
    Tp = T[p]
    Tcol = T[:, p, :]
    Tlast = T[:, :, p]
    return (
        Tp[:, :, None]
        + Tcol[:, None, :]
        - T.transpose(1, 2, 0)
        - Tlast[:, None, :]
        - Tp.T[:, :, None]
        - Tcol[None, :, :]
        + T.transpose(2, 1, 0)
        + Tlast[None, :, :]
    )


def sgsc_tau_star(Y1, Y2) -> float:
    """Projection-averaging tau* statistic by direct O(n^4) summation."""
    Y1, Y2 = _check_pair(Y1, Y2, 4)
    n = Y1.shape[0]
    T1 = _tau_table(Y1)
    T2 = _tau_table(Y2)
    i = np.arange(n)
    distinct = (
        (i[:, None, None] != i[None, :, None])
        & (i[:, None, None] != i[None, None, :])
        & (i[None, :, None] != i[None, None, :])
    )
    parts = np.empty(n)
    for p in range(n):
        mask = distinct.copy()
        mask[p, :, :] = False
        mask[:, p, :] = False
        mask[:, :, p] = False
        prod = _tau_signed(T1, p) * _tau_signed(T2, p)
        parts[p] = np.sum(prod[mask])
    return float(np.sum(parts) / (n * (n - 1) * (n - 2) * (n - 3)))


def sgsc_kendall(Y1, Y2) -> float:
    """Kendall's tau as a U-statistic over ordered pairs."""
    Y1, Y2 = _check_pair(Y1, Y2, 2)
    if Y1.shape[1] != 1 or Y2.shape[1] != 1:
        raise ValueError("kendall needs univariate inputs")
    x = Y1[:, 0]
    y = Y2[:, 0]
    n = len(x)
    s = np.sign(x[None, :] - x[:, None]) * np.sign(y[None, :] - y[:, None])
    return float(np.sum(s) / (n * (n - 1)))


_FAST = {
    KernelId.DCOV: sgsc_dcov,
    KernelId.HOEFF_M: sgsc_hoeff_m,
    KernelId.PROJ_D: sgsc_proj_d,
    KernelId.PROJ_R: sgsc_proj_r,
    KernelId.TAU_STAR: sgsc_tau_star,
    KernelId.KENDALL: sgsc_kendall,
}


def sgsc(k, Y1, Y2) -> float:
    """Fast statistic for kernel ``k`` on already scored images."""
    return _FAST[KernelId.parse(k)](Y1, Y2)


def scored_images(data, grid: CenterOutwardGrid, score: ScoreFunction) -> np.ndarray:
    ranks = center_outward_ranks(data, grid)
    return apply_scored_map(score, ranks.images)


def compute_statistic(
    k,
    sample,
    grid1: CenterOutwardGrid,
    grid2: CenterOutwardGrid,
    score1: ScoreFunction,
    score2: ScoreFunction,
) -> SgscStatistic:
    """Ranks, scores and fast statistic for a :class:`PairedSample`."""
    k = KernelId.parse(k)
    X1 = _as_matrix(sample.X1)
    X2 = _as_matrix(sample.X2)
    if X1.shape[0] != grid1.n or X2.shape[0] != grid2.n:
        raise ValueError("grid sizes do not match the sample size")
    Y1 = scored_images(X1, grid1, score1)
    Y2 = scored_images(X2, grid2, score2)
    value = sgsc(k, Y1, Y2)
    if not math.isfinite(value):
        raise ValueError("statistic is not finite")
    return SgscStatistic(
        kernel=k,
        score1=score1,
        score2=score2,
        value=value,
        n=X1.shape[0],
        d1=X1.shape[1],
        d2=X2.shape[1],
        grid1=grid1.spec.as_dict(),
        grid2=grid2.spec.as_dict(),
    )
