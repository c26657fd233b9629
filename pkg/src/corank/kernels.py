"""Raw kernels of the generalized symmetric covariances and their signed sums.

Each dependence measure is the expectation of a product of two
group-signed kernel sums, one per side.  The functions here work on
explicit windows of vectors; they are slow and serve as the reference
definitions behind the fast estimators in :mod:`corank.ustat`.
"""
from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

__all__ = [
    "KernelId",
    "GroupH",
    "h_star",
    "h_tau",
    "group_for",
    "arc",
    "arc_batch",
    "arc_matrix",
    "kernel_batch",
    "signed_sum_batch",
    "kernel_eval",
    "signed_sum",
    "dependence_kernel",
    "symmetrized_kernel",
]


class KernelId(str, enum.Enum):
    DCOV = "dcov"
    HOEFF_M = "hoeff_m"
    PROJ_D = "proj_d"
    PROJ_R = "proj_r"
    TAU_STAR = "tau_star"
    KENDALL = "kendall"

    @property
    def order(self) -> int:
        return _ORDERS[self]

    @property
    def orthogonally_invariant(self) -> bool:
        return self in (KernelId.DCOV, KernelId.PROJ_D, KernelId.PROJ_R, KernelId.TAU_STAR)

    @classmethod
    def parse(cls, name) -> "KernelId":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name))
        except ValueError:
            raise ValueError(
                f"unknown kernel {name!r}; choose from {[k.value for k in cls]}"
            ) from None


_ORDERS = {
    KernelId.DCOV: 4,
    KernelId.HOEFF_M: 5,
    KernelId.PROJ_D: 5,
    KernelId.PROJ_R: 6,
    KernelId.TAU_STAR: 4,
    KernelId.KENDALL: 2,
}

MULTIVARIATE_KERNELS = (
    KernelId.DCOV,
    KernelId.HOEFF_M,
    KernelId.PROJ_D,
    KernelId.PROJ_R,
    KernelId.TAU_STAR,
)


@dataclass(frozen=True)
class GroupH:
    """Signed permutation group acting on kernel windows (0-based images)."""

    m: int
    permutations: tuple[tuple[int, ...], ...]
    signs: tuple[int, ...]

    def __post_init__(self):
        if sum(self.signs) != 0:
            raise ValueError("group needs as many odd as even permutations")
        perms = set(self.permutations)
        for p in self.permutations:
            for q in self.permutations:
                if tuple(p[q[i]] for i in range(self.m)) not in perms:
                    raise ValueError("permutation set is not closed under composition")


def _perm_sign(p: Sequence[int]) -> int:
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def h_star(m: int) -> GroupH:
    """The group generated by the transpositions (1 4) and (2 3) in S_m."""
    if m < 4:
        raise ValueError("H* needs m >= 4")
    rest = tuple(range(4, m))
    perms = (
        (0, 1, 2, 3) + rest,
        (3, 1, 2, 0) + rest,
        (0, 2, 1, 3) + rest,
        (3, 2, 1, 0) + rest,
    )
    return GroupH(m, perms, tuple(_perm_sign(p) for p in perms))


def h_tau() -> GroupH:
    perms = ((0, 1), (1, 0))
    return GroupH(2, perms, (1, -1))


def group_for(k: KernelId) -> GroupH:
    k = KernelId.parse(k)
    return h_tau() if k is KernelId.KENDALL else h_star(k.order)


def _unit_rows(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    norms = np.sqrt(np.sum(X * X, axis=-1))
    ok = norms > 0
    U = np.zeros_like(X)
    U[ok] = X[ok] / norms[ok, None]
    return U, ok


def arc(u, v) -> float:
    """Angle between ``u`` and ``v`` divided by ``2 pi``; 0 if either is zero."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    if u.shape != v.shape:
        raise ValueError("arc arguments must have the same dimension")
    return float(arc_batch(u[None], v[None])[0])


# The angle is taken as 2 atan2(|a - b|, |a + b|) for unit vectors a, b,
# which stays accurate near 0 and pi where arccos of the cosine does not.
# Grid images on a common ray sit exactly at those angles.


def arc_batch(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Row-wise :func:`arc` over the last axis."""
    a, oka = _unit_rows(np.asarray(u, dtype=float))
    b, okb = _unit_rows(np.asarray(v, dtype=float))
    minus = np.sqrt(np.sum((a - b) ** 2, axis=-1))
    plus = np.sqrt(np.sum((a + b) ** 2, axis=-1))
    return np.where(oka & okb, np.arctan2(minus, plus) / np.pi, 0.0)


def arc_matrix(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    """``Arc(U[l], V[r])`` for every pair of rows."""
    a, oka = _unit_rows(np.asarray(U, dtype=float))
    b, okb = _unit_rows(np.asarray(V, dtype=float))
    out = np.arctan2(cdist(a, b), cdist(a, -b)) / np.pi
    out[~oka, :] = 0.0
    out[:, ~okb] = 0.0
    return out


def kernel_batch(k: KernelId, side: int, W: np.ndarray) -> np.ndarray:
    """Raw kernel ``f_side`` of ``k`` on a stack of windows ``W[t, l, :]``."""
    k = KernelId.parse(k)
    if side not in (1, 2):
        raise ValueError("side must be 1 or 2")
    W = np.asarray(W, dtype=float)
    if W.ndim == 2:
        W = W[:, :, None]
    if W.shape[1] != k.order:
        raise ValueError(f"{k.value} takes {k.order} arguments, got {W.shape[1]}")
    if k is KernelId.KENDALL:
        if W.shape[2] != 1:
            raise ValueError("kendall kernel is univariate")
        return (W[:, 0, 0] < W[:, 1, 0]).astype(float)
    if k is KernelId.DCOV:
        diff = W[:, 0] - W[:, 1]
        return 0.5 * np.sqrt(np.sum(diff * diff, axis=-1))
    if k is KernelId.HOEFF_M:
        below = np.all(W[:, 0] <= W[:, 4], axis=-1) & np.all(W[:, 1] <= W[:, 4], axis=-1)
        return 0.5 * below.astype(float)
    if k is KernelId.PROJ_D:
        return 0.5 * arc_batch(W[:, 0] - W[:, 4], W[:, 1] - W[:, 4])
    if k is KernelId.PROJ_R:
        pivot = W[:, 4] if side == 1 else W[:, 5]
        return 0.5 * arc_batch(W[:, 0] - pivot, W[:, 1] - pivot)
    return arc_batch(W[:, 0] - W[:, 1], W[:, 1] - W[:, 2]) + arc_batch(
        W[:, 1] - W[:, 0], W[:, 0] - W[:, 3]
    )


def kernel_eval(k: KernelId, side: int, window) -> float:
    """Evaluate the raw kernel ``f_side`` of ``k`` on ``m`` points."""
    k = KernelId.parse(k)
    if len(window) != k.order:
        raise ValueError(f"{k.value} takes {k.order} arguments, got {len(window)}")
    W = np.stack([np.atleast_1d(np.asarray(w, dtype=float)) for w in window])
    return float(kernel_batch(k, side, W[None])[0])


def signed_sum_batch(k: KernelId, side: int, H: GroupH, W: np.ndarray) -> np.ndarray:
    W = np.asarray(W, dtype=float)
    if W.ndim == 2:
        W = W[:, :, None]
    total = np.zeros(W.shape[0])
    for perm, sgn in zip(H.permutations, H.signs):
        total += sgn * kernel_batch(k, side, W[:, list(perm)])
    return total


def signed_sum(k: KernelId, side: int, H: GroupH, window) -> float:
    """``sum_{sigma in H} sgn(sigma) f(w_sigma(1), ..., w_sigma(m))``."""
    total = 0.0
    for perm, sgn in zip(H.permutations, H.signs):
        total += sgn * kernel_eval(k, side, [window[i] for i in perm])
    return total


def dependence_kernel(k: KernelId, H: GroupH, pairs) -> float:
    """Product of the two signed sums on a tuple of ``m`` paired points."""
    k = KernelId.parse(k)
    if len(pairs) != k.order:
        raise ValueError(f"{k.value} takes {k.order} pairs, got {len(pairs)}")
    x1 = [p[0] for p in pairs]
    x2 = [p[1] for p in pairs]
    return signed_sum(k, 1, H, x1) * signed_sum(k, 2, H, x2)


def symmetrized_kernel(k: KernelId, H: GroupH, pairs) -> float:
    """Average of :func:`dependence_kernel` over all orderings of the tuple."""
    k = KernelId.parse(k)
    m = k.order
    if len(pairs) != m:
        raise ValueError(f"{k.value} takes {m} pairs, got {len(pairs)}")
    total = 0.0
    for perm in itertools.permutations(range(m)):
        total += dependence_kernel(k, H, [pairs[i] for i in perm])
    return total / math.factorial(m)
