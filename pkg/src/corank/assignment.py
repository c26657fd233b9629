"""Empirical center-outward distribution function by optimal assignment.

Observations are coupled to grid points by the bijection minimizing the
total squared Euclidean distance.  The solver is the shortest augmenting
path form of the Hungarian method with dual potentials, O(n^3).
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .grid import CenterOutwardGrid

__all__ = [
    "RankVectors",
    "cost_matrix",
    "hungarian",
    "solve_assignment",
    "center_outward_ranks",
]


@dataclass(frozen=True)
class RankVectors:
    """Center-outward images, ranks and signs of one sample.

    ``images[i]`` is the grid point coupled to observation ``i``; ``ranks``
    are integers in ``0..n_R`` (0 for the inner half-radius points and the
    origin); ``signs`` are unit directions (zero at the origin).
    """

    images: np.ndarray
    ranks: np.ndarray
    signs: np.ndarray
    permutation: np.ndarray
    objective: float


def cost_matrix(data, grid: CenterOutwardGrid) -> np.ndarray:
    """Squared distances between every observation and every grid point."""
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    pts = grid.points if isinstance(grid, CenterOutwardGrid) else np.asarray(grid, float)
    if x.shape[1] != pts.shape[1]:
        raise ValueError(
            f"data has dimension {x.shape[1]} but the grid has dimension {pts.shape[1]}"
        )
    if x.shape[0] != pts.shape[0]:
        raise ValueError(f"{x.shape[0]} observations for {pts.shape[0]} grid points")
    if not np.all(np.isfinite(x)):
        raise ValueError("data contains non-finite values")
    diff = x[:, None, :] - pts[None, :, :]
    return np.sum(diff * diff, axis=-1)


def hungarian(cost: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimum-cost perfect matching with dual potentials.

    Returns ``(sigma, u, v)`` with ``sigma[i]`` the column of row ``i`` and
    ``cost[i, j] - u[i] - v[j] >= 0``, tight on the matching.
    """
    n = cost.shape[0]
    # 1-based arrays; index 0 is the virtual source column
    u = np.zeros(n + 1)
    v = np.zeros(n + 1)
    owner = np.zeros(n + 1, dtype=np.int64)
    way = np.zeros(n + 1, dtype=np.int64)
    c = np.zeros((n + 1, n + 1))
    c[1:, 1:] = cost
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(n + 1, np.inf)
        used = np.zeros(n + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used
            free[0] = False
            cur = c[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, np.inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    sigma = np.empty(n, dtype=np.int64)
    sigma[owner[1:] - 1] = np.arange(n)
    return sigma, u[1:], v[1:]


def _lexicographic_min(sigma: np.ndarray, tight: np.ndarray) -> np.ndarray:
    """Smallest permutation (row by row) among perfect matchings of ``tight``."""
    n = len(sigma)
    sigma = sigma.copy()
    owner = np.empty(n, dtype=np.int64)
    owner[sigma] = np.arange(n)
    fixed_col = np.zeros(n, dtype=bool)
    for i in range(n):
        for j in np.flatnonzero(tight[i, : sigma[i]]):
            k = owner[j]
            if k < i:
                continue
            # reroute row k onto the column i frees, avoiding fixed columns
            target = sigma[i]
            parent = {k: None}
            via = {}
            queue = deque([k])
            found = None
            while queue and found is None:
                r = queue.popleft()
                for col in np.flatnonzero(tight[r]):
                    if fixed_col[col] or col == j:
                        continue
                    if col == target:
                        found = (r, col)
                        break
                    nxt = owner[col]
                    if nxt == i or nxt in parent:
                        continue
                    parent[nxt] = r
                    via[nxt] = col
                    queue.append(nxt)
            if found is None:
                continue
            r, col = found
            while r is not None:
                prev_col = sigma[r]
                sigma[r] = col
                owner[col] = r
                col = prev_col
                r = parent[r]
            sigma[i] = j
            owner[j] = i
            break
        fixed_col[sigma[i]] = True
    return sigma


def solve_assignment(cost) -> np.ndarray:
    """Optimal permutation ``sigma`` minimizing ``sum_i cost[i, sigma[i]]``.

    Among several optimal permutations the lexicographically smallest one is
    returned, so the result is deterministic even for tied costs.
    """
    c = np.asarray(cost, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {c.shape}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost matrix contains non-finite entries")
    n = c.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64)
    sigma, u, v = hungarian(c)
    reduced = c - u[:, None] - v[None, :]
    tol = 1e-12 * (1.0 + np.max(np.abs(c))) * n
    tight = reduced <= tol
    tight[np.arange(n), sigma] = True
    if np.count_nonzero(tight) == n:
        return sigma
    lex = _lexicographic_min(sigma, tight)
    rows = np.arange(n)
    if c[rows, lex].sum() <= c[rows, sigma].sum():
        return lex
    return sigma


def center_outward_ranks(data, grid: CenterOutwardGrid) -> RankVectors:
    """Couple the sample to ``grid`` and read off ranks and signs."""
    x = np.asarray(data, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    cost = cost_matrix(x, grid)
    sigma = solve_assignment(cost)
    images = grid.points[sigma]
    norms = np.linalg.norm(images, axis=1)
    signs = np.zeros_like(images)
    nz = norms > 0
    signs[nz] = images[nz] / norms[nz, None]
    return RankVectors(
        images=images,
        ranks=grid.radius_index[sigma].astype(np.int64),
        signs=signs,
        permutation=sigma,
        objective=float(cost[np.arange(len(sigma)), sigma].sum()),
    )
