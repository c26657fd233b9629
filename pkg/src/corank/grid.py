"""Center-outward grids over the open unit ball.

The grid has ``n_R`` spheres of radii ``r / (n_R + 1)`` intersected with
``n_S`` rays, plus ``n_0`` extra points at half the smallest radius.  Its
discrete uniform measure approximates the spherical uniform law.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import TextIO

import numpy as np

__all__ = [
    "GridSpec",
    "CenterOutwardGrid",
    "factorize",
    "build_rays",
    "build_grid",
    "make_grid",
    "write_grid_csv",
]


@dataclass(frozen=True)
class GridSpec:
    """Factorization ``n = n_R * n_S + n_0`` of the sample size."""

    d: int
    n: int
    n_R: int
    n_S: int
    n_0: int
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise ValueError(f"dimension must be >= 1, got {self.d}")
        if self.n_R < 1 or self.n_S < 1:
            raise ValueError("n_R and n_S must be positive")
        if self.n != self.n_R * self.n_S + self.n_0:
            raise ValueError(
                f"n={self.n} != n_R*n_S + n_0 = {self.n_R}*{self.n_S} + {self.n_0}"
            )
        if not 0 <= self.n_0 < min(self.n_R, self.n_S):
            raise ValueError(
                f"n_0={self.n_0} must lie in [0, min(n_R, n_S)={min(self.n_R, self.n_S)})"
            )
        if self.d == 1 and self.n_S != 2:
            raise ValueError("d=1 requires n_S=2")

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "n": self.n,
            "n_R": self.n_R,
            "n_S": self.n_S,
            "n_0": self.n_0,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class CenterOutwardGrid:
    spec: GridSpec
    rays: np.ndarray  # (n_S, d)
    points: np.ndarray  # (n, d)
    ray_index: np.ndarray  # (n,) ray carrying each point
    radius_index: np.ndarray  # (n,) r in 1..n_R, or 0 for the inner points

    @property
    def n(self) -> int:
        return self.spec.n

    @property
    def d(self) -> int:
        return self.spec.d


def factorize(n: int, d: int, seed: int = 0) -> GridSpec:
    """Choose ``(n_R, n_S, n_0)`` for a sample of size ``n`` in dimension ``d``.

    For ``d = 1`` the two rays are fixed and ``n_R = n // 2``.  Otherwise
    ``n_R`` starts at ``floor(sqrt(n))`` and is decremented until the
    remainder is smaller than both ``n_R`` and ``n_S = n // n_R``.
    """
    if n < 4:
        raise ValueError(f"sample size must be >= 4, got {n}")
    if d < 1:
        raise ValueError(f"dimension must be >= 1, got {d}")
    if d == 1:
        n_S = 2
        n_R = n // n_S
        return GridSpec(d=1, n=n, n_R=n_R, n_S=n_S, n_0=n - n_R * n_S, seed=seed)
    n_R = math.isqrt(n)
    while n_R > 1:
        n_S = n // n_R
        n_0 = n - n_R * n_S
        if n_0 < min(n_R, n_S):
            break
        n_R -= 1
    n_S = n // n_R
    return GridSpec(d=d, n=n, n_R=n_R, n_S=n_S, n_0=n - n_R * n_S, seed=seed)


def _fibonacci_sphere(count: int) -> np.ndarray:
    golden = (1.0 + math.sqrt(5.0)) / 2.0
    i = np.arange(count, dtype=float)
    z = 1.0 - (2.0 * i + 1.0) / count
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = 2.0 * math.pi * i / golden
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def _first_primes(k: int) -> list[int]:
    primes: list[int] = []
    c = 2
    while len(primes) < k:
        if all(c % p for p in primes if p * p <= c):
            primes.append(c)
        c += 1
    return primes


def _halton_directions(d: int, count: int, seed: int) -> np.ndarray:
    # Halton points pushed through the normal quantile give a low-discrepancy
    # Gaussian cloud; normalizing yields well spread directions.  The seed
    # only drives a random rotation.
    from statistics import NormalDist

    inv = np.vectorize(NormalDist().inv_cdf)
    cols = []
    for base in _first_primes(d):
        vals = np.empty(count)
        for i in range(count):
            f, r, k = 1.0, 0.0, i + 1
            while k > 0:
                f /= base
                r += f * (k % base)
                k //= base
            vals[i] = r
        cols.append(inv(vals))
    pts = np.column_stack(cols)
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    pts = pts @ q.T
    return pts / np.linalg.norm(pts, axis=1, keepdims=True)


def build_rays(d: int, n_S: int, seed: int = 0) -> np.ndarray:
    """Unit direction vectors, one per row.

    ``d = 2`` gives equiangular rays starting at angle 0; ``d = 3`` a
    spherical Fibonacci lattice.  Higher dimensions use a rotated Halton
    construction where ``seed`` picks the rotation.
    """
    if n_S < 1:
        raise ValueError("n_S must be positive")
    if d == 1:
        if n_S != 2:
            raise ValueError("d=1 requires n_S=2")
        return np.array([[-1.0], [1.0]])
    if d == 2:
        angles = 2.0 * math.pi * np.arange(n_S) / n_S
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if d == 3:
        return _fibonacci_sphere(n_S)
    return _halton_directions(d, n_S, seed)


def build_grid(spec: GridSpec) -> CenterOutwardGrid:
    rays = build_rays(spec.d, spec.n_S, spec.seed)
    radii = np.arange(1, spec.n_R + 1) / (spec.n_R + 1)
    # ray-major ordering: ray s, then radius r
    points = (rays[:, None, :] * radii[None, :, None]).reshape(-1, spec.d)
    ray_index = np.repeat(np.arange(spec.n_S), spec.n_R)
    radius_index = np.tile(np.arange(1, spec.n_R + 1), spec.n_S)
    if spec.n_0 >= 1:
        if spec.d == 1:
            extra = np.zeros((1, 1))
            extra_rays = np.array([-1])
        else:
            rng = np.random.default_rng(spec.seed)
            chosen = np.sort(rng.choice(spec.n_S, size=spec.n_0, replace=False))
            extra = rays[chosen] / (2.0 * (spec.n_R + 1))
            extra_rays = chosen
        points = np.vstack([points, extra])
        ray_index = np.concatenate([ray_index, extra_rays])
        radius_index = np.concatenate([radius_index, np.zeros(len(extra), dtype=int)])
    return CenterOutwardGrid(
        spec=spec,
        rays=rays,
        points=points,
        ray_index=ray_index,
        radius_index=radius_index,
    )


def make_grid(n: int, d: int, seed: int = 0) -> CenterOutwardGrid:
    """Shortcut for ``build_grid(factorize(n, d, seed))``."""
    return build_grid(factorize(n, d, seed))


def write_grid_csv(grid: CenterOutwardGrid, fh: TextIO) -> None:
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(
        ["ray_index", "radius_index"] + [f"coord_{k + 1}" for k in range(grid.d)]
    )
    for s, r, p in zip(grid.ray_index, grid.radius_index, grid.points):
        writer.writerow([int(s), int(r)] + [repr(float(x)) for x in p])
