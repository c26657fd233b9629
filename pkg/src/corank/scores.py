"""Score functions on [0, 1) and the induced vector-scored map."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np
from scipy.special import roots_legendre

__all__ = [
    "ScoreFunction",
    "sign_score",
    "wilcoxon_score",
    "vdw_score",
    "table_score",
    "parse_score",
    "eval_score",
    "chi2_cdf",
    "chi2_inv_cdf",
    "apply_scored_map",
    "squared_integral",
]

KINDS = ("sign", "wilcoxon", "vdw", "table")


@dataclass(frozen=True)
class ScoreFunction:
    """A nonnegative continuous score ``J : [0, 1) -> [0, inf)``.

    ``d`` is only meaningful for the van der Waerden kind, where it is the
    degrees of freedom of the chi-square quantile.
    """

    kind: str
    d: int = 0
    knots: tuple[float, ...] = field(default=(), repr=False)
    values: tuple[float, ...] = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}")
        if self.kind == "vdw" and self.d < 1:
            raise ValueError("vdw score needs a dimension d >= 1")
        if self.kind == "table":
            k = np.asarray(self.knots, dtype=float)
            v = np.asarray(self.values, dtype=float)
            if k.ndim != 1 or k.shape != v.shape or len(k) < 2:
                raise ValueError("table score needs matching knots/values, at least 2")
            if np.any(np.diff(k) <= 0):
                raise ValueError("table knots must be strictly increasing")
            if k[0] > 0 or k[-1] < 1:
                raise ValueError("table knots must cover [0, 1]")
            if np.any(v < 0):
                raise ValueError("table score values must be nonnegative")
            if not squared_integral(self) > 0:
                raise ValueError("degenerate score: integral of J^2 is zero")

    @property
    def regularity(self) -> str:
        # Only the identity score is Lipschitz, strictly monotone and zero at 0.
        return "strong" if self.kind == "wilcoxon" else "weak"

    @property
    def name(self) -> str:
        return self.kind

    def __call__(self, u):
        return eval_score(self, u)


def sign_score() -> ScoreFunction:
    return ScoreFunction("sign")


def wilcoxon_score() -> ScoreFunction:
    return ScoreFunction("wilcoxon")


def vdw_score(d: int) -> ScoreFunction:
    return ScoreFunction("vdw", d=d)


def table_score(knots, values) -> ScoreFunction:
    return ScoreFunction(
        "table", knots=tuple(float(k) for k in knots), values=tuple(float(v) for v in values)
    )


def parse_score(name: str, d: int) -> ScoreFunction:
    """Build a score from its CLI name; ``d`` is the side's dimension."""
    if name == "sign":
        return sign_score()
    if name == "wilcoxon":
        return wilcoxon_score()
    if name == "vdw":
        return vdw_score(d)
    raise ValueError(f"unknown score {name!r}")


def _lower_gamma_regularized(a: float, x: np.ndarray) -> np.ndarray:
    """P(a, x) by series (x < a + 1) or Lentz continued fraction."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    lg = math.lgamma(a)
    ser = pos & (x < a + 1.0)
    if np.any(ser):
        xs = x[ser]
        term = np.full_like(xs, 1.0 / a)
        total = term.copy()
        ap = a
        for _ in range(1000):
            ap += 1.0
            term = term * xs / ap
            total += term
            if np.all(np.abs(term) < np.abs(total) * 1e-17):
                break
        out[ser] = total * np.exp(-xs + a * np.log(xs) - lg)
    cf = pos & ~ser
    if np.any(cf):
        xs = x[cf]
        tiny = 1e-300
        b = xs + 1.0 - a
        c = np.full_like(xs, 1.0 / tiny)
        dd = 1.0 / b
        h = dd.copy()
        for i in range(1, 1000):
            an = -i * (i - a)
            b = b + 2.0
            dd = an * dd + b
            dd = np.where(np.abs(dd) < tiny, tiny, dd)
            c = b + an / c
            c = np.where(np.abs(c) < tiny, tiny, c)
            dd = 1.0 / dd
            delta = dd * c
            h = h * delta
            if np.all(np.abs(delta - 1.0) < 1e-16):
                break
        out[cf] = 1.0 - np.exp(-xs + a * np.log(xs) - lg) * h
    return out


def chi2_cdf(d: int, x):
    """Chi-square distribution function with ``d`` degrees of freedom."""
    x = np.asarray(x, dtype=float)
    return _lower_gamma_regularized(d / 2.0, x / 2.0)


def _chi2_logpdf(d: int, x: np.ndarray) -> np.ndarray:
    a = d / 2.0
    return (a - 1.0) * np.log(x) - x / 2.0 - a * math.log(2.0) - math.lgamma(a)


def chi2_inv_cdf(d: int, u):
    """Chi-square quantile, accurate to about 1e-12 absolute.

    Newton iterations on the regularized incomplete gamma function started
    from the Wilson-Hilferty approximation, safeguarded by bisection.
    """
    if d < 1:
        raise ValueError("degrees of freedom must be >= 1")
    scalar = np.isscalar(u)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any((u < 0) | (u >= 1)) or np.any(~np.isfinite(u)):
        raise ValueError("chi2_inv_cdf needs 0 <= u < 1")
    out = np.zeros_like(u)
    todo = u > 0
    if np.any(todo):
        p = u[todo]
        z = np.array([NormalDist().inv_cdf(float(v)) for v in p])
        k = 2.0 / (9.0 * d)
        x = d * np.clip(1.0 - k + z * math.sqrt(k), 1e-3, None) ** 3
        lo = np.zeros_like(p)
        hi = np.full_like(p, np.inf)
        for _ in range(200):
            f = chi2_cdf(d, x) - p
            lo = np.where(f < 0, x, lo)
            hi = np.where(f > 0, x, hi)
            with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
                nx = x - f / np.exp(_chi2_logpdf(d, x))
            bad = ~np.isfinite(nx) | (nx <= lo) | (nx >= hi)
            fallback = np.where(np.isfinite(hi), 0.5 * (lo + hi), 2.0 * x + 1.0)
            nx = np.where(bad, fallback, nx)
            done = np.abs(nx - x) <= 1e-14 * np.maximum(1.0, x)
            x = nx
            if np.all(done):
                break
        out[todo] = x
    return float(out[0]) if scalar else out


def eval_score(J: ScoreFunction, u):
    """Evaluate ``J`` at radius ``u`` (scalar or array) in ``[0, 1)``."""
    scalar = np.isscalar(u)
    arr = np.atleast_1d(np.asarray(u, dtype=float))
    if np.any((arr < 0) | (arr >= 1)) or np.any(~np.isfinite(arr)):
        raise ValueError("score functions are defined on [0, 1)")
    if J.kind == "sign":
        out = np.ones_like(arr)
    elif J.kind == "wilcoxon":
        out = arr.copy()
    elif J.kind == "vdw":
        # grid radii repeat heavily, so solve once per distinct value
        vals, inverse = np.unique(arr, return_inverse=True)
        out = np.sqrt(chi2_inv_cdf(J.d, vals))[inverse].reshape(arr.shape)
    else:
        out = np.interp(arr, np.asarray(J.knots), np.asarray(J.values))
    return float(out[0]) if scalar else out


def apply_scored_map(J: ScoreFunction, points) -> np.ndarray:
    """Map each ``u`` to ``J(|u|) u / |u|``, keeping the origin fixed."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None]
    norms = np.linalg.norm(pts, axis=1)
    if np.any(norms >= 1):
        raise ValueError("scored map needs points strictly inside the unit ball")
    out = np.zeros_like(pts)
    nz = norms > 0
    if np.any(nz):
        scale = eval_score(J, norms[nz]) / norms[nz]
        out[nz] = pts[nz] * scale[:, None]
    return out


def squared_integral(J: ScoreFunction, nodes: int = 10_000) -> float:
    """Gauss-Legendre value of the integral of ``J(u)**2`` over [0, 1).

    The substitution ``u = 1 - (1 - s)**4`` tames the logarithmic blow-up
    of the normal score at 1.
    """
    s, w = roots_legendre(nodes)
    s = 0.5 * (s + 1.0)
    w = 0.5 * w
    p = 4
    u = 1.0 - (1.0 - s) ** p
    jac = p * (1.0 - s) ** (p - 1)
    # nodes that round to u == 1 carry mass below 1e-16 in u
    keep = u < 1.0
    vals = np.asarray(eval_score(J, u[keep])) ** 2
    return float(np.sum(w[keep] * vals * jac[keep]))
