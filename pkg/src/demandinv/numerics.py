"""Numerical utilities shared by the solvers.

Minimum-norm least squares, Chebyshev nodes/interpolation, Gauss-Hermite
quadrature, and AR(1) fitting. All functions are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Ar1Fit:
    intercept: float
    slope: float
    residual_sd: float


@dataclass(frozen=True)
class Quadrature:
    nodes: np.ndarray
    weights: np.ndarray


def ls_minnorm(A, b) -> np.ndarray:
    """Minimum-norm least-squares solution of min ||b - A g||_2.

    Rank deficiency is handled by construction (SVD-backed lstsq).
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    sol, *_ = np.linalg.lstsq(A, b, rcond=None)
    return sol


def chebyshev_nodes(n: int, lo: float, hi: float) -> np.ndarray:
    """n Chebyshev-Gauss nodes mapped affinely from [-1,1] to [lo,hi], increasing."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if not lo < hi:
        raise ValueError("need lo < hi")
    k = np.arange(n)
    x = np.cos((2 * k + 1) * np.pi / (2 * n))  # decreasing in (-1, 1)
    x = x[::-1]
    return 0.5 * (lo + hi) + 0.5 * (hi - lo) * x


def chebyshev_fit(values) -> np.ndarray:
    """Chebyshev coefficients interpolating ``values`` at chebyshev_nodes(n, ...).

    values[k] must be ordered like the node array (increasing abscissa).
    Uses the discrete orthogonality of T_m at the Chebyshev-Gauss points.
    """
    f = np.asarray(values, dtype=float)
    n = f.size
    k = np.arange(n)
    theta = (2 * k + 1) * np.pi / (2 * n)  # angles of the decreasing node order
    fk = f[::-1]  # back to cos-ordering
    m = np.arange(n)[:, None]
    c = (2.0 / n) * (np.cos(m * theta[None, :]) @ fk)
    c[0] *= 0.5
    return c


def chebyshev_eval(coeffs, x, lo: float, hi: float):
    """Evaluate the interpolant at x, clamping x into [lo,hi] first.

    Clamping keeps the AR(1) expectation step from extrapolating the
    polynomial outside the grid, where it blows up.
    """
    c = np.asarray(coeffs, dtype=float)
    xa = np.clip(np.asarray(x, dtype=float), lo, hi)
    z = (2.0 * xa - (lo + hi)) / (hi - lo)
    return np.polynomial.chebyshev.chebval(z, c)


def chebyshev_eval_rows(coeffs, x, lo: float, hi: float) -> np.ndarray:
    """Row-batched Clenshaw evaluation: coeffs (R, n) at points x (R, ...).

    Row r of ``x`` is evaluated under row r of ``coeffs``; used where every
    consumer type carries its own interpolant.
    """
    c = np.asarray(coeffs, dtype=float)
    xa = np.clip(np.asarray(x, dtype=float), lo, hi)
    z = (2.0 * xa - (lo + hi)) / (hi - lo)
    n = c.shape[1]
    if n == 1:
        return np.broadcast_to(c[:, 0][(...,) + (None,) * (z.ndim - 1)], z.shape).copy()
    extra = (None,) * (z.ndim - 1)
    b1 = np.zeros_like(z)
    b2 = np.zeros_like(z)
    for m in range(n - 1, 0, -1):
        b1, b2 = c[:, m][(slice(None),) + extra] + 2.0 * z * b1 - b2, b1
    return c[:, 0][(slice(None),) + extra] + z * b1 - b2


def gauss_hermite(order: int) -> Quadrature:
    """Physicists' Gauss-Hermite rule; weights sum to sqrt(pi)."""
    if order < 1:
        raise ValueError("order must be >= 1")
    nodes, weights = np.polynomial.hermite.hermgauss(order)
    return Quadrature(nodes=nodes, weights=weights)


def ols_ar1(series) -> Ar1Fit:
    """OLS fit of x_{t+1} = a + b x_t + u; residual sd uses T-1-2 dof.

    A zero-variance regressor (flat series) returns slope 0 and intercept
    equal to the mean of the targets, keeping downstream value iteration
    well defined on flat inclusive-value paths.
    """
    x = np.asarray(series, dtype=float)
    if x.size < 3:
        raise ValueError("series must have length >= 3")
    lo, hi = x[:-1], x[1:]
    n = lo.size
    mx = lo.mean()
    my = hi.mean()
    sxx = float(((lo - mx) ** 2).sum())
    if sxx == 0.0:
        slope = 0.0
        intercept = my
    else:
        slope = float(((lo - mx) * (hi - my)).sum() / sxx)
        intercept = my - slope * mx
    resid = hi - (intercept + slope * lo)
    dof = n - 2
    sd = float(np.sqrt((resid @ resid) / dof)) if dof > 0 else 0.0
    return Ar1Fit(intercept=intercept, slope=slope, residual_sd=sd)


def ols_ar1_rows(series: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized ols_ar1 over the rows of ``series`` (R, T)."""
    x = np.asarray(series, dtype=float)
    lo, hi = x[:, :-1], x[:, 1:]
    n = lo.shape[1]
    mx = lo.mean(axis=1)
    my = hi.mean(axis=1)
    dx = lo - mx[:, None]
    sxx = (dx**2).sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        slope = np.where(sxx > 0.0, (dx * (hi - my[:, None])).sum(axis=1) / np.where(sxx > 0, sxx, 1.0), 0.0)
    intercept = my - slope * mx
    resid = hi - (intercept[:, None] + slope[:, None] * lo)
    dof = max(n - 2, 1)
    sd = np.sqrt((resid**2).sum(axis=1) / dof)
    return intercept, slope, sd
