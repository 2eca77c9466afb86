"""Independent oracles for the test suite.

Everything here is computed by quadrature, closed forms, or brute-force
search -- never by calling the code under test.  Expected values quoted in
individual tests as literals were frozen from these oracles.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm


def trunc_gauss_moments(mean: float, lo: float, hi: float) -> tuple[float, float]:
    """(mean, variance) of N(mean, 1) conditioned on [lo, hi], by quadrature."""
    # Clamp only infinite endpoints; a hard mean+-12 window can swallow a
    # finite far-tail interval entirely.
    a = lo if math.isfinite(lo) else min(hi, mean) - 12.0
    b = hi if math.isfinite(hi) else max(lo, mean) + 12.0
    z, _ = quad(lambda x: norm.pdf(x, mean), a, b)
    m1, _ = quad(lambda x: x * norm.pdf(x, mean), a, b)
    m2, _ = quad(lambda x: x * x * norm.pdf(x, mean), a, b)
    mu = m1 / z
    return mu, m2 / z - mu * mu


def gauss_mass(mean: float, lo: float, hi: float) -> float:
    """P(N(mean,1) in [lo, hi]) via the CDF, switching to the survival
    function on the right tail to avoid 1 - 1 cancellation."""
    a, b = lo - mean, hi - mean
    if a > 0:
        return float(norm.sf(a) - norm.sf(b))
    return float(norm.cdf(b) - norm.cdf(a))


def _grid_cells(mu_center: float, h: float, span: float = 10.0):
    """Unit-grid-style 1-D cells [k h, (k+1) h) covering mu_center +- span."""
    k_lo = math.floor((mu_center - span) / h)
    k_hi = math.ceil((mu_center + span) / h)
    return [(k * h, (k + 1) * h) for k in range(k_lo, k_hi + 1)]


def grid_nll_1d(mu: float, mu_star: float, h: float = 1.0) -> float:
    """Coarse negative log-likelihood L(mu) = sum_P N(mu*; P) * (-log N(mu; P))
    for the 1-D grid of side h, truncating cells beyond +-10 sigma."""
    total = 0.0
    for lo, hi in _grid_cells((mu + mu_star) / 2.0, h, span=12.0):
        w = gauss_mass(mu_star, lo, hi)
        if w < 1e-20:
            continue
        m = gauss_mass(mu, lo, hi)
        total += w * (-math.log(m))
    return total


def grid_nll_gradient_1d(mu: float, mu_star: float, h: float = 1.0) -> float:
    """dL/dmu by the exact identity mu - sum_P N(mu*;P) E[N(mu,1)|P]."""
    acc = mu
    for lo, hi in _grid_cells((mu + mu_star) / 2.0, h, span=12.0):
        w = gauss_mass(mu_star, lo, hi)
        if w < 1e-20:
            continue
        m, _ = trunc_gauss_moments(mu, lo, hi)
        acc -= w * m
    return acc


def grid_nll_gradient_fd(mu: float, mu_star: float, h: float = 1.0,
                         step: float = 1e-4) -> float:
    """Central finite difference of the quadrature NLL."""
    return (grid_nll_1d(mu + step, mu_star, h) - grid_nll_1d(mu - step, mu_star, h)) / (2 * step)


def grid_curvature_1d(mu_star: float, h: float = 1.0) -> float:
    """1 - sum_P N(mu*;P) Var(N(mu*,1)|P): directional curvature at mu* along
    the grid axis."""
    acc = 1.0
    for lo, hi in _grid_cells(mu_star, h, span=12.0):
        w = gauss_mass(mu_star, lo, hi)
        if w < 1e-20:
            continue
        _, v = trunc_gauss_moments(mu_star, lo, hi)
        acc -= w * v
    return acc


def triangle_mean_quadrature(mean: np.ndarray, res: int = 500) -> np.ndarray:
    """E[N(mean, I) | triangle x>=0, y>=0, x+y<=1] on a res x res tensor grid."""
    xs = (np.arange(res) + 0.5) / res
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    inside = X + Y <= 1.0
    w = norm.pdf(X, mean[0]) * norm.pdf(Y, mean[1]) * inside
    z = w.sum()
    return np.array([float((w * X).sum() / z), float((w * Y).sum() / z)])


def triangle_chebyshev_grid(res: int = 800) -> tuple[np.ndarray, float]:
    """Brute-force Chebyshev center of the triangle x>=0, y>=0, x+y<=1:
    grid-search the point maximizing distance to the three edges."""
    xs = np.linspace(0.0, 1.0, res)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    d = np.minimum(np.minimum(X, Y), (1.0 - X - Y) / math.sqrt(2.0))
    i = np.unravel_index(np.argmax(d), d.shape)
    return np.array([X[i], Y[i]]), float(d[i])


def two_ball_projection_grid(point: np.ndarray, c1: np.ndarray, r1: float,
                             c2: np.ndarray, r2: float,
                             res: int = 2001, span: float = 2.5) -> np.ndarray:
    """Brute-force projection of `point` onto B(c1,r1) intersect B(c2,r2)."""
    xs = np.linspace(-span, span, res)
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    ok = ((X - c1[0]) ** 2 + (Y - c1[1]) ** 2 <= r1 ** 2) & \
         ((X - c2[0]) ** 2 + (Y - c2[1]) ** 2 <= r2 ** 2)
    d2 = (X - point[0]) ** 2 + (Y - point[1]) ** 2
    d2[~ok] = np.inf
    i = np.unravel_index(np.argmin(d2), d2.shape)
    best = np.array([X[i], Y[i]])
    # Refine with a fine local grid around the coarse winner.
    step = xs[1] - xs[0]
    fx = np.linspace(best[0] - 2 * step, best[0] + 2 * step, res)
    fy = np.linspace(best[1] - 2 * step, best[1] + 2 * step, res)
    FX, FY = np.meshgrid(fx, fy, indexing="ij")
    ok = ((FX - c1[0]) ** 2 + (FY - c1[1]) ** 2 <= r1 ** 2) & \
         ((FX - c2[0]) ** 2 + (FY - c2[1]) ** 2 <= r2 ** 2)
    d2 = (FX - point[0]) ** 2 + (FY - point[1]) ** 2
    d2[~ok] = np.inf
    j = np.unravel_index(np.argmin(d2), d2.shape)
    return np.array([FX[j], FY[j]])


def ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Closed-form least squares via the normal equations."""
    return np.linalg.solve(X.T @ X, X.T @ y)


def laplace_trunc_variance(lo: float, hi: float, scale: float = 1.0) -> float:
    """Var of Laplace(0, scale) conditioned on [lo, hi], by quadrature."""
    pdf = lambda x: math.exp(-abs(x) / scale) / (2 * scale)
    z, _ = quad(pdf, lo, hi)
    m1, _ = quad(lambda x: x * pdf(x), lo, hi)
    m2, _ = quad(lambda x: x * x * pdf(x), lo, hi)
    mu = m1 / z
    return m2 / z - mu * mu
