"""Coarse negative log-likelihood: stable 1-D evaluation, the stochastic
gradient oracle built on cell clipping, and Monte-Carlo curvature probes."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr

from .geometry import (
    EMPTY,
    AxisBox,
    ConvexSet,
    GeometryError,
    HPolytope,
    Interval,
    Partition,
    Singleton,
    WholeSpace,
    clip_to_box,
)
from .sampling import (
    DEFAULT_POLICY,
    SamplerPolicy,
    sample_gaussian,
    sample_truncated,
    sample_truncated_batch,
)

__all__ = [
    "GradientSample",
    "ProjectionBall",
    "nll_1d",
    "log_interval_mass",
    "min_norm_point",
    "stochastic_gradient",
    "second_moment_probe",
    "project",
    "directional_hessian_mc",
]


@dataclass(frozen=True)
class GradientSample:
    """One stochastic gradient, plus whether the cell had to be replaced."""

    g: np.ndarray
    cell_radius_clipped: bool


@dataclass(frozen=True)
class ProjectionBall:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.atleast_1d(np.asarray(self.center, dtype=float)))
        if self.radius <= 0:
            raise ValueError("projection radius must be positive")


def log_interval_mass(mean, lo, hi) -> np.ndarray:
    """log P(N(mean,1) in [lo, hi]), stable in both tails.

    After reflecting into the lower tail, log(Phi(b) - Phi(a)) =
    log Phi(b) + log1p(-exp(log Phi(a) - log Phi(b))).
    """
    mean = np.asarray(mean, dtype=float)
    a = np.asarray(lo, dtype=float) - mean
    b = np.asarray(hi, dtype=float) - mean
    a, b = np.broadcast_arrays(a, b)
    flip = b > -a  # a + b > 0 without inf - inf
    a2 = np.where(flip, -b, a)
    b2 = np.where(flip, -a, b)
    la = log_ndtr(a2)
    lb = log_ndtr(b2)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = lb + np.log1p(-np.exp(la - lb))
    return np.where(a2 == b2, -np.inf, out)


def nll_1d(mean: float, interval) -> float:
    """-log N(mean, 1; interval); nonnegative, 0 iff the interval is all of R."""
    if isinstance(interval, Interval):
        lo, hi = interval.lo, interval.hi
    else:
        lo, hi = float(interval[0]), float(interval[1])
    if lo > hi:
        raise ValueError("reversed interval endpoints")
    if lo == hi:
        return math.inf  # singular observation
    return float(-log_interval_mass(mean, lo, hi))


def min_norm_point(cell: ConvexSet) -> np.ndarray:
    """The point of the cell closest to the origin (deterministic F-map anchor)."""
    if isinstance(cell, Singleton):
        return cell.point.copy()
    if isinstance(cell, WholeSpace):
        return np.zeros(cell.dim)
    if isinstance(cell, Interval):
        return np.array([min(max(0.0, cell.lo), cell.hi)])
    if isinstance(cell, AxisBox):
        return np.clip(np.zeros(cell.dim), cell.lo, cell.hi)
    if isinstance(cell, HPolytope):
        from scipy.optimize import minimize

        d = cell.dim
        from .geometry import interior_point

        try:
            x0, _ = interior_point(cell)
        except GeometryError:
            x0 = np.zeros(d)
        res = minimize(
            lambda x: 0.5 * float(x @ x),
            x0,
            jac=lambda x: x,
            constraints=[{
                "type": "ineq",
                "fun": lambda x: cell.offsets - cell.normals @ x,
                "jac": lambda x: -cell.normals,
            }],
            method="SLSQP",
        )
        if not res.success:
            raise GeometryError("min-norm point solve failed")
        return np.asarray(res.x)
    raise GeometryError(f"unsupported cell {type(cell).__name__}")


def stochastic_gradient(mu, cell: ConvexSet, R: float, rng,
                        policy: SamplerPolicy = DEFAULT_POLICY) -> GradientSample:
    """Unbiased gradient estimate mu - y with y ~ N(mu, I; cell clipped to
    the L-infinity ball of radius R); emptied cells collapse to their
    min-norm point."""
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    clipped = clip_to_box(cell, R)
    replaced = clipped is EMPTY
    if replaced:
        clipped = Singleton(min_norm_point(cell))
    y = sample_truncated(mu, clipped, rng, policy)
    return GradientSample(mu - y, replaced)


def second_moment_probe(mu, stream, R: float, n: int, rng,
                        policy: SamplerPolicy = DEFAULT_POLICY) -> float:
    """Empirical mean of ||g||^2 over n fresh cells from the stream."""
    if n < 1:
        raise ValueError("need n >= 1")
    total = 0.0
    for _ in range(n):
        gs = stochastic_gradient(mu, stream.draw(), R, rng, policy)
        total += float(gs.g @ gs.g)
    return total / n


def _project_ball(x: np.ndarray, ball: ProjectionBall) -> np.ndarray:
    v = x - ball.center
    r = np.linalg.norm(v)
    if r <= ball.radius:
        return x
    return ball.center + v * (ball.radius / r)


def project(point, *balls: ProjectionBall, tol: float = 1e-12) -> np.ndarray:
    """Euclidean projection onto the intersection of the given balls.

    One ball is radial scaling; two or more use Dykstra's alternating
    projections to the stated tolerance.
    """
    x = np.atleast_1d(np.asarray(point, dtype=float))
    if not balls:
        raise ValueError("need at least one ball")
    if len(balls) == 1:
        return _project_ball(x, balls[0])
    y = x.copy()
    incs = [np.zeros_like(x) for _ in balls]
    for _ in range(10000):
        prev = y.copy()
        for i, ball in enumerate(balls):
            z = _project_ball(y + incs[i], ball)
            incs[i] = y + incs[i] - z
            y = z
        if np.linalg.norm(y - prev) <= tol:
            break
    return y


def directional_hessian_mc(partition: Partition, mu_star, u, n: int, rng,
                           inner: int = 64,
                           policy: SamplerPolicy = DEFAULT_POLICY) -> tuple[float, float]:
    """Monte-Carlo estimate of the directional curvature 1 - E_P Var(u.x | P)
    at the true mean; returns (estimate, standard error).

    Near zero along slab directions, strictly positive for identifiable
    families.
    """
    mu_star = np.atleast_1d(np.asarray(mu_star, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if abs(np.linalg.norm(u) - 1.0) > 1e-9:
        raise ValueError("direction must be a unit vector")
    per_cell = np.empty(n)
    for i in range(n):
        x = sample_gaussian(mu_star, rng)
        cell = partition(x)
        if isinstance(cell, Singleton):
            per_cell[i] = 0.0
        elif isinstance(cell, WholeSpace):
            per_cell[i] = 1.0
        else:
            ys = sample_truncated_batch(mu_star, cell, inner, rng, policy)
            per_cell[i] = float(np.var(ys @ u, ddof=1))
    score = 1.0 - float(np.mean(per_cell))
    se = float(np.std(per_cell, ddof=1) / math.sqrt(n))
    return score, se
