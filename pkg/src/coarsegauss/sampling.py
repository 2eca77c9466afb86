"""Exact and approximate sampling from Gaussians truncated to convex sets.

The 1-D sampler is exact (inverse CDF, stable far into the tails by working
in log-CDF space).  Boxes factorize per coordinate under identity covariance
and are sampled exactly.  Polytopes use rejection when the cell carries
enough Gaussian mass, otherwise a hit-and-run chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import log_ndtr, ndtri_exp

from .geometry import (
    AxisBox,
    ConvexSet,
    GeometryError,
    HPolytope,
    Interval,
    Singleton,
    WholeSpace,
    interior_point,
)

__all__ = [
    "SamplerPolicy",
    "make_rng",
    "fork_rng",
    "sample_gaussian",
    "sample_truncated_1d",
    "truncated_normal_1d",
    "sample_truncated",
    "sample_truncated_batch",
    "hit_and_run",
]


def make_rng(seed) -> np.random.Generator:
    return np.random.default_rng(seed)


def fork_rng(rng: np.random.Generator, n: int) -> list[np.random.Generator]:
    """Independent child generators for reproducible parallel streams."""
    return rng.spawn(n)


@dataclass(frozen=True)
class SamplerPolicy:
    """Knobs for approximate polytope sampling.

    The mixing-time theory gives only asymptotic bounds; these constants are
    fixed here and validated against the exact 1-D sampler in the tests.
    """

    rejection_min_acceptance: float = 0.05
    hnr_burn_in: Optional[int] = None  # None -> 500 * dim
    hnr_thinning: int = 10
    acceptance_probe: int = 200

    def __post_init__(self):
        if not 0 < self.rejection_min_acceptance <= 1:
            raise ValueError("rejection_min_acceptance must be in (0, 1]")
        if self.hnr_burn_in is not None and self.hnr_burn_in <= 0:
            raise ValueError("hnr_burn_in must be positive")
        if self.hnr_thinning <= 0 or self.acceptance_probe <= 0:
            raise ValueError("thinning and probe counts must be positive")

    def burn_in(self, dim: int) -> int:
        return self.hnr_burn_in if self.hnr_burn_in is not None else 500 * dim


DEFAULT_POLICY = SamplerPolicy()


def sample_gaussian(mean, rng: np.random.Generator) -> np.ndarray:
    """One draw from N(mean, I)."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    return mean + rng.standard_normal(mean.shape)


def truncated_normal_1d(mean, lo, hi, rng: np.random.Generator) -> np.ndarray:
    """Vectorized exact draws from N(mean_i, 1) conditioned on [lo_i, hi_i].

    Inverse CDF evaluated in log space: after reflecting each interval into
    the lower tail, log F = log Phi(b) + log(u + (1-u) * Phi(a)/Phi(b)) is
    finite even when both endpoints sit many sigmas out.
    """
    mean = np.asarray(mean, dtype=float)
    a = np.asarray(lo, dtype=float) - mean
    b = np.asarray(hi, dtype=float) - mean
    a, b = np.broadcast_arrays(a, b)
    if np.any(a > b):
        raise ValueError("reversed interval endpoints")
    flip = b > -a  # a + b > 0 without inf - inf
    a2 = np.where(flip, -b, a)
    b2 = np.where(flip, -a, b)
    la = log_ndtr(a2)
    lb = log_ndtr(b2)
    u = rng.random(a2.shape)
    with np.errstate(divide="ignore"):
        log_f = lb + np.log(u + (1.0 - u) * np.exp(la - lb))
    z = ndtri_exp(log_f)
    z = np.where(flip, -z, z)
    x = mean + z
    return np.clip(x, lo, hi)


def sample_truncated_1d(mean: float, interval, rng: np.random.Generator) -> float:
    """Exact draw from N(mean, 1) conditioned on an interval."""
    if isinstance(interval, Interval):
        lo, hi = interval.lo, interval.hi
    else:
        lo, hi = float(interval[0]), float(interval[1])
    if lo > hi:
        raise ValueError(f"reversed interval endpoints [{lo}, {hi}]")
    if lo == hi:
        return lo
    return float(truncated_normal_1d(np.asarray(mean, dtype=float), lo, hi, rng))


def _rank_one_direction(cell: HPolytope) -> Optional[np.ndarray]:
    """Unit vector v if every normal is parallel to v (slab cell), else None."""
    A = cell.normals
    v = A[0] / np.linalg.norm(A[0])
    proj = A @ v
    if np.allclose(A, proj[:, None] * v[None, :], atol=1e-12):
        return v
    return None


def _slab_bounds(cell: HPolytope, v: np.ndarray) -> tuple[float, float]:
    """1-D bounds of a slab cell along its normal direction v."""
    lo, hi = -math.inf, math.inf
    for a, b in zip(cell.normals, cell.offsets):
        s = float(a @ v)
        if s > 0:
            hi = min(hi, b / s)
        else:
            lo = max(lo, b / s)
    return lo, hi


def sample_truncated(mean, cell: ConvexSet, rng: np.random.Generator,
                     policy: SamplerPolicy = DEFAULT_POLICY) -> np.ndarray:
    return sample_truncated_batch(mean, cell, 1, rng, policy)[0]


def sample_truncated_batch(mean, cell: ConvexSet, n: int, rng: np.random.Generator,
                           policy: SamplerPolicy = DEFAULT_POLICY) -> np.ndarray:
    """n draws (rows) from N(mean, I) restricted to the cell.

    Exact for singletons, boxes, intervals and full space; for polytopes the
    law is within the policy's mixing tolerance when hit-and-run is used.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    d = mean.shape[0]
    if cell.dim != d:
        raise GeometryError(f"dimension mismatch: mean has {d}, cell has {cell.dim}")
    if isinstance(cell, Singleton):
        return np.tile(cell.point, (n, 1))
    if isinstance(cell, WholeSpace):
        return mean + rng.standard_normal((n, d))
    if isinstance(cell, Interval):
        return truncated_normal_1d(np.full(n, mean[0]), cell.lo, cell.hi, rng)[:, None]
    if isinstance(cell, AxisBox):
        out = np.empty((n, d))
        for j in range(d):
            out[:, j] = truncated_normal_1d(np.full(n, mean[j]), cell.lo[j], cell.hi[j], rng)
        return out
    if isinstance(cell, HPolytope):
        v = _rank_one_direction(cell)
        if v is not None:
            # Slab: exact split into 1-D truncation along v plus free Gaussian.
            lo, hi = _slab_bounds(cell, v)
            t = truncated_normal_1d(np.full(n, float(mean @ v)), lo, hi, rng)
            g = mean + rng.standard_normal((n, d))
            g = g - np.outer(g @ v, v)
            return g + np.outer(t, v)
        return _sample_polytope(mean, cell, n, rng, policy)
    raise GeometryError(f"cannot sample from {type(cell).__name__}")


def _sample_polytope(mean: np.ndarray, cell: HPolytope, n: int,
                     rng: np.random.Generator, policy: SamplerPolicy) -> np.ndarray:
    d = mean.shape[0]
    probe = mean + rng.standard_normal((policy.acceptance_probe, d))
    inside = np.all(probe @ cell.normals.T <= cell.offsets + 1e-12, axis=1)
    rate = float(np.mean(inside))
    if rate >= policy.rejection_min_acceptance:
        out = np.empty((n, d))
        got = 0
        batch = max(256, int(2 * n / max(rate, 1e-3)))
        while got < n:
            cand = mean + rng.standard_normal((batch, d))
            ok = np.all(cand @ cell.normals.T <= cell.offsets + 1e-12, axis=1)
            take = cand[ok][: n - got]
            out[got:got + take.shape[0]] = take
            got += take.shape[0]
        return out
    start, _ = interior_point(cell)  # raises for unbounded polytopes
    out = np.empty((n, d))
    x = _hnr_chain(mean, cell, start, policy.burn_in(d), rng)
    for i in range(n):
        x = _hnr_chain(mean, cell, x, policy.hnr_thinning, rng)
        out[i] = x
    return out


def _chord_box(cell: AxisBox, x: np.ndarray, u: np.ndarray) -> tuple[float, float]:
    with np.errstate(divide="ignore", invalid="ignore"):
        t1 = (cell.lo - x) / u
        t2 = (cell.hi - x) / u
    lo_c = np.where(u > 0, t1, np.where(u < 0, t2, -math.inf))
    hi_c = np.where(u > 0, t2, np.where(u < 0, t1, math.inf))
    return float(np.max(lo_c)), float(np.min(hi_c))


def _chord_polytope(cell: HPolytope, x: np.ndarray, u: np.ndarray) -> tuple[float, float]:
    s = cell.normals @ u
    r = cell.offsets - cell.normals @ x
    tlo, thi = -math.inf, math.inf
    pos = s > 1e-14
    neg = s < -1e-14
    if np.any(pos):
        thi = float(np.min(r[pos] / s[pos]))
    if np.any(neg):
        tlo = float(np.max(r[neg] / s[neg]))
    return tlo, thi


def _chord_bisect(cell: ConvexSet, x: np.ndarray, u: np.ndarray,
                  rel_tol: float = 1e-10) -> tuple[float, float]:
    """Chord endpoints against a membership oracle only; cell must be bounded."""

    def edge(sign: float) -> float:
        step = 1.0
        t_in, t_out = 0.0, None
        for _ in range(200):
            if cell.contains(x + sign * step * u):
                t_in = step
                step *= 2.0
            else:
                t_out = step
                break
        if t_out is None:
            raise GeometryError("chord is unbounded; clip the cell first")
        tol = rel_tol * (t_out - t_in + 1.0)
        while t_out - t_in > tol:
            mid = (t_in + t_out) / 2.0
            if cell.contains(x + sign * mid * u):
                t_in = mid
            else:
                t_out = mid
        return sign * t_in

    lo, hi = edge(-1.0), edge(1.0)
    return min(lo, hi), max(lo, hi)


def _hnr_chain(mean: np.ndarray, cell: ConvexSet, start: np.ndarray,
               steps: int, rng: np.random.Generator) -> np.ndarray:
    x = np.array(start, dtype=float)
    d = x.shape[0]
    for _ in range(steps):
        u = rng.standard_normal(d)
        u /= np.linalg.norm(u)
        if isinstance(cell, AxisBox):
            tlo, thi = _chord_box(cell, x, u)
        elif isinstance(cell, HPolytope):
            tlo, thi = _chord_polytope(cell, x, u)
        elif isinstance(cell, Interval):
            tlo, thi = _chord_box(AxisBox(np.array([cell.lo]), np.array([cell.hi])), x, u)
        else:
            tlo, thi = _chord_bisect(cell, x, u)
        if not (math.isfinite(tlo) and math.isfinite(thi)):
            raise GeometryError("hit-and-run needs a bounded cell")
        # Target restricted to the chord is a 1-D Gaussian centered at the
        # projection of the mean onto the line.
        m1 = float(u @ (mean - x))
        t = sample_truncated_1d(m1, (tlo, thi), rng)
        x = x + t * u
    return x


def hit_and_run(mean, cell: ConvexSet, start, steps: int,
                rng: np.random.Generator) -> np.ndarray:
    """Run the hit-and-run chain for N(mean, I) on the cell; returns final state."""
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    start = np.atleast_1d(np.asarray(start, dtype=float))
    if not cell.contains(start):
        raise GeometryError("hit-and-run start point lies outside the cell")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    return _hnr_chain(mean, cell, start, steps, rng)
