"""Linear regression under market friction: interval-preimage friction
functions, synthetic data generation, covariate rescaling, and one-pass
projected SGD over a random permutation of the observations."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .estimator import EstimateReport, StageRecord
from .geometry import Interval, Singleton
from scipy.special import log_ndtr, ndtri_exp

from .likelihood import ProjectionBall, project
from .sampling import truncated_normal_1d

__all__ = [
    "FrictionFunction",
    "FloorFriction",
    "DeadbandLadder",
    "IdentityFriction",
    "FrictionInstance",
    "FrictionConfig",
    "preimage",
    "generate_friction_data",
    "rescale_instance",
    "clip_interval",
    "friction_gradient",
    "one_pass_psgd",
    "estimate_friction",
]


class FrictionFunction:
    """Maps a latent output y to an observed value with interval preimages."""

    def __call__(self, y: float) -> float:
        raise NotImplementedError

    def preimage_bounds(self, z: float) -> Tuple[float, float]:
        """(lo, hi) of c^{-1}(z); lo == hi encodes a singleton."""
        raise NotImplementedError


@dataclass(frozen=True)
class FloorFriction(FrictionFunction):
    """c(y) = h * floor(y / h)."""

    h: float = 1.0

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("floor step must be positive")

    def __call__(self, y):
        return self.h * np.floor(np.asarray(y, dtype=float) / self.h)

    def preimage_bounds(self, z: float) -> Tuple[float, float]:
        k = z / self.h
        if abs(k - round(k)) > 1e-9:
            raise ValueError(f"{z} is not in the range of floor({self.h})")
        return z, z + self.h


@dataclass(frozen=True)
class DeadbandLadder(FrictionFunction):
    """Piecewise-constant friction: value values[i] on [breaks[i-1], breaks[i])."""

    breakpoints: tuple
    values: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.breakpoints)
        v = tuple(float(x) for x in self.values)
        if list(b) != sorted(b) or len(set(b)) != len(b):
            raise ValueError("breakpoints must be strictly increasing")
        if len(v) != len(b) + 1:
            raise ValueError("need one more value than breakpoints")
        if len(set(v)) != len(v):
            raise ValueError("ladder values must be distinct")
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def __call__(self, y):
        idx = np.searchsorted(self.breakpoints, np.asarray(y, dtype=float), side="right")
        return np.asarray(self.values)[idx]

    def preimage_bounds(self, z: float) -> Tuple[float, float]:
        try:
            i = self.values.index(float(z))
        except ValueError:
            raise ValueError(f"{z} is not in the range of the ladder") from None
        lo = -math.inf if i == 0 else self.breakpoints[i - 1]
        hi = math.inf if i == len(self.breakpoints) else self.breakpoints[i]
        return lo, hi


@dataclass(frozen=True)
class IdentityFriction(FrictionFunction):
    def __call__(self, y):
        return np.asarray(y, dtype=float)

    def preimage_bounds(self, z: float) -> Tuple[float, float]:
        return z, z


def preimage(c: FrictionFunction, z: float):
    """The interval c^{-1}(z) as a geometry cell (Singleton when degenerate)."""
    lo, hi = c.preimage_bounds(z)
    if lo == hi:
        return Singleton(np.array([lo]))
    return Interval(lo, hi)


@dataclass
class FrictionInstance:
    X: np.ndarray
    z: np.ndarray
    c: FrictionFunction
    C: float                      # bound on ||w*||_2
    alpha: float = 0.5
    debug_y: Optional[np.ndarray] = None  # hidden latent outputs, tests only

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.z = np.asarray(self.z, dtype=float)
        if self.X.ndim != 2 or self.z.shape != (self.X.shape[0],):
            raise ValueError("X must be (n, d) with matching z")
        if self.C <= 0 or not 0 < self.alpha <= 1:
            raise ValueError("need C > 0 and alpha in (0, 1]")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    @property
    def D(self) -> float:
        return float(np.max(np.abs(self.X)))

    def design_floor(self) -> float:
        """b with (1/n) sum x_i x_i^T >= b^2 I, from the smallest eigenvalue."""
        gram = self.X.T @ self.X / self.n
        lam = float(np.linalg.eigvalsh(gram)[0])
        if lam <= 1e-12:
            raise ValueError("design matrix not well-conditioned")
        return math.sqrt(lam)


def generate_friction_data(w_star, X, c: FrictionFunction, rng,
                           C: Optional[float] = None,
                           alpha: float = 0.5) -> FrictionInstance:
    """z_i = c(x_i^T w* + xi_i) with standard Gaussian noise; the latent y_i
    are kept only on the debug side channel."""
    w_star = np.atleast_1d(np.asarray(w_star, dtype=float))
    X = np.asarray(X, dtype=float)
    if X.shape[1] != w_star.shape[0]:
        raise ValueError("covariate dimension does not match w*")
    y = X @ w_star + rng.standard_normal(X.shape[0])
    z = np.asarray(c(y), dtype=float)
    if C is None:
        C = max(1.0, float(np.linalg.norm(w_star)))
    return FrictionInstance(X=X, z=z, c=c, C=C, debug_y=y, alpha=alpha)


def rescale_instance(instance: FrictionInstance):
    """Downscale covariates to unit Euclidean norm bound: x / (D sqrt(d)).

    Returns (scaled instance, back_map) with back_map(w_scaled) recovering
    parameters on the original scale (the scaled optimum is w* . D sqrt(d)).
    """
    s = instance.D * math.sqrt(instance.d)
    if s <= 0:
        raise ValueError("degenerate covariates")
    scaled = FrictionInstance(
        X=instance.X / s, z=instance.z, c=instance.c,
        C=instance.C * s, alpha=instance.alpha, debug_y=instance.debug_y,
    )
    return scaled, (lambda w: np.asarray(w, dtype=float) / s)


def clip_interval(lo: float, hi: float, R: float) -> Tuple[float, float]:
    """H_R: intersect with [-R, R]; an emptied interval collapses to the
    singleton at its endpoint nearest zero."""
    lo2, hi2 = max(lo, -R), min(hi, R)
    if lo2 > hi2:
        p = lo if abs(lo) <= abs(hi) else hi
        if not math.isfinite(p):
            p = lo if math.isfinite(lo) else hi
        return p, p
    return lo2, hi2


def friction_gradient(w, x_i, S_i, R: float, rng) -> np.ndarray:
    """(x_i^T w - u) * x_i with u ~ N(x_i^T w, 1; H_R(S_i))."""
    w = np.atleast_1d(np.asarray(w, dtype=float))
    x_i = np.atleast_1d(np.asarray(x_i, dtype=float))
    if isinstance(S_i, Singleton):
        lo = hi = float(S_i.point[0])
    elif isinstance(S_i, Interval):
        lo, hi = S_i.lo, S_i.hi
    else:
        lo, hi = float(S_i[0]), float(S_i[1])
    lo, hi = clip_interval(lo, hi, R)
    m = float(x_i @ w)
    if lo == hi:
        u = lo
    else:
        u = float(truncated_normal_1d(m, lo, hi, rng))
    return (m - u) * x_i


@dataclass
class FrictionConfig:
    eps: float
    alpha: float = 0.5
    schedule: str = "practical"
    step_scale: float = 1.0
    pilot_n: int = 32
    boost_splits: int = 1        # >1 enables the clustering booster on data splits

    def __post_init__(self):
        if not 0 < self.eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.boost_splits < 1:
            raise ValueError("boost_splits must be >= 1")

    def eta(self, b: float) -> float:
        return self.alpha * b / 200.0

    def rho(self, b: float) -> float:
        return self.alpha ** 2 * b ** 2 / 600.0 ** 2

    def paper_stage_constants(self, G2: float, b: float, eps0: float) -> dict:
        eta = self.eta(b)
        eps_f = min(self.rho(b), eta ** 2 * self.eps ** 2)
        tau = max(1, math.ceil(math.log2(eps0 / eps_f)))
        return {
            "tau": tau,
            "C0": 2.0 * eps0 / (eta * math.sqrt(eps_f)),
            "gamma0": eps0 / (300.0 * G2 * tau),
            "T": 4.0 * 300.0 ** 2 * G2 * tau ** 2 / (eta ** 2 * eps_f),
            "eps_f": eps_f,
        }


def _stage_steps(n_avail: int, tau: int) -> List[int]:
    """Geometric allocation (final stage gets ~half) summing to n_avail."""
    weights = np.array([2.0 ** l for l in range(1, tau + 1)])
    steps = [int(n_avail * w / weights.sum()) for w in weights]
    steps[-1] += n_avail - sum(steps)
    return steps


def one_pass_psgd(instance: FrictionInstance, config: FrictionConfig, rng,
                  R: Optional[float] = None,
                  usage: Optional[np.ndarray] = None) -> np.ndarray:
    """One pass over a random permutation: tau stages with halving steps and
    trust radii, each observation's gradient used at most once; returns the
    estimate on the original covariate scale."""
    scaled, back = rescale_instance(instance)
    n, d = scaled.n, scaled.d
    b = scaled.design_floor()  # raises if ill-conditioned
    if R is None:
        R = instance.C * instance.D * math.sqrt(instance.d) + 2.0 * math.log(max(n, 2)) + 5.0
    # Pre-resolve preimage intervals through H_R.
    lo = np.empty(n)
    hi = np.empty(n)
    for i in range(n):
        l, h = scaled.c.preimage_bounds(scaled.z[i])
        lo[i], hi[i] = clip_interval(l, h, R)

    C_bar = scaled.C
    # The feasible ball gets 50% slack: projecting onto a ball whose boundary
    # passes exactly through w* biases the averaged iterate inward.
    C_run = 1.5 * C_bar
    tau = max(1, math.ceil(math.log2(max(2.0, instance.C / config.eps))))
    pilot = min(config.pilot_n, max(0, n - tau)) if config.schedule == "paper" else 0
    n_sgd = n - pilot
    if n_sgd < tau:
        raise ValueError(
            f"n={n} too small: need at least {tau + pilot} observations "
            f"for the {tau}-stage schedule"
        )
    perm = rng.permutation(n)
    if usage is None:
        usage = np.zeros(n, dtype=np.int64)

    X = scaled.X
    w = np.zeros(d)
    if config.schedule == "paper":
        # Pilot estimate of the gradient second moment from the permutation tail.
        g2 = 0.0
        for idx in perm[n_sgd:]:
            usage[idx] += 1
            g = _one_gradient(w, X[idx], lo[idx], hi[idx], rng)
            g2 += float(g @ g)
        G2 = max(g2 / max(pilot, 1), 1e-12)
        consts = config.paper_stage_constants(G2, b, C_bar * math.sqrt(G2))
        need = consts["tau"] * consts["T"]
        if 100.0 * consts["tau"] ** 2 * consts["T"] > n:
            warnings.warn(
                f"one-pass guarantee asks n >= 100 tau^2 T = "
                f"{100 * consts['tau'] ** 2 * consts['T']:.2e}, have n = {n}",
                stacklevel=2,
            )
        if need > n_sgd:
            raise ValueError(f"n={n} too small: paper schedule needs {need:.3e}")
        tau = consts["tau"]
        steps = [int(consts["T"])] * tau
        gamma0 = consts["gamma0"]
        gamma_cap = math.inf
        C0 = consts["C0"]
    else:
        steps = _stage_steps(n_sgd, tau)
        C0 = 2.0 * C_run
        # Per-sample stability for the quadratic part: gamma ||x_i||^2 <= 1
        # on every row, with tail averaging absorbing the step-size choice.
        gamma_cap = config.step_scale / (2.0 * float(np.max(np.sum(X ** 2, axis=1))))
        gamma0 = gamma_cap * 2.0 ** tau

    ball = ProjectionBall(np.zeros(d), C_run)
    U = rng.random(n)
    anchor = w
    pos = 0
    for l in range(1, tau + 1):
        gamma_l = min(gamma0 * 2.0 ** -l, gamma_cap)
        C_l = C0 * 2.0 ** -l
        w = anchor.copy()
        acc = np.zeros(d)
        T_l = steps[l - 1]
        trust = ProjectionBall(anchor, C_l)
        C_run2 = C_run * C_run
        C_l2 = C_l * C_l
        for t in range(T_l):
            idx = perm[pos]
            usage[idx] += 1
            xi = X[idx]
            m = float(xi @ w)
            li, hie = lo[idx], hi[idx]
            if li == hie:
                u_draw = li
            else:
                u_draw = _trunc_scalar(m, li, hie, U[pos])
            pos += 1
            w = w - (gamma_l * (m - u_draw)) * xi
            v = w - anchor
            r2 = float(v @ v)
            if r2 > C_l2:
                w = anchor + v * (C_l / math.sqrt(r2))
            if float(w @ w) > C_run2:
                w = _proj2(w, ball, trust)
            acc += w
        anchor = acc / T_l
    return back(anchor)


def _trunc_scalar(m: float, lo: float, hi: float, u: float) -> float:
    """Scalar counterpart of truncated_normal_1d sharing its log-CDF inversion."""
    a = lo - m
    b = hi - m
    flip = b > -a  # a + b > 0 without inf - inf
    if flip:
        a, b = -b, -a
    la = float(log_ndtr(a))
    lb = float(log_ndtr(b))
    log_f = lb + math.log(u + (1.0 - u) * math.exp(la - lb))
    z = float(ndtri_exp(log_f))
    if flip:
        z = -z
    x = m + z
    return min(max(x, lo), hi)


def _one_gradient(w: np.ndarray, xi: np.ndarray, lo: float, hi: float, rng) -> np.ndarray:
    m = float(xi @ w)
    if lo == hi:
        u = lo
    else:
        u = float(truncated_normal_1d(m, lo, hi, rng))
    return (m - u) * xi


def _proj2(x: np.ndarray, ball: ProjectionBall, trust: ProjectionBall) -> np.ndarray:
    v = x - trust.center
    r = float(np.linalg.norm(v))
    if r > trust.radius:
        x = trust.center + v * (trust.radius / r)
    nrm = float(np.linalg.norm(x - ball.center))
    if nrm <= ball.radius:
        return x
    return project(x, ball, trust)


def estimate_friction(instance: FrictionInstance, config: FrictionConfig,
                      rng) -> EstimateReport:
    """Full pipeline: design-floor check, rescaling, locality radius,
    one-pass PSGD, optional clustering boost over disjoint data splits."""
    t0 = time.perf_counter()
    b = instance.design_floor()  # raises if ill-conditioned
    n = instance.n
    R = instance.C * instance.D * math.sqrt(instance.d) + 2.0 * math.log(max(n, 2)) + 5.0
    usage = np.zeros(n, dtype=np.int64)
    if config.boost_splits == 1:
        w = one_pass_psgd(instance, config, rng, R=R, usage=usage)
        cands = [w]
    else:
        cands = []
        splits = np.array_split(rng.permutation(n), config.boost_splits)
        for part in splits:
            sub = FrictionInstance(X=instance.X[part], z=instance.z[part],
                                   c=instance.c, C=instance.C, alpha=instance.alpha)
            cands.append(one_pass_psgd(sub, config, rng, R=R))
        from .estimator import boost_by_clustering

        w = boost_by_clustering(cands, config.eps)
    if np.any(usage > 1):
        raise AssertionError("one-pass contract violated: index reused")
    report = EstimateReport(mu_hat=w, samples_consumed=int(np.sum(usage > 0)) if config.boost_splits == 1 else n,
                            eps_used=config.eps)
    report.boost_candidates = cands
    report.wall_time = time.perf_counter() - t0
    return report


def ols_solution(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Closed-form least squares, the Identity-friction baseline."""
    return np.linalg.lstsq(np.asarray(X, dtype=float), np.asarray(y, dtype=float),
                           rcond=None)[0]
