"""Convex observation cells and partitions-as-oracles.

Cells are closed for standalone membership; partitions break boundary ties
with half-open conventions inside ``locate`` so that descriptors stay
disjoint up to measure zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog

__all__ = [
    "ConvexSet",
    "Interval",
    "AxisBox",
    "HPolytope",
    "Singleton",
    "WholeSpace",
    "EmptySet",
    "EMPTY",
    "Partition",
    "grid_partition",
    "slab_partition",
    "breakpoints_partition",
    "voronoi_partition",
    "whole_space_partition",
    "singleton_partition",
    "contains",
    "clip_to_box",
    "interior_point",
    "common_recession_direction",
]

INF = math.inf


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Interval:
    """Closed 1-D interval, endpoints may be +-inf."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise GeometryError(
                f"interval needs lo < hi (got [{self.lo}, {self.hi}]); "
                "use Singleton for degenerate cells"
            )

    @property
    def dim(self) -> int:
        return 1

    def contains(self, x) -> bool:
        v = float(np.asarray(x).reshape(()))
        return self.lo <= v <= self.hi

    def is_bounded(self) -> bool:
        return math.isfinite(self.lo) and math.isfinite(self.hi)


@dataclass(frozen=True)
class AxisBox:
    """Axis-aligned box; per-coordinate bounds may be +-inf."""

    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lo", np.asarray(self.lo, dtype=float))
        object.__setattr__(self, "hi", np.asarray(self.hi, dtype=float))
        if self.lo.shape != self.hi.shape or self.lo.ndim != 1:
            raise GeometryError("box bounds must be 1-D arrays of equal length")
        if not np.all(self.lo < self.hi):
            raise GeometryError("box needs lo < hi componentwise; use Singleton")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != self.lo.shape:
            raise GeometryError(f"dimension mismatch: {x.shape} vs {self.lo.shape}")
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def is_bounded(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))


@dataclass(frozen=True)
class HPolytope:
    """Intersection of halfspaces a_i^T x <= b_i."""

    normals: np.ndarray
    offsets: np.ndarray

    def __post_init__(self):
        A = np.asarray(self.normals, dtype=float)
        b = np.asarray(self.offsets, dtype=float)
        if A.ndim != 2 or A.shape[0] < 1:
            raise GeometryError("polytope needs a (k, d) normal matrix with k >= 1")
        if b.shape != (A.shape[0],):
            raise GeometryError("offsets must match number of normal rows")
        if np.any(np.all(A == 0.0, axis=1)):
            raise GeometryError("zero normal row in polytope")
        object.__setattr__(self, "normals", A)
        object.__setattr__(self, "offsets", b)

    @property
    def dim(self) -> int:
        return self.normals.shape[1]

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise GeometryError(f"dimension mismatch: {x.shape} vs ({self.dim},)")
        return bool(np.all(self.normals @ x <= self.offsets + 1e-12))

    def is_bounded(self) -> bool:
        # Bounded iff sup c^T x is finite for c = +-e_i, checked by LP.
        for i in range(self.dim):
            for sign in (1.0, -1.0):
                c = np.zeros(self.dim)
                c[i] = -sign  # linprog minimizes
                res = linprog(c, A_ub=self.normals, b_ub=self.offsets,
                              bounds=[(None, None)] * self.dim, method="highs")
                if res.status == 3:  # unbounded
                    return False
        return True


@dataclass(frozen=True)
class Singleton:
    point: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "point", np.atleast_1d(np.asarray(self.point, dtype=float)))

    @property
    def dim(self) -> int:
        return self.point.shape[0]

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != self.point.shape:
            raise GeometryError("dimension mismatch")
        return bool(np.array_equal(x, self.point))

    def is_bounded(self) -> bool:
        return True


@dataclass(frozen=True)
class WholeSpace:
    dim_: int

    @property
    def dim(self) -> int:
        return self.dim_

    def contains(self, x) -> bool:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim_,):
            raise GeometryError("dimension mismatch")
        return True

    def is_bounded(self) -> bool:
        return False


class EmptySet:
    """Explicit empty-intersection signal returned by clip_to_box."""

    _instance: Optional["EmptySet"] = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "EMPTY"


EMPTY = EmptySet()

ConvexSet = Union[Interval, AxisBox, HPolytope, Singleton, WholeSpace]


def contains(cell: ConvexSet, point) -> bool:
    """Closed membership test; boundary points count as inside."""
    return cell.contains(point)


def _dim_of(point) -> int:
    return np.atleast_1d(np.asarray(point, dtype=float)).shape[0]


def clip_to_box(cell: ConvexSet, R: float):
    """Intersect with the L-infinity ball of radius R; EMPTY if disjoint."""
    if R <= 0:
        raise GeometryError("clip radius must be positive")
    if isinstance(cell, Interval):
        lo, hi = max(cell.lo, -R), min(cell.hi, R)
        if lo > hi:
            return EMPTY
        if lo == hi:
            return Singleton(np.array([lo]))
        return Interval(lo, hi)
    if isinstance(cell, AxisBox):
        lo = np.maximum(cell.lo, -R)
        hi = np.minimum(cell.hi, R)
        if np.any(lo > hi):
            return EMPTY
        if np.any(lo == hi):
            if np.all(lo == hi):
                return Singleton(lo)
            return EMPTY  # lower-dimensional slice: out of sampling scope
        return AxisBox(lo, hi)
    if isinstance(cell, HPolytope):
        d = cell.dim
        eye = np.eye(d)
        A = np.vstack([cell.normals, eye, -eye])
        b = np.concatenate([cell.offsets, np.full(d, R), np.full(d, R)])
        # Feasibility check via LP (minimize 0).
        res = linprog(np.zeros(d), A_ub=A, b_ub=b,
                      bounds=[(None, None)] * d, method="highs")
        if res.status == 2:
            return EMPTY
        return HPolytope(A, b)
    if isinstance(cell, Singleton):
        if np.all(np.abs(cell.point) <= R):
            return cell
        return EMPTY
    if isinstance(cell, WholeSpace):
        d = cell.dim
        return AxisBox(np.full(d, -R), np.full(d, R))
    raise GeometryError(f"cannot clip {type(cell).__name__}")


def interior_point(cell: ConvexSet) -> tuple[np.ndarray, float]:
    """A point plus a Euclidean radius of a ball inside the set.

    For boxes the analytic center, for polytopes the Chebyshev center LP:
    maximize r subject to a_i^T x + r * ||a_i|| <= b_i.
    """
    if isinstance(cell, Interval):
        if not cell.is_bounded():
            raise GeometryError("no interior: unbounded interval has no center")
        return np.array([(cell.lo + cell.hi) / 2.0]), (cell.hi - cell.lo) / 2.0
    if isinstance(cell, AxisBox):
        if not cell.is_bounded():
            raise GeometryError("no interior: unbounded box has no center")
        return (cell.lo + cell.hi) / 2.0, float(np.min(cell.hi - cell.lo)) / 2.0
    if isinstance(cell, HPolytope):
        d = cell.dim
        norms = np.linalg.norm(cell.normals, axis=1)
        # Variables (x, r); maximize r.
        c = np.zeros(d + 1)
        c[-1] = -1.0
        A = np.hstack([cell.normals, norms[:, None]])
        res = linprog(c, A_ub=A, b_ub=cell.offsets,
                      bounds=[(None, None)] * d + [(0, None)], method="highs")
        if res.status == 3:
            raise GeometryError("no interior: polytope is unbounded")
        if res.status != 0 or res.x is None:
            raise GeometryError("no interior: infeasible polytope")
        x, r = res.x[:d], float(res.x[d])
        if r <= 0.0:
            raise GeometryError("no interior: polytope is lower-dimensional")
        return x, r
    if isinstance(cell, Singleton) or isinstance(cell, WholeSpace):
        raise GeometryError(f"no interior for {type(cell).__name__}")
    raise GeometryError(f"unsupported cell {type(cell).__name__}")


# Relative singular-value cutoff for the recession null space.
_NULLSPACE_RTOL = 1e-9


def _recession_normals(cell: ConvexSet, d: int) -> Optional[np.ndarray]:
    """Rows whose null space spans the cell's recession directions.

    Returns None to force the 'no common direction' answer (bounded cells,
    singletons).
    """
    if isinstance(cell, Singleton):
        return None
    if isinstance(cell, WholeSpace):
        return np.zeros((0, d))
    if isinstance(cell, Interval):
        if cell.is_bounded():
            return None
        rows = []
        if math.isfinite(cell.lo):
            rows.append([-1.0])
        if math.isfinite(cell.hi):
            rows.append([1.0])
        return np.asarray(rows, dtype=float).reshape(len(rows), 1)
    if isinstance(cell, AxisBox):
        if cell.is_bounded():
            return None
        rows = []
        for i in range(d):
            if math.isfinite(cell.lo[i]) or math.isfinite(cell.hi[i]):
                e = np.zeros(d)
                e[i] = 1.0
                rows.append(e)
        return np.asarray(rows, dtype=float).reshape(len(rows), d)
    if isinstance(cell, HPolytope):
        return cell.normals
    raise GeometryError(f"unsupported cell {type(cell).__name__}")


def common_recession_direction(cells: Sequence[ConvexSet]) -> Optional[np.ndarray]:
    """Unit vector v with every cell translation-invariant along v, or None."""
    if not cells:
        raise GeometryError("need at least one cell")
    d = cells[0].dim
    stacked = []
    for cell in cells:
        if cell.dim != d:
            raise GeometryError("dimension mismatch across cells")
        rows = _recession_normals(cell, d)
        if rows is None:
            return None
        stacked.append(rows)
    A = np.vstack(stacked)
    if A.shape[0] == 0:
        v = np.zeros(d)
        v[0] = 1.0  # canonical answer when every direction works
        return v
    _, s, vt = np.linalg.svd(A)
    cutoff = _NULLSPACE_RTOL * s[0] if s.size else 0.0
    rank = int(np.sum(s > cutoff))
    if rank >= d:
        return None
    v = vt[-1]
    v = v / np.linalg.norm(v)
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if nz.size and v[nz[0]] < 0:
        v = -v
    return v


@dataclass(frozen=True)
class Partition:
    """Partition-as-oracle: maps points to their containing cell descriptor."""

    locate: Callable[[np.ndarray], ConvexSet]
    dim: int
    family: str = "custom"
    params: dict = field(default_factory=dict)
    # Optional vectorized cell bounds for axis-separable families: maps an
    # (n, d) point matrix to (lo, hi) bound matrices.  Enables the fast SGD
    # inner loop; None falls back to per-draw descriptors.
    bulk_bounds: Optional[Callable[[np.ndarray], tuple]] = None

    def __call__(self, x) -> ConvexSet:
        return self.locate(np.atleast_1d(np.asarray(x, dtype=float)))


def grid_partition(h: float, dim: int) -> Partition:
    """Axis-aligned grid of side h, half-open convention [k*h, (k+1)*h)."""
    if h <= 0:
        raise GeometryError("grid side must be positive")

    def locate(x: np.ndarray) -> ConvexSet:
        k = np.floor(x / h)
        return AxisBox(k * h, (k + 1) * h)

    def bulk(X: np.ndarray) -> tuple:
        lo = h * np.floor(X / h)
        return lo, lo + h

    return Partition(locate, dim, "grid", {"h": h}, bulk_bounds=bulk)


def slab_partition(v: np.ndarray, h: float, dim: int) -> Partition:
    """Parallel slabs of width h orthogonal to direction v."""
    v = np.asarray(v, dtype=float)
    if v.shape != (dim,) or not np.linalg.norm(v) > 0:
        raise GeometryError("slab direction must be a nonzero d-vector")
    v = v / np.linalg.norm(v)
    if h <= 0:
        raise GeometryError("slab width must be positive")
    axis = None
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = 1.0
        if abs(abs(v @ e) - 1.0) < 1e-12:
            axis = i
            break

    def locate(x: np.ndarray) -> ConvexSet:
        k = math.floor(float(v @ x) / h)
        if axis is not None:
            lo = np.full(dim, -INF)
            hi = np.full(dim, INF)
            sgn = 1.0 if v[axis] > 0 else -1.0
            lo[axis], hi[axis] = sorted((sgn * k * h, sgn * (k + 1) * h))
            return AxisBox(lo, hi)
        return HPolytope(np.vstack([v, -v]), np.array([(k + 1) * h, -k * h]))

    bulk = None
    if axis is not None:
        sgn = 1.0 if v[axis] > 0 else -1.0

        def bulk(X: np.ndarray) -> tuple:
            k = np.floor(sgn * X[:, axis] / h)
            lo = np.full((X.shape[0], dim), -INF)
            hi = np.full((X.shape[0], dim), INF)
            lo[:, axis] = np.minimum(sgn * k * h, sgn * (k + 1) * h)
            hi[:, axis] = np.maximum(sgn * k * h, sgn * (k + 1) * h)
            return lo, hi

    return Partition(locate, dim, "slabs", {"v": v, "h": h}, bulk_bounds=bulk)


def breakpoints_partition(breaks: Sequence[float]) -> Partition:
    """1-D cells between consecutive sorted breakpoints, [b_i, b_{i+1})."""
    b = np.asarray(sorted(breaks), dtype=float)
    if b.size == 0:
        raise GeometryError("need at least one breakpoint")

    def locate(x: np.ndarray) -> ConvexSet:
        v = float(x[0])
        i = int(np.searchsorted(b, v, side="right"))
        lo = -INF if i == 0 else b[i - 1]
        hi = INF if i == b.size else b[i]
        return Interval(lo, hi)

    padded = np.concatenate([[-INF], b, [INF]])

    def bulk(X: np.ndarray) -> tuple:
        idx = np.searchsorted(b, X[:, 0], side="right")
        return padded[idx][:, None], padded[idx + 1][:, None]

    return Partition(locate, 1, "breakpoints", {"breaks": b}, bulk_bounds=bulk)


def voronoi_partition(sites: np.ndarray) -> Partition:
    """Voronoi cells of the given sites as H-polytopes (ties to lower index)."""
    sites = np.asarray(sites, dtype=float)
    if sites.ndim != 2 or sites.shape[0] < 2:
        raise GeometryError("need at least two sites, shape (m, d)")
    m, d = sites.shape

    def locate(x: np.ndarray) -> ConvexSet:
        i = int(np.argmin(np.sum((sites - x) ** 2, axis=1)))
        others = np.delete(np.arange(m), i)
        A = 2.0 * (sites[others] - sites[i])
        b = np.sum(sites[others] ** 2, axis=1) - np.sum(sites[i] ** 2)
        return HPolytope(A, b)

    return Partition(locate, d, "voronoi", {"sites": sites})


def whole_space_partition(dim: int) -> Partition:
    cell = WholeSpace(dim)
    return Partition(lambda x: cell, dim, "wholespace")


def singleton_partition(dim: int) -> Partition:
    """Lossless coarsening: every point is its own cell."""
    return Partition(lambda x: Singleton(x.copy()), dim, "singletons")
