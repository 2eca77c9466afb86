"""Coarse-sample sources: synthetic generation and line-oriented replay files.

Replay format (one cell per line, 17 significant digits, '-inf'/'inf' allowed):
    I lo hi
    B d lo... hi...
    H d k        (followed by k lines 'a... b')
    S d x...
    W d
"""

from __future__ import annotations

import math
from typing import Iterable, List

import numpy as np

from .geometry import (
    AxisBox,
    ConvexSet,
    HPolytope,
    Interval,
    Partition,
    Singleton,
    WholeSpace,
)
from .sampling import sample_gaussian

__all__ = [
    "StreamExhausted",
    "SyntheticStream",
    "ReplayStream",
    "serialize_cell",
    "parse_cell",
    "record_replay",
    "replay",
]


class StreamExhausted(RuntimeError):
    def __init__(self, consumed: int):
        super().__init__(f"stream exhausted after {consumed} draws")
        self.consumed = consumed


class SyntheticStream:
    """i.i.d. coarse samples: locate(x) for x ~ N(mu_star, I)."""

    def __init__(self, partition: Partition, mu_star, rng: np.random.Generator):
        self.partition = partition
        self.mu_star = np.atleast_1d(np.asarray(mu_star, dtype=float))
        if self.mu_star.shape[0] != partition.dim:
            raise ValueError("mu_star dimension does not match partition")
        self.rng = rng
        self.consumed = 0

    def draw(self) -> ConvexSet:
        x = sample_gaussian(self.mu_star, self.rng)
        self.consumed += 1
        return self.partition(x)

    def draw_bulk(self, n: int):
        """(lo, hi) bound matrices for the next n cells, or None when the
        partition has no axis-separable bulk form."""
        if self.partition.bulk_bounds is None:
            return None
        X = self.mu_star + self.rng.standard_normal((n, self.mu_star.shape[0]))
        self.consumed += n
        return self.partition.bulk_bounds(X)


class ReplayStream:
    """Replays recorded cells in order; raises StreamExhausted at the end."""

    def __init__(self, cells: List[ConvexSet]):
        self.cells = cells
        self.consumed = 0

    def draw(self) -> ConvexSet:
        if self.consumed >= len(self.cells):
            raise StreamExhausted(self.consumed)
        cell = self.cells[self.consumed]
        self.consumed += 1
        return cell

    def draw_bulk(self, n: int):
        """Bound matrices when the next n recorded cells are all boxes or
        intervals (so a replayed run takes the same code path as the
        synthetic run it recorded); None otherwise, consuming nothing."""
        if self.consumed + n > len(self.cells):
            raise StreamExhausted(self.consumed)
        window = self.cells[self.consumed:self.consumed + n]
        if not all(isinstance(c, (Interval, AxisBox)) for c in window):
            return None
        d = window[0].dim
        lo = np.empty((n, d))
        hi = np.empty((n, d))
        for i, c in enumerate(window):
            if isinstance(c, Interval):
                lo[i, 0], hi[i, 0] = c.lo, c.hi
            else:
                lo[i], hi[i] = c.lo, c.hi
        self.consumed += n
        return lo, hi


def _fmt(x: float) -> str:
    if x == math.inf:
        return "inf"
    if x == -math.inf:
        return "-inf"
    return format(x, ".17g")


def serialize_cell(cell: ConvexSet) -> str:
    if isinstance(cell, Interval):
        return f"I {_fmt(cell.lo)} {_fmt(cell.hi)}"
    if isinstance(cell, AxisBox):
        vals = " ".join(_fmt(v) for v in cell.lo) + " " + " ".join(_fmt(v) for v in cell.hi)
        return f"B {cell.dim} {vals}"
    if isinstance(cell, HPolytope):
        head = f"H {cell.dim} {cell.normals.shape[0]}"
        rows = [
            " ".join(_fmt(v) for v in a) + " " + _fmt(b)
            for a, b in zip(cell.normals, cell.offsets)
        ]
        return "\n".join([head] + rows)
    if isinstance(cell, Singleton):
        return f"S {cell.dim} " + " ".join(_fmt(v) for v in cell.point)
    if isinstance(cell, WholeSpace):
        return f"W {cell.dim}"
    raise ValueError(f"cannot serialize {type(cell).__name__}")


class ReplayParseError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


def _parse_floats(parts: List[str], lineno: int) -> List[float]:
    try:
        return [float(p) for p in parts]
    except ValueError as e:
        raise ReplayParseError(lineno, str(e)) from e


def parse_cells(lines: Iterable[str]) -> List[ConvexSet]:
    cells: List[ConvexSet] = []
    it = iter(enumerate(lines, start=1))
    for lineno, raw in it:
        line = raw.strip()
        if not line:
            continue
        parts = line.split()
        tag = parts[0]
        try:
            if tag == "I":
                lo, hi = _parse_floats(parts[1:3], lineno)
                cells.append(Interval(lo, hi))
            elif tag == "B":
                d = int(parts[1])
                vals = _parse_floats(parts[2:2 + 2 * d], lineno)
                if len(vals) != 2 * d:
                    raise ReplayParseError(lineno, "truncated box record")
                cells.append(AxisBox(np.array(vals[:d]), np.array(vals[d:])))
            elif tag == "H":
                d, k = int(parts[1]), int(parts[2])
                A = np.empty((k, d))
                b = np.empty(k)
                for r in range(k):
                    try:
                        rlineno, rline = next(it)
                    except StopIteration:
                        raise ReplayParseError(lineno, "truncated polytope record") from None
                    vals = _parse_floats(rline.split(), rlineno)
                    if len(vals) != d + 1:
                        raise ReplayParseError(rlineno, f"expected {d + 1} values")
                    A[r] = vals[:d]
                    b[r] = vals[d]
                cells.append(HPolytope(A, b))
            elif tag == "S":
                d = int(parts[1])
                vals = _parse_floats(parts[2:2 + d], lineno)
                if len(vals) != d:
                    raise ReplayParseError(lineno, "truncated singleton record")
                cells.append(Singleton(np.array(vals)))
            elif tag == "W":
                cells.append(WholeSpace(int(parts[1])))
            else:
                raise ReplayParseError(lineno, f"unknown record tag {tag!r}")
        except (IndexError, ValueError) as e:
            if isinstance(e, ReplayParseError):
                raise
            raise ReplayParseError(lineno, str(e)) from e
    return cells


def parse_cell(text: str) -> ConvexSet:
    cells = parse_cells(text.splitlines())
    if len(cells) != 1:
        raise ValueError("expected exactly one cell")
    return cells[0]


def record_replay(stream, n: int, path) -> None:
    """Serialize n draws from the stream to a replay file."""
    with open(path, "w") as fh:
        for _ in range(n):
            fh.write(serialize_cell(stream.draw()) + "\n")


def replay(path) -> ReplayStream:
    with open(path) as fh:
        return ReplayStream(parse_cells(fh))
