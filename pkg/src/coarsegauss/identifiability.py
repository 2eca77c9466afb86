"""Executable identifiability test: structural slab detection on observed
cells plus Monte-Carlo flatness scores of the likelihood curvature."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import List, Optional, Tuple

import numpy as np

from .geometry import (
    ConvexSet,
    Partition,
    Singleton,
    WholeSpace,
    common_recession_direction,
)
from .likelihood import directional_hessian_mc
from .sampling import DEFAULT_POLICY, SamplerPolicy, sample_gaussian

__all__ = ["Verdict", "IdentifiabilityVerdict", "assess"]


class Verdict(Enum):
    IDENTIFIABLE = "identifiable"
    NON_IDENTIFIABLE = "non-identifiable"
    INCONCLUSIVE = "inconclusive"


@dataclass
class IdentifiabilityVerdict:
    structural: Verdict
    direction: Optional[np.ndarray]          # slab direction when non-identifiable
    flatness_scores: List[Tuple[np.ndarray, float, float]]  # (direction, score, SE)
    cells_inspected: int

    def is_flat(self, score: float, se: float) -> bool:
        # MC noise floor: flat when |score| <= max(3 SE, 1e-3).
        return abs(score) <= max(3.0 * se, 1e-3)


def _distinct_cells(cells: List[ConvexSet]) -> List[ConvexSet]:
    from .streams import serialize_cell

    seen = {}
    for c in cells:
        seen.setdefault(serialize_cell(c), c)
    return list(seen.values())


def assess(partition: Partition, mu_star, n_cells: int, rng,
           hessian_draws: int = 200,
           policy: SamplerPolicy = DEFAULT_POLICY) -> IdentifiabilityVerdict:
    """Draw n_cells coarse samples, test the distinct cells for a common
    recession direction, and report directional flatness evidence.

    Verdict semantics cover only the observed sample of cells; partitions
    whose non-slab members have zero total mass cannot be told apart from
    pure slab families by sampling.
    """
    if n_cells < 10:
        raise ValueError("need n_cells >= 10 for a meaningful verdict")
    mu_star = np.atleast_1d(np.asarray(mu_star, dtype=float))
    d = partition.dim
    cells = [partition(sample_gaussian(mu_star, rng)) for _ in range(n_cells)]
    distinct = _distinct_cells(cells)

    if all(isinstance(c, (Singleton, WholeSpace)) for c in distinct):
        scores = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = 1.0
            s, se = directional_hessian_mc(partition, mu_star, e, hessian_draws,
                                           rng, policy=policy)
            scores.append((e, s, se))
        return IdentifiabilityVerdict(Verdict.INCONCLUSIVE, None, scores, n_cells)

    v = common_recession_direction(distinct)
    if v is not None:
        s, se = directional_hessian_mc(partition, mu_star, v, hessian_draws,
                                       rng, policy=policy)
        return IdentifiabilityVerdict(Verdict.NON_IDENTIFIABLE, v, [(v, s, se)],
                                      n_cells)

    # Identifiable on the observed cells: score canonical directions plus the
    # most-nearly-flat candidate from the stacked normals' smallest singular
    # vector.
    directions = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        directions.append(e)
    candidate = _near_null_candidate(distinct, d)
    if candidate is not None and not any(
        abs(abs(candidate @ e) - 1.0) < 1e-9 for e in directions
    ):
        directions.append(candidate)
    scores = []
    for u in directions:
        s, se = directional_hessian_mc(partition, mu_star, u, hessian_draws,
                                       rng, policy=policy)
        scores.append((u, s, se))
    return IdentifiabilityVerdict(Verdict.IDENTIFIABLE, None, scores, n_cells)


def _near_null_candidate(cells: List[ConvexSet], d: int) -> Optional[np.ndarray]:
    from .geometry import _recession_normals

    rows = []
    for c in cells:
        r = _recession_normals(c, d)
        if r is not None and r.shape[0]:
            rows.append(r)
    if not rows:
        return None
    A = np.vstack(rows)
    _, _, vt = np.linalg.svd(A)
    v = vt[-1]
    return v / np.linalg.norm(v)
