"""Meta-evaluation: correlate metric scores with human ratings.

Correlations are Pearson product-moment coefficients over all pooled
(system, example) pairs, one coefficient per rating dimension, with
two-sided significance from the exact t-test (a seeded permutation test
is available as a cross-check).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as scipy_stats

from dqe.dataset_io import RatedOutput
from dqe.errors import (
    DegenerateVariance,
    DimensionMismatch,
    InsufficientSamples,
    InvalidInput,
    JoinError,
)

SIGNIFICANCE_LEVEL = 0.05

P_VALUE_METHODS = ("t_test", "permutation")
DEFAULT_PERMUTATIONS = 10_000


@dataclass(frozen=True)
class CorrelationResult:
    dimension: str
    n: int
    r: float
    p_value: float
    significant_at_05: bool


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Product-moment correlation of two equal-length, non-constant vectors."""
    if len(x) != len(y):
        raise DimensionMismatch(f"lengths differ: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise InsufficientSamples("pearson needs at least 2 pairs")
    xs = np.asarray(x, dtype=float)
    ys = np.asarray(y, dtype=float)
    xd = xs - xs.mean()
    yd = ys - ys.mean()
    nx = float(np.sqrt(np.dot(xd, xd)))
    ny = float(np.sqrt(np.dot(yd, yd)))
    if nx == 0.0 or ny == 0.0:
        raise DegenerateVariance("a vector is constant; correlation undefined")
    r = float(np.dot(xd, yd)) / (nx * ny)
    # Clip the sub-1e-12 numerical overshoot around +/-1.
    return max(-1.0, min(1.0, r))


def p_value(r: float, n: int) -> float:
    """Two-sided significance of r != 0 under the Student-t law.

    Uses t = r * sqrt((n - 2) / (1 - r^2)) with n - 2 degrees of freedom.
    """
    if n < 3:
        raise InsufficientSamples(f"p-value needs n >= 3, got {n}")
    if not -1.0 <= r <= 1.0:
        raise InvalidInput(f"correlation out of range: {r}")
    if abs(r) == 1.0:
        return 0.0
    t = r * math.sqrt((n - 2) / (1.0 - r * r))
    return float(2.0 * scipy_stats.t.sf(abs(t), df=n - 2))


def permutation_p_value(
    x: Sequence[float],
    y: Sequence[float],
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> float:
    """Seeded permutation test of r != 0 (add-one smoothed)."""
    observed = abs(pearson(x, y))
    rng = random.Random(seed)
    shuffled = list(y)
    hits = 0
    for _ in range(permutations):
        rng.shuffle(shuffled)
        try:
            if abs(pearson(x, shuffled)) >= observed - 1e-12:
                hits += 1
        except DegenerateVariance:  # pragma: no cover - x is checked above
            continue
    return (hits + 1) / (permutations + 1)


def correlate(
    scores: Mapping[tuple[str, str], float],
    ratings: Sequence[RatedOutput],
    dimensions: Sequence[str] | None = None,
    method: str = "t_test",
    permutations: int = DEFAULT_PERMUTATIONS,
    seed: int = 0,
) -> list[CorrelationResult]:
    """One CorrelationResult per dimension over pooled (system, example) pairs.

    ``scores`` is keyed by (system_id, example_id); every rated output
    must have a score, and missing keys are an error rather than being
    dropped silently.
    """
    if method not in P_VALUE_METHODS:
        raise InvalidInput(f"unknown p-value method {method!r}")
    missing = [
        (r.system_id, r.example_id)
        for r in ratings
        if (r.system_id, r.example_id) not in scores
    ]
    if missing:
        shown = ", ".join(f"{s}/{e}" for s, e in missing[:5])
        raise JoinError(
            f"{len(missing)} rated outputs have no metric score (e.g. {shown})",
            missing=missing,
        )
    if dimensions is None:
        seen: dict[str, None] = {}
        for rated in ratings:
            for dim in rated.ratings:
                seen.setdefault(dim)
        dimensions = list(seen)

    results = []
    for dim in dimensions:
        pairs = [
            (scores[(r.system_id, r.example_id)], r.ratings[dim])
            for r in ratings
            if dim in r.ratings
        ]
        if len(pairs) < 3:
            raise InsufficientSamples(
                f"dimension {dim!r} has {len(pairs)} joined pairs; need >= 3"
            )
        xs = [p[0] for p in pairs]
        ys = [p[1] for p in pairs]
        r = pearson(xs, ys)
        if method == "t_test":
            p = p_value(r, len(pairs))
        else:
            p = permutation_p_value(xs, ys, permutations=permutations, seed=seed)
        results.append(
            CorrelationResult(
                dimension=dim,
                n=len(pairs),
                r=r,
                p_value=p,
                significant_at_05=p < SIGNIFICANCE_LEVEL,
            )
        )
    return results
