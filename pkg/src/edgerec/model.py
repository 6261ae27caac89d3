"""Closed-form cache hit rate under an independence model.

Treats each explored item as cached independently with a fixed probability,
the way a large catalog looks to a small random or popularity cache. With
cached items promoted to the top of an n-slot list and selection driven by
a rank-only position distribution, the hit rate has an exact closed form
and a mean-count bound that brackets it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .demand import PositionDistribution, position_distribution


@dataclass(frozen=True)
class ModelParams:
    """Inputs to the independence model.

    list_size: number of explored candidates the cache is sampled over.
    hit_prob: probability any single candidate is cached.
    pdist: position-selection distribution over the presented slots; its
        ``n`` is the presented list length.
    """

    list_size: int
    hit_prob: float
    pdist: PositionDistribution

    def __post_init__(self):
        if self.list_size < 1:
            raise ValueError("list_size must be >= 1")
        if not (0.0 <= self.hit_prob <= 1.0):
            raise ValueError("hit_prob must lie in [0, 1]")
        if self.list_size < self.pdist.n:
            raise ValueError("model assumes list_size >= number of presented slots")


def binomial_pmf(n: int, p: float) -> np.ndarray:
    """pmf of Binomial(n, p) over 0..n, computed in log space.

    The direct recurrence underflows once (1-p)^n rounds to zero (n in the
    thousands), which silently zeroes every later term; per-term lgamma
    keeps each probability independently accurate.
    """
    if p <= 0.0:
        out = np.zeros(n + 1)
        out[0] = 1.0
        return out
    if p >= 1.0:
        out = np.zeros(n + 1)
        out[n] = 1.0
        return out
    m = np.arange(n + 1)
    log_pmf = (
        math.lgamma(n + 1)
        - np.array([math.lgamma(k + 1) for k in m])
        - np.array([math.lgamma(n - k + 1) for k in m])
        + m * math.log(p)
        + (n - m) * math.log1p(-p)
    )
    return np.exp(log_pmf)


def chr_closed_form(params: ModelParams) -> float:
    """Exact hit rate: sum over cached-count m of P(select a cached slot | m).

    With m of the list_size candidates cached, the top of the presented list
    holds min(m, n) cached items, so a selection hits iff its position falls
    within that prefix.
    """
    pmf = binomial_pmf(params.list_size, params.hit_prob)
    n = params.pdist.n
    hit_given_m = np.array(
        [params.pdist.cum(min(m, n)) for m in range(params.list_size + 1)]
    )
    return float(np.dot(pmf, hit_given_m))


def chr_jensen_bound(params: ModelParams) -> tuple[float, str]:
    """Mean-count bound on the hit rate; returns (value, 'upper'|'lower').

    The conditional hit probability as a function of the cached count m has
    increments p_{m+1} up to the slot count, so it is concave when the
    position probabilities are nonincreasing (bound from above at the
    rounded-up mean) and convex when nondecreasing (bound from below at the
    rounded-down mean). Raises for non-monotone position distributions,
    where neither direction holds.
    """
    mean = params.list_size * params.hit_prob
    probs = params.pdist.probs
    n = params.pdist.n
    noninc = all(a >= b - 1e-12 for a, b in zip(probs, probs[1:]))
    nondec = all(a <= b + 1e-12 for a, b in zip(probs, probs[1:]))
    if noninc:
        j = min(math.ceil(mean), n)
        return params.pdist.cum(j), "upper"
    if nondec:
        j = min(math.floor(mean), n)
        return params.pdist.cum(j), "lower"
    raise ValueError("position distribution is not monotone; no one-sided bound applies")


def chr_monte_carlo(
    params: ModelParams, sessions: int, rng: np.random.Generator
) -> float:
    """Simulate the mechanism literally, as an independent check.

    Each trial flips a cached coin per candidate, builds the presented list
    by stable cached-first reordering, draws a position, and scores a hit by
    reading the flag at that slot. No shared code path with the closed form
    beyond the position distribution itself.
    """
    n = params.pdist.n
    hits = 0
    for _ in range(sessions):
        flags = rng.random(params.list_size) < params.hit_prob
        order = np.concatenate([np.flatnonzero(flags), np.flatnonzero(~flags)])
        top = flags[order[:n]]
        pos = params.pdist.sample(rng, n)
        hits += bool(top[pos - 1])
    return hits / sessions


def model_from_scalars(list_size: int, hit_prob: float, alpha: float, n: int) -> ModelParams:
    """Convenience constructor: position weights i^(-alpha) over n slots
    (alpha = 0 is uniform)."""
    return ModelParams(list_size, hit_prob, position_distribution("zipf", n, alpha))
