"""Cache placement against a known demand mix.

Given per-seed demand weights, the exploration list each seed would expose,
and a rank-only selection model, the expected hit rate of a candidate cache
has a closed form: each seed contributes its weight times the selection
mass covered by however many of its exposed candidates are cached (capped
at the slot count). The objective is monotone with diminishing returns in
the cache contents, so greedy augmentation carries the usual constant-factor
guarantee relative to the best cache of the same size.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .catalog import CacheSet, ItemId, RelationGraph, RelationProvider, load_graph
from .demand import PositionDistribution, position_distribution
from .explore import BfsSchedule, DepthPlan, bfs_explore


@dataclass(frozen=True)
class ObjectiveContext:
    """Precomputed state for hit-rate evaluation over candidate caches.

    Exploration runs once per seed at build time; evaluating a cache never
    re-runs it. ``cum[j]`` is the selection mass on the first j positions,
    ``postings[x]`` lists the seeds whose exploration list contains x.
    """

    seeds: tuple[ItemId, ...]
    weights: dict[ItemId, float]
    exposure: dict[ItemId, frozenset[ItemId]]
    postings: dict[ItemId, tuple[ItemId, ...]]
    cum: tuple[float, ...]
    n_slots: int
    universe: tuple[ItemId, ...]

    def candidate_pool(self) -> tuple[ItemId, ...]:
        """Items that can contribute to the objective at all."""
        return tuple(sorted(self.postings))


def build_context(
    provider: RelationProvider,
    weights: dict[ItemId, float],
    pdist: PositionDistribution,
    n: int,
    schedule: BfsSchedule,
    universe: Iterable[ItemId] | None = None,
) -> ObjectiveContext:
    """Explore once from every weighted seed and index the results."""
    total = sum(weights.values())
    if not weights or abs(total - 1.0) > 1e-9:
        raise ValueError("seed weights must be non-empty and sum to 1")
    if any(w < 0 for w in weights.values()):
        raise ValueError("seed weights must be non-negative")
    seeds = tuple(sorted(weights))
    exposure: dict[ItemId, frozenset[ItemId]] = {}
    postings: dict[ItemId, list[ItemId]] = {}
    for v in seeds:
        ids = bfs_explore(provider, v, schedule).ids
        exposure[v] = frozenset(ids)
        for x in ids:
            postings.setdefault(x, []).append(v)
    cum = tuple(pdist.cum(j) for j in range(n + 1))
    if universe is None:
        if isinstance(provider, RelationGraph):
            universe = provider.items
        else:
            universe = sorted(set(postings) | set(seeds))
    return ObjectiveContext(
        seeds=seeds,
        weights=dict(weights),
        exposure=exposure,
        postings={x: tuple(vs) for x, vs in postings.items()},
        cum=cum,
        n_slots=n,
        universe=tuple(universe),
    )


def _as_ids(cache: CacheSet | Iterable[ItemId]) -> set[ItemId]:
    if isinstance(cache, CacheSet):
        return set(cache.items)
    return set(cache)


def chr_objective(ctx: ObjectiveContext, cache: CacheSet | Iterable[ItemId]) -> float:
    """Expected hit rate of ``cache`` under the context's demand mix."""
    ids = _as_ids(cache)
    counts: dict[ItemId, int] = {}
    for x in ids:
        for v in ctx.postings.get(x, ()):
            counts[v] = counts.get(v, 0) + 1
    return sum(
        ctx.weights[v] * ctx.cum[min(c, ctx.n_slots)] for v, c in counts.items()
    )


@dataclass(frozen=True)
class GreedyResult:
    selected: CacheSet
    order: tuple[ItemId, ...]
    gains: tuple[float, ...]
    objective: float
    evaluations: int


def greedy_cache(
    ctx: ObjectiveContext,
    capacity: int,
    allowed: Iterable[ItemId] | None = None,
) -> GreedyResult:
    """Greedy augmentation: repeatedly add the item with the largest marginal
    gain, smallest id on ties.

    Marginal gains are maintained from the posting index, so each iteration
    costs one pass over the posting lists rather than a fresh exploration or
    a full objective evaluation per candidate. Once every remaining gain is
    zero the cache is topped up with the lexicographically smallest unused
    ids, keeping the result size exactly min(capacity, |universe|).
    """
    if capacity < 0:
        raise ValueError("capacity must be >= 0")
    pool = set(ctx.postings if allowed is None else
               (x for x in allowed if x in ctx.postings))
    fill_universe = ctx.universe if allowed is None else tuple(sorted(set(allowed)))
    counts: dict[ItemId, int] = {v: 0 for v in ctx.seeds}
    order: list[ItemId] = []
    gains: list[float] = []
    chosen: set[ItemId] = set()
    objective = 0.0
    evaluations = 0
    target = min(capacity, len(fill_universe))
    while len(order) < target:
        best_gain = 0.0
        best_item: ItemId | None = None
        for x in sorted(pool - chosen):
            g = 0.0
            for v in ctx.postings[x]:
                c = counts[v]
                g += ctx.weights[v] * (
                    ctx.cum[min(c + 1, ctx.n_slots)] - ctx.cum[min(c, ctx.n_slots)]
                )
            evaluations += 1
            if g > best_gain + 1e-15:
                best_gain = g
                best_item = x
        if best_item is None:
            # all remaining gains are zero; fill deterministically
            for x in fill_universe:
                if x not in chosen:
                    best_item = x
                    best_gain = 0.0
                    break
            if best_item is None:
                break
        order.append(best_item)
        gains.append(best_gain)
        chosen.add(best_item)
        objective += best_gain
        for v in ctx.postings.get(best_item, ()):
            counts[v] += 1
    return GreedyResult(
        selected=CacheSet.from_ids(tuple(order), capacity=max(capacity, len(order))),
        order=tuple(order),
        gains=tuple(gains),
        objective=objective,
        evaluations=evaluations,
    )


def exhaustive_opt(
    ctx: ObjectiveContext, capacity: int, limit: int = 10**6
) -> tuple[tuple[ItemId, ...], float]:
    """Optimal cache by enumeration, for small instances only.

    Only items with postings can change the objective, so enumeration runs
    over that pool; the guard rejects instances whose combination count
    exceeds ``limit`` rather than silently taking hours.
    """
    pool = sorted(ctx.postings)
    k = min(capacity, len(pool))
    n_combos = math.comb(len(pool), k)
    if n_combos > limit:
        raise ValueError(
            f"{len(pool)} candidates choose {k} is {n_combos} combinations, over the {limit} limit"
        )
    best: tuple[ItemId, ...] = ()
    best_val = -1.0
    for combo in itertools.combinations(pool, k):
        val = chr_objective(ctx, combo)
        if val > best_val + 1e-15:
            best_val = val
            best = combo
    return best, max(best_val, 0.0)


def check_structure(
    ctx: ObjectiveContext,
    trials: int = 100,
    rng: np.random.Generator | None = None,
    slack: float = 1e-12,
) -> list[str]:
    """Spot-check monotonicity and diminishing returns on random triples.

    Draws nested sets A within B and an item x outside B, then verifies that
    adding x never hurts and helps A at least as much as B (up to ``slack``
    for float noise). Returns human-readable violation messages; an empty
    list is a pass.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    pool = sorted(set(ctx.universe))
    violations: list[str] = []
    if len(pool) < 2:
        return violations
    for t in range(trials):
        b_size = int(rng.integers(1, len(pool)))
        b_idx = rng.choice(len(pool), size=b_size, replace=False)
        b = {pool[i] for i in b_idx}
        a_size = int(rng.integers(0, len(b) + 1))
        a = set(rng.choice(sorted(b), size=a_size, replace=False)) if a_size else set()
        outside = [x for x in pool if x not in b]
        if not outside:
            continue
        x = outside[int(rng.integers(len(outside)))]
        fa = chr_objective(ctx, a)
        fb = chr_objective(ctx, b)
        fax = chr_objective(ctx, a | {x})
        fbx = chr_objective(ctx, b | {x})
        if fax < fa - slack:
            violations.append(f"trial {t}: adding {x} decreased the objective ({fax} < {fa})")
        if fbx < fb - slack:
            violations.append(f"trial {t}: adding {x} decreased the objective ({fbx} < {fb})")
        if (fax - fa) < (fbx - fb) - slack:
            violations.append(
                f"trial {t}: gain of {x} grew with a larger base set "
                f"({fax - fa} < {fbx - fb})"
            )
    return violations


# --- Instance files ---------------------------------------------------------


def save_instance(
    path: str | Path,
    graph_path: str,
    weights: dict[ItemId, float],
    pdist_kind: str,
    pdist_alpha: float | None,
    n: int,
    schedule: BfsSchedule,
) -> None:
    """Write a placement instance as JSON referencing an interchange graph."""
    body = {
        "graph_path": graph_path,
        "weights": weights,
        "position": {"kind": pdist_kind, "alpha": pdist_alpha},
        "n": n,
        "schedule": {
            "widths": [p.width for p in schedule.plan],
            "expand": [-1 if p.expand_count is None else p.expand_count for p in schedule.plan],
        },
    }
    Path(path).write_text(json.dumps(body, indent=2) + "\n", encoding="utf-8")


def load_instance(path: str | Path) -> ObjectiveContext:
    """Load an instance file and build its objective context.

    The graph path resolves relative to the instance file so instances can
    ship next to their graphs.
    """
    path = Path(path)
    body = json.loads(path.read_text(encoding="utf-8"))
    graph_path = Path(body["graph_path"])
    if not graph_path.is_absolute():
        graph_path = path.parent / graph_path
    graph = load_graph(graph_path)
    pos = body.get("position", {"kind": "uniform", "alpha": None})
    n = int(body["n"])
    pdist = position_distribution(pos["kind"], n, pos.get("alpha"))
    sched = body.get("schedule", {"widths": [n], "expand": [-1]})
    plans = tuple(
        DepthPlan(int(w), None if int(e) < 0 else int(e))
        for w, e in zip(sched["widths"], sched["expand"])
    )
    weights = {str(k): float(v) for k, v in body["weights"].items()}
    return build_context(graph, weights, pdist, n, BfsSchedule(plans))
