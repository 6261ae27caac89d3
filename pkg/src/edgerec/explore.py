"""BFS exploration of a black-box recommender and cache-aware list assembly.

Starting from the currently watched item, the explorer repeatedly asks the
provider for related items, breadth-first, building an ordered exploration
list of directly and indirectly related items. The recommender then promotes
the cached members of that list to the top positions and fills the remainder
from the head of the list, so relevance order is preserved within each group.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .catalog import CacheSet, CostVector, ItemId, RelationProvider


@dataclass(frozen=True)
class DepthPlan:
    """Plan for one BFS depth: request ``width`` related items per expanded
    item, and expand at most ``expand_count`` of the items discovered at this
    depth into the next one (None = expand all)."""

    width: int
    expand_count: int | None = None

    def __post_init__(self):
        if self.width < 1:
            raise ValueError("width must be >= 1")
        if self.expand_count is not None and self.expand_count < 0:
            raise ValueError("expand_count must be >= 0")


@dataclass(frozen=True)
class BfsSchedule:
    plan: tuple[DepthPlan, ...]

    def __post_init__(self):
        if len(self.plan) < 1:
            raise ValueError("schedule needs at least one depth")

    @property
    def depth(self) -> int:
        return len(self.plan)

    @classmethod
    def classic(cls, width: int, depth: int) -> "BfsSchedule":
        """The symmetric (W, D) schedule: same width at every depth, every
        discovered item expanded."""
        if depth < 1:
            raise ValueError("depth must be >= 1")
        return cls(tuple(DepthPlan(width) for _ in range(depth)))

    def size_bound(self) -> int:
        """Maximum exploration-list length this schedule can produce."""
        total = 0
        frontier = 1
        for d, plan in enumerate(self.plan):
            level = frontier * plan.width
            total += level
            expandable = level if plan.expand_count is None else min(level, plan.expand_count)
            frontier = expandable
        return total


@dataclass(frozen=True)
class ExplorationList:
    """Ordered, deduplicated BFS output with per-item discovery depth."""

    source: ItemId
    entries: tuple[tuple[ItemId, int], ...]
    requests_issued: int
    duplicates_seen: int

    @property
    def ids(self) -> tuple[ItemId, ...]:
        return tuple(v for v, _ in self.entries)

    @property
    def depths(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.ids)


@dataclass(frozen=True)
class RecommendationList:
    """Final ordered recommendation list with per-position cached flags."""

    ids: tuple[ItemId, ...]
    cached: tuple[bool, ...]

    def __post_init__(self):
        if len(self.ids) != len(self.cached):
            raise ValueError("ids and cached flags must have equal length")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("recommendation list contains duplicates")

    @property
    def cached_count(self) -> int:
        return sum(self.cached)

    def __len__(self) -> int:
        return len(self.ids)

    def __iter__(self):
        return iter(self.ids)

    def has_cached_prefix(self) -> bool:
        seen_uncached = False
        for flag in self.cached:
            if flag and seen_uncached:
                return False
            if not flag:
                seen_uncached = True
        return True


def bfs_explore(provider: RelationProvider, v: ItemId,
                schedule: BfsSchedule) -> ExplorationList:
    """Explore related items breadth-first according to ``schedule``.

    Depth-1 entries are the provider's related list for ``v`` in order; each
    deeper level expands the first ``expand_count`` items discovered at the
    previous depth, appending their related lists. Re-encounters of already
    listed items (and of ``v`` itself) are skipped, first occurrence kept.
    """
    entries: list[tuple[ItemId, int]] = []
    seen: set[ItemId] = {v}
    requests = 0
    duplicates = 0

    frontier = [v]
    for depth_index, plan in enumerate(schedule.plan):
        depth = depth_index + 1
        discovered: list[ItemId] = []
        for u in frontier:
            requests += 1
            for item in provider.related(u, plan.width):
                if item in seen:
                    duplicates += 1
                    continue
                seen.add(item)
                entries.append((item, depth))
                discovered.append(item)
        if plan.expand_count is None:
            frontier = discovered
        else:
            frontier = discovered[: plan.expand_count]
        if not frontier:
            break

    return ExplorationList(v, tuple(entries), requests, duplicates)


def recommend(provider: RelationProvider, v: ItemId, n: int, cache: CacheSet,
              schedule: BfsSchedule) -> RecommendationList:
    """Assemble the cache-aware recommendation list for ``v``.

    Cached members of the exploration list come first, in exploration order,
    up to ``n``; any remaining positions are filled from the head of the
    exploration list. The watched item itself is never recommended. When the
    exploration yields fewer than ``n`` items the list is returned short.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    exploration = bfs_explore(provider, v, schedule)
    picked: list[ItemId] = []
    flags: list[bool] = []
    for item in exploration.ids:
        if len(picked) >= n:
            break
        if item in cache:
            picked.append(item)
            flags.append(True)
    chosen = set(picked)
    for item in exploration.ids:
        if len(picked) >= n:
            break
        if item in chosen:
            continue
        picked.append(item)
        flags.append(item in cache)
    return RecommendationList(tuple(picked), tuple(flags))


def recommend_cost(provider: RelationProvider, v: ItemId, n: int,
                   costs: CostVector, schedule: BfsSchedule) -> RecommendationList:
    """Cost-generalized assembly: the ``n`` explored items with the lowest
    delivery cost, ties broken by earlier exploration position. With a 0/1
    cost vector derived from a cache this reduces to :func:`recommend`."""
    if n < 1:
        raise ValueError("n must be >= 1")
    exploration = bfs_explore(provider, v, schedule)
    order = sorted(range(len(exploration)),
                   key=lambda i: (costs.cost(exploration.ids[i]), i))
    picked = [exploration.ids[i] for i in order[:n]]
    flags = [costs.cost(item) == 0.0 for item in picked]
    return RecommendationList(tuple(picked), tuple(flags))


def overlap_index(provider: RelationProvider, v: ItemId, w: int) -> float:
    """Fraction of the depth-1 related items that are rediscovered at depth 2.

    A proxy for how strongly the source item relates to its indirectly
    related items: 1 means every direct recommendation reappears among the
    recommendations of the direct recommendations.
    """
    direct = provider.related(v, w)
    if not direct:
        raise ValueError(f"item {v!r} has no related items; overlap undefined")
    r1 = set(direct)
    r2: set[ItemId] = set()
    for u in direct:
        r2.update(provider.related(u, w))
    return len(r1 & r2) / len(r1)


@dataclass(frozen=True)
class ExplorationStatsRow:
    source: ItemId
    requests_issued: int
    unique_returned: int


def exploration_stats(runs: list[ExplorationList]) -> list[ExplorationStatsRow]:
    """One (requests issued, unique items returned) row per exploration run."""
    return [ExplorationStatsRow(r.source, r.requests_issued, len(r)) for r in runs]
