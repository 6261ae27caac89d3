"""User-demand models and session simulation.

A session starts from a seed item (front-page trending pick or an externally
supplied search-seeded list), then repeatedly presents a recommendation list
and selects a position according to a position-selection distribution that
depends on rank only, never on content. Traces record every presented list
and selection so estimators can be replayed against alternative caches.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from .catalog import CacheSet, ItemId, RelationGraph, RelationProvider, load_graph, generate_synthetic
from .explore import BfsSchedule, DepthPlan, RecommendationList, recommend

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


class ConfigError(Exception):
    """Raised with every validation problem enumerated, one per line."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario config:\n" + "\n".join(f"  - {p}" for p in self.problems))


@dataclass(frozen=True)
class PositionDistribution:
    """Selection probabilities over list positions 1..n.

    ``uniform`` gives every position 1/n; ``zipf`` weights position i by
    i^(-alpha), so larger alpha concentrates selection on the top of the
    list; ``top`` is the deterministic alpha-to-infinity limit that always
    picks position 1 (useful for exact tests).
    """

    kind: str
    n: int
    alpha: float | None
    probs: tuple[float, ...]

    def __post_init__(self):
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValueError("position probabilities must sum to 1")
        if any(p < 0 for p in self.probs):
            raise ValueError("position probabilities must be non-negative")

    def renormalized(self, length: int) -> np.ndarray:
        """Probabilities over the first ``length`` positions, renormalized."""
        if length < 1 or length > self.n:
            raise ValueError(f"length must lie in [1, {self.n}]")
        head = np.asarray(self.probs[:length])
        return head / head.sum()

    def sample(self, rng: np.random.Generator, length: int) -> int:
        """Draw a 1-based position by inverse CDF over the renormalized head."""
        cdf = np.cumsum(self.renormalized(length))
        u = rng.random()
        # float cdf can top out a hair below 1.0; clamp instead of overrunning
        return min(int(np.searchsorted(cdf, u, side="right")), length - 1) + 1

    def cum(self, j: int) -> float:
        """Probability of selecting one of the first ``j`` positions."""
        return float(sum(self.probs[: max(0, min(j, self.n))]))

    def nonincreasing(self) -> bool:
        return all(a >= b - 1e-12 for a, b in zip(self.probs, self.probs[1:]))


def position_distribution(kind: str, n: int, alpha: float | None = None) -> PositionDistribution:
    if n < 1:
        raise ValueError("n must be >= 1")
    if kind == "uniform":
        probs = tuple([1.0 / n] * n)
    elif kind == "zipf":
        if alpha is None or alpha < 0:
            raise ValueError("zipf needs alpha >= 0")
        w = np.arange(1, n + 1, dtype=float) ** (-alpha)
        probs = tuple(w / w.sum())
    elif kind == "top":
        probs = tuple([1.0] + [0.0] * (n - 1))
    else:
        raise ValueError(f"unknown position distribution kind {kind!r}")
    return PositionDistribution(kind, n, alpha, probs)


@dataclass(frozen=True)
class InitialDemand:
    """Where sessions start: a non-empty seed list, selected uniformly."""

    kind: str
    seed_list: tuple[ItemId, ...]

    def __post_init__(self):
        if not self.seed_list:
            raise ValueError("seed list must be non-empty")

    @classmethod
    def front_page(cls, provider: RelationProvider, size: int = 50) -> "InitialDemand":
        return cls("front_page", tuple(provider.top_popular(size)))

    @classmethod
    def search_bar(cls, seed_ids: Iterable[ItemId]) -> "InitialDemand":
        return cls("search_bar", tuple(seed_ids))

    def sample(self, rng: np.random.Generator) -> ItemId:
        return self.seed_list[int(rng.integers(len(self.seed_list)))]


@dataclass(frozen=True)
class SessionStep:
    presented: tuple[ItemId, ...]
    presented_cached: tuple[bool, ...]
    position: int
    selected: ItemId
    cached: bool
    ratings: dict | None = None
    degraded: bool = False

    def __post_init__(self):
        if not (1 <= self.position <= len(self.presented)):
            raise ValueError("selected position outside presented list")
        if self.selected != self.presented[self.position - 1]:
            raise ValueError("selected id does not match presented position")


@dataclass(frozen=True)
class SessionTrace:
    session_id: str
    initial: ItemId
    steps: tuple[SessionStep, ...]
    seed: int | None = None
    truncated: bool = False
    created_at: str | None = None
    final_ratings: dict | None = None

    def to_json_line(self) -> str:
        body = {
            "session": self.session_id,
            "initial": self.initial,
            "seed": self.seed,
            "truncated": self.truncated,
            "steps": [
                {
                    "presented": list(s.presented),
                    "cached_flags": list(s.presented_cached),
                    "position": s.position,
                    "selected": s.selected,
                    "cached": s.cached,
                    "ratings": s.ratings,
                    "degraded": s.degraded,
                }
                for s in self.steps
            ],
        }
        if self.created_at is not None:
            body["created_at"] = self.created_at
        if self.final_ratings is not None:
            body["final_ratings"] = self.final_ratings
        return json.dumps(body)

    @classmethod
    def from_json_line(cls, line: str) -> "SessionTrace":
        rec = json.loads(line)
        steps = tuple(
            SessionStep(
                presented=tuple(s["presented"]),
                presented_cached=tuple(bool(f) for f in s["cached_flags"]),
                position=int(s["position"]),
                selected=s["selected"],
                cached=bool(s["cached"]),
                ratings=s.get("ratings"),
                degraded=bool(s.get("degraded", False)),
            )
            for s in rec["steps"]
        )
        return cls(
            session_id=rec["session"],
            initial=rec["initial"],
            steps=steps,
            seed=rec.get("seed"),
            truncated=bool(rec.get("truncated", False)),
            created_at=rec.get("created_at"),
            final_ratings=rec.get("final_ratings"),
        )


def save_traces(traces: Iterable[SessionTrace], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for t in traces:
            fh.write(t.to_json_line() + "\n")


def load_traces(path: str | Path) -> list[SessionTrace]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(SessionTrace.from_json_line(line))
    return out


# --- Recommenders ----------------------------------------------------------


def flag_against_cache(ids: Iterable[ItemId], cache: CacheSet) -> RecommendationList:
    ids = tuple(ids)
    return RecommendationList(ids, tuple(v in cache for v in ids))


class BaselineRecommender:
    """Top-n related items straight from the provider, no reordering.

    Flags are still computed against the cache so estimators can report how
    often the baseline happens to hit it.
    """

    def __init__(self, n: int):
        self.n = n
        self._memo: dict[ItemId, tuple[ItemId, ...]] = {}

    def __call__(self, provider: RelationProvider, v: ItemId, cache: CacheSet) -> RecommendationList:
        ids = self._memo.get(v)
        if ids is None:
            ids = tuple(provider.related(v, self.n))
            self._memo[v] = ids
        return flag_against_cache(ids, cache)


class CacheAwareRecommender:
    """BFS exploration plus cached-first assembly (the full algorithm)."""

    def __init__(self, n: int, schedule: BfsSchedule):
        self.n = n
        self.schedule = schedule
        self._memo: dict[ItemId, RecommendationList] = {}
        self._memo_cache: CacheSet | None = None

    def __call__(self, provider: RelationProvider, v: ItemId, cache: CacheSet) -> RecommendationList:
        if cache is not self._memo_cache:
            self._memo.clear()
            self._memo_cache = cache
        result = self._memo.get(v)
        if result is None:
            result = recommend(provider, v, self.n, cache, self.schedule)
            self._memo[v] = result
        return result


def reorder_recommender(n: int) -> CacheAwareRecommender:
    """Cache-aware reordering of the baseline top-n list only (width = n,
    depth 1): same items as the baseline, cached ones promoted."""
    return CacheAwareRecommender(n, BfsSchedule.classic(n, 1))


def make_recommender(kind: str, n: int, schedule: BfsSchedule | None = None):
    if kind == "baseline":
        return BaselineRecommender(n)
    if kind == "cache_aware":
        if schedule is None:
            raise ValueError("cache_aware recommender needs a schedule")
        return CacheAwareRecommender(n, schedule)
    if kind == "reorder_only":
        return reorder_recommender(n)
    raise ValueError(f"unknown recommender kind {kind!r}")


# --- Session simulation ----------------------------------------------------


def simulate_session(
    provider: RelationProvider,
    recommender,
    cache: CacheSet,
    initial: InitialDemand,
    pdist: PositionDistribution,
    k: int,
    rng: np.random.Generator,
    session_id: str = "s0",
    seed: int | None = None,
) -> SessionTrace:
    """Simulate one session of ``k`` watched items.

    The first item is drawn uniformly from the seed list; each later item is
    selected from the recommender's list for the current item, at a position
    drawn from ``pdist`` renormalized to the actual list length. An empty
    recommendation list truncates the session and is flagged on the trace.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    current = initial.sample(rng)
    first = current
    steps: list[SessionStep] = []
    truncated = False
    for _ in range(2, k + 1):
        rlist = recommender(provider, current, cache)
        if len(rlist) == 0:
            truncated = True
            break
        pos = pdist.sample(rng, min(len(rlist), pdist.n))
        selected = rlist.ids[pos - 1]
        steps.append(
            SessionStep(
                presented=rlist.ids,
                presented_cached=rlist.cached,
                position=pos,
                selected=selected,
                cached=rlist.cached[pos - 1],
            )
        )
        current = selected
    return SessionTrace(session_id, first, tuple(steps), seed=seed, truncated=truncated)


# --- Scenario configuration ------------------------------------------------


@dataclass(frozen=True)
class GraphConfig:
    source: str = "synthetic"
    num_items: int = 1000
    zipf_alpha: float = 1.0
    avg_degree: float = 10.0
    path: str | None = None


@dataclass(frozen=True)
class CacheConfig:
    policy: str = "top_popular"
    capacity: int = 50
    items: tuple[ItemId, ...] = ()
    greedy_seeds: int = 50
    greedy_uniform_q: bool = True


@dataclass(frozen=True)
class RecommenderConfig:
    kind: str = "cache_aware"
    n: int = 20
    width: int = 50
    depth: int = 2
    widths: tuple[int, ...] = ()
    expand: tuple[int, ...] = ()

    def schedule(self) -> BfsSchedule:
        if self.widths:
            expand = self.expand or (None,) * len(self.widths)
            plans = tuple(
                DepthPlan(w, None if e in (None, -1) else int(e))
                for w, e in zip(self.widths, expand)
            )
            return BfsSchedule(plans)
        return BfsSchedule.classic(self.width, self.depth)


@dataclass(frozen=True)
class DemandConfig:
    initial: str = "front_page"
    front_page_size: int = 50
    seed_items: tuple[ItemId, ...] = ()
    position: str = "uniform"
    alpha: float = 1.0
    k: int = 2
    sessions: int = 1000


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    graph: GraphConfig = field(default_factory=GraphConfig)
    cache: CacheConfig = field(default_factory=CacheConfig)
    recommender: RecommenderConfig = field(default_factory=RecommenderConfig)
    demand: DemandConfig = field(default_factory=DemandConfig)
    sweep: dict = field(default_factory=dict)
    compare: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict, repr=False)


def _section(data: dict, name: str) -> dict:
    sec = data.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError([f"[{name}] must be a table"])
    return dict(sec)


def parse_config(data: dict) -> ScenarioConfig:
    problems: list[str] = []

    g = _section(data, "graph")
    c = _section(data, "cache")
    r = _section(data, "recommender")
    d = _section(data, "demand")

    graph = GraphConfig(
        source=g.get("source", "synthetic"),
        num_items=int(g.get("num_items", 1000)),
        zipf_alpha=float(g.get("zipf_alpha", 1.0)),
        avg_degree=float(g.get("avg_degree", 10.0)),
        path=g.get("path"),
    )
    if graph.source not in ("synthetic", "file"):
        problems.append(f"graph.source must be 'synthetic' or 'file', got {graph.source!r}")
    if graph.source == "file":
        if not graph.path:
            problems.append("graph.source = 'file' requires graph.path")
        elif not Path(graph.path).exists():
            problems.append(f"graph file {graph.path!r} does not exist")
    if graph.source == "synthetic" and graph.num_items < 1:
        problems.append("graph.num_items must be >= 1")

    cache = CacheConfig(
        policy=c.get("policy", "top_popular"),
        capacity=int(c.get("capacity", 50)),
        items=tuple(c.get("items", ())),
        greedy_seeds=int(c.get("greedy_seeds", 50)),
        greedy_uniform_q=bool(c.get("greedy_uniform_q", True)),
    )
    if cache.policy not in ("top_popular", "explicit", "greedy"):
        problems.append(f"cache.policy {cache.policy!r} unknown")
    if cache.capacity < 0:
        problems.append("cache.capacity must be >= 0")
    if cache.policy == "explicit" and not cache.items:
        problems.append("cache.policy = 'explicit' requires cache.items")

    rec = RecommenderConfig(
        kind=r.get("kind", "cache_aware"),
        n=int(r.get("n", 20)),
        width=int(r.get("width", 50)),
        depth=int(r.get("depth", 2)),
        widths=tuple(int(x) for x in r.get("widths", ())),
        expand=tuple(int(x) for x in r.get("expand", ())),
    )
    if rec.kind not in ("baseline", "cache_aware", "reorder_only"):
        problems.append(f"recommender.kind {rec.kind!r} unknown")
    if rec.n < 1:
        problems.append("recommender.n must be >= 1")
    if not rec.widths and (rec.width < 1 or rec.depth < 1):
        problems.append("recommender.width and recommender.depth must be >= 1")
    if rec.expand and rec.widths and len(rec.expand) != len(rec.widths):
        problems.append("recommender.expand must match recommender.widths in length")

    dem = DemandConfig(
        initial=d.get("initial", "front_page"),
        front_page_size=int(d.get("front_page_size", 50)),
        seed_items=tuple(d.get("seed_items", ())),
        position=d.get("position", "uniform"),
        alpha=float(d.get("alpha", 1.0)),
        k=int(d.get("k", 2)),
        sessions=int(d.get("sessions", 1000)),
    )
    if dem.initial not in ("front_page", "search_bar"):
        problems.append(f"demand.initial {dem.initial!r} unknown")
    if dem.initial == "search_bar" and not dem.seed_items:
        problems.append("demand.initial = 'search_bar' requires demand.seed_items")
    if dem.position not in ("uniform", "zipf", "top"):
        problems.append(f"demand.position {dem.position!r} unknown")
    if dem.k < 2:
        problems.append("demand.k must be >= 2")
    if dem.sessions < 1:
        problems.append("demand.sessions must be >= 1")

    if problems:
        raise ConfigError(problems)
    return ScenarioConfig(
        seed=int(data.get("seed", 0)),
        graph=graph,
        cache=cache,
        recommender=rec,
        demand=dem,
        sweep=_section(data, "sweep"),
        compare=_section(data, "compare"),
        raw=data,
    )


def load_config(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    with path.open("rb") as fh:
        try:
            data = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError([f"TOML parse error: {exc}"]) from exc
    # relative graph paths are anchored to the config file, not the cwd
    gpath = data.get("graph", {}).get("path")
    if isinstance(gpath, str) and gpath and not Path(gpath).is_absolute():
        data["graph"]["path"] = str(path.parent / gpath)
    return parse_config(data)


def build_graph(cfg: ScenarioConfig) -> RelationGraph:
    if cfg.graph.source == "file":
        return load_graph(cfg.graph.path)
    return generate_synthetic(
        cfg.graph.num_items, cfg.graph.zipf_alpha, cfg.graph.avg_degree, cfg.seed
    )


def build_cache(cfg: ScenarioConfig, graph: RelationGraph) -> CacheSet:
    policy = cfg.cache.policy
    if policy == "top_popular":
        return CacheSet.top_popular(graph, cfg.cache.capacity)
    if policy == "explicit":
        return CacheSet.from_ids(cfg.cache.items, cfg.cache.capacity)
    if policy == "greedy":
        from . import placement  # late import: placement depends on this module

        pdist = position_distribution(cfg.demand.position, cfg.recommender.n, cfg.demand.alpha)
        seeds = graph.top_popular(cfg.cache.greedy_seeds)
        if cfg.cache.greedy_uniform_q:
            q = {v: 1.0 / len(seeds) for v in seeds}
        else:
            total = sum(graph.q(v) for v in seeds)
            q = {v: graph.q(v) / total for v in seeds}
        ctx = placement.build_context(graph, q, pdist, cfg.recommender.n, cfg.recommender.schedule())
        result = placement.greedy_cache(ctx, cfg.cache.capacity)
        return result.selected
    raise ValueError(f"unknown cache policy {policy!r}")


def build_initial(cfg: ScenarioConfig, graph: RelationGraph) -> InitialDemand:
    if cfg.demand.initial == "front_page":
        return InitialDemand.front_page(graph, cfg.demand.front_page_size)
    return InitialDemand.search_bar(cfg.demand.seed_items)


def run_demand(cfg: ScenarioConfig, graph: RelationGraph | None = None,
               cache: CacheSet | None = None) -> list[SessionTrace]:
    """Run the configured number of sessions, reproducibly.

    Per-session randomness derives from (master seed, session index), so the
    result does not depend on execution order.
    """
    if graph is None:
        graph = build_graph(cfg)
    if cache is None:
        cache = build_cache(cfg, graph)
    initial = build_initial(cfg, graph)
    pdist = position_distribution(cfg.demand.position, cfg.recommender.n, cfg.demand.alpha)
    recommender = make_recommender(cfg.recommender.kind, cfg.recommender.n, cfg.recommender.schedule())
    traces = []
    for idx in range(cfg.demand.sessions):
        rng = np.random.default_rng([cfg.seed, idx])
        traces.append(
            simulate_session(
                graph, recommender, cache, initial, pdist, cfg.demand.k, rng,
                session_id=f"s{idx:06d}", seed=idx,
            )
        )
    return traces
