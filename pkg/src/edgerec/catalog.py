"""Content catalog, relation provider abstraction, and graph I/O.

The catalog is an immutable relation graph: every item carries an ordered
list of related items (the output a baseline recommender would produce,
truncated at the provider maximum of 50) and a popularity weight. Synthetic
catalogs draw popularity from a Zipf law and wire related lists with a
popularity bias, which is what makes cache-aware reordering pay off.
"""

from __future__ import annotations

import json
import time
import urllib.parse
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Protocol

import numpy as np

PROVIDER_MAX = 50

ItemId = str


class GraphError(Exception):
    """Base class for catalog construction and I/O failures."""


class GraphFormatError(GraphError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownItemError(GraphError, KeyError):
    pass


class RelationProvider(Protocol):
    """Black-box source of ordered related-item lists.

    Implementations must truncate honestly: ``related(v, w)`` returns at
    most ``w`` ids and ``top_popular(n)`` at most ``n``.
    """

    def related(self, v: ItemId, w: int) -> list[ItemId]: ...

    def top_popular(self, n: int) -> list[ItemId]: ...


@dataclass(frozen=True)
class RelationGraph:
    """Immutable catalog: items, ordered related lists, popularity weights.

    Invariants checked at construction: related lists reference known items
    only, contain no duplicates, and never contain their own source item;
    popularity weights are non-negative and sum to 1 over the support.
    """

    items: tuple[ItemId, ...]
    related_lists: dict[ItemId, tuple[ItemId, ...]]
    popularity: dict[ItemId, float]
    region_tag: str | None = None
    _item_set: frozenset = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        item_set = frozenset(self.items)
        object.__setattr__(self, "_item_set", item_set)
        if len(item_set) != len(self.items):
            raise GraphError("duplicate item ids in catalog")
        for v in self.items:
            if not v:
                raise GraphError("empty item id")
        for v, lst in self.related_lists.items():
            if v not in item_set:
                raise GraphError(f"related list for unknown item {v!r}")
            if len(set(lst)) != len(lst):
                raise GraphError(f"duplicate entries in related list of {v!r}")
            if v in lst:
                raise GraphError(f"item {v!r} appears in its own related list")
            for u in lst:
                if u not in item_set:
                    raise GraphError(f"dangling reference {u!r} in related list of {v!r}")
        support_sum = 0.0
        for v, q in self.popularity.items():
            if v not in item_set:
                raise GraphError(f"popularity weight for unknown item {v!r}")
            if q < 0:
                raise GraphError(f"negative popularity for {v!r}")
            support_sum += q
        if self.popularity and abs(support_sum - 1.0) > 1e-9:
            raise GraphError(f"popularity sums to {support_sum!r}, expected 1")

    def __contains__(self, v: ItemId) -> bool:
        return v in self._item_set

    def __len__(self) -> int:
        return len(self.items)

    def degree(self, v: ItemId) -> int:
        return len(self.related_lists.get(v, ()))

    def q(self, v: ItemId) -> float:
        return self.popularity.get(v, 0.0)

    def related(self, v: ItemId, w: int) -> list[ItemId]:
        """First ``min(w, degree(v))`` stored related items of ``v``, in order."""
        if v not in self._item_set:
            raise UnknownItemError(v)
        if w < 1:
            raise ValueError("w must be >= 1")
        return list(self.related_lists.get(v, ())[:w])

    def top_popular(self, n: int) -> list[ItemId]:
        """The ``n`` items with largest popularity, descending, ties by id."""
        if n < 1:
            raise ValueError("n must be >= 1")
        ranked = sorted(self.items, key=lambda v: (-self.q(v), v))
        return ranked[: min(n, len(ranked))]


@dataclass(frozen=True)
class CacheSet:
    """Ordered set of item ids assumed deliverable at low cost."""

    items: tuple[ItemId, ...]
    capacity: int

    def __post_init__(self):
        if self.capacity < 0:
            raise ValueError("capacity must be non-negative")
        if len(set(self.items)) != len(self.items):
            raise ValueError("cache contains duplicates")
        if len(self.items) > self.capacity:
            raise ValueError("cache exceeds capacity")
        object.__setattr__(self, "_member_set", frozenset(self.items))

    def __contains__(self, v: ItemId) -> bool:
        return v in self._member_set

    def __len__(self) -> int:
        return len(self.items)

    def __iter__(self):
        return iter(self.items)

    @classmethod
    def from_ids(cls, ids: Iterable[ItemId], capacity: int | None = None) -> "CacheSet":
        items = tuple(dict.fromkeys(ids))
        return cls(items, len(items) if capacity is None else capacity)

    @classmethod
    def top_popular(cls, graph: RelationGraph, capacity: int) -> "CacheSet":
        if capacity == 0:
            return cls((), 0)
        return cls(tuple(graph.top_popular(capacity)), capacity)


@dataclass(frozen=True)
class CostVector:
    """Per-item delivery cost; items not listed fall back to ``default_cost``."""

    costs: dict[ItemId, float]
    default_cost: float = 1.0

    def __post_init__(self):
        for v, c in self.costs.items():
            if not np.isfinite(c) or c < 0:
                raise ValueError(f"cost for {v!r} must be finite and non-negative")
        if not np.isfinite(self.default_cost) or self.default_cost < 0:
            raise ValueError("default cost must be finite and non-negative")

    def cost(self, v: ItemId) -> float:
        return self.costs.get(v, self.default_cost)

    @classmethod
    def from_cache(cls, cache: CacheSet) -> "CostVector":
        """0/1 reduction: cached items cost 0, everything else costs 1."""
        return cls({v: 0.0 for v in cache}, default_cost=1.0)


def zipf_weights(n: int, alpha: float) -> np.ndarray:
    """Normalized Zipf(alpha) weights over ranks 1..n (alpha=0 is uniform)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if alpha < 0:
        raise ValueError("alpha must be non-negative")
    w = np.arange(1, n + 1, dtype=float) ** (-alpha)
    return w / w.sum()


def generate_synthetic(
    num_items: int,
    zipf_alpha: float,
    avg_degree: float,
    rng_seed: int,
    region_tag: str | None = None,
) -> RelationGraph:
    """Generate a reproducible synthetic catalog.

    Popularity follows Zipf(``zipf_alpha``) over a random permutation of the
    items. Each item draws its out-degree from Poisson(``avg_degree``)
    clipped to [0, num_items-1] and samples that many distinct targets with
    probability proportional to popularity, so related lists favor popular
    items. Same seed, same graph.
    """
    if num_items < 1:
        raise ValueError("num_items must be >= 1")
    if avg_degree < 0 or avg_degree > num_items - 1:
        raise ValueError("avg_degree must lie in [0, num_items - 1]")

    rng = np.random.default_rng(rng_seed)
    width = max(6, len(str(num_items - 1)))
    ids = [f"v{i:0{width}d}" for i in range(num_items)]

    ranks = rng.permutation(num_items) + 1
    base = zipf_weights(num_items, zipf_alpha)
    q = base[ranks - 1]
    q = q / q.sum()

    related: dict[ItemId, tuple[ItemId, ...]] = {}
    if num_items == 1:
        related[ids[0]] = ()
    else:
        degrees = np.clip(rng.poisson(avg_degree, size=num_items), 0, num_items - 1)
        for i, v in enumerate(ids):
            k = int(degrees[i])
            if k == 0:
                related[v] = ()
                continue
            p = q.copy()
            p[i] = 0.0
            p /= p.sum()
            targets = rng.choice(num_items, size=k, replace=False, p=p)
            related[v] = tuple(ids[t] for t in targets)

    popularity = {v: float(q[i]) for i, v in enumerate(ids)}
    # Renormalize in float to kill the residual from per-item rounding.
    total = sum(popularity.values())
    popularity = {v: w / total for v, w in popularity.items()}
    return RelationGraph(tuple(ids), related, popularity, region_tag)


def save_graph(graph: RelationGraph, path: str | Path) -> None:
    """Write the catalog in the line-delimited interchange format."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        if graph.region_tag is not None:
            fh.write(json.dumps({"region": graph.region_tag}) + "\n")
        for v in graph.items:
            rec = {
                "id": v,
                "q": graph.popularity.get(v, 0.0),
                "related": list(graph.related_lists.get(v, ())),
            }
            fh.write(json.dumps(rec) + "\n")


def load_graph(path: str | Path) -> RelationGraph:
    """Load a catalog saved by :func:`save_graph`; rejects invariant violations."""
    path = Path(path)
    items: list[ItemId] = []
    related: dict[ItemId, tuple[ItemId, ...]] = {}
    popularity: dict[ItemId, float] = {}
    region = None
    seen: set[ItemId] = set()
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise GraphFormatError(f"invalid JSON: {exc.msg}", line=lineno) from exc
            if "region" in rec and "id" not in rec:
                if lineno != 1:
                    raise GraphFormatError("header record must come first", line=lineno)
                region = rec["region"]
                continue
            if "id" not in rec:
                raise GraphFormatError("record missing 'id'", line=lineno)
            v = rec["id"]
            if v in seen:
                raise GraphFormatError(f"duplicate entry for {v!r}", line=lineno)
            seen.add(v)
            items.append(v)
            related[v] = tuple(rec.get("related", []))
            popularity[v] = float(rec.get("q", 0.0))
    try:
        return RelationGraph(tuple(items), related, popularity, region)
    except GraphError as exc:
        raise GraphFormatError(str(exc)) from exc


# --- Remote adapter -------------------------------------------------------
#
# Optional at runtime: everything above runs on in-memory or file-backed
# graphs. The adapter wraps a live recommender API behind the same
# RelationProvider contract, with an on-disk response cache and a hard
# request quota so a misconfigured sweep cannot burn a day's credits.


class RemoteError(Exception):
    pass


class QuotaExhaustedError(RemoteError):
    pass


class TransportError(RemoteError):
    pass


class MalformedResponseError(RemoteError):
    pass


Transport = Callable[[str, dict], str]


def http_transport(endpoint: str, params: dict) -> str:
    url = endpoint + "?" + urllib.parse.urlencode(params)
    try:
        with urllib.request.urlopen(url, timeout=30) as resp:
            return resp.read().decode("utf-8")
    except OSError as exc:
        raise TransportError(str(exc)) from exc


class FixtureTransport:
    """Replays recorded responses from a directory of ``<name>.json`` files.

    The file name is derived from the request parameters, so a recorded
    session replays byte-identically across runs.
    """

    def __init__(self, fixture_dir: str | Path):
        self.fixture_dir = Path(fixture_dir)

    def __call__(self, endpoint: str, params: dict) -> str:
        name = fixture_key(params)
        path = self.fixture_dir / f"{name}.json"
        if not path.exists():
            raise TransportError(f"no recorded response for {name}")
        return path.read_text(encoding="utf-8")


def fixture_key(params: dict) -> str:
    return "_".join(f"{k}-{params[k]}" for k in sorted(params))


@dataclass
class RemoteAdapterConfig:
    endpoint: str
    credential: str
    quota: int
    cache_dir: str | Path
    max_retries: int = 3
    backoff_seconds: float = 1.0


class RemoteRelationProvider:
    """RelationProvider backed by a remote API with disk-cached responses.

    Responses are cached one file per (item, width) key; repeated calls
    within and across runs consume quota once. Rate-limit style transport
    failures are retried with exponential backoff, bounded by
    ``max_retries``; quota exhaustion is raised before any transport.
    """

    def __init__(self, config: RemoteAdapterConfig, transport: Transport = http_transport,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.transport = transport
        self.quota_used = 0
        self._sleep = sleep
        self.cache_dir = Path(config.cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _cache_path(self, kind: str, key: str, limit: int) -> Path:
        safe = urllib.parse.quote(key, safe="")
        return self.cache_dir / f"{kind}_{safe}_{limit}.json"

    def _fetch(self, kind: str, key: str, limit: int, params: dict) -> list[ItemId]:
        cache_path = self._cache_path(kind, key, limit)
        if cache_path.exists():
            payload = cache_path.read_text(encoding="utf-8")
            return self._parse(payload, limit)
        if self.quota_used >= self.config.quota:
            raise QuotaExhaustedError(
                f"quota of {self.config.quota} requests exhausted")
        last_exc = None
        for attempt in range(self.config.max_retries + 1):
            try:
                payload = self.transport(self.config.endpoint, params)
                break
            except TransportError as exc:
                last_exc = exc
                if attempt == self.config.max_retries:
                    raise
                self._sleep(self.config.backoff_seconds * (2 ** attempt))
        else:  # pragma: no cover - loop always breaks or raises
            raise last_exc
        self.quota_used += 1
        ids = self._parse(payload, limit)
        tmp = cache_path.with_suffix(".tmp")
        tmp.write_text(payload, encoding="utf-8")
        tmp.replace(cache_path)
        return ids

    @staticmethod
    def _parse(payload: str, limit: int) -> list[ItemId]:
        try:
            rec = json.loads(payload)
        except json.JSONDecodeError as exc:
            raise MalformedResponseError(f"response is not JSON: {exc.msg}") from exc
        ids = rec.get("ids") if isinstance(rec, dict) else rec
        if not isinstance(ids, list) or not all(isinstance(x, str) and x for x in ids):
            raise MalformedResponseError("response does not contain an id list")
        return ids[:limit]

    def related(self, v: ItemId, w: int) -> list[ItemId]:
        w = min(w, PROVIDER_MAX)
        params = {"kind": "related", "id": v, "max": w, "key": self.config.credential}
        return self._fetch("related", v, w, params)

    def top_popular(self, n: int) -> list[ItemId]:
        n = min(n, PROVIDER_MAX)
        params = {"kind": "popular", "max": n, "key": self.config.credential}
        return self._fetch("popular", "region", n, params)


def fetch_related_remote(provider: RemoteRelationProvider, v: ItemId, w: int) -> list[ItemId]:
    return provider.related(v, w)
