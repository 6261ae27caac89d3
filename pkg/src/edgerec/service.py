"""HTTP service for human viewing-session experiments.

Participants pick a region, start from one of 20 trending items, then watch
and rate a short series of items, each chosen from a 5-slot recommendation
list assembled cache-aware against the region's cache. The service stores
both the shown list and the baseline list that was not shown, so the effect
of reordering can be audited offline. Cached flags are never exposed to the
client; they exist only in the event log and the export.

State is rebuilt from an append-only JSONL event log, so a restart loses
nothing and the log doubles as the raw dataset.
"""

from __future__ import annotations

import json
import secrets
import threading
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Header, HTTPException, Query
from fastapi.responses import PlainTextResponse
from pydantic import BaseModel

from .catalog import CacheSet, ItemId, RelationProvider, RemoteError, generate_synthetic
from .demand import SessionStep, SessionTrace, flag_against_cache
from .explore import BfsSchedule, DepthPlan, RecommendationList, recommend

REQUIRED_RATINGS = ("relevance", "interest")
OPTIONAL_RATINGS = ("stream_quality", "overall")


@dataclass(frozen=True)
class ExperimentConfig:
    """Deployment knobs; defaults mirror a 7-region edge trial.

    Per region: a 500-id cache over the most popular items, 5-slot lists,
    5 items watched per session, and a two-level exploration plan (50 wide,
    first 10 expanded another 50 wide, so at most 550 candidates).
    """

    regions: tuple[str, ...] = tuple(f"region-{i}" for i in range(1, 8))
    catalog_size: int = 1000
    zipf_alpha: float = 1.0
    avg_degree: float = 10.0
    cache_capacity: int = 500
    trending_pool: int = 50
    initial_size: int = 20
    n_slots: int = 5
    watch_count: int = 5
    plan_widths: tuple[int, ...] = (50, 50)
    plan_expand: tuple[int, ...] = (10, -1)
    seed: int = 0
    admin_key: str | None = None
    log_path: str | None = None

    def schedule(self) -> BfsSchedule:
        return BfsSchedule(tuple(
            DepthPlan(w, None if e < 0 else e)
            for w, e in zip(self.plan_widths, self.plan_expand)
        ))

    def __post_init__(self):
        if not self.regions:
            raise ValueError("at least one region required")
        if self.initial_size > self.trending_pool:
            raise ValueError("initial_size cannot exceed trending_pool")
        if self.watch_count < 2 or self.n_slots < 1:
            raise ValueError("watch_count must be >= 2 and n_slots >= 1")


@dataclass
class LiveSession:
    token: str
    region: str
    index: int
    pool: tuple[ItemId, ...]
    step: int = 1
    videos: list[ItemId] = field(default_factory=list)
    served: dict[int, RecommendationList] = field(default_factory=dict)
    baseline: dict[int, RecommendationList] = field(default_factory=dict)
    degraded: set[int] = field(default_factory=set)
    positions: dict[int, int] = field(default_factory=dict)
    ratings: dict[int, dict] = field(default_factory=dict)
    completed: bool = False
    created_at: str = ""
    last_body: dict | None = None
    last_ack: dict | None = None


def _validate_ratings(ratings: dict) -> dict:
    problems = []
    for key in REQUIRED_RATINGS:
        if key not in ratings:
            problems.append(f"missing rating {key!r}")
    for key, val in ratings.items():
        if key not in REQUIRED_RATINGS + OPTIONAL_RATINGS:
            problems.append(f"unknown rating {key!r}")
        elif not isinstance(val, int) or not (1 <= val <= 5):
            problems.append(f"rating {key!r} must be an integer in 1..5")
    if problems:
        raise HTTPException(status_code=422, detail="; ".join(problems))
    return dict(ratings)


class ExperimentState:
    """All mutable service state plus its event log."""

    def __init__(self, config: ExperimentConfig,
                 providers: dict[str, RelationProvider] | None = None,
                 caches: dict[str, CacheSet] | None = None):
        self.config = config
        self.lock = threading.Lock()
        self.sessions: dict[str, LiveSession] = {}
        self.session_count = 0
        if providers is None:
            providers = {
                region: generate_synthetic(
                    config.catalog_size, config.zipf_alpha, config.avg_degree,
                    rng_seed=hash((config.seed, i)) % (2**31),
                    region_tag=region,
                )
                for i, region in enumerate(config.regions)
            }
        missing = set(config.regions) - set(providers)
        if missing:
            raise ValueError(f"no provider for regions: {sorted(missing)}")
        self.providers = providers
        if caches is None:
            caches = {
                region: CacheSet.top_popular(providers[region], config.cache_capacity)
                for region in config.regions
            }
        self.caches = caches
        self._log_fh = None
        if config.log_path:
            path = Path(config.log_path)
            if path.exists():
                self._replay(path)
            path.parent.mkdir(parents=True, exist_ok=True)
            self._log_fh = path.open("a", encoding="utf-8")

    def _append(self, event: dict) -> None:
        if self._log_fh is not None:
            self._log_fh.write(json.dumps(event) + "\n")
            self._log_fh.flush()

    def _replay(self, path: Path) -> None:
        with path.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if line:
                    self._apply(json.loads(line))

    def _apply(self, ev: dict) -> None:
        kind = ev["event"]
        if kind == "created":
            s = LiveSession(
                token=ev["token"], region=ev["region"], index=ev["index"],
                pool=tuple(ev["pool"]), created_at=ev.get("at", ""),
            )
            self.sessions[s.token] = s
            self.session_count = max(self.session_count, s.index + 1)
        elif kind == "served":
            s = self.sessions[ev["token"]]
            step = ev["step"]
            if step == 1 and not s.videos:
                s.videos.append(ev["current"])
            s.served[step] = RecommendationList(tuple(ev["items"]), tuple(ev["flags"]))
            s.baseline[step] = RecommendationList(tuple(ev["baseline"]), tuple(ev["baseline_flags"]))
            if ev.get("degraded"):
                s.degraded.add(step)
        elif kind == "recorded":
            s = self.sessions[ev["token"]]
            step = ev["step"]
            s.ratings[step] = ev["ratings"]
            if ev.get("position") is not None:
                s.positions[step] = ev["position"]
                s.videos.append(ev["selected"])
                s.step = step + 1
            if ev.get("done"):
                s.completed = True
            s.last_body = ev.get("body")
            s.last_ack = ev.get("ack")

    # -- operations ---------------------------------------------------------

    def create_session(self, region: str) -> dict:
        if region not in self.config.regions:
            raise HTTPException(status_code=404, detail=f"unknown region {region!r}")
        with self.lock:
            index = self.session_count
            self.session_count += 1
            rng = np.random.default_rng([self.config.seed, index])
            top = self.providers[region].top_popular(self.config.trending_pool)
            take = min(self.config.initial_size, len(top))
            picks = rng.choice(len(top), size=take, replace=False)
            pool = tuple(top[i] for i in picks)
            token = secrets.token_hex(16)
            now = datetime.now(timezone.utc).isoformat()
            s = LiveSession(token=token, region=region, index=index, pool=pool,
                            created_at=now)
            self.sessions[token] = s
            self._append({"event": "created", "token": token, "region": region,
                          "index": index, "pool": list(pool), "at": now})
        return {"token": token, "region": region, "initial": list(pool),
                "step": 1, "watch_count": self.config.watch_count}

    def _session(self, token: str) -> LiveSession:
        s = self.sessions.get(token)
        if s is None:
            raise HTTPException(status_code=404, detail="unknown session token")
        return s

    def get_recommendations(self, token: str, current: ItemId) -> dict:
        cfg = self.config
        with self.lock:
            s = self._session(token)
            if s.completed or s.step >= cfg.watch_count:
                raise HTTPException(status_code=409, detail="session finished watching")
            if s.step == 1:
                if not s.videos:
                    if current not in s.pool:
                        raise HTTPException(
                            status_code=409,
                            detail="first item must come from the initial list")
                    s.videos.append(current)
                elif s.videos[0] != current:
                    raise HTTPException(status_code=409,
                                        detail="first item already chosen")
            elif current != s.videos[s.step - 1]:
                raise HTTPException(status_code=409,
                                    detail="current item does not match this session's step")
            if s.step in s.served:
                rl = s.served[s.step]
                return {"items": list(rl.ids), "step": s.step,
                        "degraded": s.step in s.degraded}
            provider = self.providers[s.region]
            cache = self.caches[s.region]
            degraded = False
            try:
                rl = recommend(provider, current, cfg.n_slots, cache, cfg.schedule())
            except RemoteError:
                try:
                    ids = provider.related(current, cfg.n_slots)
                except RemoteError as exc:
                    raise HTTPException(status_code=503,
                                        detail="recommendation backend unavailable") from exc
                rl = flag_against_cache(ids, cache)
                degraded = True
            try:
                base = flag_against_cache(provider.related(current, cfg.n_slots), cache)
            except RemoteError:
                base = RecommendationList((), ())
            s.served[s.step] = rl
            s.baseline[s.step] = base
            if degraded:
                s.degraded.add(s.step)
            self._append({
                "event": "served", "token": token, "step": s.step, "current": current,
                "items": list(rl.ids), "flags": list(rl.cached),
                "baseline": list(base.ids), "baseline_flags": list(base.cached),
                "degraded": degraded,
            })
            return {"items": list(rl.ids), "step": s.step, "degraded": degraded}

    def record_step(self, token: str, position: int | None, ratings: dict) -> dict:
        cfg = self.config
        body = {"position": position, "ratings": dict(ratings)}
        with self.lock:
            s = self._session(token)
            if body == s.last_body and (
                s.completed or s.step not in s.served or s.step == cfg.watch_count
            ):
                # replayed submission: acknowledge again, record nothing
                if s.last_ack is not None:
                    return dict(s.last_ack)
            if s.completed:
                raise HTTPException(status_code=409, detail="session already complete")
            clean = _validate_ratings(ratings)
            step = s.step
            if step < cfg.watch_count:
                rl = s.served.get(step)
                if rl is None:
                    raise HTTPException(
                        status_code=409,
                        detail="no recommendations served for this step yet")
                if position is None:
                    raise HTTPException(status_code=422,
                                        detail="position required before the last step")
                if not (1 <= position <= len(rl.ids)):
                    raise HTTPException(status_code=422,
                                        detail=f"position must be in 1..{len(rl.ids)}")
                selected = rl.ids[position - 1]
                s.videos.append(selected)
                s.positions[step] = position
                s.ratings[step] = clean
                s.step = step + 1
                ack = {"step": s.step, "done": False, "selected": selected}
                done = False
            else:
                if position is not None:
                    raise HTTPException(status_code=422,
                                        detail="position not allowed on the final step")
                s.ratings[step] = clean
                s.completed = True
                selected = None
                ack = {"step": step, "done": True, "selected": None}
                done = True
            s.last_body = body
            s.last_ack = ack
            self._append({
                "event": "recorded", "token": token, "step": step,
                "position": position, "ratings": clean, "selected": selected,
                "done": done, "body": body, "ack": ack,
            })
            return dict(ack)

    def export_traces(self, include_partial: bool = False) -> list[str]:
        lines = []
        with self.lock:
            ordered = sorted(self.sessions.values(), key=lambda s: s.index)
            for s in ordered:
                if not s.completed and not include_partial:
                    continue
                if not s.videos:
                    continue
                steps = []
                for step in sorted(s.positions):
                    rl = s.served[step]
                    pos = s.positions[step]
                    steps.append(SessionStep(
                        presented=rl.ids,
                        presented_cached=rl.cached,
                        position=pos,
                        selected=rl.ids[pos - 1],
                        cached=rl.cached[pos - 1],
                        ratings=s.ratings.get(step),
                        degraded=step in s.degraded,
                    ))
                trace = SessionTrace(
                    session_id=s.token,
                    initial=s.videos[0],
                    steps=tuple(steps),
                    seed=s.index,
                    truncated=not s.completed,
                    created_at=s.created_at or None,
                    final_ratings=s.ratings.get(self.config.watch_count),
                )
                body = json.loads(trace.to_json_line())
                body["region"] = s.region
                lines.append(json.dumps(body))
        return lines

    def close(self) -> None:
        if self._log_fh is not None:
            self._log_fh.close()
            self._log_fh = None


class CreateSessionBody(BaseModel):
    region: str


class StepBody(BaseModel):
    position: int | None = None
    ratings: dict[str, int]


def build_app(config: ExperimentConfig | None = None,
              providers: dict[str, RelationProvider] | None = None,
              caches: dict[str, CacheSet] | None = None) -> FastAPI:
    config = config or ExperimentConfig()
    state = ExperimentState(config, providers=providers, caches=caches)
    app = FastAPI(title="edge recommendation experiment")
    app.state.exp = state

    @app.get("/regions")
    def regions():
        return {"regions": list(config.regions)}

    @app.post("/sessions", status_code=201)
    def create_session(body: CreateSessionBody):
        return state.create_session(body.region)

    @app.get("/sessions/{token}/recommendations")
    def get_recommendations(token: str, current: str = Query(...)):
        return state.get_recommendations(token, current)

    @app.post("/sessions/{token}/steps")
    def record_step(token: str, body: StepBody):
        return state.record_step(token, body.position, body.ratings)

    @app.get("/export", response_class=PlainTextResponse)
    def export(all: bool = False, x_admin_key: str | None = Header(default=None)):
        if config.admin_key is None:
            raise HTTPException(status_code=403, detail="export disabled: no admin key configured")
        if x_admin_key != config.admin_key:
            raise HTTPException(status_code=401, detail="bad admin key")
        lines = state.export_traces(include_partial=all)
        return "\n".join(lines) + ("\n" if lines else "")

    return app


def main() -> int:
    """Run the service with defaults; fixture/demo entry point."""
    import argparse

    import uvicorn

    ap = argparse.ArgumentParser(description="experiment service")
    ap.add_argument("--host", default="127.0.0.1")
    ap.add_argument("--port", type=int, default=8000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--admin-key", default=None)
    ap.add_argument("--log", default=None)
    ap.add_argument("--catalog-size", type=int, default=1000)
    args = ap.parse_args()
    cfg = ExperimentConfig(seed=args.seed, admin_key=args.admin_key,
                           log_path=args.log, catalog_size=args.catalog_size)
    uvicorn.run(build_app(cfg), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
