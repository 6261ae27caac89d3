import json

import pytest
from fastapi.testclient import TestClient

from edgerec.catalog import CacheSet, RemoteError, generate_synthetic
from edgerec.demand import SessionTrace
from edgerec.metrics import chr_sequential
from edgerec.service import ExperimentConfig, build_app

RATINGS = {"relevance": 4, "interest": 3}


def small_config(**kw):
    base = dict(
        regions=("alpha", "beta"),
        catalog_size=200,
        avg_degree=8.0,
        cache_capacity=40,
        seed=11,
        admin_key="sekrit",
    )
    base.update(kw)
    return ExperimentConfig(**base)


@pytest.fixture(scope="module")
def client():
    with TestClient(build_app(small_config())) as c:
        yield c


def create(client, region="alpha"):
    r = client.post("/sessions", json={"region": region})
    assert r.status_code == 201
    return r.json()


def walk(client, token, initial, clicks, ratings=RATINGS):
    """Scripted session: click through `clicks`, then submit final ratings."""
    current = initial[0]
    positions, served = [], []
    for want in clicks:
        rec = client.get(f"/sessions/{token}/recommendations",
                         params={"current": current})
        assert rec.status_code == 200
        items = rec.json()["items"]
        pos = min(want, len(items))
        ack = client.post(f"/sessions/{token}/steps",
                          json={"position": pos, "ratings": ratings})
        assert ack.status_code == 200
        positions.append(pos)
        served.append(items)
        current = ack.json()["selected"]
        assert current == items[pos - 1]
    final = client.post(f"/sessions/{token}/steps", json={"ratings": ratings})
    assert final.status_code == 200
    return positions, served, final.json()


def test_regions_listed(client):
    assert client.get("/regions").json() == {"regions": ["alpha", "beta"]}


def test_create_session_shape(client):
    doc = create(client)
    assert doc["step"] == 1 and doc["watch_count"] == 5
    ids = doc["initial"]
    assert len(ids) == 20 and len(set(ids)) == 20
    # drawn from the trending pool only
    g = generate_synthetic(200, 1.0, 8.0, rng_seed=hash((11, 0)) % (2**31),
                           region_tag="alpha")
    assert set(ids) <= set(g.top_popular(50))


def test_unknown_region_404(client):
    assert client.post("/sessions", json={"region": "nowhere"}).status_code == 404


def test_unknown_token_404(client):
    r = client.get("/sessions/deadbeef/recommendations", params={"current": "x"})
    assert r.status_code == 404


def test_initial_draw_deterministic():
    pools = []
    for _ in range(2):
        with TestClient(build_app(small_config())) as c:
            pools.append(create(c)["initial"])
    assert pools[0] == pools[1]


def test_full_flow_and_replayed_submission(client):
    doc = create(client)
    token, initial = doc["token"], doc["initial"]
    positions, served, final = walk(client, token, initial, [2, 3, 4, 5])
    assert final == {"step": 5, "done": True, "selected": None}
    assert len(served) == 4 and all(len(s) == 5 for s in served)

    # identical final submission replays the same ack without error
    again = client.post(f"/sessions/{token}/steps", json={"ratings": RATINGS})
    assert again.status_code == 200 and again.json() == final
    # a *different* body after completion is a conflict
    other = client.post(f"/sessions/{token}/steps",
                        json={"ratings": {"relevance": 1, "interest": 1}})
    assert other.status_code == 409

    # finished sessions get no further recommendations
    r = client.get(f"/sessions/{token}/recommendations",
                   params={"current": initial[0]})
    assert r.status_code == 409


def test_responses_never_reveal_cache_flags(client):
    doc = create(client)
    token = doc["token"]
    rec = client.get(f"/sessions/{token}/recommendations",
                     params={"current": doc["initial"][0]})
    assert set(rec.json().keys()) == {"items", "step", "degraded"}
    ack = client.post(f"/sessions/{token}/steps",
                      json={"position": 1, "ratings": RATINGS})
    assert set(ack.json().keys()) == {"step", "done", "selected"}


def test_first_item_must_come_from_initial(client):
    doc = create(client)
    r = client.get(f"/sessions/{doc['token']}/recommendations",
                   params={"current": "not-in-pool"})
    assert r.status_code == 409


def test_repeat_get_is_idempotent(client):
    doc = create(client)
    token, current = doc["token"], doc["initial"][0]
    a = client.get(f"/sessions/{token}/recommendations", params={"current": current})
    b = client.get(f"/sessions/{token}/recommendations", params={"current": current})
    assert a.json() == b.json()
    # but a different first item is rejected once one is locked in
    r = client.get(f"/sessions/{token}/recommendations",
                   params={"current": doc["initial"][1]})
    assert r.status_code == 409


def test_step_submission_validation(client):
    doc = create(client)
    token = doc["token"]
    # nothing served yet
    assert client.post(f"/sessions/{token}/steps",
                       json={"position": 1, "ratings": RATINGS}).status_code == 409
    client.get(f"/sessions/{token}/recommendations",
               params={"current": doc["initial"][0]})
    bad = [
        {"ratings": RATINGS},                                        # no position
        {"position": 0, "ratings": RATINGS},                         # out of range
        {"position": 99, "ratings": RATINGS},
        {"position": 1, "ratings": {"relevance": 4}},                # missing required
        {"position": 1, "ratings": {"relevance": 9, "interest": 1}},  # out of scale
        {"position": 1, "ratings": {**RATINGS, "mood": 3}},          # unknown key
    ]
    for body in bad:
        assert client.post(f"/sessions/{token}/steps", json=body).status_code == 422
    ok = client.post(f"/sessions/{token}/steps", json={
        "position": 1,
        "ratings": {**RATINGS, "stream_quality": 5, "overall": 4},
    })
    assert ok.status_code == 200


def test_final_step_forbids_position(client):
    doc = create(client)
    token, initial = doc["token"], doc["initial"]
    current = initial[0]
    for pos in (1, 2, 1, 2):
        client.get(f"/sessions/{token}/recommendations",
                   params={"current": current})
        ack = client.post(f"/sessions/{token}/steps",
                          json={"position": pos, "ratings": RATINGS}).json()
        current = ack["selected"]
    # body differs from the step-4 submission, so this is no replay
    r = client.post(f"/sessions/{token}/steps",
                    json={"position": 3, "ratings": RATINGS})
    assert r.status_code == 422


def test_export_auth_paths(client):
    assert client.get("/export").status_code == 401
    assert client.get("/export", headers={"X-Admin-Key": "wrong"}).status_code == 401
    assert client.get("/export", headers={"X-Admin-Key": "sekrit"}).status_code == 200


def test_export_disabled_without_admin_key():
    with TestClient(build_app(small_config(admin_key=None))) as c:
        assert c.get("/export").status_code == 403


def test_export_traces_round_trip():
    with TestClient(build_app(small_config())) as c:
        doc = create(c)
        positions, served, _ = walk(c, doc["token"], doc["initial"], [2, 3, 1, 2])
        # a second, abandoned session
        doc2 = create(c)
        c.get(f"/sessions/{doc2['token']}/recommendations",
              params={"current": doc2["initial"][0]})
        c.post(f"/sessions/{doc2['token']}/steps",
               json={"position": 1, "ratings": RATINGS})

        done_only = c.get("/export", headers={"X-Admin-Key": "sekrit"}).text
        lines = [ln for ln in done_only.splitlines() if ln]
        assert len(lines) == 1
        trace = SessionTrace.from_json_line(lines[0])
        assert len(trace.steps) == 4
        assert [s.position for s in trace.steps] == positions
        assert [s.selected for s in trace.steps] == [
            srv[p - 1] for srv, p in zip(served, positions)]
        assert all(s.ratings == RATINGS for s in trace.steps)
        assert trace.final_ratings == RATINGS
        assert not trace.truncated
        assert json.loads(lines[0])["region"] == "alpha"

        # hand-count hit rate agreement on the exported trace
        rep = chr_sequential([trace], k=5)
        hits = sum(s.cached for s in trace.steps)
        assert rep.aggregate == pytest.approx(hits / 4)

        both = c.get("/export", params={"all": "true"},
                     headers={"X-Admin-Key": "sekrit"}).text
        lines = [ln for ln in both.splitlines() if ln]
        assert len(lines) == 2
        partial = SessionTrace.from_json_line(lines[1])
        assert partial.truncated and len(partial.steps) == 1


class FlakyProvider:
    """Wide expansions fail; narrow baseline lookups still work."""

    def __init__(self, graph, fail_above=5):
        self.graph = graph
        self.fail_above = fail_above

    def related(self, v, w):
        if w > self.fail_above:
            raise RemoteError("related-list backend timed out")
        return self.graph.related(v, w)

    def top_popular(self, n):
        return self.graph.top_popular(n)


def test_degraded_fallback_serves_baseline():
    cfg = small_config(regions=("alpha",))
    g = generate_synthetic(200, 1.0, 8.0, rng_seed=4)
    providers = {"alpha": FlakyProvider(g)}
    caches = {"alpha": CacheSet.top_popular(g, 40)}
    with TestClient(build_app(cfg, providers, caches)) as c:
        doc = create(c)
        rec = c.get(f"/sessions/{doc['token']}/recommendations",
                    params={"current": doc["initial"][0]})
        assert rec.status_code == 200
        body = rec.json()
        assert body["degraded"] is True
        assert body["items"] == list(g.related(doc["initial"][0], 5))
        c.post(f"/sessions/{doc['token']}/steps",
               json={"position": 1, "ratings": RATINGS})
        walk_rest(c, doc["token"], body["items"][0])

        out = c.get("/export", params={"all": "true"},
                    headers={"X-Admin-Key": "sekrit"}).text
        trace = SessionTrace.from_json_line(out.splitlines()[0])
        assert all(s.degraded for s in trace.steps)
        # degraded steps carry no cache evidence, so the estimator skips them
        rep = chr_sequential([trace], k=5)
        assert rep.observed_steps == 0 and rep.hits == 0


def walk_rest(client, token, current):
    while True:
        rec = client.get(f"/sessions/{token}/recommendations",
                         params={"current": current})
        if rec.status_code != 200:
            final = client.post(f"/sessions/{token}/steps", json={"ratings": RATINGS})
            assert final.status_code == 200 and final.json()["done"]
            return
        ack = client.post(f"/sessions/{token}/steps",
                          json={"position": 1, "ratings": RATINGS})
        current = ack.json()["selected"]


def test_totally_dead_backend_is_503():
    cfg = small_config(regions=("alpha",))
    g = generate_synthetic(200, 1.0, 8.0, rng_seed=4)
    providers = {"alpha": FlakyProvider(g, fail_above=0)}
    caches = {"alpha": CacheSet.top_popular(g, 40)}
    with TestClient(build_app(cfg, providers, caches)) as c:
        doc = create(c)
        rec = c.get(f"/sessions/{doc['token']}/recommendations",
                    params={"current": doc["initial"][0]})
        assert rec.status_code == 503


def test_log_replay_resumes_sessions(tmp_path):
    log = tmp_path / "events.jsonl"
    cfg = small_config(log_path=str(log))
    with TestClient(build_app(cfg)) as c:
        doc = create(c)
        token, initial = doc["token"], doc["initial"]
        current = initial[0]
        first_served = []
        for _ in range(2):
            rec = c.get(f"/sessions/{token}/recommendations",
                        params={"current": current}).json()
            first_served.append(rec["items"])
            ack = c.post(f"/sessions/{token}/steps",
                         json={"position": 2, "ratings": RATINGS}).json()
            current = ack["selected"]

    # new process stand-in: fresh app, same log
    with TestClient(build_app(small_config(log_path=str(log)))) as c2:
        # replayed session continues where it stopped (step 3)
        rec = c2.get(f"/sessions/{token}/recommendations",
                     params={"current": current})
        assert rec.status_code == 200
        assert rec.json()["step"] == 3
        # earlier steps re-serve the logged lists unchanged
        r1 = c2.get(f"/sessions/{token}/recommendations",
                    params={"current": initial[0]})
        assert r1.status_code == 409  # step moved on; first item fixed
        ack = c2.post(f"/sessions/{token}/steps",
                      json={"position": 1, "ratings": RATINGS})
        assert ack.status_code == 200 and ack.json()["step"] == 4
