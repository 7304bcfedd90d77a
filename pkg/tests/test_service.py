"""HTTP service tests: persistence, idempotency, previews, and replay."""

import json

import pytest
from fastapi.testclient import TestClient

from dualdose.service import create_app

PRIOR = {"n_rows": 2, "n_cols": 2, "alpha": [1.0] * 4, "beta": [1.0] * 4}
CONFIG = {
    "theta": 0.3,
    "n_max": 8,
    "gamma": 0.1,
    "epsilon": 0.8,
    "first_cohort_size": 2,
    "second_cohort_size": 2,
    "later_cohort_size": 2,
    "gibbs": {"n_keep": 200, "n_burn": 40},
}


def make_client(tmp_path, name="state", **kwargs):
    return TestClient(create_app(state_dir=tmp_path / name, **kwargs))


def create_body(seed=11, **overrides):
    body = {"config": dict(CONFIG), "prior": PRIOR, "seed": seed}
    body.update(overrides)
    return body


def submit_safe(client, trial_id, pending, key=None, dlt=False):
    outcomes = [{"dose": item["dose"], "dlt": dlt} for item in pending]
    headers = {"Idempotency-Key": key} if key else {}
    return client.post(
        f"/v1/trials/{trial_id}/cohorts", json={"outcomes": outcomes}, headers=headers
    )


def log_lines(tmp_path, name="state"):
    paths = sorted((tmp_path / name).glob("*.ndjson"))
    assert len(paths) == 1
    return paths[0].read_text().splitlines()


def test_create_trial_allocates_first_cohort(tmp_path):
    client = make_client(tmp_path)
    resp = client.post("/v1/trials", json=create_body())
    assert resp.status_code == 201
    doc = resp.json()
    assert doc["status"] == "running"
    assert doc["state_version"] == 0
    assert doc["cohort"] == 1
    assert [a["dose"] for a in doc["allocations"]] == [[1, 1], [1, 1]]
    assert [a["patient"] for a in doc["allocations"]] == [1, 2]

    status = client.get(f"/v1/trials/{doc['trial_id']}").json()
    assert status["enrolled"] == 0
    assert status["n_allocated"] == 2
    assert status["pending"] == doc["allocations"]
    assert status["n"] == [[0, 0], [0, 0]]


def test_create_requires_config_or_preset(tmp_path):
    client = make_client(tmp_path)
    assert client.post("/v1/trials", json={"config": dict(CONFIG)}).status_code == 400
    body = create_body(preset="study1")
    assert client.post("/v1/trials", json=body).status_code == 400


def test_create_preset_study1(tmp_path):
    client = make_client(tmp_path)
    resp = client.post("/v1/trials", json={"preset": "study1", "seed": 3})
    assert resp.status_code == 201
    doc = resp.json()
    assert doc["dims"] == {"n_rows": 4, "n_cols": 4}
    assert len(doc["allocations"]) == 4


def test_create_idempotency(tmp_path):
    client = make_client(tmp_path)
    body = create_body(idempotency_key="abc")
    first = client.post("/v1/trials", json=body)
    again = client.post("/v1/trials", json=body)
    assert first.status_code == 201
    assert again.status_code == 200
    assert again.json() == first.json()
    assert len(log_lines(tmp_path)) == 3  # created + 2 allocation events

    other = create_body(seed=99, idempotency_key="abc")
    assert client.post("/v1/trials", json=other).status_code == 409

    fresh = client.post("/v1/trials", json=create_body(seed=99, idempotency_key="def"))
    assert fresh.status_code == 201
    assert fresh.json()["trial_id"] != first.json()["trial_id"]


def test_unknown_trial_is_404(tmp_path):
    client = make_client(tmp_path)
    for method, path in [
        ("get", "/v1/trials/nope"),
        ("get", "/v1/trials/nope/posterior"),
        ("get", "/v1/trials/nope/recommendation"),
        ("get", "/v1/trials/nope/events"),
        ("post", "/v1/trials/nope/cohorts"),
        ("post", "/v1/trials/nope/what-if"),
    ]:
        call = getattr(client, method)
        resp = call(path, json={"outcomes": []}) if method == "post" else call(path)
        assert resp.status_code == 404, path


def test_posterior_before_data_uses_prior_chain(tmp_path):
    client = make_client(tmp_path)
    trial_id = client.post("/v1/trials", json=create_body()).json()["trial_id"]
    before = len(log_lines(tmp_path))

    first = client.get(f"/v1/trials/{trial_id}/posterior")
    second = client.get(f"/v1/trials/{trial_id}/posterior")
    assert first.status_code == 200
    doc = first.json()
    assert doc["omega"] is None
    assert doc["state_version"] == 0
    assert doc["n"] == [[0, 0], [0, 0]]
    # lattice order holds for every summary grid
    med = doc["medians"]
    assert med[0][0] < med[0][1] < med[1][1]
    assert med[0][0] < med[1][0] < med[1][1]
    assert 0.0 <= doc["tail_probability_lowest"] <= 1.0
    assert all(v > 0.0 for row in doc["variances"] for v in row)
    assert second.json() == doc
    # read endpoints never touch the log
    assert len(log_lines(tmp_path)) == before


def test_recommendation_before_data_is_empty(tmp_path):
    client = make_client(tmp_path)
    trial_id = client.post("/v1/trials", json=create_body()).json()["trial_id"]
    doc = client.get(f"/v1/trials/{trial_id}/recommendation").json()
    assert doc["recommended"] == []
    assert doc["diagnostics"]["path"] == "none"
    assert doc["status"] == "running"


def test_submission_advances_and_persists(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body()).json()
    trial_id = created["trial_id"]

    resp = submit_safe(client, trial_id, created["allocations"])
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["state_version"] == 1
    assert doc["status"] == "running"
    assert doc["stopped"] is False
    assert doc["hypothetical"] is False
    assert doc["progress"] == "complete"
    assert doc["recommendation"] is None
    assert doc["posterior"]["omega"] is not None and doc["posterior"]["omega"] >= 1.0
    assert doc["posterior"]["n"] == [[2, 0], [0, 0]]
    # second cohort: one dose up each axis from the minimum
    doses = sorted(a["dose"] for a in doc["next_allocations"])
    assert doses == [[1, 2], [2, 1]]

    kinds = [json.loads(line)["kind"] for line in log_lines(tmp_path)]
    assert kinds[0] == "created"
    assert "submission" in kinds
    status = client.get(f"/v1/trials/{trial_id}").json()
    assert status["state_version"] == 1
    assert status["enrolled"] == 2
    assert client.get(f"/v1/trials/{trial_id}/posterior").json() == doc["posterior"]


def test_submission_idempotency(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body()).json()
    trial_id = created["trial_id"]

    first = submit_safe(client, trial_id, created["allocations"], key="sub-1")
    lines = len(log_lines(tmp_path))
    again = submit_safe(client, trial_id, created["allocations"], key="sub-1")
    assert again.status_code == 200
    assert again.json() == first.json()
    assert client.get(f"/v1/trials/{trial_id}").json()["state_version"] == 1
    assert len(log_lines(tmp_path)) == lines

    conflict = submit_safe(client, trial_id, created["allocations"], key="sub-1", dlt=True)
    assert conflict.status_code == 409


def test_submission_mismatch_is_409(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body()).json()
    trial_id = created["trial_id"]

    short = client.post(
        f"/v1/trials/{trial_id}/cohorts",
        json={"outcomes": [{"dose": [1, 1], "dlt": False}]},
    )
    assert short.status_code == 409
    assert short.json()["detail"]["expected"] == created["allocations"]

    wrong = client.post(
        f"/v1/trials/{trial_id}/cohorts",
        json={
            "outcomes": [
                {"dose": [2, 2], "dlt": False},
                {"dose": [1, 1], "dlt": False},
            ]
        },
    )
    assert wrong.status_code == 409

    outside = client.post(
        f"/v1/trials/{trial_id}/cohorts",
        json={
            "outcomes": [
                {"dose": [9, 9], "dlt": False},
                {"dose": [1, 1], "dlt": False},
            ]
        },
    )
    assert outside.status_code == 409
    # nothing was persisted or applied
    assert client.get(f"/v1/trials/{trial_id}").json()["state_version"] == 0


def run_to_completion(client, trial_id, pending):
    doc = None
    while pending is not None:
        resp = submit_safe(client, trial_id, pending)
        assert resp.status_code == 200
        doc = resp.json()
        pending = doc["next_allocations"]
    return doc


def test_completion_recommends_and_gates_further_submissions(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body()).json()
    trial_id = created["trial_id"]
    final = run_to_completion(client, trial_id, created["allocations"])

    assert final["status"] == "completed"
    assert final["recommendation"] is not None
    assert final["recommendation"]["diagnostics"]["path"] in {"multi", "single", "none"}
    status = client.get(f"/v1/trials/{trial_id}").json()
    assert status["enrolled"] == CONFIG["n_max"]

    rec = client.get(f"/v1/trials/{trial_id}/recommendation").json()
    assert rec == final["recommendation"]

    dead = client.post(
        f"/v1/trials/{trial_id}/cohorts",
        json={"outcomes": [{"dose": [1, 1], "dlt": False}]},
    )
    assert dead.status_code == 410
    preview = client.post(f"/v1/trials/{trial_id}/what-if", json={"outcomes": []})
    assert preview.status_code == 410


def test_toxic_start_stops_early(tmp_path):
    client = make_client(tmp_path)
    body = create_body(seed=5)
    body["config"]["epsilon"] = 0.5
    body["config"]["theta"] = 0.2
    created = client.post("/v1/trials", json=body).json()
    doc = submit_safe(client, created["trial_id"], created["allocations"], dlt=True).json()
    assert doc["status"] == "stopped_for_toxicity"
    assert doc["stopped"] is True
    assert doc["next_allocations"] is None
    assert doc["recommendation"]["recommended"] == []


def test_what_if_matches_real_submission(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body()).json()
    trial_id = created["trial_id"]
    outcomes = [{"dose": item["dose"], "dlt": item["patient"] == 1} for item in created["allocations"]]

    preview1 = client.post(f"/v1/trials/{trial_id}/what-if", json={"outcomes": outcomes})
    preview2 = client.post(f"/v1/trials/{trial_id}/what-if", json={"outcomes": outcomes})
    assert preview1.status_code == 200
    assert preview1.json() == preview2.json()
    assert preview1.json()["hypothetical"] is True
    # the preview left no trace
    assert client.get(f"/v1/trials/{trial_id}").json()["state_version"] == 0

    real = client.post(f"/v1/trials/{trial_id}/cohorts", json={"outcomes": outcomes})
    expected = dict(preview1.json())
    expected["hypothetical"] = False
    assert real.json() == expected


def test_what_if_empty_returns_current_posterior(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body()).json()
    trial_id = created["trial_id"]
    before = len(log_lines(tmp_path))
    preview = client.post(f"/v1/trials/{trial_id}/what-if", json={"outcomes": []})
    assert preview.status_code == 200
    doc = preview.json()
    assert doc["hypothetical"] is True
    assert doc["posterior"] == client.get(f"/v1/trials/{trial_id}/posterior").json()
    assert len(log_lines(tmp_path)) == before


def test_reads_do_not_touch_the_log(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body()).json()
    trial_id = created["trial_id"]
    submit_safe(client, trial_id, created["allocations"])
    before = log_lines(tmp_path)

    client.get(f"/v1/trials/{trial_id}")
    client.get(f"/v1/trials/{trial_id}/posterior")
    client.get(f"/v1/trials/{trial_id}/recommendation")
    client.get(f"/v1/trials/{trial_id}/events")
    client.post(f"/v1/trials/{trial_id}/what-if", json={"outcomes": []})
    assert log_lines(tmp_path) == before


def test_events_endpoint_reports_engine_stream(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body()).json()
    trial_id = created["trial_id"]
    doc = submit_safe(client, trial_id, created["allocations"]).json()
    doc = submit_safe(client, trial_id, doc["next_allocations"]).json()

    events = client.get(f"/v1/trials/{trial_id}/events").json()
    assert events["count"] == len(events["events"])
    assert [e["seq"] for e in events["events"]] == list(range(events["count"]))
    kinds = [e["kind"] for e in events["events"]]
    assert kinds[:2] == ["allocation", "allocation"]
    assert "stop_check" in kinds
    # cohort 3 allocations carry the direction audit
    cohort3 = [e for e in events["events"] if e["kind"] == "allocation" and e["cohort"] == 3]
    assert cohort3 and all(
        e["payload"]["direction"] in {"horizontal", "vertical"}
        and 0.0 <= e["payload"]["draw"] < 1.0
        for e in cohort3
    )


def snapshot(client, trial_id):
    return {
        "status": client.get(f"/v1/trials/{trial_id}").json(),
        "posterior": client.get(f"/v1/trials/{trial_id}/posterior").json(),
        "recommendation": client.get(f"/v1/trials/{trial_id}/recommendation").json(),
        "events": client.get(f"/v1/trials/{trial_id}/events").json(),
    }


def test_replay_reproduces_state_at_every_boundary(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body(seed=21)).json()
    trial_id = created["trial_id"]

    snapshots = [snapshot(client, trial_id)]
    boundaries = [len(log_lines(tmp_path))]
    pending = created["allocations"]
    toggle = False
    while pending is not None:
        doc = submit_safe(client, trial_id, pending, dlt=toggle).json()
        toggle = not toggle
        pending = doc["next_allocations"]
        snapshots.append(snapshot(client, trial_id))
        boundaries.append(len(log_lines(tmp_path)))

    full_log = log_lines(tmp_path)
    for idx, (upto, expected) in enumerate(zip(boundaries, snapshots)):
        replay_dir = tmp_path / f"replay-{idx}" / "state"
        replay_dir.mkdir(parents=True)
        (replay_dir / f"{trial_id}.ndjson").write_text(
            "\n".join(full_log[:upto]) + "\n"
        )
        replayed = TestClient(create_app(state_dir=replay_dir))
        assert snapshot(replayed, trial_id) == expected, f"boundary {idx}"


def test_replay_tolerates_partial_trailing_line(tmp_path):
    client = make_client(tmp_path)
    created = client.post("/v1/trials", json=create_body()).json()
    trial_id = created["trial_id"]
    submit_safe(client, trial_id, created["allocations"])
    expected = snapshot(client, trial_id)

    state_dir = tmp_path / "state"
    path = next(iter(state_dir.glob("*.ndjson")))
    with open(path, "a", encoding="utf-8") as fh:
        fh.write('{"kind": "submission", "version": 2, "outcom')

    replayed = TestClient(create_app(state_dir=state_dir))
    assert snapshot(replayed, trial_id) == expected


def test_bearer_token_guard(tmp_path):
    client = make_client(tmp_path, token="s3cret")
    assert client.post("/v1/trials", json=create_body()).status_code == 401
    wrong = client.post(
        "/v1/trials", json=create_body(), headers={"Authorization": "Bearer nope"}
    )
    assert wrong.status_code == 401
    ok = client.post(
        "/v1/trials", json=create_body(), headers={"Authorization": "Bearer s3cret"}
    )
    assert ok.status_code == 201


def test_static_mount_and_default_index(tmp_path):
    ui = tmp_path / "ui"
    ui.mkdir()
    (ui / "index.html").write_text("<html><body>conduct</body></html>")
    with_ui = make_client(tmp_path, name="state-ui", static_dir=ui)
    resp = with_ui.get("/")
    assert resp.status_code == 200
    assert "conduct" in resp.text

    bare = make_client(tmp_path, name="state-bare")
    assert bare.get("/").json()["api"] == "/v1"
