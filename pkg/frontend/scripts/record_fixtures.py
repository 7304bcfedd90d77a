"""Record /v1 response fixtures for the dashboard contract tests.

Runs the real service in-process against a scratch state directory and
snapshots the JSON bodies the UI consumes. Rerun after any API change:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import pathlib
import sys
import tempfile

from fastapi.testclient import TestClient

from dualdose.service import create_app

OUT = pathlib.Path(__file__).resolve().parent.parent / "test" / "fixtures"

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


def save(name: str, doc) -> None:
    path = OUT / f"{name}.json"
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")
    print(f"wrote {path.relative_to(OUT.parent.parent)}")


def submit(client, trial_id, pending, dlts, key):
    outcomes = [
        {"dose": item["dose"], "dlt": bool(flag)}
        for item, flag in zip(pending, dlts, strict=True)
    ]
    return client.post(
        f"/v1/trials/{trial_id}/cohorts",
        json={"outcomes": outcomes},
        headers={"Idempotency-Key": key},
    )


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as scratch:
        client = TestClient(create_app(state_dir=pathlib.Path(scratch)))

        # main trial: create, one safe cohort, snapshots at v0 and v1
        resp = client.post(
            "/v1/trials", json={"config": CONFIG, "prior": PRIOR, "seed": 11}
        )
        assert resp.status_code == 201, resp.text
        created = resp.json()
        tid = created["trial_id"]
        save("created", created)
        save("status_v0", client.get(f"/v1/trials/{tid}").json())
        save("posterior_v0", client.get(f"/v1/trials/{tid}/posterior").json())
        save("recommendation_v0", client.get(f"/v1/trials/{tid}/recommendation").json())

        pending = created["allocations"]
        what_if = client.post(
            f"/v1/trials/{tid}/what-if",
            json={"outcomes": [{"dose": a["dose"], "dlt": False} for a in pending]},
        )
        assert what_if.status_code == 200, what_if.text
        save("whatif_v1", what_if.json())

        resp = submit(client, tid, pending, [False, False], "fix-cohort-1")
        assert resp.status_code == 200, resp.text
        transition = resp.json()
        save("transition_v1", transition)
        save("status_v1", client.get(f"/v1/trials/{tid}").json())
        save("events_v1", client.get(f"/v1/trials/{tid}/events").json())

        # conflict body: outcomes for a dose that has no pending allocation
        conflict = client.post(
            f"/v1/trials/{tid}/cohorts",
            json={"outcomes": [{"dose": [2, 2], "dlt": False}, {"dose": [2, 2], "dlt": True}]},
            headers={"Idempotency-Key": "fix-conflict"},
        )
        assert conflict.status_code == 409, conflict.text
        save("conflict_409", conflict.json())

        # toxic trial: DLT on every patient until the design stops
        resp = client.post(
            "/v1/trials",
            json={
                "config": {**CONFIG, "theta": 0.2, "epsilon": 0.5},
                "prior": PRIOR,
                "seed": 29,
            },
        )
        assert resp.status_code == 201, resp.text
        toxic = resp.json()
        pending = toxic["allocations"]
        doc = None
        for round_no in range(10):
            resp = submit(
                client, toxic["trial_id"], pending, [True] * len(pending), f"tox-{round_no}"
            )
            assert resp.status_code == 200, resp.text
            doc = resp.json()
            if doc["status"] != "running":
                break
            pending = doc["next_allocations"]
        assert doc is not None and doc["status"] == "stopped_for_toxicity", doc
        save("transition_toxic", doc)
        save(
            "recommendation_toxic",
            client.get(f"/v1/trials/{toxic['trial_id']}/recommendation").json(),
        )

        # completed trial; this seed and DLT mix ends with a nonempty
        # recommendation, which the panel tests need
        resp = client.post(
            "/v1/trials", json={"config": CONFIG, "prior": PRIOR, "seed": 43}
        )
        assert resp.status_code == 201, resp.text
        done = resp.json()
        pending = done["allocations"]
        plan = [(False, False), (False, True), (False, True), (True, False)]
        doc = None
        for round_no in range(10):
            dlts = plan[round_no] if round_no < len(plan) else (False, False)
            resp = submit(client, done["trial_id"], pending, dlts, f"done-{round_no}")
            assert resp.status_code == 200, resp.text
            doc = resp.json()
            if doc["status"] != "running":
                break
            pending = doc["next_allocations"]
        assert doc is not None and doc["status"] == "completed", doc
        save("transition_completed", doc)
        rec = client.get(f"/v1/trials/{done['trial_id']}/recommendation").json()
        assert rec["recommended"], rec
        save("recommendation_completed", rec)
    return 0


if __name__ == "__main__":
    sys.exit(main())
