"""Capture real service responses as JSON fixtures for the workbench tests.

Every byte the frontend test suite asserts against comes out of an actual
service drive — nothing is hand-written. Re-run after any service change:

    python3 frontend/scripts/capture_fixtures.py
"""

from __future__ import annotations

import json
import sys
import tempfile
import threading
import time
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent.parent
sys.path.insert(0, str(REPO / "tests"))

import _corpus_fixture as cf  # noqa: E402
from fastapi.testclient import TestClient  # noqa: E402

from evisynth.gateway import Gateway, MockProvider  # noqa: E402
from evisynth.service import create_app  # noqa: E402

OUT = Path(__file__).resolve().parent.parent / "test" / "fixtures"


def save(name: str, payload) -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / f"{name}.json").write_text(
        json.dumps(payload, indent=1, sort_keys=False) + "\n", encoding="utf-8"
    )
    print(f"  {name}.json")


def job(client: TestClient, pid: str, kind: str) -> dict:
    submitted = client.post(f"/projects/{pid}/jobs", json={"kind": kind}).json()
    while True:
        state = client.get(f"/jobs/{submitted['id']}").json()
        if state["status"] in ("succeeded", "failed"):
            assert state["status"] == "succeeded", state
            return state
        time.sleep(0.02)


class _BlockingProvider(MockProvider):
    """Holds the first completion until released, to capture a live running job."""

    def __init__(self):
        super().__init__()
        self.release = threading.Event()
        self.started = threading.Event()

    def complete(self, request):
        self.started.set()
        assert self.release.wait(timeout=30), "capture never released the provider"
        return super().complete(request)


def main() -> None:
    with tempfile.TemporaryDirectory() as tmp:
        app = create_app(Path(tmp) / "store", cf.corpus_gateway(), cf.build_client())
        with TestClient(app) as client:
            pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
            job(client, pid, "generate_queries")
            job(client, pid, "run_search")
            job(client, pid, "generate_criteria")
            job(client, pid, "run_screening")
            client.post(
                f"/projects/{pid}/decisions",
                json={"kind": "set_study_included", "pmid": "1006", "included": False},
            ).raise_for_status()
            client.put(
                f"/projects/{pid}/fields",
                json={"fields": [f.to_dict() for f in cf.FIELDS]},
            ).raise_for_status()
            client.put(f"/projects/{pid}/outcomes", json=cf.OUTCOME.to_dict()).raise_for_status()
            job(client, pid, "run_extraction")
            job(client, pid, "run_results")
            last_job = job(client, pid, "run_pooling")

            print("captured from project", pid)
            save("projects", client.get("/projects").json())
            save("project", client.get(f"/projects/{pid}").json())
            save("queries", client.get(f"/projects/{pid}/queries").json())
            save("studies", client.get(f"/projects/{pid}/studies").json())
            save("criteria", client.get(f"/projects/{pid}/criteria").json())
            save("matrix", client.get(f"/projects/{pid}/matrix").json())
            save("extraction", client.get(f"/projects/{pid}/extraction").json())
            save("effects", client.get(f"/projects/{pid}/effects").json())
            save("pooled", client.get(f"/projects/{pid}/pooled").json())
            save("document_1001", client.get(f"/projects/{pid}/documents/1001").json())
            save("job_succeeded", last_job)

            # masked re-rank: the response the UI must reproduce exactly
            toggle = {
                "kind": "set_aggregation",
                "strategy": {"kind": "masked", "weights": {}, "excluded": ["e3"]},
            }
            client.post(f"/projects/{pid}/decisions", json=toggle).raise_for_status()
            save("decision_set_aggregation", toggle)
            save("matrix_masked", client.get(f"/projects/{pid}/matrix").json())

            # cell correction: adjudicated table state
            correction = {
                "kind": "correct_cell",
                "pmid": "1001",
                "field": "sample_size",
                "value": "121",
            }
            client.post(f"/projects/{pid}/decisions", json=correction).raise_for_status()
            save("decision_correct_cell", correction)
            save("extraction_corrected", client.get(f"/projects/{pid}/extraction").json())
            save("project_adjudicated", client.get(f"/projects/{pid}").json())
            save("export_adjudicated", client.get(f"/projects/{pid}/export").json())

            # problem bodies, verbatim
            missing = client.get(f"/projects/{pid.replace('p', 'p9')}/matrix")
            assert missing.status_code == 404
            save("problem_project_404", missing.json())
            fresh = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
            no_artifact = client.get(f"/projects/{fresh}/matrix")
            assert no_artifact.status_code == 404
            save("problem_artifact_404", no_artifact.json())
            bad = client.post(
                f"/projects/{fresh}/jobs", json={"kind": "run_screening"}
            )
            assert bad.status_code == 409
            save("problem_illegal_stage", bad.json())

        # live queued/running job states, captured off a gated provider
        provider = _BlockingProvider()
        for template_id, slots, response in cf.script_entries():
            provider.script(template_id, slots, response)
        app2 = create_app(Path(tmp) / "store2", Gateway(provider), cf.build_client())
        with TestClient(app2) as client:
            pid2 = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
            submitted = client.post(
                f"/projects/{pid2}/jobs", json={"kind": "generate_queries"}
            ).json()
            save("job_queued", submitted)
            provider.started.wait(timeout=30)
            save("job_running", client.get(f"/jobs/{submitted['id']}").json())
            provider.release.set()
            while True:
                final = client.get(f"/jobs/{submitted['id']}").json()
                if final["status"] in ("succeeded", "failed"):
                    assert final["status"] == "succeeded", final
                    break
                time.sleep(0.02)


if __name__ == "__main__":
    main()
