"""HTTP service: lifecycle, stage rules, jobs, decisions, staleness,
event-log replay, and restart persistence — all over the shared corpus."""

from __future__ import annotations

import threading
import time

import pytest
from fastapi.testclient import TestClient

import _corpus_fixture as cf
from evisynth.gateway import Gateway, MockProvider
from evisynth.service import create_app, verify_replay


def wait_for(client: TestClient, job_id: str, timeout: float = 15.0) -> dict:
    deadline = time.monotonic() + timeout
    while time.monotonic() < deadline:
        job = client.get(f"/jobs/{job_id}").json()
        if job["status"] in ("succeeded", "failed"):
            return job
        time.sleep(0.01)
    raise TimeoutError(f"job {job_id} never finished")


def submit_and_wait(client: TestClient, pid: str, kind: str, params: dict | None = None) -> dict:
    resp = client.post(f"/projects/{pid}/jobs", json={"kind": kind, "params": params or {}})
    assert resp.status_code == 202, resp.json()
    job = wait_for(client, resp.json()["id"])
    assert job["status"] == "succeeded", job
    return job


def drive_full_project(client: TestClient) -> str:
    """Create a project and run it to stage=done, excluding the
    single-arm study before extraction."""
    pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
    submit_and_wait(client, pid, "generate_queries")
    submit_and_wait(client, pid, "run_search")
    submit_and_wait(client, pid, "generate_criteria")
    submit_and_wait(client, pid, "run_screening")
    client.post(
        f"/projects/{pid}/decisions",
        json={"kind": "set_study_included", "pmid": "1006", "included": False},
    )
    client.put(f"/projects/{pid}/fields", json={"fields": [f.to_dict() for f in cf.FIELDS]})
    client.put(f"/projects/{pid}/outcomes", json=cf.OUTCOME.to_dict())
    submit_and_wait(client, pid, "run_extraction")
    submit_and_wait(client, pid, "run_results")
    submit_and_wait(client, pid, "run_pooling")
    return pid


@pytest.fixture()
def app(tmp_path):
    application = create_app(tmp_path / "store", cf.corpus_gateway(), cf.build_client())
    with TestClient(application) as client:
        yield application, client


@pytest.fixture(scope="module")
def done_project(tmp_path_factory):
    """One completed project, shared by the read-only assertions."""
    root = tmp_path_factory.mktemp("svc") / "store"
    application = create_app(root, cf.corpus_gateway(), cf.build_client())
    with TestClient(application) as client:
        pid = drive_full_project(client)
        yield application, client, pid, root


class TestProjectCreation:
    def test_create_returns_id_at_stage_search(self, app):
        _, client = app
        resp = client.post("/projects", json={"pico": cf.PICO.to_dict()})
        assert resp.status_code == 201
        assert resp.json() == {"id": "p0001", "stage": "search"}

    def test_two_creations_get_distinct_ids(self, app):
        _, client = app
        first = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
        second = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
        assert first != second

    def test_invalid_pico_is_422_problem(self, app):
        _, client = app
        bad = dict(cf.PICO.to_dict(), population="")
        resp = client.post("/projects", json={"pico": bad})
        assert resp.status_code == 422
        problem = resp.json()
        assert set(problem) == {"code", "message", "detail"}
        assert problem["code"] == "pico_invalid"

    def test_missing_pico_field_is_422(self, app):
        _, client = app
        assert client.post("/projects", json={}).status_code == 422

    def test_unknown_project_is_404_problem(self, app):
        _, client = app
        resp = client.get("/projects/p9999")
        assert resp.status_code == 404
        assert resp.json()["code"] == "not_found"

    def test_artifact_before_any_job_is_404(self, app):
        _, client = app
        pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
        resp = client.get(f"/projects/{pid}/queries")
        assert resp.status_code == 404
        assert resp.json()["code"] == "artifact_missing"


class TestStageRules:
    def test_screening_job_before_criteria_is_illegal(self, app):
        _, client = app
        pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
        submit_and_wait(client, pid, "generate_queries")
        submit_and_wait(client, pid, "run_search")
        resp = client.post(f"/projects/{pid}/jobs", json={"kind": "run_screening"})
        assert resp.status_code == 409
        problem = resp.json()
        assert problem["code"] == "illegal_stage"
        assert "criteria" in problem["message"]

    def test_job_kind_from_a_later_stage_is_illegal(self, app):
        _, client = app
        pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
        resp = client.post(f"/projects/{pid}/jobs", json={"kind": "run_pooling"})
        assert resp.status_code == 409
        assert resp.json()["code"] == "illegal_stage"

    def test_job_kind_from_an_earlier_stage_is_illegal_after_advancing(self, app):
        _, client = app
        pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
        submit_and_wait(client, pid, "generate_queries")
        submit_and_wait(client, pid, "run_search")  # now at screening
        resp = client.post(f"/projects/{pid}/jobs", json={"kind": "run_search"})
        assert resp.status_code == 409

    def test_unknown_job_kind_is_422(self, app):
        _, client = app
        pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
        resp = client.post(f"/projects/{pid}/jobs", json={"kind": "run_everything"})
        assert resp.status_code == 422

    def test_unknown_job_id_is_404(self, app):
        _, client = app
        assert client.get("/jobs/j9999").status_code == 404


class _BlockingProvider(MockProvider):
    """Scripted provider that holds its first completion until released."""

    def __init__(self):
        super().__init__()
        self.release = threading.Event()
        self.started = threading.Event()

    def complete(self, request):
        self.started.set()
        assert self.release.wait(timeout=15), "test never released the provider"
        return super().complete(request)


class TestProjectBusy:
    def test_second_submit_while_running_is_busy(self, tmp_path):
        provider = _BlockingProvider()
        for template_id, slots, response in cf.script_entries():
            provider.script(template_id, slots, response)
        application = create_app(tmp_path / "store", Gateway(provider), cf.build_client())
        with TestClient(application) as client:
            pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
            first = client.post(f"/projects/{pid}/jobs", json={"kind": "generate_queries"})
            assert first.status_code == 202
            assert provider.started.wait(timeout=15)
            second = client.post(f"/projects/{pid}/jobs", json={"kind": "generate_queries"})
            assert second.status_code == 409
            problem = second.json()
            assert problem["code"] == "project_busy"
            assert first.json()["id"] in problem["message"]
            provider.release.set()
            assert wait_for(client, first.json()["id"])["status"] == "succeeded"
            # no longer busy: a fresh submit is accepted
            third = client.post(f"/projects/{pid}/jobs", json={"kind": "generate_queries"})
            assert third.status_code == 202
            wait_for(client, third.json()["id"])

    def test_failed_job_reports_problem_and_frees_project(self, tmp_path):
        # unscripted gateway: the first completion raises inside the worker
        application = create_app(
            tmp_path / "store", Gateway(MockProvider()), cf.build_client()
        )
        with TestClient(application) as client:
            pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
            resp = client.post(f"/projects/{pid}/jobs", json={"kind": "generate_queries"})
            job = wait_for(client, resp.json()["id"])
            assert job["status"] == "failed"
            assert job["error"]["code"]
            assert "initial_queries" in job["error"]["message"]
            state = client.get(f"/projects/{pid}").json()
            assert state["busy"] is False
            assert state["stage"] == "search"  # nothing advanced
            assert state["artifacts"] == {}  # nothing written


class TestLifecycle:
    def test_stage_walk(self, done_project):
        _, client, pid, _ = done_project
        state = client.get(f"/projects/{pid}").json()
        assert state["stage"] == "done"
        assert set(state["artifacts"]) == {
            "queries", "studies", "criteria", "screening",
            "fields", "outcome", "extraction", "results", "synthesis",
        }
        assert state["excluded_pmids"] == ["1006"]

    def test_studies_endpoint(self, done_project):
        _, client, pid, _ = done_project
        body = client.get(f"/projects/{pid}/studies").json()
        assert body["content"]["pmids"] == list(cf.RETRIEVED_PMIDS)
        assert body["excluded_pmids"] == ["1006"]
        assert body["version"] == 1

    def test_matrix_endpoint_ranks_like_the_library(self, done_project):
        _, client, pid, _ = done_project
        body = client.get(f"/projects/{pid}/matrix").json()
        entries = body["content"]["ranking"]["entries"]
        assert [e["pmid"] for e in entries] == list(cf.EXPECTED_RANK_ORDER)
        # the exclusion decision marked the ranking stale, deliberately unrecomputed
        assert body["stale"] is True

    def test_extraction_excludes_the_excluded_study(self, done_project):
        _, client, pid, _ = done_project
        rows = client.get(f"/projects/{pid}/extraction").json()["content"]["rows"]
        assert [r["pmid"] for r in rows] == list(cf.POOLED_PMIDS)

    def test_effects_endpoint(self, done_project):
        _, client, pid, _ = done_project
        body = client.get(f"/projects/{pid}/effects").json()
        rows = body["content"]["rows"]
        assert [r["pmid"] for r in rows] == list(cf.POOLED_PMIDS)
        assert all(r["status"] == "ok" for r in rows)

    def test_pooled_and_forest(self, done_project):
        _, client, pid, _ = done_project
        pooled = client.get(f"/projects/{pid}/pooled").json()
        assert pooled["content"]["pooled"]["k"] == 5
        assert pooled["content"]["corrected_pmids"] == ["1003"]
        assert "forest_svg" not in pooled["content"]
        svg = client.get(f"/projects/{pid}/forest.svg")
        assert svg.status_code == 200
        assert svg.headers["content-type"].startswith("image/svg+xml")
        assert 'id="pooled-diamond"' in svg.text

    def test_export_bundles_everything(self, done_project):
        _, client, pid, _ = done_project
        export = client.get(f"/projects/{pid}/export").json()
        assert set(export) == {"project", "artifacts", "events"}
        assert set(export["artifacts"]) == set(export["project"]["artifacts"])
        seqs = [e["seq"] for e in export["events"]]
        assert seqs == sorted(seqs)
        kinds = {e["kind"] for e in export["events"]}
        assert "artifact_written" in kinds and "stage_advanced" in kinds

    def test_no_dangling_references_in_export(self, done_project):
        _, client, pid, _ = done_project
        export = client.get(f"/projects/{pid}/export").json()
        artifacts = export["artifacts"]
        pmids = set(artifacts["studies"]["pmids"])
        criterion_ids = {c["id"] for c in artifacts["criteria"]["criteria"]}
        matrix = artifacts["screening"]["matrix"]
        assert set(matrix["study_ids"]) <= pmids
        assert set(matrix["criterion_ids"]) <= criterion_ids
        for row in artifacts["extraction"]["rows"]:
            doc = cf.document_for(row["pmid"])
            chunk_ids = {c.id for c in doc.chunks}
            for cell in row["cells"]:
                assert set(cell["chunk_refs"]) <= chunk_ids, (row["pmid"], cell)
        for estimate in artifacts["synthesis"]["estimates"]:
            assert estimate["pmid"] in pmids

    def test_thin_adapter_pooled_matches_library(self, done_project):
        _, client, pid, _ = done_project
        from evisynth import pipeline as pl

        service_pooled = client.get(f"/projects/{pid}/pooled").json()["content"]
        gateway, fixture_client = cf.corpus_gateway(), cf.build_client()
        qa = pl.generate_queries_stage(cf.PICO, gateway, fixture_client)
        sa = pl.run_search_stage(qa, fixture_client)
        included = [s for s in sa.studies if s.pmid != "1006"]
        ra = pl.run_results_stage(included, cf.OUTCOME, gateway, client=fixture_client)
        syn = pl.run_pooling_stage(ra.effect_rows())
        library_pooled = {k: v for k, v in syn.to_dict().items() if k != "forest_svg"}
        assert service_pooled == library_pooled


class TestDecisions:
    def test_exclude_unknown_study_is_unknown_target(self, done_project):
        _, client, pid, _ = done_project
        resp = client.post(
            f"/projects/{pid}/decisions",
            json={"kind": "set_study_included", "pmid": "4242", "included": False},
        )
        assert resp.status_code == 422
        assert resp.json()["code"] == "unknown_target"

    def test_edit_unknown_criterion_is_unknown_target(self, done_project):
        _, client, pid, _ = done_project
        resp = client.post(
            f"/projects/{pid}/decisions",
            json={"kind": "edit_criterion", "criterion_id": "e99", "text": "anything"},
        )
        assert resp.status_code == 422

    def test_correct_unknown_cell_is_unknown_target(self, done_project):
        _, client, pid, _ = done_project
        resp = client.post(
            f"/projects/{pid}/decisions",
            json={"kind": "correct_cell", "pmid": "1001", "field": "no_such_field", "value": "7"},
        )
        assert resp.status_code == 422

    def test_unknown_decision_kind_is_422(self, done_project):
        _, client, pid, _ = done_project
        resp = client.post(f"/projects/{pid}/decisions", json={"kind": "launch_rockets"})
        assert resp.status_code == 422
        assert resp.json()["code"] == "validation_error"

    def test_decision_against_missing_artifact_is_unknown_target(self, app):
        _, client = app
        pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
        resp = client.post(
            f"/projects/{pid}/decisions",
            json={"kind": "set_study_included", "pmid": "1001", "included": False},
        )
        assert resp.status_code == 422
        assert resp.json()["code"] == "unknown_target"

    def test_correct_cell_bumps_version_and_marks_results_stale(self, tmp_path):
        application = create_app(tmp_path / "store", cf.corpus_gateway(), cf.build_client())
        with TestClient(application) as client:
            pid = drive_full_project(client)
            before = client.get(f"/projects/{pid}/extraction").json()
            resp = client.post(
                f"/projects/{pid}/decisions",
                json={"kind": "correct_cell", "pmid": "1001", "field": "sample_size", "value": "121"},
            )
            assert resp.status_code == 201
            after = client.get(f"/projects/{pid}/extraction").json()
            assert after["version"] == before["version"] + 1
            cells = {c["field"]: c for c in next(
                r for r in after["content"]["rows"] if r["pmid"] == "1001"
            )["cells"]}
            assert cells["sample_size"]["value"]["number"] == 121.0
            assert "reviewer correction (was '120')" == cells["sample_size"]["rationale"]
            state = client.get(f"/projects/{pid}").json()
            assert state["artifacts"]["results"]["stale"] is True
            assert state["artifacts"]["extraction"]["stale"] is False

    def test_set_aggregation_reranks_immediately(self, tmp_path):
        application = create_app(tmp_path / "store", cf.corpus_gateway(), cf.build_client())
        with TestClient(application) as client:
            pid = drive_full_project(client)
            resp = client.post(
                f"/projects/{pid}/decisions",
                json={"kind": "set_aggregation", "strategy": {"kind": "masked", "excluded": ["e3"]}},
            )
            assert resp.status_code == 201
            body = client.get(f"/projects/{pid}/matrix").json()
            assert body["version"] == 2
            scores = {e["pmid"]: e["score"] for e in body["content"]["ranking"]["entries"]}
            assert scores["1006"] == 2  # design criterion no longer counts against it
            assert body["content"]["strategy"]["kind"] == "masked"

    def test_set_aggregation_with_unknown_criterion_is_unknown_target(self, done_project):
        _, client, pid, _ = done_project
        resp = client.post(
            f"/projects/{pid}/decisions",
            json={"kind": "set_aggregation", "strategy": {"kind": "masked", "excluded": ["e77"]}},
        )
        assert resp.status_code == 422
        assert resp.json()["code"] == "unknown_target"

    def test_put_criteria_replaces_and_marks_matrix_stale(self, tmp_path):
        application = create_app(tmp_path / "store", cf.corpus_gateway(), cf.build_client())
        with TestClient(application) as client:
            pid = drive_full_project(client)
            new_criteria = cf.criteria_set().to_dict()
            new_criteria["criteria"][0]["text"] = "Enrolls adults with cutaneous melanoma"
            resp = client.put(f"/projects/{pid}/criteria", json=new_criteria)
            assert resp.status_code == 200
            assert resp.json()["version"] == 2
            state = client.get(f"/projects/{pid}").json()
            assert state["artifacts"]["screening"]["stale"] is True

    def test_put_queries_with_garbage_is_422(self, done_project):
        _, client, pid, _ = done_project
        resp = client.put(f"/projects/{pid}/queries", json={"nonsense": True})
        assert resp.status_code == 422

    def test_reset_forward_is_illegal(self, done_project):
        _, client, pid, _ = done_project
        resp = client.post(
            f"/projects/{pid}/decisions", json={"kind": "reset_to_stage", "stage": "done"}
        )
        assert resp.status_code == 409

    def test_reset_backward_reopens_the_stage(self, tmp_path):
        application = create_app(tmp_path / "store", cf.corpus_gateway(), cf.build_client())
        with TestClient(application) as client:
            pid = drive_full_project(client)
            resp = client.post(
                f"/projects/{pid}/decisions",
                json={"kind": "reset_to_stage", "stage": "screening"},
            )
            assert resp.status_code == 201
            assert client.get(f"/projects/{pid}").json()["stage"] == "screening"
            job = submit_and_wait(client, pid, "run_screening")
            assert job["artifact"] == {"name": "screening", "version": 2}
            # re-running refreshed the artifact: stale flag cleared
            assert client.get(f"/projects/{pid}/matrix").json()["stale"] is False


class TestReplayAndPersistence:
    def test_decision_log_replays_exactly(self, tmp_path):
        application = create_app(tmp_path / "store", cf.corpus_gateway(), cf.build_client())
        with TestClient(application) as client:
            pid = drive_full_project(client)
            client.post(
                f"/projects/{pid}/decisions",
                json={"kind": "correct_cell", "pmid": "1002", "field": "sample_size", "value": "83"},
            )
            client.post(
                f"/projects/{pid}/decisions",
                json={"kind": "edit_criterion", "criterion_id": "e4",
                      "text": "Reports objective tumor response"},
            )
            client.post(
                f"/projects/{pid}/decisions",
                json={"kind": "set_aggregation", "strategy": {"kind": "masked", "excluded": ["e1"]}},
            )
        assert verify_replay(application.state.store, pid) == []

    def test_restarted_service_sees_identical_state(self, tmp_path):
        root = tmp_path / "store"
        application = create_app(root, cf.corpus_gateway(), cf.build_client())
        with TestClient(application) as client:
            pid = drive_full_project(client)
            before = client.get(f"/projects/{pid}").json()
            export_before = client.get(f"/projects/{pid}/export").json()
        reopened = create_app(root, cf.corpus_gateway(), cf.build_client())
        with TestClient(reopened) as client:
            after = client.get(f"/projects/{pid}").json()
            export_after = client.get(f"/projects/{pid}/export").json()
            assert after == before
            assert export_after == export_before
            # and id numbering continues rather than colliding
            fresh = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
            assert fresh != pid


class TestBearerToken:
    def test_gate_rejects_and_accepts(self, tmp_path):
        application = create_app(
            tmp_path / "store", cf.corpus_gateway(), cf.build_client(), token="s3cret"
        )
        with TestClient(application) as client:
            bare = client.get("/projects")
            assert bare.status_code == 401
            assert bare.json()["code"] == "unauthorized"
            ok = client.get("/projects", headers={"Authorization": "Bearer s3cret"})
            assert ok.status_code == 200
            assert ok.json() == {"projects": []}


class TestDocuments:
    def test_chunks_cover_every_cited_ref(self, done_project):
        _, client, pid, _ = done_project
        extraction = client.get(f"/projects/{pid}/extraction").json()["content"]
        for row in extraction["rows"]:
            doc = client.get(f"/projects/{pid}/documents/{row['pmid']}")
            assert doc.status_code == 200
            body = doc.json()
            assert body["pmid"] == row["pmid"]
            chunk_ids = [c["id"] for c in body["chunks"]]
            assert chunk_ids == sorted(set(chunk_ids))  # sequential, unique
            assert all(c["text"].strip() for c in body["chunks"])
            cited = {ref for cell in row["cells"] for ref in cell["chunk_refs"]}
            assert cited <= set(chunk_ids)

    def test_unknown_pmid_404(self, done_project):
        _, client, pid, _ = done_project
        got = client.get(f"/projects/{pid}/documents/424242")
        assert got.status_code == 404
        assert got.json()["code"] == "not_found"
        assert "424242" in got.json()["message"]

    def test_before_studies_exist_404(self, app):
        _, client = app
        pid = client.post("/projects", json={"pico": cf.PICO.to_dict()}).json()["id"]
        got = client.get(f"/projects/{pid}/documents/1001")
        assert got.status_code == 404
        assert got.json()["code"] == "artifact_missing"
