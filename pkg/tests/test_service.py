import pytest
from fastapi.testclient import TestClient

from traceclips.ltlf import canonical, parse
from traceclips.querylang import compile_query, query_from_wire
from traceclips.service import create_app
from traceclips.highway import vocabulary

GENERATE = {"policy": "plain", "episodes": 3, "steps": 60, "seed": 5}

FAULTY_GENERATE = {
    "faulty": {"base": "plain", "fault": "top-lane", "trigger": "lane-2 & car-above"},
    "episodes": 10,
    "steps": 120,
    "seed": 7,
}

CHANGES_QUERY = {
    "start": {"lanes": {"select": "lane-2"}},
    "end": {},
    "constraint": {"kind": "changes", "spec": {"lanes": {"select": "lane-2"}}},
}


@pytest.fixture(scope="module")
def client(tmp_path_factory):
    app = create_app(tmp_path_factory.mktemp("datasets"))
    with TestClient(app) as c:
        yield c


@pytest.fixture(scope="module")
def dataset_id(client):
    return client.post("/api/v1/datasets:generate", json=GENERATE).json()["dataset"]


class TestPredicates:
    def test_groups_drive_dropdowns(self, client):
        body = client.get("/api/v1/predicates").json()
        assert body["domain"] == "highway"
        names = {g["name"]: g for g in body["groups"]}
        assert names["lanes"]["exclusive"] is True
        assert [p["name"] for p in names["lanes"]["predicates"]] == [
            "lane-1",
            "lane-2",
            "lane-3",
            "lane-4",
        ]
        assert names["relational"]["exclusive"] is False


class TestGenerate:
    def test_idempotent_ids(self, client):
        first = client.post("/api/v1/datasets:generate", json=GENERATE).json()
        second = client.post("/api/v1/datasets:generate", json=GENERATE).json()
        assert first["dataset"] == second["dataset"]
        assert first["content_hash"] == second["content_hash"]
        assert second["created"] is False

    def test_listed_with_hashes(self, client, dataset_id):
        listing = client.get("/api/v1/datasets").json()["datasets"]
        entry = next(e for e in listing if e["id"] == dataset_id)
        assert entry["episodes"] == 3
        assert entry["steps"] == 180
        assert entry["generator"]["policy"] == "plain"

    def test_invalid_config_rejected(self, client):
        resp = client.post(
            "/api/v1/datasets:generate",
            json={"policy": "plain", "episodes": 1, "steps": 10, "seed": 1, "road": {"lanes": 0}},
        )
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "invalid-config"

    def test_policy_or_faulty_required(self, client):
        resp = client.post(
            "/api/v1/datasets:generate", json={"episodes": 1, "steps": 10, "seed": 1}
        )
        assert resp.status_code == 400

    def test_faulty_generation(self, client):
        resp = client.post("/api/v1/datasets:generate", json=FAULTY_GENERATE)
        assert resp.status_code == 200
        assert resp.json()["episodes"] == 10


class TestQueries:
    def test_canonical_ltlf_matches_querylang_compilation(self, client, dataset_id):
        resp = client.post(
            "/api/v1/queries", json={"dataset": dataset_id, "query": CHANGES_QUERY}
        )
        assert resp.status_code == 200
        body = resp.json()
        expected = canonical(
            compile_query(query_from_wire(CHANGES_QUERY), vocabulary())
        )
        assert body["ltlf"] == expected
        # the canonical string reparses to the compiled formula
        assert canonical(parse(body["ltlf"])) == body["ltlf"]

    def test_clips_contain_frames(self, client, dataset_id):
        body = client.post(
            "/api/v1/queries",
            json={"dataset": dataset_id, "ltlf": "true", "options": {"min_len": 1}},
        ).json()
        assert body["total_found"] >= 1
        clip = body["clips"][0]
        window = clip["window"]
        assert len(clip["frames"]) == window["end"] - window["start"] + 1
        assert clip["frames"][0]["road"]["lanes"] == 4

    def test_pagination_disjoint_and_exhaustive(self, client, dataset_id):
        request = {
            "dataset": dataset_id,
            "ltlf": "true",
            "options": {"page_size": 10, "min_len": 1},
        }
        seen = []
        cursor = None
        total = None
        for _ in range(100):
            if cursor is not None:
                request["cursor"] = cursor
            body = client.post("/api/v1/queries", json=request).json()
            total = body["total_found"]
            seen.extend((c["episode"], c["start"], c["end"]) for c in body["clips"])
            cursor = body["next_cursor"]
            if not body["has_more"]:
                break
        assert total is not None and len(seen) == total
        assert len(set(seen)) == len(seen)

    def test_page_cap_enforced(self, client, dataset_id):
        resp = client.post(
            "/api/v1/queries",
            json={"dataset": dataset_id, "ltlf": "true", "options": {"page_size": 99}},
        )
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "invalid-page-size"

    def test_unknown_predicate_rejected_with_name(self, client, dataset_id):
        resp = client.post(
            "/api/v1/queries", json={"dataset": dataset_id, "ltlf": "lane-9"}
        )
        assert resp.status_code == 400
        body = resp.json()["error"]
        assert body["code"] == "unknown-predicate"
        assert body["detail"]["predicate"] == "lane-9"

    def test_parse_error_carries_offset(self, client, dataset_id):
        resp = client.post(
            "/api/v1/queries", json={"dataset": dataset_id, "ltlf": "lane-1 &"}
        )
        assert resp.status_code == 400
        body = resp.json()["error"]
        assert body["code"] == "parse-error"
        assert body["detail"]["offset"] == 8

    def test_unknown_dataset_404(self, client):
        resp = client.post("/api/v1/queries", json={"dataset": "ds-nope", "ltlf": "true"})
        assert resp.status_code == 404
        assert resp.json()["error"]["code"] == "unknown-dataset"

    def test_stale_cursor_rejected(self, client, dataset_id):
        first = client.post(
            "/api/v1/queries",
            json={
                "dataset": dataset_id,
                "ltlf": "true",
                "options": {"page_size": 1, "min_len": 1},
            },
        ).json()
        assert first["next_cursor"] is not None
        resp = client.post(
            "/api/v1/queries",
            json={"dataset": dataset_id, "ltlf": "behind", "cursor": first["next_cursor"]},
        )
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "invalid-cursor"

    def test_seeded_shuffle_is_reproducible(self, client, dataset_id):
        request = {
            "dataset": dataset_id,
            "ltlf": "true",
            "options": {"min_len": 1, "shuffle_seed": 3, "page_size": 5},
        }
        a = client.post("/api/v1/queries", json=request).json()
        b = client.post("/api/v1/queries", json=request).json()
        assert a["clips"] == b["clips"]

    def test_changes_query_end_to_end(self, client):
        dataset = client.post(
            "/api/v1/datasets:generate", json=FAULTY_GENERATE
        ).json()["dataset"]
        body = client.post(
            "/api/v1/queries",
            json={"dataset": dataset, "query": CHANGES_QUERY},
        ).json()
        assert body["total_found"] >= 1
        # every clip leaves lane 2 somewhere after the match start
        for clip in body["clips"]:
            window_start = clip["window"]["start"]
            lanes = [
                frame["cars"][0]["lane"]
                for i, frame in enumerate(clip["frames"])
                if window_start + i > clip["start"]
            ]
            assert any(lane != 2 for lane in lanes)


class TestClips:
    def test_replay_window(self, client, dataset_id):
        body = client.get(f"/api/v1/clips/{dataset_id}/ep-0001/5/9").json()
        assert body["start"] == 5 and body["end"] == 9
        assert len(body["frames"]) == 5
        assert body["frames"][0]["step"] == 5

    def test_out_of_range_404(self, client, dataset_id):
        resp = client.get(f"/api/v1/clips/{dataset_id}/ep-0001/50/99")
        assert resp.status_code == 404
        assert resp.json()["error"]["code"] == "out-of-range"

    def test_unknown_episode_404(self, client, dataset_id):
        resp = client.get(f"/api/v1/clips/{dataset_id}/ep-9999/1/2")
        assert resp.status_code == 404


class TestCompileEndpoint:
    def test_atom_reports_three_states(self, client):
        body = client.post("/api/v1/ltlf:compile", json={"formula": "lane-1"}).json()
        assert body["states_before_minimization"] == 3
        assert body["states"] == 3
        assert body["canonical"] == "lane-1"
        assert body["support"] == ["lane-1"]

    def test_parse_error(self, client):
        resp = client.post("/api/v1/ltlf:compile", json={"formula": "(("})
        assert resp.status_code == 400
        assert resp.json()["error"]["code"] == "parse-error"
