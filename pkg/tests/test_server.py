from __future__ import annotations

import json

from fastapi.testclient import TestClient

from fixture_bench import TABLE_I_HINTS, curation_entries

from hisql.appconfig import AppConfig, DatabaseEntry
from hisql.hints import curation_guard
from hisql.model import PipelineConfig
from hisql.server import create_app


def _fenced(sql: str) -> str:
    return f"```sql\n{sql}\n```"


def make_client(tmp_path, financial_path, transcript, hints_dir=None) -> TestClient:
    config = AppConfig(
        pipeline=PipelineConfig(),
        provider={"kind": "scripted", "transcript": transcript},
        databases=(DatabaseEntry(db_id="financial", file_path=str(financial_path)),),
        failure_log=str(tmp_path / "failures.jsonl"),
        hints_dir=str(hints_dir or tmp_path / "hints"),
    )
    return TestClient(create_app(config))


class TestDatabaseEndpoints:
    def test_list_databases(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, [])
        response = client.get("/api/databases")
        assert response.status_code == 200
        body = response.json()
        assert body == [{"db_id": "financial", "table_count": 5, "has_hints": False}]

    def test_has_hints_flips_when_file_present(self, tmp_path, financial_path):
        hints_dir = tmp_path / "hints"
        hints_dir.mkdir()
        (hints_dir / "financial.json").write_text(json.dumps(TABLE_I_HINTS))
        client = make_client(tmp_path, financial_path, [], hints_dir)
        assert client.get("/api/databases").json()[0]["has_hints"] is True

    def test_schema_endpoint(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, [])
        response = client.get("/api/databases/financial/schema")
        assert response.status_code == 200
        body = response.json()
        assert len(body["statements"]) == 5
        assert "CREATE TABLE account" in body["rendered"]

    def test_unknown_database_404(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, [])
        assert client.get("/api/databases/ghost/schema").status_code == 404


class TestHintEndpoints:
    def test_hints_404_before_curation(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, [])
        assert client.get("/api/databases/financial/hints").status_code == 404

    def test_hints_served_from_file(self, tmp_path, financial_path):
        hints_dir = tmp_path / "hints"
        hints_dir.mkdir()
        (hints_dir / "financial.json").write_text(json.dumps(TABLE_I_HINTS))
        client = make_client(tmp_path, financial_path, [], hints_dir)
        response = client.get("/api/databases/financial/hints")
        assert response.status_code == 200
        assert response.json() == TABLE_I_HINTS

    def test_curate_endpoint_writes_and_returns_hints(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, curation_entries())
        response = client.post(
            "/api/databases/financial/hints/curate",
            json={"history": [
                {"id": "h1", "sql": "SELECT COUNT(*) FROM account", "question": "count?"},
                {"sql": "SELECT A2 FROM district"},
            ]},
        )
        assert response.status_code == 200
        body = response.json()
        assert len(body) == 4
        assert (tmp_path / "hints" / "financial.json").is_file()
        # now retrievable
        assert client.get("/api/databases/financial/hints").status_code == 200

    def test_single_flight_conflict_409(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, curation_entries())
        with curation_guard("financial"):
            response = client.post(
                "/api/databases/financial/hints/curate",
                json={"history": [{"sql": "SELECT 1"}]},
            )
        assert response.status_code == 409

    def test_curate_empty_history_422(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, [])
        response = client.post(
            "/api/databases/financial/hints/curate", json={"history": []}
        )
        assert response.status_code == 422

    def test_curate_unknown_db_404(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, [])
        response = client.post(
            "/api/databases/ghost/hints/curate",
            json={"history": [{"sql": "SELECT 1"}]},
        )
        assert response.status_code == 404


class TestQueryEndpoint:
    def test_successful_query_returns_rows_and_delta(self, tmp_path, financial_path):
        client = make_client(
            tmp_path, financial_path,
            [{"response": _fenced("SELECT account_id, date FROM account ORDER BY account_id")}],
        )
        response = client.post(
            "/api/query", json={"db_id": "financial", "question": "list accounts"}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["outcome"] == "success"
        assert len(body["attempts"]) == 1
        assert body["attempts"][0]["outcome"] == "success"
        assert body["columns"] == ["account_id", "date"]
        assert body["rows"][0] == [1, "1995-03-24"]
        assert body["display_truncated"] is False
        assert body["ledger_delta"] == {"generation": 1}

    def test_exhausted_returns_200_with_four_attempts(self, tmp_path, financial_path):
        client = make_client(
            tmp_path, financial_path,
            [{"response": _fenced("SELECT nope FROM nothing")}] * 4,
        )
        response = client.post(
            "/api/query", json={"db_id": "financial", "question": "impossible"}
        )
        assert response.status_code == 200
        body = response.json()
        assert body["outcome"] == "exhausted"
        assert len(body["attempts"]) == 4  # 1 initial + C=3 repairs
        assert "rows" not in body
        assert body["last_error"]
        assert body["ledger_delta"] == {"generation": 1, "repair": 3}

    def test_unknown_db_404(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, [])
        response = client.post("/api/query", json={"db_id": "ghost", "question": "hi"})
        assert response.status_code == 404

    def test_malformed_body_422(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, [])
        assert client.post("/api/query", json={"db_id": "financial"}).status_code == 422
        assert client.post(
            "/api/query", json={"db_id": "financial", "question": ""}
        ).status_code == 422

    def test_provider_failure_502(self, tmp_path, financial_path):
        client = make_client(tmp_path, financial_path, [])  # empty transcript
        response = client.post(
            "/api/query", json={"db_id": "financial", "question": "anything"}
        )
        assert response.status_code == 502

    def test_display_rows_capped_at_500(self, tmp_path, financial_path):
        sql = (
            "WITH RECURSIVE c(x) AS (SELECT 1 UNION ALL SELECT x + 1 FROM c WHERE x < 600) "
            "SELECT x FROM c"
        )
        client = make_client(tmp_path, financial_path, [{"response": _fenced(sql)}])
        body = client.post(
            "/api/query", json={"db_id": "financial", "question": "many rows"}
        ).json()
        assert body["outcome"] == "success"
        assert len(body["rows"]) == 500
        assert body["display_truncated"] is True

    def test_use_hints_false_sends_baseline_prompt(self, tmp_path, financial_path):
        hints_dir = tmp_path / "hints"
        hints_dir.mkdir()
        (hints_dir / "financial.json").write_text(json.dumps(TABLE_I_HINTS))
        # the scripted matcher only accepts prompts WITHOUT the hint section
        client = make_client(
            tmp_path, financial_path,
            [{"match": "No hints available", "response": _fenced("SELECT 1")}],
            hints_dir,
        )
        response = client.post(
            "/api/query",
            json={"db_id": "financial", "question": "baseline?", "use_hints": False},
        )
        assert response.status_code == 200

    def test_use_hints_true_includes_hint_section(self, tmp_path, financial_path):
        hints_dir = tmp_path / "hints"
        hints_dir.mkdir()
        (hints_dir / "financial.json").write_text(json.dumps(TABLE_I_HINTS))
        client = make_client(
            tmp_path, financial_path,
            [{"match": "INNER JOIN trans AS T2", "response": _fenced("SELECT 1")}],
            hints_dir,
        )
        response = client.post(
            "/api/query",
            json={"db_id": "financial", "question": "hinted?", "use_hints": True},
        )
        assert response.status_code == 200

    def test_blob_cells_serialized_as_hex(self, tmp_path, financial_path):
        client = make_client(
            tmp_path, financial_path, [{"response": _fenced("SELECT x'0A' AS b")}]
        )
        body = client.post(
            "/api/query", json={"db_id": "financial", "question": "blob"}
        ).json()
        assert body["rows"] == [["0a"]]

    def test_write_statements_never_execute(self, tmp_path, financial_path):
        # a hostile model keeps emitting writes; every attempt is rejected and
        # the database file is untouched
        before = financial_path.read_bytes()
        client = make_client(
            tmp_path, financial_path,
            [{"response": _fenced("DROP TABLE account")},
             {"response": _fenced("DELETE FROM trans")},
             {"response": _fenced("UPDATE client SET gender = 'X'")},
             {"response": _fenced("INSERT INTO disp VALUES (9, 9, 9, 'OWNER')")}],
        )
        body = client.post(
            "/api/query", json={"db_id": "financial", "question": "destroy"}
        ).json()
        assert body["outcome"] == "exhausted"
        assert all(a["error_kind"] == "write_rejected" for a in body["attempts"])
        assert financial_path.read_bytes() == before
