"""Record real API responses into src/fixtures/recorded.json.

The console's tests replay these against a mocked fetch, so every rendered
field is traceable to an actual server response. Re-run after changing the
API:

    python3 frontend/record_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from fastapi.testclient import TestClient

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "tests"))

import tempfile

from fixture_bench import TABLE_I_HINTS, build_financial_db, build_library_db

from hisql.appconfig import AppConfig, DatabaseEntry
from hisql.model import PipelineConfig
from hisql.server import create_app


def main() -> None:
    workdir = Path(tempfile.mkdtemp(prefix="fixture-recorder-"))
    db_path = build_financial_db(workdir / "financial.sqlite")
    library_path = build_library_db(workdir / "library.sqlite")
    hints_dir = workdir / "hints"
    hints_dir.mkdir()
    (hints_dir / "financial.json").write_text(json.dumps(TABLE_I_HINTS, indent=2))

    transcript = [
        # success scenario: three district rows
        {"match": "three districts", "response": "```sql\nSELECT district_id, A2, A16 FROM district\n```"},
        # exhausted scenario: 1 generation + 3 repairs, all broken
        {"response": "```sql\nSELECT broken FROM nowhere\n```"},
        {"response": "```sql\nSELECT broken FROM nowhere\n```"},
        {"response": "```sql\nSELECT broken FROM nowhere\n```"},
        {"response": "```sql\nSELECT broken FROM nowhere\n```"},
    ]
    config = AppConfig(
        pipeline=PipelineConfig(),
        provider={"kind": "scripted", "transcript": transcript},
        databases=(
            DatabaseEntry(db_id="financial", file_path=str(db_path)),
            DatabaseEntry(db_id="library", file_path=str(library_path)),
        ),
        failure_log=str(workdir / "failures.jsonl"),
        hints_dir=str(hints_dir),
    )
    client = TestClient(create_app(config))

    scenarios = {}

    def record(name: str, method: str, path: str, body=None):
        if method == "GET":
            response = client.get(path)
        else:
            response = client.post(path, json=body)
        scenarios[name] = {
            "method": method,
            "path": path,
            "request_body": body,
            "status": response.status_code,
            "response": response.json(),
        }

    record("databases", "GET", "/api/databases")
    record("schema", "GET", "/api/databases/financial/schema")
    record("hints", "GET", "/api/databases/financial/hints")
    record("hints_missing", "GET", "/api/databases/library/hints")
    record("schema_unknown_db", "GET", "/api/databases/ghost/schema")
    record(
        "query_success", "POST", "/api/query",
        {"db_id": "financial", "question": "show the three districts", "use_hints": True},
    )
    record(
        "query_exhausted", "POST", "/api/query",
        {"db_id": "financial", "question": "something impossible", "use_hints": True},
    )
    record("query_malformed", "POST", "/api/query", {"db_id": "financial"})

    # 409: curation already in flight for this db
    from hisql.hints import curation_guard

    with curation_guard("financial"):
        record(
            "curate_conflict", "POST", "/api/databases/financial/hints/curate",
            {"history": [{"sql": "SELECT 1"}]},
        )

    out = Path(__file__).parent / "src" / "fixtures" / "recorded.json"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(json.dumps(scenarios, indent=2, ensure_ascii=False) + "\n")
    print(f"recorded {len(scenarios)} scenarios to {out}")


if __name__ == "__main__":
    main()
