"""HTTP service exposing the pipeline to the browser console and scripts.

All endpoints are thin wrappers over the library modules; per-request
isolation comes from per-call database connections, and hint curation
keeps its single-flight-per-database rule (409 on conflict).
"""

from __future__ import annotations

from pathlib import Path
from typing import Any

from fastapi import FastAPI, HTTPException
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel, Field

from .appconfig import AppConfig
from .dbruntime import extract_ddl, table_count
from .hints import (
    CurationError,
    CurationInProgress,
    HistoryEntry,
    curate_hints,
    load_hint_set,
    save_hint_set,
)
from .llm import ProviderError, provider_from_config
from .model import (
    CallLedger,
    DatabaseProfile,
    HintSet,
    NLQuery,
    Success,
    hint_records,
)
from .pipeline import FailureLog, answer


DISPLAY_ROW_CAP = 500


class HistoryEntryBody(BaseModel):
    id: str | None = None
    sql: str
    question: str | None = None


class CurateBody(BaseModel):
    history: list[HistoryEntryBody] = Field(min_length=1)


class QueryBody(BaseModel):
    db_id: str
    question: str = Field(min_length=1)
    use_hints: bool = True


def _json_cell(value: Any) -> Any:
    if isinstance(value, bytes):
        return value.hex()
    if isinstance(value, float) and value != value:  # NaN is not valid JSON
        return "nan"
    return value


def create_app(config: AppConfig) -> FastAPI:
    app = FastAPI(title="hisql", version="0.1.0")
    registry = {entry.db_id: entry for entry in config.databases}
    provider = provider_from_config(config.provider) if config.provider else None
    ledger = CallLedger()
    failure_log = FailureLog(config.failure_log)

    def _entry(db_id: str):
        entry = registry.get(db_id)
        if entry is None:
            raise HTTPException(status_code=404, detail=f"unknown database: {db_id!r}")
        return entry

    def _profile(db_id: str) -> DatabaseProfile:
        entry = _entry(db_id)
        return DatabaseProfile(db_id=entry.db_id, file_path=entry.file_path)

    def _provider():
        if provider is None:
            raise HTTPException(status_code=502, detail="no provider configured")
        return provider

    def _hints(db_id: str) -> HintSet:
        path = config.hints_path_for(db_id)
        if path.is_file():
            return load_hint_set(path, db_id)
        return HintSet.empty(db_id)

    @app.get("/api/databases")
    def list_databases() -> list[dict[str, Any]]:
        return [
            {
                "db_id": entry.db_id,
                "table_count": table_count(entry.file_path),
                "has_hints": config.hints_path_for(entry.db_id).is_file(),
            }
            for entry in registry.values()
        ]

    @app.get("/api/databases/{db_id}/schema")
    def get_schema(db_id: str) -> dict[str, Any]:
        return extract_ddl(_profile(db_id)).to_dict()

    @app.get("/api/databases/{db_id}/hints")
    def get_hints(db_id: str) -> list[dict[str, str]]:
        _entry(db_id)
        path = config.hints_path_for(db_id)
        if not path.is_file():
            raise HTTPException(status_code=404, detail=f"no hints for {db_id!r}")
        return hint_records(load_hint_set(path, db_id))

    @app.post("/api/databases/{db_id}/hints/curate")
    def curate(db_id: str, body: CurateBody) -> list[dict[str, str]]:
        db = _profile(db_id)
        history = [
            HistoryEntry(
                id=entry.id or f"h{i:04d}", sql=entry.sql, question=entry.question
            )
            for i, entry in enumerate(body.history)
        ]
        try:
            hint_set = curate_hints(
                db, history, _provider(), config.pipeline, ledger, config.template_dir
            )
        except CurationInProgress as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except CurationError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        except ProviderError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        save_hint_set(hint_set, config.hints_path_for(db_id))
        return hint_records(hint_set)

    @app.post("/api/query")
    def query(body: QueryBody) -> dict[str, Any]:
        db = _profile(body.db_id)
        hints = _hints(body.db_id) if body.use_hints else HintSet.empty(body.db_id)
        q = NLQuery(id="api", db_id=body.db_id, question=body.question)
        before = ledger.snapshot()
        try:
            record = answer(
                _provider(), db, hints, q, config.pipeline, ledger, failure_log,
                config.template_dir,
            )
        except ProviderError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        delta = CallLedger.delta(before, ledger.snapshot())
        response: dict[str, Any] = {
            "db_id": body.db_id,
            "final_sql": record.final_sql,
            "attempts": [a.to_dict() for a in record.attempts],
            "ledger_delta": {k: v for k, v in delta.items() if v},
        }
        if isinstance(record.outcome, Success):
            result = record.outcome.result
            response["outcome"] = "success"
            response["columns"] = list(result.columns)
            response["rows"] = [
                [_json_cell(v) for v in row] for row in result.rows[:DISPLAY_ROW_CAP]
            ]
            response["display_truncated"] = len(result.rows) > DISPLAY_ROW_CAP or result.truncated
        else:
            response["outcome"] = "exhausted"
            response["last_error"] = record.outcome.last_error
        return response

    static_dir = config.static_dir
    if static_dir and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=static_dir, html=True), name="console")

    return app
