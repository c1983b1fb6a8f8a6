"""Hint curation: have the LLM select and describe a diverse complex-query
set from historical queries, validate each candidate against the hosted
database, auto-repair failures, and persist the final set.

Curation is single-flight per database id.
"""

from __future__ import annotations

import contextlib
import json
import logging
import re
import threading
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

from .dbruntime import ExecError, ExecLimits, execute_readonly, extract_ddl
from .llm import (
    EmptyModelOutput,
    PromptTemplate,
    complete,
    extract_sql,
    load_template,
    render_prompt,
)
from .model import (
    CallLedger,
    DatabaseProfile,
    Hint,
    HintSet,
    PipelineConfig,
    hint_file_text,
    hints_from_records,
)

logger = logging.getLogger(__name__)

_FENCED_JSON_RE = re.compile(r"```(?:json)?\n(.*?)```", re.DOTALL)

_inflight: set[str] = set()
_inflight_lock = threading.Lock()


class CurationError(Exception):
    pass


class UnparseableHintResponse(CurationError):
    """The model never produced a parseable hint array, even after a reminder."""


class EmptyHintResult(CurationError):
    """The model returned an empty hint array."""


class CurationInProgress(CurationError):
    """A curation for this database id is already running."""


@dataclass(frozen=True)
class HistoryEntry:
    """One historical query, optionally paired with its original question."""

    id: str
    sql: str
    question: str | None = None

    def __post_init__(self) -> None:
        if not self.sql:
            raise ValueError("history entries must carry SQL")


@contextlib.contextmanager
def curation_guard(db_id: str):
    """Enforce one in-progress curation per database id."""
    with _inflight_lock:
        if db_id in _inflight:
            raise CurationInProgress(f"curation already running for {db_id!r}")
        _inflight.add(db_id)
    try:
        yield
    finally:
        with _inflight_lock:
            _inflight.discard(db_id)


def _history_json(history: Sequence[HistoryEntry]) -> str:
    entries: list[dict[str, str]] = []
    for entry in history:
        record = {"id": entry.id}
        if entry.question:
            record["question"] = entry.question
        record["sql"] = entry.sql
        entries.append(record)
    return json.dumps(entries, indent=2, ensure_ascii=False)


def _parse_hint_array(text: str) -> list[dict[str, str]] | None:
    """Best-effort parse of the model response into hint records."""
    candidates = [text.strip()]
    fenced = _FENCED_JSON_RE.search(text)
    if fenced:
        candidates.insert(0, fenced.group(1).strip())
    start, end = text.find("["), text.rfind("]")
    if start != -1 and end > start:
        candidates.append(text[start : end + 1])
    for candidate in candidates:
        try:
            data = json.loads(candidate)
        except (json.JSONDecodeError, ValueError):
            continue
        if not isinstance(data, list):
            continue
        records = []
        for element in data:
            if (
                isinstance(element, dict)
                and isinstance(element.get("description"), str)
                and isinstance(element.get("sql_query"), str)
            ):
                records.append(
                    {
                        "description": element["description"],
                        "sql_query": element["sql_query"],
                    }
                )
            else:
                logger.warning("discarding malformed hint element: %r", element)
        return records
    return None


def validate_hint(
    db: DatabaseProfile | str | Path, hint: Hint, limits: ExecLimits
) -> ExecError | None:
    """Execute the hint read-only; only executability matters, not content."""
    result = execute_readonly(db, hint.sql_query, limits)
    return result if isinstance(result, ExecError) else None


def _repair_hint(
    provider,
    db: DatabaseProfile | str | Path,
    schema_text: str,
    hint: Hint,
    error: ExecError,
    cfg: PipelineConfig,
    ledger: CallLedger,
    template: PromptTemplate,
    limits: ExecLimits,
) -> tuple[Hint, ExecError | None]:
    """Repair loop up to the cap; returns the final hint and its last error."""
    if hint.status in ("valid", "repaired"):
        raise ValueError("repair_hint requires a hint that failed validation")
    sql = hint.sql_query
    repairs = hint.repair_count
    last_error = error
    while repairs < cfg.hint_repair_cap:
        request = render_prompt(
            template,
            {"schema": schema_text, "failed_sql": sql, "error": last_error.message},
            temperature=cfg.temperature,
        )
        response = complete(provider, request, ledger)
        repairs += 1
        try:
            sql = extract_sql(response)
        except EmptyModelOutput:
            last_error = ExecError("syntax", "model returned no SQL")
            continue
        result = execute_readonly(db, sql, limits)
        if not isinstance(result, ExecError):
            return replace(
                hint, sql_query=sql, status="repaired", repair_count=repairs
            ), None
        last_error = result
    dropped = replace(hint, sql_query=sql, status="dropped", repair_count=repairs)
    logger.warning(
        "hint dropped after %d repair attempts: %s (%s)",
        repairs,
        dropped.description,
        last_error.message,
    )
    return dropped, last_error


def repair_hint(
    provider,
    db: DatabaseProfile | str | Path,
    schema_text: str,
    hint: Hint,
    error: ExecError,
    cfg: PipelineConfig,
    ledger: CallLedger,
    template_dir: str | Path | None = None,
) -> Hint:
    """Ask the LLM to fix a failing hint, re-validating after each attempt.

    Ends with status repaired on success or dropped once the repair cap is
    spent; dropped is a state, not an error.
    """
    template = load_template("hint_repair", template_dir)
    limits = ExecLimits(timeout_ms=cfg.exec_timeout_ms, row_cap=cfg.row_cap)
    repaired, _ = _repair_hint(
        provider, db, schema_text, hint, error, cfg, ledger, template, limits
    )
    return repaired


def curate_hints(
    db: DatabaseProfile,
    history: Sequence[HistoryEntry],
    provider,
    cfg: PipelineConfig,
    ledger: CallLedger,
    template_dir: str | Path | None = None,
) -> HintSet:
    """Run the full curation pass for one database.

    One selection LLM call (plus at most one format-reminder reprompt) yields
    candidate hints; each is validated against the database and repaired up
    to the per-hint cap. Every hint that survives serialization is executable.
    """
    if not history:
        raise ValueError("curation needs a non-empty history")
    with curation_guard(db.db_id):
        schema = db.ddl or extract_ddl(db)
        limits = ExecLimits(timeout_ms=cfg.exec_timeout_ms, row_cap=cfg.row_cap)
        curation_template = load_template("hint_curation", template_dir)
        repair_template = load_template("hint_repair", template_dir)

        bindings = {
            "schema": schema.rendered,
            "history": _history_json(history),
            "target_count": cfg.hint_target_count,
        }
        request = render_prompt(curation_template, bindings, temperature=cfg.temperature)
        response = complete(provider, request, ledger)
        records = _parse_hint_array(response)
        if records is None:
            reminder = (
                request.messages[0]["content"]
                + "\n\nYour previous reply could not be parsed. Respond with ONLY a "
                'JSON array of objects carrying the two string keys "description" '
                'and "sql_query", with no surrounding prose.'
            )
            retry_request = replace(
                request, messages=({"role": "user", "content": reminder},)
            )
            response = complete(provider, retry_request, ledger)
            records = _parse_hint_array(response)
            if records is None:
                raise UnparseableHintResponse(
                    f"hint selection response is not a hint array: {response[:200]!r}"
                )
        if not records:
            raise EmptyHintResult(f"hint selection returned no hints for {db.db_id!r}")

        hints: list[Hint] = []
        for record in records:
            hint = Hint(
                description=record["description"],
                sql_query=record["sql_query"],
                status="unvalidated",
            )
            error = validate_hint(db, hint, limits)
            if error is None:
                hints.append(replace(hint, status="valid"))
                continue
            repaired, _ = _repair_hint(
                provider, db, schema.rendered, hint, error, cfg, ledger,
                repair_template, limits,
            )
            hints.append(repaired)

        return HintSet(
            db_id=db.db_id,
            hints=tuple(hints),
            source_query_ids=tuple(entry.id for entry in history),
            created_at=datetime.now(timezone.utc).isoformat(),
        )


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.stem + ".meta.json")


def save_hint_set(hint_set: HintSet, path: str | Path) -> Path:
    """Write the interchange file plus a sidecar with status and provenance.

    The hint file itself stays interchange-clean: a bare JSON array of
    {"description", "sql_query"} objects.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(hint_file_text(hint_set), encoding="utf-8")
    sidecar = {
        "db_id": hint_set.db_id,
        "created_at": hint_set.created_at,
        "source_query_ids": list(hint_set.source_query_ids),
        "hints": [
            {
                "description": h.description,
                "sql_query": h.sql_query,
                "status": h.status,
                "repair_count": h.repair_count,
            }
            for h in hint_set.hints
        ],
    }
    _sidecar_path(path).write_text(
        json.dumps(sidecar, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )
    return path


def load_hint_set(path: str | Path, db_id: str | None = None) -> HintSet:
    """Load a hint set, recovering status and provenance from the sidecar
    when present; a bare interchange file loads with every hint valid."""
    path = Path(path)
    records = json.loads(path.read_text(encoding="utf-8"))
    sidecar_path = _sidecar_path(path)
    if sidecar_path.is_file():
        meta = json.loads(sidecar_path.read_text(encoding="utf-8"))
        hints = tuple(
            Hint(
                description=h["description"],
                sql_query=h["sql_query"],
                status=h["status"],
                repair_count=int(h.get("repair_count", 0)),
            )
            for h in meta.get("hints", [])
        )
        return HintSet(
            db_id=db_id or meta.get("db_id", ""),
            hints=hints,
            source_query_ids=tuple(meta.get("source_query_ids", ())),
            created_at=meta.get("created_at", ""),
        )
    return hints_from_records(db_id or path.stem, records)


def curation_stats(hint_set: HintSet) -> dict[str, int]:
    """Counts the curation CLI reports: proposed, valid, repaired, dropped."""
    by_status = {"valid": 0, "repaired": 0, "dropped": 0}
    for hint in hint_set.hints:
        if hint.status in by_status:
            by_status[hint.status] += 1
    return {"proposed": len(hint_set.hints), **by_status}
