"""Hint-conditioned SQL generation and the execute-verify-repair loop.

Generation sends the full schema (no schema filtering or linking) together
with the curated hints and the question. Verification executes the candidate
read-only; on error the message, schema, and question are fed back for up to
a bounded number of repair rounds, and exhausted items are appended to a
failure log for manual follow-up.
"""

from __future__ import annotations

import json
import threading
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from .dbruntime import ExecError, ExecLimits, execute_readonly, extract_ddl
from .llm import (
    EmptyModelOutput,
    complete,
    extract_sql,
    load_template,
    render_prompt,
)
from .model import (
    Attempt,
    CallLedger,
    DatabaseProfile,
    Exhausted,
    HintSet,
    NLQuery,
    PipelineConfig,
    ResultTable,
    SchemaText,
    Success,
    VerificationOutcome,
    hint_records,
)

NO_HINTS_SECTION = "No hints available for this database.\n"


class FailureLog:
    """Append-only JSON-lines log of exhausted queries; appends are atomic.

    With path=None entries are kept in memory only (ad-hoc runs that did not
    ask for a log file).
    """

    def __init__(self, path: str | Path | None) -> None:
        self.path = Path(path) if path is not None else None
        self._memory: list[dict] = []
        self._lock = threading.Lock()

    def append(self, query: NLQuery, last_sql: str, last_error: str) -> None:
        entry = {
            "query_id": query.id,
            "db_id": query.db_id,
            "question": query.question,
            "last_sql": last_sql,
            "last_error": last_error,
            "ts": datetime.now(timezone.utc).isoformat(),
        }
        line = json.dumps(entry, ensure_ascii=False) + "\n"
        with self._lock:
            if self.path is None:
                self._memory.append(entry)
                return
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(line)

    def entries(self) -> list[dict]:
        if self.path is None:
            with self._lock:
                return list(self._memory)
        if not self.path.is_file():
            return []
        return [
            json.loads(line)
            for line in self.path.read_text(encoding="utf-8").splitlines()
            if line.strip()
        ]


@dataclass(frozen=True)
class AnswerRecord:
    """Everything one question produced: trace, terminal state, final SQL."""

    query: NLQuery
    hints_used: HintSet
    attempts: tuple[Attempt, ...]
    outcome: VerificationOutcome
    final_sql: str


def hints_section(hints: HintSet) -> str:
    """Prompt section carrying the curated hints as their interchange array."""
    records = hint_records(hints)
    if not records:
        return NO_HINTS_SECTION
    return (
        "Curated example queries for this database, as a JSON array of "
        '{"description", "sql_query"} objects:\n'
        + json.dumps(records, indent=2, ensure_ascii=False)
        + "\nUse them as guidance for joins, nesting, grouping, sorting, "
        "aggregation, and set operations.\n"
    )


def _evidence_section(q: NLQuery, cfg: PipelineConfig) -> str:
    if cfg.include_evidence and q.evidence:
        return f"Context: {q.evidence}\n\n"
    return ""


def build_generation_request(
    schema: SchemaText,
    hints: HintSet,
    q: NLQuery,
    cfg: PipelineConfig,
    template_dir: str | Path | None = None,
):
    template = load_template("generation", template_dir)
    bindings = {
        "schema": schema.rendered,
        "hints": hints_section(hints),
        "question": q.question,
        "evidence": _evidence_section(q, cfg),
    }
    return render_prompt(template, bindings, temperature=cfg.temperature)


def generate_sql(
    provider,
    schema: SchemaText,
    hints: HintSet,
    q: NLQuery,
    cfg: PipelineConfig,
    ledger: CallLedger,
    template_dir: str | Path | None = None,
) -> str:
    """One generation call over the full schema; returns the extracted SQL.

    An empty hint set is the baseline configuration: the prompt states that
    no hints are available and everything else stays identical.
    """
    if not schema.statements:
        raise ValueError("generation needs a non-empty schema")
    request = build_generation_request(schema, hints, q, cfg, template_dir)
    response = complete(provider, request, ledger)
    try:
        return extract_sql(response)
    except EmptyModelOutput:
        return ""


def _execute_attempt(
    db: DatabaseProfile,
    sql: str,
    index: int,
    limits: ExecLimits,
) -> tuple[Attempt, ResultTable | None]:
    """Run one candidate; empty SQL becomes a syntax error without executing."""
    started = time.perf_counter()
    if not sql.strip():
        error: ResultTable | ExecError = ExecError("syntax", "model returned no SQL")
    else:
        error = execute_readonly(db, sql, limits)
    latency_ms = int((time.perf_counter() - started) * 1000)
    if isinstance(error, ExecError):
        attempt = Attempt(
            index=index,
            sql=sql,
            outcome="exec_error",
            error_kind=error.kind,
            error=error.message,
            latency_ms=latency_ms,
        )
        return attempt, None
    return Attempt(index=index, sql=sql, outcome="success", latency_ms=latency_ms), error


def verify_and_repair(
    provider,
    db: DatabaseProfile,
    schema: SchemaText,
    q: NLQuery,
    sql: str,
    cfg: PipelineConfig,
    ledger: CallLedger,
    failure_log: FailureLog,
    hints: HintSet | None = None,
    template_dir: str | Path | None = None,
) -> VerificationOutcome:
    """Execute the candidate and repair on error, up to cfg.max_repairs rounds.

    The first successful execution terminates the loop. After 1 + C failed
    executions the outcome is Exhausted and one failure-log entry is written.
    """
    limits = ExecLimits(timeout_ms=cfg.exec_timeout_ms, row_cap=cfg.row_cap)
    template = load_template("sql_repair", template_dir)
    attempts: list[Attempt] = []

    attempt, result = _execute_attempt(db, sql, 0, limits)
    attempts.append(attempt)
    if result is not None:
        return Success(result=result, attempts=tuple(attempts))

    current_sql = sql
    for round_index in range(1, cfg.max_repairs + 1):
        hint_part = ""
        if cfg.hints_in_repair and hints is not None:
            hint_part = hints_section(hints)
        request = render_prompt(
            template,
            {
                "schema": schema.rendered,
                "question": q.question,
                "hints": hint_part,
                "failed_sql": current_sql,
                "error": attempts[-1].error or "",
            },
            temperature=cfg.temperature,
        )
        response = complete(provider, request, ledger)
        try:
            current_sql = extract_sql(response)
        except EmptyModelOutput:
            current_sql = ""
        attempt, result = _execute_attempt(db, current_sql, round_index, limits)
        attempts.append(attempt)
        if result is not None:
            return Success(result=result, attempts=tuple(attempts))

    last = attempts[-1]
    failure_log.append(q, last.sql, last.error or "")
    return Exhausted(attempts=tuple(attempts), last_error=last.error or "")


def answer(
    provider,
    db: DatabaseProfile,
    hints: HintSet,
    q: NLQuery,
    cfg: PipelineConfig,
    ledger: CallLedger,
    failure_log: FailureLog,
    template_dir: str | Path | None = None,
) -> AnswerRecord:
    """Generate then verify-and-repair; the composition behind ask and bench."""
    schema = db.ddl or extract_ddl(db)
    sql = generate_sql(provider, schema, hints, q, cfg, ledger, template_dir)
    outcome = verify_and_repair(
        provider, db, schema, q, sql, cfg, ledger, failure_log,
        hints=hints, template_dir=template_dir,
    )
    attempts = outcome.attempts
    return AnswerRecord(
        query=q,
        hints_used=hints,
        attempts=attempts,
        outcome=outcome,
        final_sql=attempts[-1].sql,
    )
