"""All contact with SQLite files: DDL extraction, sandboxed read-only
execution with limits, result canonicalization, and execution-accuracy
comparison.

Connections are opened per call and never shared, so every operation here is
safe to invoke concurrently against the same database file.
"""

from __future__ import annotations

import os
import sqlite3
import threading
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

from .model import DatabaseProfile, ResultTable, SchemaText

EXEC_ERROR_KINDS = (
    "syntax",
    "missing_object",
    "runtime",
    "timeout",
    "row_cap_exceeded",
    "write_rejected",
)

# Canonical rendering of SQL NULL; cannot collide with TEXT since it renders verbatim
# only within its own variant and comparisons are a stated convention anyway.
NULL_CANON = "∅"

_FETCH_CHUNK = 1024


class DatabaseAccessError(Exception):
    """The database file is missing, unreadable, or not a SQLite database."""


class TruncatedResultError(ValueError):
    """A row-capped result reached a comparison; capped results are never compared."""


@dataclass(frozen=True)
class ExecLimits:
    timeout_ms: int = 30_000
    row_cap: int = 100_000

    def __post_init__(self) -> None:
        if self.timeout_ms < 1 or self.row_cap < 1:
            raise ValueError("timeout_ms and row_cap must be positive")


@dataclass(frozen=True)
class ExecError:
    kind: str
    message: str

    def __post_init__(self) -> None:
        if self.kind not in EXEC_ERROR_KINDS:
            raise ValueError(f"unknown error kind: {self.kind!r}")
        if not self.message:
            raise ValueError("error message must be non-empty")


def _db_path(db: DatabaseProfile | str | Path) -> str:
    if isinstance(db, DatabaseProfile):
        return str(db.file_path)
    return str(db)


def _connect_readonly(path: str) -> sqlite3.Connection:
    # mode=ro makes SQLite reject every write at the VFS layer, so the file
    # can never be mutated by whatever SQL gets executed.
    return sqlite3.connect(f"file:{path}?mode=ro", uri=True, check_same_thread=False)


def extract_ddl(db: DatabaseProfile | str | Path) -> SchemaText:
    """Return all CREATE TABLE/INDEX/VIEW statements in catalog order."""
    path = _db_path(db)
    if not os.path.isfile(path):
        raise DatabaseAccessError(f"database file not readable: {path}")
    try:
        con = _connect_readonly(path)
    except sqlite3.Error as exc:
        raise DatabaseAccessError(f"cannot open {path}: {exc}") from exc
    try:
        rows = con.execute(
            "SELECT sql FROM sqlite_master"
            " WHERE sql IS NOT NULL"
            "   AND type IN ('table', 'index', 'view')"
            "   AND name NOT LIKE 'sqlite_%'"
            " ORDER BY rowid"
        ).fetchall()
    except sqlite3.DatabaseError as exc:
        raise DatabaseAccessError(f"not a usable SQLite database: {path}: {exc}") from exc
    finally:
        con.close()
    return SchemaText(statements=tuple(r[0] for r in rows))


def table_count(db: DatabaseProfile | str | Path) -> int:
    path = _db_path(db)
    con = _connect_readonly(path)
    try:
        row = con.execute(
            "SELECT COUNT(*) FROM sqlite_master"
            " WHERE type = 'table' AND name NOT LIKE 'sqlite_%'"
        ).fetchone()
        return int(row[0])
    finally:
        con.close()


def _classify(exc: BaseException, timed_out: bool) -> ExecError:
    if timed_out:
        return ExecError("timeout", f"execution aborted by timeout: {exc}")
    message = str(exc).strip() or type(exc).__name__
    low = message.lower()
    if "syntax error" in low or "incomplete input" in low or "unrecognized token" in low:
        return ExecError("syntax", message)
    if "one statement at a time" in low:
        return ExecError("syntax", message)
    if low.startswith("no such") or "no such table" in low or "no such column" in low or "no such function" in low:
        return ExecError("missing_object", message)
    if "readonly database" in low or "read-only" in low or "not authorized" in low:
        return ExecError("write_rejected", message)
    return ExecError("runtime", message)


def execute_readonly(
    db: DatabaseProfile | str | Path,
    sql: str,
    limits: ExecLimits = ExecLimits(),
) -> ResultTable | ExecError:
    """Run arbitrary SQL against the database with writes rejected.

    Returns up to ``limits.row_cap`` rows (the table is flagged truncated when
    the cap is hit) or an ExecError classifying the failure. Execution is
    interrupted once ``limits.timeout_ms`` elapses.
    """
    path = _db_path(db)
    if not os.path.isfile(path):
        return ExecError("runtime", f"database file not readable: {path}")
    try:
        con = _connect_readonly(path)
    except sqlite3.Error as exc:
        return ExecError("runtime", f"cannot open {path}: {exc}")

    timed_out = threading.Event()

    def _interrupt() -> None:
        timed_out.set()
        con.interrupt()

    timer = threading.Timer(limits.timeout_ms / 1000.0, _interrupt)
    timer.daemon = True
    timer.start()
    try:
        cur = con.execute(sql)
        columns = tuple(d[0] for d in cur.description) if cur.description else ()
        rows: list[tuple] = []
        truncated = False
        while True:
            chunk = cur.fetchmany(min(_FETCH_CHUNK, limits.row_cap - len(rows) + 1))
            if not chunk:
                break
            rows.extend(tuple(r) for r in chunk)
            if len(rows) > limits.row_cap:
                truncated = True
                rows = rows[: limits.row_cap]
                break
        return ResultTable(columns=columns, rows=tuple(rows), truncated=truncated)
    except (sqlite3.Error, sqlite3.Warning) as exc:
        return _classify(exc, timed_out.is_set())
    finally:
        timer.cancel()
        con.close()


def canonical_cell(value, fold_numeric: bool = False) -> str:
    """Render one cell to its canonical string.

    NULL -> "∅", INTEGER -> decimal, REAL -> shortest round-trip decimal,
    TEXT -> verbatim, BLOB -> lowercase hex. With fold_numeric, an
    integer-valued REAL renders like the matching INTEGER.
    """
    if value is None:
        return NULL_CANON
    if isinstance(value, bool):  # sqlite3 never yields bool; guard adapters
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if fold_numeric and value.is_integer():
            return str(int(value))
        return repr(value)
    if isinstance(value, bytes):
        return value.hex()
    return str(value)


def normalize(
    result: ResultTable, fold_numeric: bool = False
) -> tuple[tuple[str, ...], ...]:
    """Canonical row collection: each row becomes a tuple of canonical strings."""
    return tuple(
        tuple(canonical_cell(v, fold_numeric) for v in row) for row in result.rows
    )


def results_match(
    pred: ResultTable,
    gold: ResultTable,
    mode: str = "set",
    fold_numeric: bool = False,
) -> bool:
    """Compare two result tables after canonicalization.

    set mode compares deduplicated row sets, multiset compares row multisets,
    ordered compares row sequences. Column names are never compared, but the
    column counts must agree in every mode.
    """
    if mode not in ("set", "multiset", "ordered"):
        raise ValueError(f"unknown comparison mode: {mode!r}")
    if pred.truncated or gold.truncated:
        raise TruncatedResultError("refusing to compare a row-capped result")
    if len(pred.columns) != len(gold.columns):
        return False
    left = normalize(pred, fold_numeric)
    right = normalize(gold, fold_numeric)
    if mode == "set":
        return set(left) == set(right)
    if mode == "multiset":
        return Counter(left) == Counter(right)
    return left == right


@dataclass(frozen=True)
class EAOutcome:
    """Result of comparing predicted vs gold SQL by execution."""

    kind: str  # "match" | "mismatch" | "pred_error" | "gold_error"
    pred_error: ExecError | None = None
    gold_error: ExecError | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("match", "mismatch", "pred_error", "gold_error"):
            raise ValueError(f"unknown EA outcome kind: {self.kind!r}")


def _capped_to_error(result: ResultTable | ExecError) -> ResultTable | ExecError:
    if isinstance(result, ResultTable) and result.truncated:
        return ExecError("row_cap_exceeded", "result hit the row cap; comparison refused")
    return result


def ea_match(
    db: DatabaseProfile | str | Path,
    pred_sql: str,
    gold_sql: str,
    limits: ExecLimits = ExecLimits(),
    mode: str = "set",
    fold_numeric: bool = False,
) -> EAOutcome:
    """Execute both queries and compare their results.

    A failing prediction counts as a non-match; a failing gold query marks the
    item as not evaluable (the caller excludes it from accuracy denominators).
    """
    gold_result = _capped_to_error(execute_readonly(db, gold_sql, limits))
    if isinstance(gold_result, ExecError):
        return EAOutcome(kind="gold_error", gold_error=gold_result)
    pred_result = _capped_to_error(execute_readonly(db, pred_sql, limits))
    if isinstance(pred_result, ExecError):
        return EAOutcome(kind="pred_error", pred_error=pred_result)
    matched = results_match(pred_result, gold_result, mode=mode, fold_numeric=fold_numeric)
    return EAOutcome(kind="match" if matched else "mismatch")
