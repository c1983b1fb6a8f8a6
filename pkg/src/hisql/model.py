"""Shared domain types and configuration.

Everything here is an immutable value object except CallLedger, which
supports atomic increments from concurrent workers.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, fields
from typing import Any, Iterable, Mapping

DIFFICULTIES = ("simple", "moderate", "challenging", "unknown")

PURPOSE_HINT_CURATION = "hint_curation"
PURPOSE_HINT_REPAIR = "hint_repair"
PURPOSE_GENERATION = "generation"
PURPOSE_REPAIR = "repair"
PURPOSES = (
    PURPOSE_HINT_CURATION,
    PURPOSE_HINT_REPAIR,
    PURPOSE_GENERATION,
    PURPOSE_REPAIR,
)

HINT_STATUSES = ("unvalidated", "valid", "repaired", "dropped")
# Only hints that proved executable are written to the interchange file.
SERIALIZABLE_HINT_STATUSES = ("valid", "repaired")

# Cell values mirror what the sqlite3 driver returns for a result cell.
CellValue = int | float | str | bytes | None


def difficulty_bucket(raw: str | None) -> str:
    """Map a dataset difficulty label onto one of the known buckets.

    Recognizes "simple"/"moderate"/"challenging" case-insensitively; anything
    else, including a missing label, lands in "unknown".
    """
    if raw is None:
        return "unknown"
    label = raw.strip().lower()
    return label if label in DIFFICULTIES[:3] else "unknown"


@dataclass(frozen=True)
class SchemaText:
    """DDL statements of a database, in catalog order."""

    statements: tuple[str, ...] = ()

    @property
    def rendered(self) -> str:
        return "\n\n".join(self.statements)

    def to_dict(self) -> dict[str, Any]:
        return {"statements": list(self.statements), "rendered": self.rendered}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SchemaText":
        return cls(statements=tuple(data.get("statements", ())))


@dataclass(frozen=True)
class DatabaseProfile:
    """A registered SQLite database and (optionally) its extracted DDL."""

    db_id: str
    file_path: str
    ddl: SchemaText | None = None

    def __post_init__(self) -> None:
        if not self.db_id:
            raise ValueError("db_id must be non-empty")


@dataclass(frozen=True)
class Hint:
    """A curated (description, SQL) exemplar for one database."""

    description: str
    sql_query: str
    status: str = "unvalidated"
    repair_count: int = 0

    def __post_init__(self) -> None:
        if self.status not in HINT_STATUSES:
            raise ValueError(f"unknown hint status: {self.status!r}")
        if self.repair_count < 0:
            raise ValueError("repair_count must be non-negative")


@dataclass(frozen=True)
class HintSet:
    """Ordered hints for one database plus provenance of their sources."""

    db_id: str
    hints: tuple[Hint, ...] = ()
    source_query_ids: tuple[str, ...] = ()
    created_at: str = ""

    def serializable_hints(self) -> tuple[Hint, ...]:
        return tuple(h for h in self.hints if h.status in SERIALIZABLE_HINT_STATUSES)

    def repair_calls(self) -> int:
        """Number of LLM repair calls spent while curating this set."""
        return sum(h.repair_count for h in self.hints)

    @classmethod
    def empty(cls, db_id: str) -> "HintSet":
        return cls(db_id=db_id)


def hint_records(hint_set: HintSet) -> list[dict[str, str]]:
    """Interchange form: an array of {"description", "sql_query"} objects."""
    return [
        {"description": h.description, "sql_query": h.sql_query}
        for h in hint_set.serializable_hints()
    ]


def hint_file_text(hint_set: HintSet) -> str:
    """Canonical byte-exact serialization of the hint interchange file."""
    return json.dumps(hint_records(hint_set), indent=2, ensure_ascii=False) + "\n"


def hints_from_records(
    db_id: str,
    records: Iterable[Mapping[str, Any]],
    status: str = "valid",
) -> HintSet:
    hints = tuple(
        Hint(description=str(r["description"]), sql_query=str(r["sql_query"]), status=status)
        for r in records
    )
    return HintSet(db_id=db_id, hints=hints)


@dataclass(frozen=True)
class NLQuery:
    """A natural-language question against one registered database."""

    id: str
    db_id: str
    question: str
    evidence: str | None = None

    def __post_init__(self) -> None:
        if not self.question:
            raise ValueError("question must be non-empty")


@dataclass(frozen=True)
class BenchmarkItem:
    query: NLQuery
    gold_sql: str
    difficulty: str = "unknown"

    def __post_init__(self) -> None:
        if not self.gold_sql:
            raise ValueError("gold_sql must be non-empty")
        if self.difficulty not in DIFFICULTIES:
            raise ValueError(f"unknown difficulty: {self.difficulty!r}")


@dataclass(frozen=True)
class Attempt:
    """One generate-or-repair round: attempt 0 is the initial generation."""

    index: int
    sql: str
    outcome: str  # "success" | "exec_error"
    error_kind: str | None = None
    error: str | None = None
    latency_ms: int = 0

    def __post_init__(self) -> None:
        if self.index < 0:
            raise ValueError("attempt index must be non-negative")
        if self.latency_ms < 0:
            raise ValueError("latency_ms must be non-negative")
        if self.outcome not in ("success", "exec_error"):
            raise ValueError(f"unknown attempt outcome: {self.outcome!r}")
        if self.outcome == "exec_error" and not self.error:
            raise ValueError("exec_error attempts must carry an error message")

    def to_dict(self, include_latency: bool = False) -> dict[str, Any]:
        out: dict[str, Any] = {"index": self.index, "sql": self.sql, "outcome": self.outcome}
        if self.outcome == "exec_error":
            out["error_kind"] = self.error_kind
            out["error"] = self.error
        if include_latency:
            out["latency_ms"] = self.latency_ms
        return out

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "Attempt":
        return cls(
            index=int(data["index"]),
            sql=str(data["sql"]),
            outcome=str(data["outcome"]),
            error_kind=data.get("error_kind"),
            error=data.get("error"),
            latency_ms=int(data.get("latency_ms", 0)),
        )


def check_attempt_trace(attempts: Iterable[Attempt]) -> None:
    """Reject traces whose indices are not exactly 0..k."""
    indices = [a.index for a in attempts]
    if indices != list(range(len(indices))):
        raise ValueError(f"attempt indices must be 0..k with no gaps, got {indices}")


@dataclass(frozen=True)
class ResultTable:
    """Rows returned by a read-only execution, possibly truncated at the cap."""

    columns: tuple[str, ...]
    rows: tuple[tuple[CellValue, ...], ...]
    truncated: bool = False

    def __post_init__(self) -> None:
        width = len(self.columns)
        for row in self.rows:
            if len(row) != width:
                raise ValueError(
                    f"row width {len(row)} does not match {width} columns"
                )


@dataclass(frozen=True)
class Success:
    result: ResultTable
    attempts: tuple[Attempt, ...]

    def __post_init__(self) -> None:
        check_attempt_trace(self.attempts)
        if not self.attempts or self.attempts[-1].outcome != "success":
            raise ValueError("the last attempt of a successful trace must succeed")


@dataclass(frozen=True)
class Exhausted:
    attempts: tuple[Attempt, ...]
    last_error: str

    def __post_init__(self) -> None:
        check_attempt_trace(self.attempts)
        if any(a.outcome == "success" for a in self.attempts):
            raise ValueError("an exhausted trace cannot contain a success")


VerificationOutcome = Success | Exhausted


class CallLedger:
    """Thread-safe count of LLM calls by purpose. Counts only increase."""

    def __init__(self, counts: Mapping[str, int] | None = None) -> None:
        self._lock = threading.Lock()
        self._counts = {p: 0 for p in PURPOSES}
        if counts:
            for purpose, n in counts.items():
                if purpose not in self._counts:
                    raise ValueError(f"unknown ledger purpose: {purpose!r}")
                if n < 0:
                    raise ValueError("ledger counts must be non-negative")
                self._counts[purpose] = int(n)

    def increment(self, purpose: str, by: int = 1) -> None:
        if purpose not in self._counts:
            raise ValueError(f"unknown ledger purpose: {purpose!r}")
        if by < 1:
            raise ValueError("ledger counts only increase")
        with self._lock:
            self._counts[purpose] += by

    def merge(self, counts: Mapping[str, int]) -> None:
        for purpose, n in counts.items():
            if n:
                self.increment(purpose, n)

    def count(self, purpose: str) -> int:
        with self._lock:
            return self._counts[purpose]

    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def snapshot(self) -> dict[str, int]:
        with self._lock:
            return dict(self._counts)

    @staticmethod
    def delta(before: Mapping[str, int], after: Mapping[str, int]) -> dict[str, int]:
        return {p: after.get(p, 0) - before.get(p, 0) for p in PURPOSES}


@dataclass(frozen=True)
class PipelineConfig:
    """Tunables for curation, generation, verification and evaluation."""

    max_repairs: int = 3  # C: bound on repair rounds in the verifier
    temperature: float = 0.3
    hint_target_count: int = 10
    hint_repair_cap: int = 2
    exec_timeout_ms: int = 30_000
    row_cap: int = 100_000
    split_ratio: float = 0.2
    seed: int = 0
    include_evidence: bool = False
    hints_in_repair: bool = False
    comparison_mode: str = "set"  # set | multiset | ordered
    fold_numeric: bool = False

    def __post_init__(self) -> None:
        if self.max_repairs < 1:
            raise ValueError("max_repairs must be positive")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be in [0, 2]")
        if self.hint_target_count < 1:
            raise ValueError("hint_target_count must be positive")
        if self.hint_repair_cap < 1:
            raise ValueError("hint_repair_cap must be positive")
        if self.exec_timeout_ms < 1:
            raise ValueError("exec_timeout_ms must be positive")
        if self.row_cap < 1:
            raise ValueError("row_cap must be positive")
        if not 0.0 < self.split_ratio < 1.0:
            raise ValueError("split_ratio must be in (0, 1)")
        if self.comparison_mode not in ("set", "multiset", "ordered"):
            raise ValueError(f"unknown comparison_mode: {self.comparison_mode!r}")

    def to_dict(self) -> dict[str, Any]:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**dict(data))


@dataclass(frozen=True)
class ItemRecord:
    """Per-item outcome inside a benchmark run."""

    item_id: str
    difficulty: str
    attempts: tuple[Attempt, ...]
    outcome: str  # "success" | "exhausted" | "error"
    ea_match: bool | None  # None = not evaluated (gold itself failed)
    final_sql: str = ""
    detail: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "item_id": self.item_id,
            "difficulty": self.difficulty,
            "attempts": [a.to_dict() for a in self.attempts],
            "outcome": self.outcome,
            "ea_match": self.ea_match,
            "final_sql": self.final_sql,
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "ItemRecord":
        return cls(
            item_id=str(data["item_id"]),
            difficulty=str(data["difficulty"]),
            attempts=tuple(Attempt.from_dict(a) for a in data["attempts"]),
            outcome=str(data["outcome"]),
            ea_match=data["ea_match"],
            final_sql=str(data.get("final_sql", "")),
            detail=str(data.get("detail", "")),
        )


@dataclass(frozen=True)
class RunReport:
    """Aggregated execution-accuracy results for one benchmark run."""

    mode: str
    records: tuple[ItemRecord, ...]
    ea_by_difficulty: dict[str, float]
    ea_total: float
    evaluated: int
    matches: int
    ledger: dict[str, int]
    config: PipelineConfig
    hints_meta: dict[str, Any] = field(default_factory=dict)
    bound_check: dict[str, Any] = field(default_factory=dict)
    dataset_meta: dict[str, Any] = field(default_factory=dict)
    generated_at: str = ""

    def to_dict(self) -> dict[str, Any]:
        return {
            "mode": self.mode,
            "records": [r.to_dict() for r in self.records],
            "ea_by_difficulty": dict(self.ea_by_difficulty),
            "ea_total": self.ea_total,
            "evaluated": self.evaluated,
            "matches": self.matches,
            "ledger": dict(self.ledger),
            "config": self.config.to_dict(),
            "hints_meta": self.hints_meta,
            "bound_check": self.bound_check,
            "dataset_meta": self.dataset_meta,
            "generated_at": self.generated_at,
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunReport":
        return cls(
            mode=str(data["mode"]),
            records=tuple(ItemRecord.from_dict(r) for r in data["records"]),
            ea_by_difficulty={k: float(v) for k, v in data["ea_by_difficulty"].items()},
            ea_total=float(data["ea_total"]),
            evaluated=int(data["evaluated"]),
            matches=int(data["matches"]),
            ledger={k: int(v) for k, v in data["ledger"].items()},
            config=PipelineConfig.from_dict(data["config"]),
            hints_meta=dict(data.get("hints_meta", {})),
            bound_check=dict(data.get("bound_check", {})),
            dataset_meta=dict(data.get("dataset_meta", {})),
            generated_at=str(data.get("generated_at", "")),
        )


def report_json_text(report: RunReport) -> str:
    """Stable serialization of a report; identical runs produce identical text."""
    return json.dumps(report.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"
