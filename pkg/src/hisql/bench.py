"""Benchmark harness: dataset ingestion, the deterministic hint-history/test
split, batched pipeline execution, execution-accuracy aggregation by
difficulty, and report emission.

Dataset files are JSON arrays; a field map adapts differently-shaped corpora
(question/SQL/db_id key names vary) onto one loader.
"""

from __future__ import annotations

import concurrent.futures
import json
import logging
import math
import random
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable, Sequence

from .dbruntime import ExecError, ExecLimits, ea_match, execute_readonly
from .hints import HistoryEntry, curate_hints, save_hint_set
from .model import (
    BenchmarkItem,
    CallLedger,
    DatabaseProfile,
    DIFFICULTIES,
    HintSet,
    ItemRecord,
    NLQuery,
    PipelineConfig,
    RunReport,
    Success,
    difficulty_bucket,
    report_json_text,
)
from .pipeline import FailureLog, answer

logger = logging.getLogger(__name__)


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class FieldMap:
    """Maps one dataset's record keys onto the loader's fields."""

    question_key: str = "question"
    sql_key: str = "SQL"
    db_id_key: str = "db_id"
    difficulty_key: str | None = "difficulty"
    evidence_key: str | None = "evidence"
    id_key: str | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "FieldMap":
        return cls(**data)


@dataclass(frozen=True)
class DatasetSpec:
    path: str
    db_root: str
    field_map: FieldMap = field(default_factory=FieldMap)


@dataclass(frozen=True)
class LoadResult:
    items: tuple[BenchmarkItem, ...]
    total: int
    rejected: int
    reasons: tuple[str, ...] = ()


def load_dataset(spec: DatasetSpec) -> LoadResult:
    """Load one BenchmarkItem per dataset record.

    Records missing a question or SQL are rejected and counted; more than 10%
    rejections indicates a broken field map and aborts.
    """
    path = Path(spec.path)
    if not path.is_file():
        raise DatasetError(f"dataset file missing: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise DatasetError(f"dataset is not parseable JSON: {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise DatasetError(f"dataset must be a JSON array of objects: {path}")
    if not raw:
        logger.warning("dataset %s is empty", path)
        return LoadResult(items=(), total=0, rejected=0)

    fm = spec.field_map
    items: list[BenchmarkItem] = []
    reasons: list[str] = []
    for i, record in enumerate(raw):
        if not isinstance(record, dict):
            reasons.append(f"record {i}: not an object")
            continue
        question = record.get(fm.question_key)
        sql = record.get(fm.sql_key)
        db_id = record.get(fm.db_id_key)
        if not question or not isinstance(question, str):
            reasons.append(f"record {i}: missing question ({fm.question_key!r})")
            continue
        if not sql or not isinstance(sql, str):
            reasons.append(f"record {i}: missing SQL ({fm.sql_key!r})")
            continue
        if not db_id or not isinstance(db_id, str):
            reasons.append(f"record {i}: missing db id ({fm.db_id_key!r})")
            continue
        item_id = (
            str(record[fm.id_key])
            if fm.id_key and record.get(fm.id_key) is not None
            else f"item_{i:05d}"
        )
        evidence = None
        if fm.evidence_key and record.get(fm.evidence_key):
            evidence = str(record[fm.evidence_key])
        difficulty = difficulty_bucket(
            record.get(fm.difficulty_key) if fm.difficulty_key else None
        )
        items.append(
            BenchmarkItem(
                query=NLQuery(id=item_id, db_id=db_id, question=question, evidence=evidence),
                gold_sql=sql,
                difficulty=difficulty,
            )
        )
    rejected = len(reasons)
    if rejected and rejected / len(raw) > 0.10:
        raise DatasetError(
            f"{rejected}/{len(raw)} records rejected; first: {reasons[0]}"
        )
    if rejected:
        logger.warning("rejected %d/%d dataset records", rejected, len(raw))
    return LoadResult(
        items=tuple(items), total=len(raw), rejected=rejected, reasons=tuple(reasons)
    )


def split_hint_history(
    items: Sequence[BenchmarkItem], ratio: float, seed: int
) -> tuple[list[BenchmarkItem], list[BenchmarkItem]]:
    """Deterministic per-database split into hint history and test items.

    Every database contributes ceil(ratio * n) history items so each one gets
    hint material; items are keyed by id, so the partition does not depend on
    input order. History and test are disjoint and cover the input.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must be in (0, 1)")
    by_db: dict[str, list[BenchmarkItem]] = {}
    for item in items:
        by_db.setdefault(item.query.db_id, []).append(item)
    history: list[BenchmarkItem] = []
    test: list[BenchmarkItem] = []
    for db_id in sorted(by_db):
        group = sorted(by_db[db_id], key=lambda it: it.query.id)
        if len(group) < 2:
            logger.warning(
                "database %s has %d item(s); all go to history, none to test",
                db_id,
                len(group),
            )
            history.extend(group)
            continue
        n_history = math.ceil(ratio * len(group))
        if n_history >= len(group):
            logger.warning("database %s keeps no test items at ratio %s", db_id, ratio)
        # Seeding with a string is stable across platforms and runs.
        rng = random.Random(f"{seed}\x1f{db_id}")
        picked = set(rng.sample(range(len(group)), n_history))
        for index, item in enumerate(group):
            (history if index in picked else test).append(item)
    return history, test


def resolve_db_path(db_root: str | Path, db_id: str) -> Path:
    """Find the SQLite file for a database id under the benchmark layout."""
    root = Path(db_root)
    for candidate in (
        root / f"{db_id}.sqlite",
        root / db_id / f"{db_id}.sqlite",
        root / f"{db_id}.db",
        root / db_id / f"{db_id}.db",
    ):
        if candidate.is_file():
            return candidate
    raise DatasetError(f"no SQLite file for {db_id!r} under {root}")


def check_call_bound(
    ledger: dict[str, int],
    n_items: int,
    max_repairs: int,
    hint_repair_calls: int,
    n_databases: int = 1,
) -> dict[str, Any]:
    """Verify the run's call accounting and compute the advertised cost bound.

    The bound C*N + S caps repair-related calls; generation is exactly one
    call per query and curation at most two per database (selection plus one
    format reprompt).
    """
    problems: list[str] = []
    if ledger.get("repair", 0) > max_repairs * n_items:
        problems.append(
            f"repair calls {ledger.get('repair', 0)} exceed C*N = {max_repairs * n_items}"
        )
    if ledger.get("generation", 0) != n_items:
        problems.append(
            f"generation calls {ledger.get('generation', 0)} != N = {n_items}"
        )
    if ledger.get("hint_repair", 0) != hint_repair_calls:
        problems.append(
            f"hint_repair calls {ledger.get('hint_repair', 0)} != S = {hint_repair_calls}"
        )
    if ledger.get("hint_curation", 0) > 2 * n_databases:
        problems.append(
            f"hint_curation calls {ledger.get('hint_curation', 0)} exceed 2 per database"
        )
    return {
        "ok": not problems,
        "problems": problems,
        "n_items": n_items,
        "max_repairs": max_repairs,
        "hint_repair_calls": hint_repair_calls,
        "n_databases": n_databases,
        "ledger_total": sum(ledger.values()),
        "cost_bound": max_repairs * n_items + hint_repair_calls,
    }


def _evaluate_item(
    db_path: Path,
    record_outcome: str,
    final_sql: str,
    gold_sql: str,
    limits: ExecLimits,
    mode: str,
    fold_numeric: bool,
) -> tuple[bool | None, str]:
    """EA verdict for one record: True/False, or None when gold itself fails."""
    if record_outcome == "success":
        verdict = ea_match(
            db_path, final_sql, gold_sql, limits, mode=mode, fold_numeric=fold_numeric
        )
        if verdict.kind == "gold_error":
            return None, f"gold_error: {verdict.gold_error.kind}: {verdict.gold_error.message}"
        if verdict.kind == "match":
            return True, ""
        if verdict.kind == "mismatch":
            return False, "results differ"
        return False, f"pred_error: {verdict.pred_error.kind}: {verdict.pred_error.message}"
    # Exhausted or errored items still need the gold check to decide whether
    # they belong in the accuracy denominator.
    gold_result = execute_readonly(db_path, gold_sql, limits)
    if isinstance(gold_result, ExecError):
        return None, f"gold_error: {gold_result.kind}: {gold_result.message}"
    if gold_result.truncated:
        return None, "gold_error: row_cap_exceeded"
    return False, record_outcome


def _run_one(
    item: BenchmarkItem,
    db: DatabaseProfile,
    hints: HintSet,
    provider,
    cfg: PipelineConfig,
    ledger: CallLedger,
    failure_log: FailureLog,
    limits: ExecLimits,
    comparison_mode: str,
    template_dir,
) -> ItemRecord:
    try:
        record = answer(
            provider, db, hints, item.query, cfg, ledger, failure_log, template_dir
        )
        outcome = "success" if isinstance(record.outcome, Success) else "exhausted"
        attempts = record.attempts
        final_sql = record.final_sql
    except Exception as exc:
        logger.exception("item %s failed", item.query.id)
        outcome, attempts, final_sql = "error", (), ""
        detail = f"{type(exc).__name__}: {exc}"
        verdict, gold_detail = _evaluate_item(
            Path(db.file_path), outcome, final_sql, item.gold_sql, limits,
            comparison_mode, cfg.fold_numeric,
        )
        return ItemRecord(
            item_id=item.query.id,
            difficulty=item.difficulty,
            attempts=attempts,
            outcome=outcome,
            ea_match=verdict,
            final_sql=final_sql,
            detail=gold_detail or detail,
        )
    verdict, detail = _evaluate_item(
        Path(db.file_path), outcome, final_sql, item.gold_sql, limits,
        comparison_mode, cfg.fold_numeric,
    )
    return ItemRecord(
        item_id=item.query.id,
        difficulty=item.difficulty,
        attempts=attempts,
        outcome=outcome,
        ea_match=verdict,
        final_sql=final_sql,
        detail=detail,
    )


def aggregate_accuracy(records: Iterable[ItemRecord]) -> tuple[dict[str, float], float, int, int]:
    """ea-by-difficulty map, total EA, evaluated count, match count."""
    by_bucket: dict[str, list[bool]] = {}
    for record in records:
        if record.ea_match is None:
            continue
        by_bucket.setdefault(record.difficulty, []).append(record.ea_match)
    ea_by_difficulty = {
        bucket: sum(flags) / len(flags) for bucket, flags in by_bucket.items() if flags
    }
    evaluated = sum(len(flags) for flags in by_bucket.values())
    matches = sum(sum(flags) for flags in by_bucket.values())
    ea_total = matches / evaluated if evaluated else 0.0
    return ea_by_difficulty, ea_total, evaluated, matches


def run_benchmark(
    spec: DatasetSpec,
    provider,
    cfg: PipelineConfig,
    mode: str = "hisql",
    comparison_mode: str | None = None,
    workers: int = 1,
    failure_log: FailureLog | None = None,
    hints_dir: str | Path | None = None,
    template_dir: str | Path | None = None,
    ledger: CallLedger | None = None,
) -> RunReport:
    """Split, curate (hisql mode), answer every test item, and aggregate EA.

    Per-item failures land in the item's record; the run itself never aborts
    on them.
    """
    if mode not in ("baseline", "hisql"):
        raise ValueError(f"unknown benchmark mode: {mode!r}")
    comparison = comparison_mode or cfg.comparison_mode
    ledger = ledger or CallLedger()
    load = load_dataset(spec)
    history, test = split_hint_history(load.items, cfg.split_ratio, cfg.seed)
    failure_log = failure_log or FailureLog(None)
    limits = ExecLimits(timeout_ms=cfg.exec_timeout_ms, row_cap=cfg.row_cap)

    db_ids = sorted({item.query.db_id for item in load.items})
    databases = {
        db_id: DatabaseProfile(db_id=db_id, file_path=str(resolve_db_path(spec.db_root, db_id)))
        for db_id in db_ids
    }

    hint_sets: dict[str, HintSet] = {}
    hints_meta: dict[str, Any] = {}
    for db_id in db_ids:
        db_history = [
            HistoryEntry(id=i.query.id, sql=i.gold_sql, question=i.query.question)
            for i in history
            if i.query.db_id == db_id
        ]
        if mode == "hisql" and db_history:
            hint_set = curate_hints(
                databases[db_id], db_history, provider, cfg, ledger, template_dir
            )
        else:
            hint_set = HintSet.empty(db_id)
        hint_sets[db_id] = hint_set
        if hints_dir and mode == "hisql":
            save_hint_set(hint_set, Path(hints_dir) / f"{db_id}.json")
        hints_meta[db_id] = {
            "hints": len(hint_set.serializable_hints()),
            "proposed": len(hint_set.hints),
            "repair_calls": hint_set.repair_calls(),
            "source_query_ids": sorted(hint_set.source_query_ids),
        }

    ordered_test = sorted(test, key=lambda it: it.query.id)

    def task(item: BenchmarkItem) -> ItemRecord:
        return _run_one(
            item, databases[item.query.db_id], hint_sets[item.query.db_id],
            provider, cfg, ledger, failure_log, limits, comparison, template_dir,
        )

    if workers > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(task, ordered_test))
    else:
        records = [task(item) for item in ordered_test]
    records.sort(key=lambda r: r.item_id)

    ea_by_difficulty, ea_total, evaluated, matches = aggregate_accuracy(records)
    hint_repair_calls = sum(hs.repair_calls() for hs in hint_sets.values())
    counts = ledger.snapshot()
    bound = check_call_bound(
        counts, len(ordered_test), cfg.max_repairs, hint_repair_calls, len(db_ids)
    )
    return RunReport(
        mode=mode,
        records=tuple(records),
        ea_by_difficulty=ea_by_difficulty,
        ea_total=ea_total,
        evaluated=evaluated,
        matches=matches,
        ledger=counts,
        config=cfg,
        hints_meta=hints_meta,
        bound_check=bound,
        dataset_meta={
            "path": str(spec.path),
            "db_root": str(spec.db_root),
            "items": len(load.items),
            "rejected_records": load.rejected,
            "history_items": len(history),
            "test_items": len(ordered_test),
            "databases": db_ids,
            "comparison_mode": comparison,
            "workers": workers,
        },
        generated_at=datetime.now(timezone.utc).isoformat(),
    )


def _pct(value: float | None) -> str:
    return f"{value * 100:.2f}%" if value is not None else "-"


def render_report_markdown(report: RunReport) -> str:
    """Execution-accuracy table by difficulty plus the call-ledger section."""
    buckets = [d for d in DIFFICULTIES if d != "unknown"]
    show_unknown = any(r.difficulty == "unknown" for r in report.records)
    if show_unknown:
        buckets.append("unknown")
    header = "| Mode | " + " | ".join(b.capitalize() for b in buckets) + " | Total |"
    divider = "|" + " --- |" * (len(buckets) + 2)
    cells = [_pct(report.ea_by_difficulty.get(b)) for b in buckets]
    row = f"| {report.mode} | " + " | ".join(cells) + f" | {_pct(report.ea_total)} |"

    bucket_counts: dict[str, int] = {}
    for record in report.records:
        bucket_counts[record.difficulty] = bucket_counts.get(record.difficulty, 0) + 1
    count_line = ", ".join(f"{b}: {bucket_counts.get(b, 0)}" for b in buckets)

    ledger_lines = "\n".join(
        f"- {purpose}: {count}" for purpose, count in sorted(report.ledger.items())
    )
    bound = report.bound_check
    lines = [
        "# Benchmark report",
        "",
        "## Execution accuracy",
        "",
        header,
        divider,
        row,
        "",
        f"Records per bucket: {count_line}",
        f"Evaluated: {report.evaluated} (matches: {report.matches}; "
        f"{len(report.records) - report.evaluated} excluded for gold errors)",
        "",
        "## LLM calls",
        "",
        ledger_lines,
        f"- total: {sum(report.ledger.values())}",
        "",
        f"Call accounting: {'ok' if bound.get('ok') else 'VIOLATED'}; "
        f"repair-call bound C*N + S = {bound.get('cost_bound')} "
        f"(C={bound.get('max_repairs')}, N={bound.get('n_items')}, "
        f"S={bound.get('hint_repair_calls')})",
    ]
    if bound.get("problems"):
        lines.append("")
        lines.extend(f"- problem: {p}" for p in bound["problems"])
    lines += [
        "",
        "## Run parameters",
        "",
        f"- mode: {report.mode}",
        f"- dataset: {report.dataset_meta.get('path')}",
        f"- comparison mode: {report.dataset_meta.get('comparison_mode')}",
        f"- seed: {report.config.seed}",
        f"- split ratio: {report.config.split_ratio}",
        f"- generated at: {report.generated_at}",
        "",
    ]
    return "\n".join(lines)


def write_report(report: RunReport, report_dir: str | Path) -> tuple[Path, Path]:
    out = Path(report_dir)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "report.json"
    md_path = out / "report.md"
    json_path.write_text(report_json_text(report), encoding="utf-8")
    md_path.write_text(render_report_markdown(report), encoding="utf-8")
    return json_path, md_path
