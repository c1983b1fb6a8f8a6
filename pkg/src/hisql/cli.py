"""Command-line entry points. Every command is a thin composition over the
library modules; no pipeline logic lives here.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import click

from .appconfig import AppConfig, ConfigError, load_app_config
from .bench import DatasetError, run_benchmark, write_report
from .dbruntime import ExecLimits, extract_ddl
from .hints import (
    CurationError,
    HistoryEntry,
    curate_hints,
    curation_stats,
    load_hint_set,
    save_hint_set,
    validate_hint,
)
from .llm import ProviderError, provider_from_config
from .model import (
    CallLedger,
    DatabaseProfile,
    HintSet,
    NLQuery,
    ResultTable,
    Success,
)
from .pipeline import FailureLog, answer, build_generation_request



def _fail(message: str) -> None:
    click.echo(f"error: {message}", err=True)


def _load_config(config_path: str | None) -> AppConfig:
    try:
        return load_app_config(config_path)
    except ConfigError as exc:
        _fail(str(exc))
        raise click.exceptions.Exit(2)


def _database(config: AppConfig, db_id: str) -> DatabaseProfile:
    entry = config.database(db_id)
    if entry is None:
        _fail(f"unknown db_id: {db_id!r} (registered: "
              f"{', '.join(e.db_id for e in config.databases) or 'none'})")
        raise click.exceptions.Exit(2)
    return DatabaseProfile(db_id=entry.db_id, file_path=entry.file_path)


def _render_table(result: ResultTable, limit: int = 50) -> str:
    from .dbruntime import canonical_cell

    rows = [[canonical_cell(v) for v in row] for row in result.rows[:limit]]
    headers = list(result.columns)
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(cell))
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)).rstrip(),
        "  ".join("-" * w for w in widths),
    ]
    lines += ["  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip() for row in rows]
    if len(result.rows) > limit:
        lines.append(f"... ({len(result.rows)} rows total)")
    return "\n".join(lines)


@click.group()
@click.option("--verbose", is_flag=True, help="Enable debug logging.")
def cli(verbose: bool) -> None:
    """Natural-language-to-SQL with curated hints and execution verification."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )


@cli.command()
@click.argument("db_id")
@click.option("--history", "history_file", required=True, type=click.Path(), help="JSON array of historical queries.")
@click.option("--out", "out_path", type=click.Path(), default=None, help="Hint file destination (default: hints dir).")
@click.option("--config", "config_path", default=None, help="Config file path.")
def curate(db_id: str, history_file: str, out_path: str | None, config_path: str | None) -> None:
    """Curate hints for DB_ID from a historical-query file."""
    config = _load_config(config_path)
    db = _database(config, db_id)
    history_path = Path(history_file)
    if not history_path.is_file():
        _fail(f"history file missing: {history_path}")
        raise click.exceptions.Exit(2)
    raw = json.loads(history_path.read_text(encoding="utf-8"))
    history = [
        HistoryEntry(
            id=str(entry.get("id", f"h{i:04d}")),
            sql=entry["sql"],
            question=entry.get("question"),
        )
        for i, entry in enumerate(raw)
    ]
    provider = provider_from_config(config.provider)
    ledger = CallLedger()
    try:
        hint_set = curate_hints(
            db, history, provider, config.pipeline, ledger, config.template_dir
        )
    except (CurationError, ProviderError) as exc:
        _fail(str(exc))
        raise click.exceptions.Exit(1)
    destination = Path(out_path) if out_path else config.hints_path_for(db_id)
    save_hint_set(hint_set, destination)
    stats = curation_stats(hint_set)
    click.echo(f"hints written to {destination}")
    click.echo(
        "counts: " + ", ".join(f"{k}={v}" for k, v in stats.items())
    )
    click.echo("ledger: " + json.dumps(ledger.snapshot(), sort_keys=True))


@cli.command()
@click.argument("db_id")
@click.argument("question")
@click.option("--no-hints", is_flag=True, help="Baseline mode: generate without hints.")
@click.option("--dump-prompt", is_flag=True, help="Print the generation prompt and exit without calling the model.")
@click.option("--config", "config_path", default=None, help="Config file path.")
def ask(db_id: str, question: str, no_hints: bool, dump_prompt: bool, config_path: str | None) -> None:
    """Answer a natural-language QUESTION against DB_ID."""
    config = _load_config(config_path)
    db = _database(config, db_id)
    hints = HintSet.empty(db_id)
    hints_path = config.hints_path_for(db_id)
    if not no_hints and hints_path.is_file():
        hints = load_hint_set(hints_path, db_id)
    query = NLQuery(id="cli", db_id=db_id, question=question)

    if dump_prompt:
        schema = extract_ddl(db)
        request = build_generation_request(
            schema, hints, query, config.pipeline, config.template_dir
        )
        click.echo(request.messages[0]["content"])
        return

    provider = provider_from_config(config.provider)
    ledger = CallLedger()
    failure_log = FailureLog(config.failure_log)
    try:
        record = answer(
            provider, db, hints, query, config.pipeline, ledger, failure_log,
            config.template_dir,
        )
    except ProviderError as exc:
        _fail(f"provider failure: {exc}")
        raise click.exceptions.Exit(1)
    for attempt in record.attempts:
        status = "ok" if attempt.outcome == "success" else f"{attempt.error_kind}: {attempt.error}"
        click.echo(f"attempt {attempt.index} ({attempt.latency_ms} ms): {status}")
    click.echo("final SQL:")
    click.echo(record.final_sql)
    if isinstance(record.outcome, Success):
        click.echo(_render_table(record.outcome.result))
        click.echo("ledger: " + json.dumps(ledger.snapshot(), sort_keys=True))
    else:
        click.echo(f"no executable SQL after {len(record.attempts)} attempts; "
                   f"failure logged to {config.failure_log}")
        raise click.exceptions.Exit(1)


@cli.command()
@click.option("--config", "config_path", default=None, help="Config file with a dataset section.")
@click.option("--mode", type=click.Choice(["baseline", "hisql"]), default=None, help="Override the configured mode.")
@click.option("--seed", type=int, default=None, help="Override the split seed.")
@click.option("--workers", type=int, default=None, help="Parallel item workers.")
@click.option("--report-dir", default=None, help="Where report.json/report.md go.")
def bench(config_path: str | None, mode: str | None, seed: int | None,
          workers: int | None, report_dir: str | None) -> None:
    """Run the execution-accuracy benchmark defined in the config."""
    config = _load_config(config_path)
    if config.dataset is None:
        _fail("config has no dataset section")
        raise click.exceptions.Exit(2)
    pipeline_cfg = config.pipeline
    if seed is not None:
        from dataclasses import replace

        pipeline_cfg = replace(pipeline_cfg, seed=seed)
    provider = provider_from_config(config.provider)
    try:
        report = run_benchmark(
            config.dataset,
            provider,
            pipeline_cfg,
            mode=mode or config.mode,
            workers=workers or config.workers,
            failure_log=FailureLog(config.failure_log),
            hints_dir=config.hints_dir,
            template_dir=config.template_dir,
        )
    except DatasetError as exc:
        _fail(str(exc))
        raise click.exceptions.Exit(2)
    except (CurationError, ProviderError) as exc:
        # run-level failure before or during curation; item failures never land here
        _fail(str(exc))
        raise click.exceptions.Exit(1)
    json_path, md_path = write_report(report, report_dir or config.report_dir)
    click.echo(f"report written to {json_path} and {md_path}")
    click.echo(f"EA total: {report.ea_total:.4f} "
               f"({report.matches}/{report.evaluated} evaluated, mode={report.mode})")
    click.echo("ledger: " + json.dumps(report.ledger, sort_keys=True))


@cli.command()
@click.option("--config", "config_path", default=None, help="Config file path.")
@click.option("--host", default=None, help="Bind address override.")
@click.option("--port", type=int, default=None, help="Port override.")
def serve(config_path: str | None, host: str | None, port: int | None) -> None:
    """Serve the HTTP API (and the console, when built)."""
    import uvicorn

    from .server import create_app

    config = _load_config(config_path)
    app = create_app(config)
    uvicorn.run(app, host=host or config.host, port=port or config.port)


@cli.command("verify-hints")
@click.argument("db_id")
@click.option("--hints", "hints_path", type=click.Path(), default=None, help="Hint file (default: configured path).")
@click.option("--config", "config_path", default=None, help="Config file path.")
def verify_hints(db_id: str, hints_path: str | None, config_path: str | None) -> None:
    """Re-execute every stored hint for DB_ID against its database."""
    config = _load_config(config_path)
    db = _database(config, db_id)
    path = Path(hints_path) if hints_path else config.hints_path_for(db_id)
    if not path.is_file():
        _fail(f"hint file missing: {path}")
        raise click.exceptions.Exit(2)
    hint_set = load_hint_set(path, db_id)
    limits = ExecLimits(
        timeout_ms=config.pipeline.exec_timeout_ms, row_cap=config.pipeline.row_cap
    )
    failures = 0
    for i, hint in enumerate(hint_set.serializable_hints()):
        error = validate_hint(db, hint, limits)
        if error is None:
            click.echo(f"hint {i}: ok: {hint.description}")
        else:
            failures += 1
            click.echo(f"hint {i}: FAIL ({error.kind}: {error.message}): {hint.description}")
    if failures:
        _fail(f"{failures} hint(s) no longer execute")
        raise click.exceptions.Exit(1)
    click.echo(f"all {len(hint_set.serializable_hints())} hints execute cleanly")


if __name__ == "__main__":
    cli()
