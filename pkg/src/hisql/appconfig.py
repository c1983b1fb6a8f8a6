"""Application configuration: the database registry, provider binding,
pipeline settings, and server/benchmark options, loaded from one JSON file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .bench import DatasetSpec, FieldMap
from .model import PipelineConfig

CONFIG_ENV_VAR = "HISQL_CONFIG"


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class DatabaseEntry:
    db_id: str
    file_path: str
    hints_path: str | None = None


@dataclass(frozen=True)
class AppConfig:
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    provider: dict[str, Any] = field(default_factory=dict)
    databases: tuple[DatabaseEntry, ...] = ()
    host: str = "127.0.0.1"
    port: int = 8000
    failure_log: str = "failures.jsonl"
    hints_dir: str = "hints"
    template_dir: str | None = None
    static_dir: str | None = None
    dataset: DatasetSpec | None = None
    mode: str = "hisql"
    workers: int = 1
    report_dir: str = "reports"

    def database(self, db_id: str) -> DatabaseEntry | None:
        for entry in self.databases:
            if entry.db_id == db_id:
                return entry
        return None

    def hints_path_for(self, db_id: str) -> Path:
        entry = self.database(db_id)
        if entry and entry.hints_path:
            return Path(entry.hints_path)
        return Path(self.hints_dir) / f"{db_id}.json"


def _resolve(base: Path, value: str | None) -> str | None:
    if value is None:
        return None
    path = Path(value)
    return str(path if path.is_absolute() else base / path)


def load_app_config(path: str | Path | None = None) -> AppConfig:
    """Load and validate a config file; relative paths resolve against it.

    The path may come from the CLI flag or the HISQL_CONFIG environment
    variable. Database ids must be unique and their files must exist.
    """
    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR)
    if path is None:
        raise ConfigError(
            f"no config file given (flag --config or ${CONFIG_ENV_VAR})"
        )
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file missing: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    base = path.parent.resolve()

    try:
        pipeline = PipelineConfig.from_dict(raw.get("pipeline", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad pipeline config: {exc}") from exc

    databases: list[DatabaseEntry] = []
    seen: set[str] = set()
    for entry in raw.get("databases", []):
        db_id = entry.get("db_id")
        file_path = _resolve(base, entry.get("file_path"))
        if not db_id or not file_path:
            raise ConfigError(f"database entries need db_id and file_path: {entry}")
        if db_id in seen:
            raise ConfigError(f"duplicate db_id in registry: {db_id!r}")
        seen.add(db_id)
        if not Path(file_path).is_file():
            raise ConfigError(f"database file missing for {db_id!r}: {file_path}")
        databases.append(
            DatabaseEntry(
                db_id=db_id,
                file_path=file_path,
                hints_path=_resolve(base, entry.get("hints_path")),
            )
        )

    provider = dict(raw.get("provider", {}))
    if provider.get("kind") == "replay":
        provider["session"] = _resolve(base, provider.get("session"))
    if provider.get("record_to"):
        provider["record_to"] = _resolve(base, provider["record_to"])

    dataset = None
    if "dataset" in raw:
        ds = raw["dataset"]
        try:
            field_map = FieldMap.from_dict(ds.get("field_map", {}))
        except TypeError as exc:
            raise ConfigError(f"bad dataset field_map: {exc}") from exc
        dataset = DatasetSpec(
            path=_resolve(base, ds["path"]),
            db_root=_resolve(base, ds["db_root"]),
            field_map=field_map,
        )

    server = raw.get("server", {})
    return AppConfig(
        pipeline=pipeline,
        provider=provider,
        databases=tuple(databases),
        host=server.get("host", "127.0.0.1"),
        port=int(server.get("port", 8000)),
        failure_log=_resolve(base, raw.get("failure_log", "failures.jsonl")),
        hints_dir=_resolve(base, raw.get("hints_dir", "hints")),
        template_dir=_resolve(base, raw.get("template_dir")),
        static_dir=_resolve(base, raw.get("static_dir")),
        dataset=dataset,
        mode=raw.get("mode", "hisql"),
        workers=int(raw.get("workers", 1)),
        report_dir=_resolve(base, raw.get("report_dir", "reports")),
    )
