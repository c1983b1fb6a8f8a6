"""Hint-conditioned text-to-SQL with execution-based verification."""

from .bench import (
    DatasetSpec,
    FieldMap,
    check_call_bound,
    load_dataset,
    run_benchmark,
    split_hint_history,
    write_report,
)
from .dbruntime import (
    EAOutcome,
    ExecError,
    ExecLimits,
    ea_match,
    execute_readonly,
    extract_ddl,
    normalize,
    results_match,
)
from .hints import HistoryEntry, curate_hints, repair_hint, validate_hint
from .llm import (
    ChatRequest,
    HttpProvider,
    RecordingProvider,
    ReplayProvider,
    ScriptedProvider,
    complete,
    extract_sql,
    load_template,
    provider_from_config,
    render_prompt,
)
from .model import (
    Attempt,
    BenchmarkItem,
    CallLedger,
    DatabaseProfile,
    Exhausted,
    Hint,
    HintSet,
    ItemRecord,
    NLQuery,
    PipelineConfig,
    ResultTable,
    RunReport,
    SchemaText,
    Success,
    difficulty_bucket,
)
from .pipeline import AnswerRecord, FailureLog, answer, generate_sql, verify_and_repair

__version__ = "0.1.0"
