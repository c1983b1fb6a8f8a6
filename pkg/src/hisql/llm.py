"""Uniform interface to language models.

Three provider bindings share one call surface: an OpenAI-compatible HTTP
chat-completions client, a deterministic scripted provider for offline tests,
and a replay provider that serves a recorded session. Prompt templating, SQL
extraction from model text, and call-ledger instrumentation live here too.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Any, Mapping, Sequence

import requests

from .model import (
    CallLedger,
    PURPOSES,
    PURPOSE_GENERATION,
    PURPOSE_HINT_CURATION,
    PURPOSE_HINT_REPAIR,
    PURPOSE_REPAIR,
)

logger = logging.getLogger(__name__)

ROLES = ("system", "user", "assistant")

TEMPLATE_NAMES = ("hint_curation", "hint_repair", "generation", "sql_repair")

# Which ledger purpose each template's calls are booked under.
TEMPLATE_PURPOSE = {
    "hint_curation": PURPOSE_HINT_CURATION,
    "hint_repair": PURPOSE_HINT_REPAIR,
    "generation": PURPOSE_GENERATION,
    "sql_repair": PURPOSE_REPAIR,
}

PLACEHOLDERS = (
    "schema",
    "hints",
    "question",
    "evidence",
    "failed_sql",
    "error",
    "history",
    "target_count",
)

_PLACEHOLDER_RE = re.compile(r"\{(" + "|".join(PLACEHOLDERS) + r")\}")
_FENCE_RE = re.compile(r"```([^\n`]*)\n(.*?)```", re.DOTALL)
_SQL_START_RE = re.compile(r"\b(select|with)\b", re.IGNORECASE)


class ProviderError(Exception):
    """Transport or binding failure while obtaining a completion."""


class TranscriptExhausted(ProviderError):
    pass


class TranscriptMismatch(ProviderError):
    pass


class ReplayDivergence(ProviderError):
    """The replayed request does not appear in the recorded session."""


class MissingPlaceholderError(ValueError):
    pass


class EmptyModelOutput(ValueError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[Mapping[str, str], ...]
    temperature: float
    purpose: str
    model: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a chat request needs at least one message")
        for msg in self.messages:
            if msg.get("role") not in ROLES:
                raise ValueError(f"unknown message role: {msg.get('role')!r}")
        if self.purpose not in PURPOSES:
            raise ValueError(f"unknown ledger purpose: {self.purpose!r}")

    def text(self) -> str:
        return "\n".join(m["content"] for m in self.messages)


def request_digest(req: ChatRequest) -> str:
    """Stable digest of what would go over the wire; keys record/replay."""
    payload = {
        "messages": [dict(m) for m in req.messages],
        "temperature": req.temperature,
        "model": req.model,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ScriptedProvider:
    """Canned transcript consumed strictly in order.

    Each entry is {"response": str} with an optional "match" substring that
    must appear in the request text; a mismatch means the test scenario has
    diverged from its script and fails loudly.
    """

    def __init__(self, transcript: Sequence[Mapping[str, Any] | tuple]) -> None:
        entries = []
        for entry in transcript:
            if isinstance(entry, Mapping):
                entries.append((entry.get("match"), str(entry["response"])))
            else:
                match, response = entry
                entries.append((match, str(response)))
        self._entries = entries
        self._next = 0
        self._lock = threading.Lock()

    @property
    def consumed(self) -> int:
        return self._next

    def send(self, req: ChatRequest) -> str:
        with self._lock:
            if self._next >= len(self._entries):
                raise TranscriptExhausted(
                    f"scripted transcript exhausted after {len(self._entries)} calls"
                )
            match, response = self._entries[self._next]
            if match is not None and match not in req.text():
                raise TranscriptMismatch(
                    f"transcript entry {self._next} expects {match!r} in the request"
                )
            self._next += 1
            return response


class ReplayProvider:
    """Serves responses recorded by RecordingProvider, keyed by request digest."""

    def __init__(self, session_file: str | Path) -> None:
        raw = json.loads(Path(session_file).read_text(encoding="utf-8"))
        self._responses: dict[str, list[str]] = {}
        for entry in raw:
            self._responses.setdefault(entry["request_digest"], []).append(
                entry["response_text"]
            )
        self._lock = threading.Lock()
        self._session_file = str(session_file)

    def send(self, req: ChatRequest) -> str:
        digest = request_digest(req)
        with self._lock:
            queue = self._responses.get(digest)
            if not queue:
                raise ReplayDivergence(
                    f"request {digest[:12]}… not found in recording {self._session_file}"
                )
            return queue.pop(0)


class RecordingProvider:
    """Wraps any provider and persists (digest, response) pairs for replay."""

    def __init__(self, inner, session_file: str | Path) -> None:
        self._inner = inner
        self._path = Path(session_file)
        self._entries: list[dict[str, str]] = []
        self._lock = threading.Lock()

    def send(self, req: ChatRequest) -> str:
        response = self._inner.send(req)
        with self._lock:
            self._entries.append(
                {"request_digest": request_digest(req), "response_text": response}
            )
            self._path.write_text(
                json.dumps(self._entries, indent=2, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )
        return response


class HttpProvider:
    """OpenAI-compatible chat-completions client.

    Transport-level retries (connection errors, 429, 5xx) happen internally
    with exponential backoff and are NOT extra ledger entries: the ledger
    counts logical pipeline calls, not network attempts.
    """

    RETRYABLE_STATUS = (429, 500, 502, 503, 504)

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key_env: str = "OPENAI_API_KEY",
        timeout_s: float = 120.0,
        transport_attempts: int = 3,
        backoff_s: float = 0.5,
        session: requests.Session | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s
        self.transport_attempts = transport_attempts
        self.backoff_s = backoff_s
        self._session = session or requests.Session()

    def send(self, req: ChatRequest) -> str:
        url = f"{self.base_url}/chat/completions"
        payload = {
            "model": req.model or self.model,
            "messages": [dict(m) for m in req.messages],
            "temperature": req.temperature,
        }
        headers = {}
        api_key = os.environ.get(self.api_key_env)
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        last_error: Exception | None = None
        for attempt in range(self.transport_attempts):
            if attempt:
                time.sleep(self.backoff_s * 2 ** (attempt - 1))
            try:
                resp = self._session.post(
                    url, json=payload, headers=headers, timeout=self.timeout_s
                )
                if resp.status_code in self.RETRYABLE_STATUS:
                    last_error = ProviderError(
                        f"HTTP {resp.status_code} from {url}: {resp.text[:200]}"
                    )
                    logger.warning("retryable provider response: %s", last_error)
                    continue
                resp.raise_for_status()
                data = resp.json()
                return data["choices"][0]["message"]["content"]
            except requests.RequestException as exc:
                last_error = exc
                logger.warning("provider transport error (attempt %d): %s", attempt + 1, exc)
            except (KeyError, IndexError, ValueError) as exc:
                raise ProviderError(f"malformed completion payload: {exc}") from exc
        raise ProviderError(
            f"provider failed after {self.transport_attempts} transport attempts: {last_error}"
        ) from last_error


def provider_from_config(config: Mapping[str, Any]):
    """Build a provider binding from its config mapping.

    Kinds: scripted {transcript}, replay {session}, http {base_url, model,
    api_key_env?}. Any binding wrapped with "record_to" persists a session
    file usable by the replay kind.
    """
    kind = config.get("kind")
    if kind == "scripted":
        provider = ScriptedProvider(config["transcript"])
    elif kind == "replay":
        provider = ReplayProvider(config["session"])
    elif kind == "http":
        provider = HttpProvider(
            base_url=config["base_url"],
            model=config.get("model", ""),
            api_key_env=config.get("api_key_env", "OPENAI_API_KEY"),
            timeout_s=float(config.get("timeout_s", 120.0)),
            transport_attempts=int(config.get("transport_attempts", 3)),
        )
    else:
        raise ValueError(f"unknown provider kind: {kind!r}")
    record_to = config.get("record_to")
    if record_to:
        provider = RecordingProvider(provider, record_to)
    return provider


def complete(provider, req: ChatRequest, ledger: CallLedger) -> str:
    """One logical LLM call: exactly one ledger increment per invocation,
    regardless of how the transport fares."""
    ledger.increment(req.purpose)
    return provider.send(req)


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    text: str

    def __post_init__(self) -> None:
        if self.name not in TEMPLATE_NAMES:
            raise ValueError(f"unknown template name: {self.name!r}")

    def placeholders(self) -> set[str]:
        return {m.group(1) for m in _PLACEHOLDER_RE.finditer(self.text)}


def load_template(name: str, template_dir: str | Path | None = None) -> PromptTemplate:
    """Load a prompt template, preferring an override file in template_dir."""
    if name not in TEMPLATE_NAMES:
        raise ValueError(f"unknown template name: {name!r}")
    if template_dir is not None:
        override = Path(template_dir) / f"{name}.txt"
        if override.is_file():
            return PromptTemplate(name=name, text=override.read_text(encoding="utf-8"))
    text = (resources.files("hisql") / "templates" / f"{name}.txt").read_text(
        encoding="utf-8"
    )
    return PromptTemplate(name=name, text=text)


def render_prompt(
    template: PromptTemplate,
    bindings: Mapping[str, Any],
    temperature: float = 0.3,
    model: str = "",
) -> ChatRequest:
    """Substitute placeholders and wrap the text as a single user message.

    Every placeholder present in the template must be bound; rendering is a
    pure function of its inputs.
    """

    def _sub(match: re.Match) -> str:
        key = match.group(1)
        if key not in bindings:
            raise MissingPlaceholderError(
                f"template {template.name!r} needs a binding for {{{key}}}"
            )
        return str(bindings[key])

    content = _PLACEHOLDER_RE.sub(_sub, template.text)
    return ChatRequest(
        messages=({"role": "user", "content": content},),
        temperature=temperature,
        purpose=TEMPLATE_PURPOSE[template.name],
        model=model,
    )


def _strip_trailing_semicolons(sql: str) -> str:
    sql = sql.strip()
    while sql.endswith(";"):
        sql = sql[:-1].rstrip()
    return sql


def extract_sql(model_text: str) -> str:
    """Pull the SQL out of free-form model output.

    Precedence: first fenced code block tagged sql (or untagged); else the
    text from the first SELECT/WITH keyword to the first semicolon or end;
    else the whole trimmed text. The trailing semicolon is stripped.
    """
    if model_text is None or not model_text.strip():
        raise EmptyModelOutput("model returned no usable text")
    for match in _FENCE_RE.finditer(model_text):
        tag = match.group(1).strip().lower()
        if tag in ("", "sql"):
            return _strip_trailing_semicolons(match.group(2))
    keyword = _SQL_START_RE.search(model_text)
    if keyword:
        tail = model_text[keyword.start():]
        semi = tail.find(";")
        if semi != -1:
            tail = tail[:semi]
        return _strip_trailing_semicolons(tail)
    return _strip_trailing_semicolons(model_text)
