"""The completion gateway: single audited path for all LLM traffic.

Every call renders a registered template, goes through ``Gateway.complete``
(bounded concurrency, retry with exponential backoff on transient transport
failures), and leaves exactly one transcript entry — including terminal
failures, which are recorded with ``error`` set. Transcripts are JSON-lines
files; replaying one through the mock provider reproduces the original
completions byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field

from .errors import (
    AuthFailure,
    BudgetExceeded,
    DuplicateScriptKey,
    ProviderUnavailable,
    TransportFailure,
    UnscriptedPrompt,
)
from .templates import TemplateRegistry, default_registry


def fingerprint(rendered_prompt: str) -> str:
    """Stable hash identifying a rendered prompt."""
    return hashlib.sha256(rendered_prompt.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class CompletionRequest:
    template_id: str
    rendered_prompt: str
    temperature: float = 0.0
    max_output: int = 4096
    seed_hint: int | None = None

    def __post_init__(self):
        if not self.rendered_prompt:
            raise ValueError("rendered_prompt must be non-empty")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError(f"temperature must be in [0, 1], got {self.temperature}")
        if self.max_output < 1:
            raise ValueError("max_output must be >= 1")


@dataclass(frozen=True)
class TranscriptEntry:
    timestamp: float
    template_id: str
    fingerprint: str
    response: str
    provider: str
    latency_ms: float
    error: str | None = None

    def to_dict(self) -> dict:
        return {
            "timestamp": self.timestamp,
            "template_id": self.template_id,
            "fingerprint": self.fingerprint,
            "response": self.response,
            "provider": self.provider,
            "latency_ms": self.latency_ms,
            "error": self.error,
        }

    @classmethod
    def from_dict(cls, data: dict) -> TranscriptEntry:
        return cls(
            timestamp=data["timestamp"],
            template_id=data["template_id"],
            fingerprint=data["fingerprint"],
            response=data["response"],
            provider=data["provider"],
            latency_ms=data["latency_ms"],
            error=data.get("error"),
        )


class MockProvider:
    """Deterministic provider scripted by exact (template_id, fingerprint).

    Unscripted prompts fail loudly with UnscriptedPrompt — there are no
    canned defaults, so a test or replay that drifts from its script is
    immediately visible.
    """

    name = "mock"

    def __init__(self, registry: TemplateRegistry | None = None):
        self._registry = registry or default_registry()
        self._script: dict[tuple[str, str], str] = {}

    def script(self, template_id: str, key: str | dict[str, str], response: str) -> None:
        """Add one entry. ``key`` is either a prompt fingerprint or a slot
        map (rendered against the template to compute the fingerprint)."""
        if isinstance(key, dict):
            fp = fingerprint(self._registry.render(template_id, key))
        else:
            fp = key
        existing = self._script.get((template_id, fp))
        if existing is not None and existing != response:
            raise DuplicateScriptKey((template_id, fp))
        self._script[(template_id, fp)] = response

    def complete(self, request: CompletionRequest) -> str:
        fp = fingerprint(request.rendered_prompt)
        try:
            return self._script[(request.template_id, fp)]
        except KeyError:
            raise UnscriptedPrompt(request.template_id, fp) from None


def mock_script(
    provider: MockProvider, entries: list[tuple[str, str | dict[str, str], str]]
) -> MockProvider:
    """Script several entries at once; identical duplicates collapse,
    conflicting ones raise DuplicateScriptKey."""
    for template_id, key, response in entries:
        provider.script(template_id, key, response)
    return provider


class Gateway:
    """Thread-safe completion front door with an append-only transcript."""

    def __init__(
        self,
        provider,
        *,
        transcript_path: str | os.PathLike | None = None,
        max_in_flight: int = 8,
        max_attempts: int = 3,
        backoff_base: float = 0.05,
        clock=time.time,
        sleep=time.sleep,
    ):
        self.provider = provider
        self.transcript: list[TranscriptEntry] = []
        self._transcript_path = os.fspath(transcript_path) if transcript_path else None
        self._sem = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self._max_attempts = max_attempts
        self._backoff_base = backoff_base
        self._clock = clock
        self._sleep = sleep

    def complete(self, request: CompletionRequest) -> str:
        """Run one completion. Exactly one TranscriptEntry per call."""
        started = self._clock()
        try:
            with self._sem:
                response = self._attempt(request)
        except Exception as exc:
            self._record(request, "", started, error=f"{type(exc).__name__}: {exc}")
            raise
        if len(response.split()) > request.max_output:
            self._record(request, "", started, error="BudgetExceeded")
            raise BudgetExceeded(
                f"response of {len(response.split())} tokens exceeds max_output={request.max_output}"
            )
        self._record(request, response, started)
        return response

    def _attempt(self, request: CompletionRequest) -> str:
        last: TransportFailure | None = None
        for attempt in range(self._max_attempts):
            try:
                return self.provider.complete(request)
            except TransportFailure as exc:
                last = exc
                if attempt + 1 < self._max_attempts:
                    self._sleep(self._backoff_base * (2**attempt))
        raise ProviderUnavailable(f"transport failed after {self._max_attempts} attempts: {last}")

    def _record(self, request: CompletionRequest, response: str, started: float, error: str | None = None):
        entry = TranscriptEntry(
            timestamp=started,
            template_id=request.template_id,
            fingerprint=fingerprint(request.rendered_prompt),
            response=response,
            provider=getattr(self.provider, "name", type(self.provider).__name__),
            latency_ms=(self._clock() - started) * 1000.0,
            error=error,
        )
        with self._lock:
            self.transcript.append(entry)
            if self._transcript_path:
                with open(self._transcript_path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(entry.to_dict(), ensure_ascii=False) + "\n")


def load_transcript(path: str | os.PathLike) -> list[TranscriptEntry]:
    entries = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entries.append(TranscriptEntry.from_dict(json.loads(line)))
    return entries


def provider_from_transcript(
    entries: list[TranscriptEntry], registry: TemplateRegistry | None = None
) -> MockProvider:
    """Mock provider scripted from a recorded transcript (error entries are
    skipped). Replaying it reproduces the original completions exactly."""
    provider = MockProvider(registry)
    for entry in entries:
        if entry.error is None:
            provider.script(entry.template_id, entry.fingerprint, entry.response)
    return provider
