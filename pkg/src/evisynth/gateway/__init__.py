"""LLM gateway: templates, structured parsing, providers, transcripts."""

from __future__ import annotations

from .errors import (
    AuthFailure,
    BudgetExceeded,
    DuplicateScriptKey,
    DuplicateSection,
    LlmOutputUnparseable,
    MissingSection,
    MissingSlot,
    ProviderUnavailable,
    TransportFailure,
    UnknownSlot,
    UnknownTemplate,
    UnscriptedPrompt,
)
from .gateway import (
    CompletionRequest,
    Gateway,
    MockProvider,
    TranscriptEntry,
    fingerprint,
    load_transcript,
    mock_script,
    provider_from_transcript,
)
from .providers import (
    BedrockCompatibleProvider,
    OpenAICompatibleProvider,
    Provider,
    provider_from_env,
)
from .structured import StructuredResponse, parse_structured
from .templates import PromptTemplate, TemplateRegistry, default_registry, render_template

__all__ = [
    "AuthFailure",
    "BedrockCompatibleProvider",
    "BudgetExceeded",
    "CompletionRequest",
    "DuplicateScriptKey",
    "DuplicateSection",
    "Gateway",
    "LlmOutputUnparseable",
    "MissingSection",
    "MissingSlot",
    "MockProvider",
    "OpenAICompatibleProvider",
    "PromptTemplate",
    "Provider",
    "ProviderUnavailable",
    "StructuredResponse",
    "TemplateRegistry",
    "TranscriptEntry",
    "TransportFailure",
    "UnknownSlot",
    "UnknownTemplate",
    "UnscriptedPrompt",
    "default_registry",
    "fingerprint",
    "load_transcript",
    "mock_script",
    "parse_structured",
    "provider_from_env",
    "provider_from_transcript",
    "render_template",
]
