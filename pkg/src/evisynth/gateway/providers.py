"""Live providers behind the gateway, selected via environment variables.

LLM_PROVIDER  mock | openai-compatible | bedrock-compatible   (default mock)
LLM_API_KEY   bearer/API key for live providers
LLM_MODEL     model name passed through to the wire format
LLM_BASE_URL  API root, e.g. https://api.example.com/v1
"""

from __future__ import annotations

import json
import os
from typing import Mapping, Protocol

import httpx

from .errors import AuthFailure, BudgetExceeded, ProviderUnavailable, TransportFailure
from .gateway import CompletionRequest, MockProvider
from .templates import TemplateRegistry


class Provider(Protocol):  # pragma: no cover - typing surface
    name: str

    def complete(self, request: CompletionRequest) -> str: ...


def _raise_for_status(status: int, body: str) -> None:
    if status in (401, 403):
        raise AuthFailure(f"provider rejected credentials (HTTP {status})")
    if status == 429 or status >= 500:
        raise TransportFailure(f"HTTP {status}")  # transient: gateway retries
    if status == 400 and ("context" in body.lower() or "token" in body.lower()):
        raise BudgetExceeded(body[:200])
    if status >= 400:
        raise ProviderUnavailable(f"HTTP {status}: {body[:200]}")


class OpenAICompatibleProvider:
    """Chat-completions wire format (POST {base}/chat/completions)."""

    name = "openai-compatible"

    def __init__(self, base_url: str, model: str, api_key: str = "", timeout: float = 120.0):
        self._base = base_url.rstrip("/")
        self._model = model
        self._api_key = api_key
        self._timeout = timeout

    def complete(self, request: CompletionRequest) -> str:
        payload: dict = {
            "model": self._model,
            "messages": [{"role": "user", "content": request.rendered_prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        }
        if request.seed_hint is not None:
            payload["seed"] = request.seed_hint
        headers = {"Authorization": f"Bearer {self._api_key}"} if self._api_key else {}
        try:
            resp = httpx.post(
                f"{self._base}/chat/completions", json=payload, headers=headers, timeout=self._timeout
            )
        except httpx.HTTPError as exc:
            raise TransportFailure(str(exc)) from exc
        _raise_for_status(resp.status_code, resp.text)
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, json.JSONDecodeError) as exc:
            raise ProviderUnavailable(f"malformed provider response: {exc}") from exc


class BedrockCompatibleProvider:
    """Messages wire format (POST {base}/model/{model}/invoke)."""

    name = "bedrock-compatible"

    def __init__(self, base_url: str, model: str, api_key: str = "", timeout: float = 120.0):
        self._base = base_url.rstrip("/")
        self._model = model
        self._api_key = api_key
        self._timeout = timeout

    def complete(self, request: CompletionRequest) -> str:
        payload = {
            "messages": [{"role": "user", "content": request.rendered_prompt}],
            "temperature": request.temperature,
            "max_tokens": request.max_output,
        }
        headers = {"Authorization": f"Bearer {self._api_key}"} if self._api_key else {}
        try:
            resp = httpx.post(
                f"{self._base}/model/{self._model}/invoke",
                json=payload,
                headers=headers,
                timeout=self._timeout,
            )
        except httpx.HTTPError as exc:
            raise TransportFailure(str(exc)) from exc
        _raise_for_status(resp.status_code, resp.text)
        try:
            body = resp.json()
            return "".join(part["text"] for part in body["content"] if part.get("type") == "text")
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise ProviderUnavailable(f"malformed provider response: {exc}") from exc


def provider_from_env(
    env: Mapping[str, str] | None = None, registry: TemplateRegistry | None = None
) -> Provider:
    env = os.environ if env is None else env
    kind = env.get("LLM_PROVIDER", "mock")
    if kind == "mock":
        return MockProvider(registry)
    base_url = env.get("LLM_BASE_URL", "")
    model = env.get("LLM_MODEL", "")
    api_key = env.get("LLM_API_KEY", "")
    if not base_url or not model:
        raise ProviderUnavailable(f"provider {kind!r} needs LLM_BASE_URL and LLM_MODEL")
    if kind == "openai-compatible":
        return OpenAICompatibleProvider(base_url, model, api_key)
    if kind == "bedrock-compatible":
        return BedrockCompatibleProvider(base_url, model, api_key)
    raise ProviderUnavailable(f"unknown LLM_PROVIDER {kind!r}")
