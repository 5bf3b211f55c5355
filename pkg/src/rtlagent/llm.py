"""Chat-completion gateway with a main and a light model tier.

Agents and the memory manager only ever talk to a :class:`Gateway`; the
provider behind it is either an OpenAI-compatible HTTP endpoint or a
:class:`MockProvider` driven by a script.
"""

from __future__ import annotations

import json
import logging
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Literal, Protocol, Sequence

import httpx

log = logging.getLogger(__name__)

API_KEY_ENV = "VERIAGENT_API_KEY"
API_BASE_ENV = "VERIAGENT_API_BASE"
DEFAULT_API_BASE = "https://api.openai.com/v1"


class LLMError(RuntimeError):
    pass


class TransportError(LLMError):
    pass


class AuthError(LLMError):
    pass


class EmptyCompletion(LLMError):
    pass


@dataclass(frozen=True)
class ChatMessage:
    role: Literal["system", "user", "assistant"]
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user", "assistant"):
            raise ValueError(f"unknown chat role {self.role!r}")
        if not self.content:
            raise ValueError("chat message content must be non-empty")


@dataclass(frozen=True)
class ProviderProfile:
    name: str
    model_id: str
    temperature: float = 0.8
    max_tokens: int = 4096
    tier: Literal["main", "light"] = "main"

    def __post_init__(self):
        if not 0 <= self.temperature <= 2:
            raise ValueError("temperature must lie in [0, 2]")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")
        if self.tier not in ("main", "light"):
            raise ValueError(f"unknown tier {self.tier!r}")


class Provider(Protocol):
    def complete(self, profile: ProviderProfile, messages: Sequence[ChatMessage]) -> str: ...


def render_prompt(messages: Sequence[ChatMessage]) -> str:
    return "\n\n".join(m.content for m in messages)


# ------------------------------------------------------------------- mock

MATCH_ALL = "*"


@dataclass
class ScriptEntry:
    matcher: str  # substring of the rendered prompt, or "*"
    text: str
    repeat: bool = False  # repeat entries are never consumed

    def matches(self, prompt: str) -> bool:
        return self.matcher == MATCH_ALL or self.matcher in prompt


@dataclass
class CapturedCall:
    profile: ProviderProfile
    messages: tuple[ChatMessage, ...]
    response: str | None

    @property
    def prompt(self) -> str:
        return render_prompt(self.messages)


class MockProvider:
    """Scripted provider: each call answers with the first matching entry.

    Matched entries are consumed in FIFO order unless marked ``repeat``.
    Every call is captured in :attr:`calls` for prompt assertions.
    """

    def __init__(self, script: Iterable[ScriptEntry | tuple] = ()):
        self._entries = [e if isinstance(e, ScriptEntry) else ScriptEntry(*e) for e in script]
        self._lock = threading.Lock()
        self.calls: list[CapturedCall] = []

    @property
    def remaining(self) -> int:
        return len(self._entries)

    def complete(self, profile: ProviderProfile, messages: Sequence[ChatMessage]) -> str:
        prompt = render_prompt(messages)
        with self._lock:
            for i, entry in enumerate(self._entries):
                if entry.matches(prompt):
                    if not entry.repeat:
                        del self._entries[i]
                    self.calls.append(CapturedCall(profile, tuple(messages), entry.text))
                    return entry.text
            self.calls.append(CapturedCall(profile, tuple(messages), None))
        raise EmptyCompletion("mock script has no entry matching this prompt")

    def prompts(self) -> list[str]:
        return [c.prompt for c in self.calls]


def mock_with_script(responses: Iterable[ScriptEntry | tuple]) -> MockProvider:
    return MockProvider(responses)


def load_mock_script(path: str | Path) -> MockProvider:
    """Read a JSON script: a list of ``{"match", "response", "repeat"?}`` objects."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("responses", [])
    if not isinstance(data, list):
        raise ValueError(f"{path}: mock script must be a list of entries")
    entries = []
    for i, item in enumerate(data):
        if not isinstance(item, dict) or "response" not in item:
            raise ValueError(f"{path}: entry {i} needs a 'response' field")
        unknown = set(item) - {"match", "response", "repeat"}
        if unknown:
            raise ValueError(f"{path}: entry {i} has unknown fields {sorted(unknown)}")
        entries.append(ScriptEntry(item.get("match", MATCH_ALL), item["response"], bool(item.get("repeat", False))))
    return MockProvider(entries)


# ------------------------------------------------------------------- http


class OpenAICompatibleProvider:
    """Minimal client for ``POST {base}/chat/completions``."""

    def __init__(self, api_key: str | None = None, api_base: str | None = None, timeout_s: float = 120.0, client: httpx.Client | None = None):
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self.api_base = (api_base or os.environ.get(API_BASE_ENV) or DEFAULT_API_BASE).rstrip("/")
        self._client = client or httpx.Client(timeout=timeout_s)

    def complete(self, profile: ProviderProfile, messages: Sequence[ChatMessage]) -> str:
        if not self.api_key:
            raise AuthError(f"no API key; set {API_KEY_ENV}")
        body = {
            "model": profile.model_id,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
            "temperature": profile.temperature,
            "max_tokens": profile.max_tokens,
        }
        try:
            resp = self._client.post(
                f"{self.api_base}/chat/completions",
                json=body,
                headers={"Authorization": f"Bearer {self.api_key}"},
            )
        except httpx.HTTPError as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code >= 400:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            text = resp.json()["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError):
            text = None
        if not text:
            raise EmptyCompletion("provider returned no completion text")
        return text


# ---------------------------------------------------------------- gateway


@dataclass
class RetryPolicy:
    attempts: int = 3
    base_delay_s: float = 1.0
    factor: float = 2.0


@dataclass
class Gateway:
    """Routes chat calls to one provider and applies the retry policy."""

    provider: Provider
    main: ProviderProfile = field(default_factory=lambda: ProviderProfile("main", "gpt-4o", tier="main"))
    light: ProviderProfile = field(default_factory=lambda: ProviderProfile("light", "gpt-4o-mini", tier="light"))
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self):
        if self.main.tier != "main" or self.light.tier != "light":
            raise ValueError("gateway needs one main-tier and one light-tier profile")

    def chat(self, profile: ProviderProfile, messages: Sequence[ChatMessage]) -> str:
        if not messages:
            raise ValueError("chat needs at least one message")
        delay = self.retry.base_delay_s
        for attempt in range(1, self.retry.attempts + 1):
            try:
                return self.provider.complete(profile, messages)
            except TransportError as exc:
                if attempt == self.retry.attempts:
                    raise
                log.warning("chat attempt %d failed (%s); retrying in %.1fs", attempt, exc, delay)
                self.sleep(delay)
                delay *= self.retry.factor
        raise AssertionError("unreachable")


def chat(gateway: Gateway, profile: ProviderProfile, messages: Sequence[ChatMessage]) -> str:
    return gateway.chat(profile, messages)
