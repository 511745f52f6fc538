"""Completion backends behind one interface.

``http`` talks to any OpenAI-compatible chat-completions endpoint. The other
three never touch the network: ``scripted`` plays back recorded responses,
``mock-greedy`` answers with the best architectures the benchmark holds, and
``mock-random`` with uniform samples. Mocks reply in the mandated text format
so the real parser stays on the critical path.
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

import httpx
import numpy as np

from .oracle import BenchmarkTable
from .prompting import PromptBundle, format_response
from .search_space import SearchSpace, decode, draw_unseen, sample_architecture

log = logging.getLogger(__name__)

DEFAULT_KEY_ENV = "GNAS_LLM_API_KEY"
BACKEND_KINDS = ("http", "scripted", "mock-greedy", "mock-random")


class LLMError(RuntimeError):
    pass


class ConfigurationError(LLMError):
    pass


class TransportError(LLMError):
    def __init__(self, message: str, last_status: int | None = None, attempts: int = 0):
        self.last_status = last_status
        self.attempts = attempts
        super().__init__(message)


class APIError(LLMError):
    """Non-retryable HTTP error (4xx other than 429)."""

    def __init__(self, status: int, body: str):
        self.status = status
        super().__init__(f"API error {status}: {body[:200]}")


class ScriptExhausted(LLMError):
    pass


@dataclass(frozen=True)
class LLMConfig:
    endpoint_url: str = "https://api.openai.com/v1"
    model_name: str = "gpt-4"
    api_key_env_var: str = DEFAULT_KEY_ENV
    temperature: float = 0.0
    max_tokens: int = 2048
    timeout: float = 120.0
    retries: int = 3
    backoff: float = 1.0
    min_interval: float = 0.0
    threaded: bool = False

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.timeout <= 0:
            raise ValueError("timeout must be > 0")

    @property
    def nonstandard_settings(self) -> list[str]:
        return [f"temperature={self.temperature}"] if self.temperature != 0 else []


@dataclass
class CompletionTranscript:
    request_prompt: dict
    response_text: str
    backend: str
    latency_ms: float
    attempt_count: int

    def to_dict(self) -> dict:
        return {
            "backend": self.backend,
            "attempt_count": self.attempt_count,
            "latency_ms": round(self.latency_ms, 3),
            "request_prompt": self.request_prompt,
            "response_text": self.response_text,
        }


@dataclass
class CompletionRequest:
    messages: list[dict]
    prompt: PromptBundle
    cfg: LLMConfig


class Backend(Protocol):
    name: str

    def complete(self, request: CompletionRequest) -> str: ...


# -- HTTP ------------------------------------------------------------------


class HttpBackend:
    """OpenAI-compatible chat completions with retry on transport errors, 5xx and 429."""

    name = "http"
    attempts_last = 1

    def __init__(
        self,
        cfg: LLMConfig,
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.cfg = cfg
        self._client = httpx.Client(timeout=cfg.timeout, transport=transport)
        self._sleep = sleep
        self._last_request = None

    def _api_key(self) -> str:
        key = os.environ.get(self.cfg.api_key_env_var, "").strip()
        if not key:
            raise ConfigurationError(
                f"environment variable {self.cfg.api_key_env_var} is not set"
            )
        return key

    @property
    def url(self) -> str:
        base = self.cfg.endpoint_url.rstrip("/")
        return base if base.endswith("/chat/completions") else base + "/chat/completions"

    def complete(self, request: CompletionRequest) -> str:
        cfg = request.cfg
        headers = {"Authorization": f"Bearer {self._api_key()}"}
        payload = {
            "model": cfg.model_name,
            "messages": request.messages,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
        }
        last_status, last_err = None, None
        for attempt in range(cfg.retries + 1):
            if attempt:
                self._sleep(cfg.backoff * 2 ** (attempt - 1))
            if cfg.min_interval and self._last_request is not None:
                wait = cfg.min_interval - (time.monotonic() - self._last_request)
                if wait > 0:
                    self._sleep(wait)
            self._last_request = time.monotonic()
            self.attempts_last = attempt + 1
            try:
                resp = self._client.post(self.url, json=payload, headers=headers)
            except httpx.TransportError as exc:
                last_err = f"{type(exc).__name__}: {exc}"
                log.warning("completion attempt %d failed: %s", attempt + 1, last_err)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_status = resp.status_code
                last_err = f"HTTP {resp.status_code}"
                log.warning("completion attempt %d got %s", attempt + 1, last_err)
                continue
            if resp.status_code >= 400:
                raise APIError(resp.status_code, resp.text)
            try:
                return resp.json()["choices"][0]["message"]["content"] or ""
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise APIError(resp.status_code, f"malformed response body ({exc})") from None
        raise TransportError(
            f"completion failed after {cfg.retries + 1} attempts ({last_err})",
            last_status,
            cfg.retries + 1,
        )

    def close(self):
        self._client.close()


# -- offline backends ------------------------------------------------------


class ScriptedBackend:
    """Plays back a JSON array of response strings, one per call."""

    name = "scripted"

    def __init__(self, source: str | Path | list[str]):
        if isinstance(source, list):
            responses = source
        else:
            try:
                responses = json.loads(Path(source).read_text(encoding="utf-8"))
            except OSError as exc:
                raise OSError(f"cannot read playback file {source}: {exc}") from exc
        if not isinstance(responses, list) or not all(isinstance(r, str) for r in responses):
            raise ConfigurationError("playback file must be a JSON array of strings")
        self.responses = list(responses)
        self.position = 0

    def complete(self, request: CompletionRequest) -> str:
        if self.position >= len(self.responses):
            raise ScriptExhausted(
                f"playback script exhausted after {len(self.responses)} responses"
            )
        text = self.responses[self.position]
        self.position += 1
        return text


class GreedyMockBackend:
    """Always proposes the best architectures it has not proposed yet."""

    name = "mock-greedy"

    def __init__(self, table: BenchmarkTable, topology_id: str | None = None):
        self.table = table
        prefix = f"{topology_id}|" if topology_id else ""
        self._order = [k for k in table.rank_index if k.startswith(prefix)]
        self._cursor = 0
        self.emitted: set[str] = set()

    def complete(self, request: CompletionRequest) -> str:
        n = max(request.prompt.n_requested, 1)
        picks = []
        while len(picks) < n and self._cursor < len(self._order):
            key = self._order[self._cursor]
            self._cursor += 1
            if key not in self.emitted:
                self.emitted.add(key)
                picks.append(decode(key, self.table.registry))
        return format_response(picks, "Here are the proposed architectures.")


class RandomMockBackend:
    """Proposes uniform samples, avoiding its own earlier proposals while it can."""

    name = "mock-random"

    def __init__(self, space: SearchSpace, seed: int):
        self.space = space
        self.rng = np.random.default_rng(seed)
        self.emitted: set[str] = set()

    def complete(self, request: CompletionRequest) -> str:
        n = max(request.prompt.n_requested, 1)
        picks = []
        for _ in range(n):
            arch = draw_unseen(self.space, self.rng, self.emitted)
            if arch is None:
                arch = sample_architecture(self.space, self.rng)
            self.emitted.add(arch.key)
            picks.append(arch)
        return format_response(picks, "Sampled architectures:")


def make_mock_greedy(table: BenchmarkTable, topology_id: str | None = None) -> GreedyMockBackend:
    return GreedyMockBackend(table, topology_id)


def make_mock_random(space: SearchSpace, seed: int) -> RandomMockBackend:
    return RandomMockBackend(space, seed)


def make_scripted(path: str | Path) -> ScriptedBackend:
    return ScriptedBackend(path)


# -- client ----------------------------------------------------------------


class LLMClient:
    """Per-run completion front end; owns the transcript log and chat thread."""

    def __init__(self, backend: Backend, cfg: LLMConfig | None = None):
        self.backend = backend
        self.cfg = cfg or LLMConfig()
        self.transcripts: list[CompletionTranscript] = []
        self._thread: list[dict] = []

    def _messages(self, prompt: PromptBundle) -> list[dict]:
        if not self.cfg.threaded:
            return prompt.messages()
        if not self._thread:
            self._thread.append({"role": "system", "content": prompt.system_text})
        return self._thread + [{"role": "user", "content": prompt.user_text}]

    def complete(self, prompt: PromptBundle) -> str:
        messages = self._messages(prompt)
        start = time.perf_counter()
        text = self.backend.complete(CompletionRequest(messages, prompt, self.cfg))
        # only network latency is meaningful; offline backends record 0 for reproducible logs
        latency = (time.perf_counter() - start) * 1000 if self.backend.name == "http" else 0.0
        if self.cfg.threaded:
            self._thread = messages + [{"role": "assistant", "content": text}]
        self.transcripts.append(
            CompletionTranscript(
                request_prompt={
                    "kind": prompt.kind,
                    "n_requested": prompt.n_requested,
                    "ablation": prompt.ablation.name,
                    "truncated": prompt.truncated,
                    "token_estimate": prompt.token_estimate,
                    "system_text": prompt.system_text,
                    "user_text": prompt.user_text,
                },
                response_text=text,
                backend=self.backend.name,
                latency_ms=latency,
                attempt_count=getattr(self.backend, "attempts_last", 1),
            )
        )
        return text


def complete(backend: Backend, cfg: LLMConfig, prompt: PromptBundle, transcripts: list | None = None) -> str:
    client = LLMClient(backend, cfg)
    text = client.complete(prompt)
    if transcripts is not None:
        transcripts.extend(client.transcripts)
    return text
