"""Single access point to chat-completion backends.

Speaks the OpenAI-compatible wire format over HTTP, or replays scripted
responses from a deterministic mock keyed by a stable request hash. The
gateway bounds in-flight requests with a semaphore that is never held
across backoff sleeps, so retries cannot starve unrelated callers.
"""

from __future__ import annotations

import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, replace
from importlib import resources
from typing import TYPE_CHECKING

import httpx

from .errors import (
    GatewayError,
    HttpStatus,
    MalformedResponse,
    MockScriptMiss,
    RetriesExhausted,
    Timeout,
)

if TYPE_CHECKING:
    from .corpus import Document, QuestionRecord
    from .synthesis import SynthesizedContext

API_KEY_ENV = "CASC_API_KEY"

MOCK = "mock"
HTTP = "http"

_BACKOFF_BASE = 0.1  # seconds; doubles per retry


@dataclass(frozen=True)
class CompletionRequest:
    """Chat request; messages are (role, content) pairs, system first."""

    model: str
    messages: tuple[tuple[str, str], ...]
    temperature: float = 0.0
    max_tokens: int = 256

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0][0] != "system":
            raise ValueError("first message must have role 'system'")


@dataclass(frozen=True)
class BackendConfig:
    kind: str = MOCK
    base_url: str = ""
    model: str = ""
    timeout: float = 30.0
    max_retries: int = 2
    max_concurrency: int = 4
    mock_script: str | None = None

    def __post_init__(self):
        if self.kind not in (MOCK, HTTP):
            raise ValueError(f"backend kind must be 'mock' or 'http', got {self.kind!r}")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be >= 1")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


def request_hash(request: CompletionRequest) -> str:
    """Stable sha256 hex digest of the canonicalized request."""
    canonical = json.dumps(
        {
            "model": request.model,
            "messages": [[role, content] for role, content in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        },
        sort_keys=True,
        ensure_ascii=False,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class Gateway:
    """Thread-safe client for one backend configuration."""

    def __init__(self, config: BackendConfig):
        self.config = config
        self._slots = threading.BoundedSemaphore(config.max_concurrency)
        self._lock = threading.Lock()
        self._script: dict[str, str] | None = None
        self._client: httpx.Client | None = None

    def _mock_responses(self) -> dict[str, str]:
        with self._lock:
            if self._script is None:
                if self.config.mock_script:
                    with open(self.config.mock_script, encoding="utf-8") as fh:
                        self._script = json.load(fh)
                else:
                    self._script = {}
            return self._script

    def _http_client(self) -> httpx.Client:
        with self._lock:
            if self._client is None:
                self._client = httpx.Client(timeout=self.config.timeout)
            return self._client

    def complete(self, request: CompletionRequest) -> str:
        effective = replace(request, model=request.model or self.config.model)
        if self.config.kind == MOCK:
            return self._complete_mock(effective)
        return self._complete_http(effective)

    def _complete_mock(self, request: CompletionRequest) -> str:
        key = request_hash(request)
        with self._slots:
            responses = self._mock_responses()
            if key not in responses:
                raise MockScriptMiss(key)
            return responses[key]

    def _complete_http(self, request: CompletionRequest) -> str:
        token = os.environ.get(API_KEY_ENV)
        if not token:
            raise GatewayError(f"{API_KEY_ENV} is not set in the environment")
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": request.model,
            "messages": [{"role": r, "content": c} for r, c in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {token}", "Content-Type": "application/json"}
        attempts = self.config.max_retries + 1
        last_error = ""
        timed_out = False
        for attempt in range(attempts):
            if attempt > 0:
                # Slot released while sleeping; backoff never blocks others.
                time.sleep(_BACKOFF_BASE * (2 ** (attempt - 1)))
            try:
                with self._slots:
                    response = self._http_client().post(url, json=body, headers=headers)
            except httpx.TimeoutException as exc:
                timed_out = True
                last_error = f"timeout: {exc}"
                continue
            except httpx.HTTPError as exc:
                timed_out = False
                last_error = f"transport error: {exc}"
                continue
            if response.status_code >= 500:
                timed_out = False
                last_error = f"HTTP {response.status_code}"
                continue
            if response.status_code != 200:
                raise HttpStatus(response.status_code, response.text[:200])
            return _extract_content(response)
        if timed_out:
            raise Timeout(f"request timed out after {attempts} attempts")
        raise RetriesExhausted(attempts, last_error)

    def close(self) -> None:
        if self._client is not None:
            self._client.close()


def _extract_content(response: httpx.Response) -> str:
    try:
        payload = response.json()
    except ValueError as exc:
        raise MalformedResponse(f"body is not JSON: {exc}") from exc
    try:
        content = payload["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse() from exc
    if not isinstance(content, str):
        raise MalformedResponse("message content is not a string")
    return content


_gateways: dict[BackendConfig, Gateway] = {}
_gateways_lock = threading.Lock()


def gateway_for(config: BackendConfig) -> Gateway:
    """Shared Gateway per config so the concurrency bound spans callers."""
    with _gateways_lock:
        gw = _gateways.get(config)
        if gw is None:
            gw = Gateway(config)
            _gateways[config] = gw
        return gw


def complete(request: CompletionRequest, config: BackendConfig) -> str:
    """Send one chat completion and return the first choice's content."""
    return gateway_for(config).complete(request)


@dataclass(frozen=True)
class PromptTemplate:
    version: int
    system: str
    user: str


def _load_template(name: str) -> PromptTemplate:
    raw = json.loads(resources.files("casc").joinpath(f"templates/{name}").read_text("utf-8"))
    return PromptTemplate(version=raw["version"], system=raw["system"], user=raw["user"])


READER_TEMPLATE = _load_template("reader_v1.json")
EXTRACT_TEMPLATE = _load_template("extract_v1.json")


def build_reader_prompt(
    question: "QuestionRecord",
    context: "SynthesizedContext",
    model: str = "",
    max_tokens: int = 256,
) -> CompletionRequest:
    """Answer-generation request: context plus the verbatim question."""
    user = READER_TEMPLATE.user.format(
        context=context.rendered_text, question=question.question
    )
    return CompletionRequest(
        model=model,
        messages=(("system", READER_TEMPLATE.system), ("user", user)),
        temperature=0.0,
        max_tokens=max_tokens,
    )


def build_extract_prompt(
    question: "QuestionRecord",
    doc: "Document",
    model: str = "",
    max_tokens: int = 512,
) -> CompletionRequest:
    """Claim-extraction request over one full document."""
    user = EXTRACT_TEMPLATE.user.format(document=doc.text, question=question.question)
    return CompletionRequest(
        model=model,
        messages=(("system", EXTRACT_TEMPLATE.system), ("user", user)),
        temperature=0.0,
        max_tokens=max_tokens,
    )
