"""Chat-completions transport with caching, retries and rate limiting."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import tempfile
import threading
import time
from collections import deque
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Mapping, Protocol

import httpx

log = logging.getLogger(__name__)

DEFAULT_MODEL = "gpt-3.5-turbo"
TRANSIENT_STATUS = frozenset({408, 429})


class ClientError(Exception):
    pass


class AuthError(ClientError):
    pass


class BadRequest(ClientError):
    pass


class Exhausted(ClientError):
    pass


class ParseError(ClientError):
    pass


class TransientError(ClientError):
    """Retryable failure: timeout, 429 or 5xx."""


class MissingScriptEntry(ClientError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    messages: tuple[tuple[str, str], ...]
    model: str = DEFAULT_MODEL
    temperature: float = 0.0
    max_tokens: int | None = None

    def __post_init__(self):
        roles = [r for r, _ in self.messages]
        if roles != ["system", "user"]:
            raise ValueError(f"expected one system then one user message, got roles {roles}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.max_tokens is not None and self.max_tokens < 1:
            raise ValueError("max_tokens must be positive")

    @classmethod
    def from_prompt(cls, system: str, user: str, **kwargs) -> ChatRequest:
        return cls((("system", system), ("user", user)), **kwargs)

    @property
    def system(self) -> str:
        return self.messages[0][1]

    @property
    def user(self) -> str:
        return self.messages[1][1]

    def to_wire(self) -> dict:
        body = {
            "model": self.model,
            "messages": [{"role": r, "content": c} for r, c in self.messages],
            "temperature": self.temperature,
        }
        if self.max_tokens is not None:
            body["max_tokens"] = self.max_tokens
        return body

    @classmethod
    def from_wire(cls, body: dict) -> ChatRequest:
        return cls(
            tuple((m["role"], m["content"]) for m in body["messages"]),
            model=body["model"],
            temperature=body.get("temperature", 0.0),
            max_tokens=body.get("max_tokens"),
        )


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    usage: Mapping[str, int] = field(default_factory=lambda: {"prompt_tokens": 0, "completion_tokens": 0})
    cached: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["usage"] = dict(self.usage)
        d.pop("cached")
        return d

    @classmethod
    def from_dict(cls, d: dict, cached: bool = False) -> ChatResponse:
        return cls(d["content"], d.get("finish_reason", "stop"), dict(d.get("usage", {})), cached)


def cache_key(request: ChatRequest) -> str:
    """SHA-256 over the canonical JSON of model, messages, temperature and max_tokens."""
    payload = {
        "model": request.model,
        "messages": [[r, c] for r, c in request.messages],
        "temperature": float(request.temperature),
        "max_tokens": request.max_tokens,
    }
    blob = json.dumps(payload, sort_keys=True, ensure_ascii=False, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ResponseCache:
    """Content-addressed ``{digest}.json`` files; writes are atomic renames."""

    def __init__(self, directory: str | Path):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def path(self, key: str) -> Path:
        return self.dir / f"{key}.json"

    def load(self, key: str) -> ChatResponse | None:
        try:
            entry = json.loads(self.path(key).read_text(encoding="utf-8"))
        except FileNotFoundError:
            return None
        except (OSError, json.JSONDecodeError) as exc:
            log.warning("ignoring unreadable cache entry %s: %s", key, exc)
            return None
        return ChatResponse.from_dict(entry["response"], cached=True)

    def load_entry(self, key: str) -> dict | None:
        try:
            return json.loads(self.path(key).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError):
            return None

    def store(self, request: ChatRequest, response: ChatResponse) -> str:
        key = cache_key(request)
        entry = {"request": request.to_wire(), "response": response.to_dict(), "timestamp": time.time()}
        fd, tmp = tempfile.mkstemp(dir=self.dir, suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(entry, fh, ensure_ascii=False, indent=1)
        os.replace(tmp, self.path(key))
        return key

    def __contains__(self, key: str) -> bool:
        return self.path(key).exists()


class Backend(Protocol):
    def send(self, request: ChatRequest) -> ChatResponse: ...


@dataclass(frozen=True)
class BackendConfig:
    base_url: str = "https://api.openai.com/v1"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 60.0
    max_retries: int = 5
    max_in_flight: int = 4
    requests_per_minute: int | None = None

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.max_in_flight < 1:
            raise ValueError("max_in_flight must be >= 1")
        if self.requests_per_minute is not None and self.requests_per_minute < 1:
            raise ValueError("requests_per_minute must be positive")


def classify_status(status: int, body: str) -> ClientError:
    msg = f"HTTP {status}: {body[:200]}"
    if status in (401, 403):
        return AuthError(msg)
    if status in TRANSIENT_STATUS or status >= 500:
        return TransientError(msg)
    return BadRequest(msg)


def parse_completion(payload) -> ChatResponse:
    try:
        choice = payload["choices"][0]
        content = choice["message"]["content"]
    except (KeyError, IndexError, TypeError) as exc:
        raise ParseError(f"malformed completion payload: missing {exc}") from None
    if not isinstance(content, str):
        raise ParseError("completion content is not a string")
    usage = payload.get("usage") or {}
    return ChatResponse(
        content=content,
        finish_reason=choice.get("finish_reason") or "stop",
        usage={
            "prompt_tokens": int(usage.get("prompt_tokens", 0)),
            "completion_tokens": int(usage.get("completion_tokens", 0)),
        },
    )


class HTTPBackend:
    """POSTs to ``{base_url}/chat/completions`` with a bearer token read from the environment."""

    def __init__(self, config: BackendConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        key = os.environ.get(config.api_key_env)
        if not key:
            raise AuthError(f"environment variable {config.api_key_env} is not set")
        self._client = httpx.Client(
            base_url=config.base_url.rstrip("/"),
            timeout=config.timeout,
            headers={"Authorization": f"Bearer {key}"},
            transport=transport,
        )

    def send(self, request: ChatRequest) -> ChatResponse:
        try:
            resp = self._client.post("/chat/completions", json=request.to_wire())
        except httpx.TimeoutException as exc:
            raise TransientError(f"timeout: {exc}") from exc
        except httpx.TransportError as exc:
            raise TransientError(f"transport error: {exc}") from exc
        if resp.status_code != 200:
            raise classify_status(resp.status_code, resp.text)
        try:
            payload = resp.json()
        except ValueError as exc:
            raise ParseError(f"response is not JSON: {exc}") from None
        return parse_completion(payload)

    def close(self) -> None:
        self._client.close()


Rule = Callable[[ChatRequest], "str | None"]


class MockBackend:
    """Deterministic backend answering from a digest map and/or a rule.

    The map is consulted first (keys are :func:`cache_key` digests); a rule
    returning ``None`` means it has no answer.
    """

    def __init__(self, script: Mapping[str, str] | None = None, rule: Rule | None = None):
        self.script = dict(script or {})
        self.rule = rule
        self.calls = 0
        self._lock = threading.Lock()

    def send(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
        key = cache_key(request)
        if key in self.script:
            return ChatResponse(self.script[key])
        if self.rule is not None:
            content = self.rule(request)
            if content is not None:
                return ChatResponse(content)
        raise MissingScriptEntry(f"no scripted response for prompt {key[:12]}")


def mock_backend(script: Mapping[str, str] | Rule | None = None) -> MockBackend:
    if callable(script):
        return MockBackend(rule=script)
    return MockBackend(script=script)


class RateLimiter:
    """Sliding-window limiter: at most ``per_minute`` acquisitions in any 60 s window."""

    def __init__(self, per_minute: int, clock: Callable[[], float] = time.monotonic, sleep: Callable[[float], None] = time.sleep):
        self.per_minute = per_minute
        self.clock = clock
        self.sleep = sleep
        self.window: deque[float] = deque()
        self._lock = threading.Lock()

    def acquire(self) -> float:
        while True:
            with self._lock:
                now = self.clock()
                while self.window and now - self.window[0] >= 60.0:
                    self.window.popleft()
                if len(self.window) < self.per_minute:
                    self.window.append(now)
                    return now
                wait = 60.0 - (now - self.window[0])
            self.sleep(wait)


class ChatClient:
    """Shareable client: cache lookup, then a bounded, rate-limited, retried backend call."""

    def __init__(
        self,
        backend: Backend,
        *,
        model: str = DEFAULT_MODEL,
        temperature: float = 0.0,
        max_tokens: int | None = None,
        cache: ResponseCache | None = None,
        max_retries: int = 5,
        max_in_flight: int = 4,
        requests_per_minute: int | None = None,
        backoff_base: float = 1.0,
        backoff_cap: float = 60.0,
        clock: Callable[[], float] = time.monotonic,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.backend = backend
        self.model = model
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.cache = cache
        self.max_retries = max_retries
        self.max_in_flight = max_in_flight
        self.backoff_base = backoff_base
        self.backoff_cap = backoff_cap
        self.sleep = sleep
        self.rng = rng or random.Random()
        self.limiter = RateLimiter(requests_per_minute, clock, sleep) if requests_per_minute else None
        self._slots = threading.BoundedSemaphore(max_in_flight)
        self._lock = threading.Lock()
        self.network_calls = 0
        self.cache_hits = 0
        self.retries = 0

    @classmethod
    def from_config(cls, backend: Backend, config: BackendConfig, **kwargs) -> ChatClient:
        return cls(
            backend,
            max_retries=config.max_retries,
            max_in_flight=config.max_in_flight,
            requests_per_minute=config.requests_per_minute,
            **kwargs,
        )

    def request(self, system: str, user: str) -> ChatRequest:
        return ChatRequest.from_prompt(
            system, user, model=self.model, temperature=self.temperature, max_tokens=self.max_tokens
        )

    def backoff(self, attempt: int) -> float:
        delay = min(self.backoff_cap, self.backoff_base * 2**attempt)
        return delay + self.rng.uniform(0, self.backoff_base)

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = cache_key(request)
        if self.cache is not None:
            hit = self.cache.load(key)
            if hit is not None:
                with self._lock:
                    self.cache_hits += 1
                return hit
        response = self._call_with_retries(request)
        if self.cache is not None:
            self.cache.store(request, response)
        return response

    def _call_with_retries(self, request: ChatRequest) -> ChatResponse:
        attempt = 0
        while True:
            try:
                return self._call_once(request)
            except TransientError as exc:
                if attempt >= self.max_retries:
                    raise Exhausted(f"gave up after {attempt + 1} attempts: {exc}") from exc
                delay = self.backoff(attempt)
                log.warning("transient failure (%s); retry %d in %.2fs", exc, attempt + 1, delay)
                with self._lock:
                    self.retries += 1
                self.sleep(delay)
                attempt += 1

    def _call_once(self, request: ChatRequest) -> ChatResponse:
        if self.limiter is not None:
            self.limiter.acquire()
        with self._slots:
            with self._lock:
                self.network_calls += 1
            return self.backend.send(request)


def with_model(request: ChatRequest, model: str) -> ChatRequest:
    return replace(request, model=model)
