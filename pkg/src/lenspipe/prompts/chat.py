"""Chat-completion wire contract and a small bounded-concurrency client.

Request/response shapes follow prevailing chat APIs: the request carries
{model, temperature, messages:[{role, content}]}, the response {content,
finish}.  Endpoint and token come from LENS_LLM_ENDPOINT / LENS_LLM_KEY.
"""

from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

log = logging.getLogger(__name__)

ENDPOINT_ENV = "LENS_LLM_ENDPOINT"
KEY_ENV = "LENS_LLM_KEY"

PROMPTGEN_MODEL = "gpt-4.1"
REWARD_MODEL = "gpt-4.1-mini"
REWRITE_MODEL = "gpt-5.5"


class ChatError(RuntimeError):
    pass


class TransportError(ChatError):
    """Transient transport failure; safe to retry."""


@dataclass
class ChatMessage:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in ("system", "user"):
            raise ChatError(f"unsupported role {self.role!r}")


@dataclass
class ChatRequest:
    model: str
    temperature: float
    messages: list[ChatMessage] = field(default_factory=list)

    def __post_init__(self):
        if any(m.role == "system" for m in self.messages) and self.messages[0].role != "system":
            raise ChatError("the system message must come first")

    def system_content(self) -> str | None:
        return self.messages[0].content if self.messages and self.messages[0].role == "system" else None

    def to_obj(self) -> dict:
        return {
            "model": self.model,
            "temperature": self.temperature,
            "messages": [{"role": m.role, "content": m.content} for m in self.messages],
        }


@dataclass
class ChatResponse:
    content: str
    finish: str = "stop"


def _http_send(endpoint: str, key: str | None, payload: dict, timeout: float) -> dict:
    import requests

    headers = {"Authorization": f"Bearer {key}"} if key else {}
    try:
        resp = requests.post(endpoint, json=payload, headers=headers, timeout=timeout)
        resp.raise_for_status()
        return resp.json()
    except requests.RequestException as exc:
        raise TransportError(str(exc)) from exc


class LLMClient:
    """Chat client with retry/backoff and a bounded in-flight request count."""

    def __init__(
        self,
        endpoint: str | None = None,
        api_key: str | None = None,
        send: Callable[[dict], dict] | None = None,
        max_in_flight: int = 4,
        max_retries: int = 3,
        backoff: float = 0.5,
        timeout: float = 60.0,
    ):
        self.endpoint = endpoint or os.environ.get(ENDPOINT_ENV)
        self.api_key = api_key or os.environ.get(KEY_ENV)
        self._send = send
        self.max_in_flight = max(1, max_in_flight)
        self.max_retries = max_retries
        self.backoff = backoff
        self.timeout = timeout
        if self._send is None and not self.endpoint:
            raise ChatError(f"no endpoint: set {ENDPOINT_ENV} or pass send=")

    def _dispatch(self, payload: dict) -> dict:
        if self._send is not None:
            return self._send(payload)
        return _http_send(self.endpoint, self.api_key, payload, self.timeout)

    def complete(self, request: ChatRequest) -> ChatResponse:
        payload = request.to_obj()
        delay = self.backoff
        for attempt in range(self.max_retries + 1):
            try:
                obj = self._dispatch(payload)
                return ChatResponse(content=str(obj["content"]), finish=str(obj.get("finish", "stop")))
            except TransportError as exc:
                if attempt == self.max_retries:
                    raise
                log.warning("transport failure (attempt %d): %s", attempt + 1, exc)
                time.sleep(delay)
                delay *= 2
        raise TransportError("unreachable")

    def complete_many(self, requests_: Sequence[ChatRequest]) -> list[ChatResponse]:
        """Concurrent completion; results are positional, not arrival-ordered."""
        with ThreadPoolExecutor(max_workers=self.max_in_flight) as pool:
            return list(pool.map(self.complete, requests_))
