"""Client for OpenAI-compatible chat-completion and embedding endpoints."""
from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Callable, Sequence

import httpx
import numpy as np

from ..model import TokenizerHandle, count_tokens
from .base import (
    BackendError,
    BackendRejected,
    BackendTimeout,
    CompletionOutcome,
    CompletionRequest,
    normalize_rows,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HttpConfig:
    base_url: str = "https://api.openai.com"
    model: str = "gpt-4"
    embedding_model: str = "text-embedding-3-small"
    api_key_env: str = "OPENAI_API_KEY"
    timeout: float = 20.0
    max_attempts: int = 3
    backoff: float = 1.0

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> "HttpConfig":
        """Read a JSON config; keys not naming a field are ignored."""
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        known = {f.name for f in fields(cls)}
        merged = {k: v for k, v in data.items() if k in known}
        merged.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**merged)

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise BackendRejected(f"environment variable {self.api_key_env} is not set")
        return key


class HttpBackend:
    """One POST per completion, retried on timeouts, 429 and 5xx.

    Token counts come from the response's ``usage`` block; without one they
    are estimated with ``tokenizer``.
    """

    exact_token_counts = False

    def __init__(
        self,
        config: HttpConfig,
        *,
        client: httpx.Client | None = None,
        tokenizer: TokenizerHandle = "chars4",
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.config = config
        self.tokenizer = tokenizer
        self._sleep = sleep
        self._client = client or httpx.Client(timeout=config.timeout)
        self.requests_sent = 0

    def close(self) -> None:
        self._client.close()

    def _url(self, path: str) -> str:
        return self.config.base_url.rstrip("/") + path

    def _post(self, path: str, payload: dict) -> dict:
        headers = {"Authorization": f"Bearer {self.config.api_key()}"}
        last: Exception | None = None
        for attempt in range(1, self.config.max_attempts + 1):
            if attempt > 1:
                self._sleep(self.config.backoff * 2 ** (attempt - 2))
            self.requests_sent += 1
            try:
                resp = self._client.post(self._url(path), json=payload, headers=headers,
                                         timeout=self.config.timeout)
            except httpx.TimeoutException as exc:
                last = BackendTimeout(f"{path} timed out after {self.config.timeout}s")
                log.warning("attempt %d: %s", attempt, exc)
                continue
            except httpx.TransportError as exc:
                last = BackendError(f"{path}: {exc}")
                log.warning("attempt %d: %s", attempt, exc)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last = BackendError(f"{path} returned HTTP {resp.status_code}")
                log.warning("attempt %d: HTTP %d", attempt, resp.status_code)
                continue
            if resp.status_code >= 400:
                raise BackendRejected(f"{path} returned HTTP {resp.status_code}: {resp.text[:500]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise BackendError(f"{path} returned invalid JSON") from exc
        assert last is not None
        raise last

    def complete(self, request: CompletionRequest) -> CompletionOutcome:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": request.prompt}],
            "max_tokens": request.max_output_tokens,
            "temperature": request.temperature,
        }
        if request.stop_sequence:
            payload["stop"] = [request.stop_sequence]
        data = self._post("/v1/chat/completions", payload)
        try:
            choice = data["choices"][0]
            text = choice["message"].get("content") or ""
            reason = choice.get("finish_reason")
        except (KeyError, IndexError, TypeError) as exc:
            raise BackendError("malformed chat-completion response") from exc

        truncated = reason == "length"
        if reason == "stop" and request.stop_sequence and not text.rstrip().endswith(request.stop_sequence):
            # providers drop the matched stop sequence from the returned text
            text += request.stop_sequence

        usage = data.get("usage") or {}
        prompt_tokens = usage.get("prompt_tokens")
        if prompt_tokens is None:
            prompt_tokens = count_tokens(request.prompt, self.tokenizer)
        output_tokens = usage.get("completion_tokens")
        if output_tokens is None:
            output_tokens = count_tokens(text, self.tokenizer) if text else 0
        if truncated:
            output_tokens = request.max_output_tokens
        return CompletionOutcome(text, int(prompt_tokens), int(output_tokens), truncated)

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        if not len(texts):
            raise ValueError("nothing to embed")
        data = self._post("/v1/embeddings", {"model": self.config.embedding_model, "input": list(texts)})
        try:
            items = sorted(data["data"], key=lambda d: d["index"])
            vectors = np.asarray([d["embedding"] for d in items], dtype=np.float64)
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError("malformed embedding response") from exc
        if len(vectors) != len(texts):
            raise BackendError(f"expected {len(texts)} embeddings, got {len(vectors)}")
        return normalize_rows(vectors)


__all__ = ["HttpBackend", "HttpConfig"]
