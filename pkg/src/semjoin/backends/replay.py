"""Record/replay wrapper persisting completions to a JSON-lines cassette."""
from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import asdict
from pathlib import Path
from typing import Sequence

import numpy as np

from .base import CassetteMiss, CompletionOutcome, CompletionRequest

MODES = ("record", "replay")


def _embed_key(texts: Sequence[str]) -> str:
    blob = json.dumps(list(texts), ensure_ascii=False)
    return "embed:" + hashlib.sha256(blob.encode("utf-8")).hexdigest()


class RecordReplayBackend:
    """Wraps ``inner`` and records every completion, or replays a cassette.

    In record mode outcomes already on the cassette are served from it and new
    ones are appended. In replay mode ``inner`` may be ``None``; an unseen
    request raises :class:`CassetteMiss`. The static prompt size of the
    recording backend is stored on the cassette so replayed joins plan the
    same batches.
    """

    def __init__(self, inner, cassette_path: str | Path, mode: str = "replay"):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if mode == "record" and inner is None:
            raise ValueError("record mode needs an inner backend")
        self.inner = inner
        self.path = Path(cassette_path)
        self.mode = mode
        self.hits = 0
        self._lock = threading.Lock()
        self._completions: dict[str, CompletionOutcome] = {}
        self._embeddings: dict[str, list] = {}
        self._meta: dict = {}
        if self.path.exists():
            self._load()
        elif mode == "replay":
            raise FileNotFoundError(f"cassette {self.path} does not exist")
        if mode == "record":
            meta = {
                "static_prompt_tokens": getattr(inner, "static_prompt_tokens", None),
                "exact_token_counts": bool(getattr(inner, "exact_token_counts", False)),
            }
            meta = {k: v for k, v in meta.items() if v is not None}
            if any(self._meta.get(k) != v for k, v in meta.items()):
                self._meta.update(meta)
                self._append({"kind": "meta", **meta})

    def _load(self) -> None:
        with self.path.open(encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                kind = rec.get("kind", "completion")
                if kind == "meta":
                    self._meta.update({k: v for k, v in rec.items() if k != "kind"})
                elif kind == "embedding":
                    self._embeddings[rec["key"]] = rec["vectors"]
                else:
                    self._completions[rec["key"]] = CompletionOutcome(**rec["outcome"])

    def _append(self, record: dict) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")

    @property
    def static_prompt_tokens(self):
        return self._meta.get("static_prompt_tokens", getattr(self.inner, "static_prompt_tokens", None))

    @property
    def exact_token_counts(self) -> bool:
        return bool(self._meta.get("exact_token_counts", getattr(self.inner, "exact_token_counts", False)))

    def complete(self, request: CompletionRequest) -> CompletionOutcome:
        key = request.key()
        with self._lock:
            if key in self._completions:
                self.hits += 1
                return self._completions[key]
            if self.mode == "replay":
                raise CassetteMiss(f"no recorded outcome for request {key[:12]}")
            outcome = self.inner.complete(request)
            self._completions[key] = outcome
            self._append({"kind": "completion", "key": key, "prompt": request.prompt,
                          "request": asdict(request) | {"prompt": None}, "outcome": asdict(outcome)})
            return outcome

    def embed(self, texts: Sequence[str]) -> np.ndarray:
        key = _embed_key(texts)
        with self._lock:
            if key in self._embeddings:
                self.hits += 1
                return np.asarray(self._embeddings[key], dtype=np.float64)
            if self.mode == "replay":
                raise CassetteMiss(f"no recorded embeddings for request {key[:18]}")
            vectors = np.asarray(self.inner.embed(texts), dtype=np.float64)
            self._embeddings[key] = vectors.tolist()
            self._append({"kind": "embedding", "key": key, "vectors": vectors.tolist()})
            return vectors


def record_replay(inner, cassette_path: str | Path, mode: str = "replay") -> RecordReplayBackend:
    return RecordReplayBackend(inner, cassette_path, mode)


__all__ = ["MODES", "RecordReplayBackend", "record_replay"]
