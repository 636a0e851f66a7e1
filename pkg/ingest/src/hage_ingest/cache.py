"""Content-addressed response cache and caching client wrappers.

Every service request is keyed by the SHA-256 of its canonical JSON form
(model id included), so identical requests are free on rerun regardless of
process or machine. Wrappers count the calls that actually reach the inner
client; a warm-cache run must report zero.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .clients import ChatClient, EmbeddingClient

__all__ = ["ResponseCache", "CachedChatClient", "CachedEmbeddingClient",
           "request_key"]


def request_key(kind: str, model_id: str, payload) -> str:
    doc = {"kind": kind, "model": model_id, "payload": payload}
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


class ResponseCache:
    """One JSON file per response, named by request key."""

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def get(self, key: str):
        path = self._path(key)
        if not path.exists():
            return None
        return json.loads(path.read_text(encoding="utf-8"))

    def put(self, key: str, doc) -> None:
        tmp = self._path(key).with_suffix(".tmp")
        tmp.write_text(json.dumps(doc, sort_keys=True, separators=(",", ":")),
                       encoding="utf-8")
        tmp.replace(self._path(key))

    def __contains__(self, key: str) -> bool:
        return self._path(key).exists()


class CachedChatClient:
    """Wraps a ChatClient with the response cache; counts upstream calls."""

    def __init__(self, inner: ChatClient, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.model_id = inner.model_id
        self.calls = 0

    def complete(self, prompt: str) -> dict:
        key = request_key("chat", self.model_id, prompt)
        hit = self.cache.get(key)
        if hit is not None:
            return hit
        self.calls += 1
        doc = self.inner.complete(prompt)
        self.cache.put(key, doc)
        return doc


class CachedEmbeddingClient:
    """Wraps an EmbeddingClient, caching per text so partial hits still save
    calls; only texts missing from the cache reach the inner client."""

    def __init__(self, inner: EmbeddingClient, cache: ResponseCache):
        self.inner = inner
        self.cache = cache
        self.model_id = inner.model_id
        self.dim = inner.dim
        self.calls = 0

    def embed(self, texts: list[str]) -> list[list[float]]:
        keys = [request_key("embed", self.model_id, t) for t in texts]
        out: list = [self.cache.get(k) for k in keys]
        missing = [i for i, v in enumerate(out) if v is None]
        if missing:
            self.calls += 1
            fresh = self.inner.embed([texts[i] for i in missing])
            for i, vec in zip(missing, fresh):
                self.cache.put(keys[i], vec)
                out[i] = vec
        return out
