"""Service clients for embeddings and structured text analysis.

Two families are provided: HTTP clients for hosted services, which read their
credentials from environment variables only, and deterministic local clients
(hash embedder, rule-based analyzer) that need no network and make the whole
pipeline reproducible offline. Both families implement the same protocols, so
the pipeline code never cares which one it is talking to.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import urllib.request
from typing import Protocol

import numpy as np

__all__ = [
    "EmbeddingClient",
    "ChatClient",
    "ServiceError",
    "HttpEmbeddingClient",
    "HttpChatClient",
    "HashEmbeddingClient",
    "RuleChatClient",
]


class ServiceError(Exception):
    """A service call failed after exhausting retries."""


class EmbeddingClient(Protocol):
    model_id: str
    dim: int

    def embed(self, texts: list[str]) -> list[list[float]]: ...


class ChatClient(Protocol):
    model_id: str

    def complete(self, prompt: str) -> dict: ...


def _require_env(name: str) -> str:
    value = os.environ.get(name)
    if not value:
        raise ServiceError(f"environment variable {name} is required")
    return value


class HttpEmbeddingClient:
    """Embedding service over HTTP. Credentials come from HAGE_EMBED_API_KEY
    and the endpoint from HAGE_EMBED_URL; they are never passed as arguments."""

    def __init__(self, model_id: str = "text-embed-default", dim: int = 384,
                 timeout: float = 30.0):
        self.model_id = model_id
        self.dim = dim
        self.timeout = timeout

    def embed(self, texts: list[str]) -> list[list[float]]:
        url = _require_env("HAGE_EMBED_URL")
        key = _require_env("HAGE_EMBED_API_KEY")
        body = json.dumps({"model": self.model_id, "input": texts}).encode()
        req = urllib.request.Request(
            url, data=body,
            headers={"Authorization": f"Bearer {key}",
                     "Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read())
        except OSError as exc:
            raise ServiceError(f"embedding request failed: {exc}")
        vectors = [row["embedding"] for row in doc["data"]]
        for v in vectors:
            if len(v) != self.dim:
                raise ServiceError(
                    f"embedding dimension {len(v)} != expected {self.dim}")
        return vectors


class HttpChatClient:
    """Structured-completion service over HTTP; expects a JSON object reply.
    Credentials via HAGE_LLM_API_KEY, endpoint via HAGE_LLM_URL."""

    def __init__(self, model_id: str = "chat-default", timeout: float = 60.0):
        self.model_id = model_id
        self.timeout = timeout

    def complete(self, prompt: str) -> dict:
        url = _require_env("HAGE_LLM_URL")
        key = _require_env("HAGE_LLM_API_KEY")
        body = json.dumps({"model": self.model_id, "prompt": prompt}).encode()
        req = urllib.request.Request(
            url, data=body,
            headers={"Authorization": f"Bearer {key}",
                     "Content-Type": "application/json"})
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read())
        except OSError as exc:
            raise ServiceError(f"completion request failed: {exc}")
        if not isinstance(doc, dict):
            raise ServiceError("completion reply is not a JSON object")
        return doc


class HashEmbeddingClient:
    """Deterministic bag-of-hashed-tokens embedder (unit norm, fixed dim).

    Not a semantic model: tokens are hashed into buckets, so texts sharing
    words land near each other. Good enough for wiring, tests, and demos."""

    def __init__(self, dim: int = 384, model_id: str = "hash-embed-1"):
        self.dim = dim
        self.model_id = model_id

    def embed(self, texts: list[str]) -> list[list[float]]:
        out = []
        for text in texts:
            v = np.zeros(self.dim)
            for token in re.findall(r"[a-z0-9']+", text.lower()):
                digest = hashlib.sha256(token.encode()).digest()
                bucket = int.from_bytes(digest[:4], "big") % self.dim
                sign = 1.0 if digest[4] % 2 == 0 else -1.0
                v[bucket] += sign
            norm = np.linalg.norm(v)
            if norm == 0.0:
                # Zero-norm embeddings are rejected by the graph store.
                v[int(hashlib.sha256(text.encode()).digest()[0]) % self.dim] = 1.0
                norm = 1.0
            out.append((v / norm).tolist())
        return out


_CAUSAL_MARKERS = ("because", "due to", "caused", "led to", "so that",
                   "as a result", "therefore")
_TEMPORAL_RE = re.compile(
    r"\b(?:\d{4}|\d{1,2}(?::\d{2})?\s?(?:am|pm)|yesterday|today|tomorrow|"
    r"last\s+\w+|next\s+\w+|january|february|march|april|may|june|july|"
    r"august|september|october|november|december|monday|tuesday|wednesday|"
    r"thursday|friday|saturday|sunday)\b", re.IGNORECASE)
_STOPWORDS = {"the", "a", "an", "i", "we", "you", "he", "she", "it", "they",
              "my", "our", "your", "and", "or", "but", "to", "of", "in", "on",
              "at", "is", "was", "were", "am", "are", "that", "this"}


class RuleChatClient:
    """Deterministic rule-based analyzer standing in for an LLM.

    Understands the two prompt kinds built by this package (event extraction
    and edge scoring) and answers them from surface features of the payload.
    """

    model_id = "rule-chat-1"

    def complete(self, prompt: str) -> dict:
        try:
            payload = json.loads(prompt[prompt.index("\n{"):])
        except (ValueError, json.JSONDecodeError):
            raise ServiceError("rule client requires a JSON payload block")
        if prompt.startswith("Extract structured memory information"):
            return self._extract(payload)
        if prompt.startswith("Score the relation strength"):
            return self._score(payload)
        raise ServiceError("rule client does not understand this prompt")

    def _extract(self, payload: dict) -> dict:
        speaker = payload["speaker"]
        text = payload["text"]
        entities = sorted(set(re.findall(r"\b[A-Z][a-z]+(?:\s[A-Z][a-z]+)*", text))
                          - {speaker})
        tokens = [t for t in re.findall(r"[a-z']+", text.lower())
                  if t not in _STOPWORDS]
        topic = tokens[0] if tokens else "general"
        relationships = []
        lowered = text.lower()
        if any(marker in lowered for marker in _CAUSAL_MARKERS):
            relationships.append({"kind": "causal", "text": text})
        for i in range(len(entities) - 1):
            relationships.append({"kind": "association",
                                  "entities": [entities[i], entities[i + 1]]})
        facts = [s.strip() for s in re.split(r"[.!?]", text) if s.strip()]
        temporal = sorted({m.group(0) for m in _TEMPORAL_RE.finditer(text)})
        words = text.split()
        gist = " ".join(words[:24])
        return {
            "entities": entities,
            "topic": topic,
            "relationships": relationships,
            "key_facts": facts,
            "temporal": temporal,
            "summary": f"{speaker}: {gist}" if gist else f"{speaker}: (no content)",
        }

    def _score(self, payload: dict) -> dict:
        a, b = payload["src"], payload["dst"]
        tok_a = set(re.findall(r"[a-z0-9']+", a.lower())) - _STOPWORDS
        tok_b = set(re.findall(r"[a-z0-9']+", b.lower())) - _STOPWORDS
        union = tok_a | tok_b
        overlap = len(tok_a & tok_b) / len(union) if union else 0.0
        ents_a = set(re.findall(r"\b[A-Z][a-z]+", a))
        ents_b = set(re.findall(r"\b[A-Z][a-z]+", b))
        shared_entities = bool(ents_a & ents_b)
        causal = any(m in b.lower() for m in _CAUSAL_MARKERS)
        both_dated = bool(_TEMPORAL_RE.search(a)) and bool(_TEMPORAL_RE.search(b))
        return {
            "s_temp": 0.8 if both_dated else 0.2,
            "s_sem": round(min(1.0, 0.3 + overlap), 6),
            "s_causal": 0.85 if causal else 0.1,
            "s_ent": 0.9 if shared_entities else 0.15,
        }
