"""Query analysis: relation-intent classification, intent encoding, anchor
selection, and the training-sample record/file format.

The default intent classifier is a deterministic keyword rule set; any
callable mapping query text to a RelationType can be registered in its place
(the training and traversal paths never require an external service).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .graph import RELATION_DIM, GraphFormatError, MemoryGraph, RelationType, cosine

__all__ = [
    "QueryContext",
    "TrainingSample",
    "classify_intent",
    "intent_embedding",
    "select_anchors",
    "select_start_node",
    "save_samples",
    "load_samples",
    "IntentClassifier",
    "register_classifier",
    "get_classifier",
]

IntentClassifier = Callable[[str], RelationType]

_TEMPORAL_CUES = {"when", "before", "after", "date", "year", "first", "last"}
_CAUSAL_CUES = {"why", "because", "cause", "result"}
_CAUSAL_PHRASES = ("led to",)
_ENTITY_CUES = {"who", "whom", "whose"}

_WORD_RE = re.compile(r"[a-z0-9']+")


def classify_intent(query_text: str) -> RelationType:
    """Rule-based relation intent. Priority: temporal > causal > entity."""
    if not query_text or not query_text.strip():
        raise ValueError("query text must be non-empty")
    lowered = query_text.lower()
    tokens = set(_WORD_RE.findall(lowered))
    if tokens & _TEMPORAL_CUES:
        return RelationType.TEMPORAL
    if tokens & _CAUSAL_CUES or any(p in lowered for p in _CAUSAL_PHRASES):
        return RelationType.CAUSAL
    if tokens & _ENTITY_CUES:
        return RelationType.ENTITY
    return RelationType.SEMANTIC


_CLASSIFIERS: dict[str, IntentClassifier] = {"rules": classify_intent}


def register_classifier(name: str, fn: IntentClassifier) -> None:
    _CLASSIFIERS[name] = fn


def get_classifier(name: str) -> IntentClassifier:
    try:
        return _CLASSIFIERS[name]
    except KeyError:
        raise ValueError(f"no intent classifier registered under {name!r}") from None


def intent_embedding(intent: RelationType) -> np.ndarray:
    """One-hot encoding of the relation intent (dimension 4)."""
    return intent.one_hot()


@dataclass
class QueryContext:
    """Structured control signals derived from one query."""

    query_embedding: np.ndarray
    intent: RelationType
    keywords: list[str] = field(default_factory=list)
    time_window: Optional[tuple[int, int]] = None
    intent_embedding: np.ndarray = None  # derived when omitted

    def __post_init__(self):
        self.query_embedding = np.asarray(self.query_embedding, dtype=float)
        if self.intent_embedding is None:
            self.intent_embedding = intent_embedding(self.intent)
        self.keywords = [k.lower() for k in self.keywords]
        if self.time_window is not None:
            t_min, t_max = self.time_window
            if t_min > t_max:
                raise ValueError("time window requires t_min <= t_max")


@dataclass
class TrainingSample:
    """A query paired with its ground-truth target evidence nodes."""

    sample_id: str
    query: QueryContext
    query_text: str
    targets: frozenset[int]

    def __post_init__(self):
        self.targets = frozenset(self.targets)
        if not self.targets:
            raise ValueError("targets must be non-empty")


def _jaccard(keywords: list[str], content: str) -> float:
    if not keywords:
        return 0.0
    content_tokens = set(content.lower().split())
    key_tokens = set(keywords)
    union = key_tokens | content_tokens
    return len(key_tokens & content_tokens) / len(union) if union else 0.0


def select_anchors(graph: MemoryGraph, ctx: QueryContext, k: int) -> list[int]:
    """Top-k entry points: temporal filter, cosine ranking, lexical tie-break.

    Ties in cosine fall back to keyword/content Jaccard overlap, then to the
    lower node id, so the ranking is a total order and top-k lists are
    prefixes of each other.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if graph.node_count == 0:
        raise ValueError("cannot select anchors from an empty graph")
    candidates = graph.nodes
    if ctx.time_window is not None:
        t_min, t_max = ctx.time_window
        candidates = [n for n in candidates if t_min <= n.timestamp <= t_max]
    ranked = sorted(
        candidates,
        key=lambda n: (
            -cosine(ctx.query_embedding, n.embedding),
            -_jaccard(ctx.keywords, n.content),
            n.id,
        ),
    )
    return [n.id for n in ranked[:k]]


def select_start_node(graph: MemoryGraph, ctx: QueryContext) -> int:
    """Node with highest cosine similarity to the query; ties to lowest id."""
    if graph.node_count == 0:
        raise ValueError("cannot select a start node from an empty graph")
    best_id, best_cos = -1, -np.inf
    for n in graph.nodes:
        c = cosine(ctx.query_embedding, n.embedding)
        if c > best_cos:
            best_id, best_cos = n.id, c
    return best_id


# -- sample file format ----------------------------------------------------


def _sig9(x: float) -> float:
    return float(f"{float(x):.9g}")


def save_samples(samples: list[TrainingSample], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in samples:
            constraints: dict = {"keywords": list(s.query.keywords)}
            if s.query.time_window is not None:
                constraints["t_min"] = int(s.query.time_window[0])
                constraints["t_max"] = int(s.query.time_window[1])
            rec = {
                "sample_id": s.sample_id,
                "query_text": s.query_text,
                "query_emb": [_sig9(v) for v in s.query.query_embedding],
                "intent": s.query.intent.label,
                "targets": sorted(s.targets),
                "constraints": constraints,
            }
            fh.write(json.dumps(rec, separators=(",", ":")) + "\n")


def load_samples(path, graph: Optional[MemoryGraph] = None) -> list[TrainingSample]:
    """Load a sample file; when a graph is given, target ids are validated."""
    samples = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise GraphFormatError(f"line {lineno}: malformed sample record: {exc}") from None
            try:
                constraints = rec.get("constraints", {})
                window = None
                if "t_min" in constraints or "t_max" in constraints:
                    window = (int(constraints["t_min"]), int(constraints["t_max"]))
                ctx = QueryContext(
                    query_embedding=np.asarray(rec["query_emb"], dtype=float),
                    intent=RelationType.from_label(rec["intent"]),
                    keywords=list(constraints.get("keywords", [])),
                    time_window=window,
                )
                sample = TrainingSample(
                    sample_id=rec["sample_id"],
                    query=ctx,
                    query_text=rec["query_text"],
                    targets=frozenset(int(t) for t in rec["targets"]),
                )
            except (KeyError, ValueError) as exc:
                raise GraphFormatError(f"line {lineno}: {exc}") from None
            if graph is not None:
                if ctx.query_embedding.shape != (graph.d,):
                    raise GraphFormatError(f"line {lineno}: query embedding dimension mismatch")
                for t in sample.targets:
                    if not 0 <= t < graph.node_count:
                        raise GraphFormatError(f"line {lineno}: target node {t} does not exist")
            samples.append(sample)
    return samples
