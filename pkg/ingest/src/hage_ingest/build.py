"""Assemble extraction records into the graph and sample file formats.

Edge construction: temporal edges chain consecutive events in a session (and
bridge session boundaries), semantic edges link embedding pairs above a
cosine threshold, and causal/entity edges come from the extracted
relationships and shared entities. When a scorer is supplied, every edge's
initial features come from its clamped relation scores; otherwise the graph
store falls back to the one-hot of the primary relation.

The emitted files are re-read through the primary loader before this module
reports success, so a file that would not validate is never left behind.
"""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

import numpy as np

from hage.graph import MemoryGraph, RelationType, load_graph, save_graph
from hage.query import (QueryContext, TrainingSample, classify_intent,
                        load_samples, save_samples)

from .clients import ChatClient, EmbeddingClient
from .extraction import ExtractionRecord
from .scoring import score_edge

__all__ = ["BuildConfig", "QaItem", "build_graph"]

log = logging.getLogger(__name__)


@dataclass
class BuildConfig:
    semantic_threshold: float = 0.6
    score_edges: bool = True

    def __post_init__(self):
        if not -1.0 <= self.semantic_threshold <= 1.0:
            raise ValueError("semantic threshold must lie in [-1, 1]")


@dataclass
class QaItem:
    qid: str
    question: str
    answer: str


def _normalize(text: str) -> str:
    text = re.sub(r"[^a-z0-9]+", " ", text.lower())
    return " ".join(text.split())


def _causal_source(records: list[ExtractionRecord], idx: int) -> int | None:
    """The stated effect follows its cause; link from the nearest earlier
    event in the same session."""
    for j in range(idx - 1, -1, -1):
        if records[j].session == records[idx].session:
            return j
    return None


def build_graph(
    records: list[ExtractionRecord],
    qa: list[QaItem],
    embedder: EmbeddingClient,
    out_graph,
    out_samples,
    scorer: ChatClient = None,
    config: BuildConfig = None,
) -> dict:
    """Emit one graph file and one sample file; returns a build report."""
    if not records:
        raise ValueError("records must be non-empty")
    config = config or BuildConfig()

    vectors = embedder.embed([r.summary for r in records])
    dim = len(vectors[0])
    if any(len(v) != dim for v in vectors):
        raise ValueError("embedding dimensions are inconsistent")
    emb = np.asarray(vectors, dtype=float)

    graph = MemoryGraph(dim)
    for r, v in zip(records, emb):
        graph.add_node(r.summary, r.timestamp, v, {
            "speaker": r.speaker,
            "topic": r.topic,
            "session": str(r.session),
        })

    # Collect directed (src, dst, relation) triples before materializing, so
    # scoring happens once per unique pair direction.
    triples: list[tuple[int, int, RelationType]] = []

    def add(src: int, dst: int, rel: RelationType) -> None:
        if src != dst:
            triples.append((src, dst, rel))

    for i in range(len(records) - 1):
        a, b = records[i], records[i + 1]
        if a.session == b.session:
            add(i, i + 1, RelationType.TEMPORAL)
    sessions = sorted({r.session for r in records})
    for s_prev, s_next in zip(sessions, sessions[1:]):
        last_prev = max(i for i, r in enumerate(records) if r.session == s_prev)
        first_next = min(i for i, r in enumerate(records) if r.session == s_next)
        add(last_prev, first_next, RelationType.TEMPORAL)

    norms = emb / np.linalg.norm(emb, axis=1, keepdims=True)
    cos = norms @ norms.T
    for i in range(len(records)):
        for j in range(i + 1, len(records)):
            if cos[i, j] >= config.semantic_threshold:
                add(i, j, RelationType.SEMANTIC)
                add(j, i, RelationType.SEMANTIC)

    for i, r in enumerate(records):
        if any(rel.get("kind") == "causal" for rel in r.relationships):
            src = _causal_source(records, i)
            if src is not None:
                add(src, i, RelationType.CAUSAL)

    entity_index: dict[str, list[int]] = {}
    for i, r in enumerate(records):
        for ent in r.entities:
            entity_index.setdefault(ent.lower(), []).append(i)
    for nodes in entity_index.values():
        for a, b in zip(nodes, nodes[1:]):
            add(a, b, RelationType.ENTITY)
            add(b, a, RelationType.ENTITY)

    seen: set[tuple[int, int, RelationType]] = set()
    scored_edges = 0
    for src, dst, rel in triples:
        if (src, dst, rel) in seen:
            continue
        seen.add((src, dst, rel))
        cached = None
        if scorer is not None and config.score_edges:
            entry = score_edge(src, dst, records[src].summary,
                               records[dst].summary, scorer)
            cached = list(entry.scores)
            scored_edges += 1
        graph.add_edge(src, dst, rel, cached_scores=cached)

    samples: list[TrainingSample] = []
    skipped: list[str] = []
    question_vectors = embedder.embed([item.question for item in qa]) if qa else []
    for item, qvec in zip(qa, question_vectors):
        answer = _normalize(item.answer)
        targets = frozenset(
            n.id for n in graph.nodes if answer and answer in _normalize(n.content)
        )
        if not targets:
            log.warning("sample %s: gold answer not found in any node, skipping",
                        item.qid)
            skipped.append(item.qid)
            continue
        ctx = QueryContext(np.asarray(qvec, dtype=float),
                           classify_intent(item.question))
        samples.append(TrainingSample(item.qid, ctx, item.question, targets))

    save_graph(graph, out_graph)
    save_samples(samples, out_samples)
    # Validate through the primary loader; an invalid file must never survive.
    check = load_graph(out_graph)
    load_samples(out_samples, graph=check)

    return {
        "nodes": graph.node_count,
        "edges": graph.edge_count,
        "scored_edges": scored_edges,
        "samples": len(samples),
        "skipped_samples": skipped,
    }
