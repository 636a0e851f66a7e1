"""Multi-relational memory graph: nodes, typed edges with trainable features,
adjacency bookkeeping, and line-delimited JSON persistence.

Node ids are dense integers assigned in insertion order, which keeps the COO
index arrays and visited-mask bookkeeping trivial. The graph is append-only:
nodes and edges are never deleted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Optional

import numpy as np

RELATION_DIM = 4

__all__ = [
    "RELATION_DIM",
    "RelationType",
    "MemoryNode",
    "RelationEdge",
    "MemoryGraph",
    "GraphFormatError",
    "cosine",
    "save_graph",
    "load_graph",
]


class GraphFormatError(ValueError):
    """A graph or sample file violates the on-disk format contract."""


class RelationType(IntEnum):
    """The four edge relation kinds. Ordinals are part of the wire format."""

    TEMPORAL = 0
    SEMANTIC = 1
    CAUSAL = 2
    ENTITY = 3

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "RelationType":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValueError(f"unknown relation label: {label!r}") from None

    def one_hot(self) -> np.ndarray:
        v = np.zeros(RELATION_DIM)
        v[int(self)] = 1.0
        return v


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine similarity over raw (unnormalized) vectors."""
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


@dataclass
class MemoryNode:
    id: int
    content: str
    timestamp: int
    embedding: np.ndarray
    attributes: dict[str, str] = field(default_factory=dict)


@dataclass
class RelationEdge:
    id: int
    src: int
    dst: int
    primary_relation: RelationType
    features: np.ndarray        # trainable, dim 4
    features_init: np.ndarray   # frozen at construction, dim 4


class MemoryGraph:
    """Directed multigraph over memory nodes with typed, feature-carrying edges.

    Maintains three consistent views of the edge set: COO index arrays
    (``coo_src``/``coo_dst``), per-node outgoing adjacency lists, and
    per-relation edge-id lists.
    """

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError("embedding dimension must be >= 1")
        self.d = dim
        self.nodes: list[MemoryNode] = []
        self.edges: list[RelationEdge] = []
        self.coo_src: list[int] = []
        self.coo_dst: list[int] = []
        self.adjacency: list[list[tuple[int, int]]] = []  # node -> [(edge_id, dst)]
        self.relation_views: dict[RelationType, list[int]] = {r: [] for r in RelationType}

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def add_node(
        self,
        content: str,
        timestamp: int,
        embedding: np.ndarray,
        attributes: Optional[dict[str, str]] = None,
    ) -> int:
        embedding = np.asarray(embedding, dtype=float)
        if embedding.shape != (self.d,):
            raise ValueError(
                f"embedding dimension {embedding.shape} does not match graph dim {self.d}"
            )
        if not np.isfinite(embedding).all():
            raise ValueError("embedding must be finite")
        if np.linalg.norm(embedding) == 0.0:
            raise ValueError("zero-norm embeddings are rejected")
        node_id = len(self.nodes)
        self.nodes.append(
            MemoryNode(node_id, content, int(timestamp), embedding, dict(attributes or {}))
        )
        self.adjacency.append([])
        return node_id

    def add_edge(
        self,
        src: int,
        dst: int,
        relation: RelationType,
        cached_scores: Optional[np.ndarray] = None,
    ) -> int:
        for endpoint in (src, dst):
            if not 0 <= endpoint < len(self.nodes):
                raise ValueError(f"edge endpoint {endpoint} does not exist")
        if cached_scores is not None:
            init = np.asarray(cached_scores, dtype=float)
            if init.shape != (RELATION_DIM,):
                raise ValueError(f"cached scores must have dimension {RELATION_DIM}")
            if ((init < 0.0) | (init > 1.0)).any():
                raise ValueError("cached scores must lie in [0, 1]")
        else:
            init = relation.one_hot()
        init = init.copy()
        init.flags.writeable = False
        edge_id = len(self.edges)
        self.edges.append(RelationEdge(edge_id, src, dst, relation, init.copy(), init))
        self.coo_src.append(src)
        self.coo_dst.append(dst)
        self.adjacency[src].append((edge_id, dst))
        self.relation_views[relation].append(edge_id)
        return edge_id

    def neighbors(self, node: int) -> list[tuple[int, int]]:
        """Outgoing (edge_id, dst) pairs in insertion order."""
        if not 0 <= node < len(self.nodes):
            raise ValueError(f"unknown node {node}")
        return list(self.adjacency[node])

    def node(self, node_id: int) -> MemoryNode:
        return self.nodes[node_id]

    def edge(self, edge_id: int) -> RelationEdge:
        return self.edges[edge_id]

    def edge_feature_matrix(self) -> np.ndarray:
        """Current trainable edge features stacked as an (E, 4) array."""
        if not self.edges:
            return np.zeros((0, RELATION_DIM))
        return np.stack([e.features for e in self.edges])

    def set_edge_features(self, features: np.ndarray) -> None:
        features = np.asarray(features, dtype=float)
        if features.shape != (len(self.edges), RELATION_DIM):
            raise ValueError("feature matrix shape mismatch")
        for edge, row in zip(self.edges, features):
            edge.features = row.copy()

    # -- persistence -------------------------------------------------------

    def save(self, path) -> None:
        save_graph(self, path)

    @classmethod
    def load(cls, path) -> "MemoryGraph":
        return load_graph(path)


def _sig9(x: float) -> float:
    # Round so json emits at most 9 significant digits.
    return float(f"{float(x):.9g}")


def _dump(obj) -> str:
    return json.dumps(obj, separators=(",", ":"))


def save_graph(graph: MemoryGraph, path) -> None:
    """Write the line-delimited JSON graph format: header, nodes, then edges."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(_dump({"format": "hage-graph", "version": 1, "dim": graph.d}) + "\n")
        for n in graph.nodes:
            fh.write(
                _dump(
                    {
                        "kind": "node",
                        "id": n.id,
                        "content": n.content,
                        "ts": n.timestamp,
                        "emb": [_sig9(v) for v in n.embedding],
                        "attrs": n.attributes,
                    }
                )
                + "\n"
            )
        for e in graph.edges:
            fh.write(
                _dump(
                    {
                        "kind": "edge",
                        "id": e.id,
                        "src": e.src,
                        "dst": e.dst,
                        "rel": e.primary_relation.label,
                        "feat_init": [_sig9(v) for v in e.features_init],
                        "feat": [_sig9(v) for v in e.features],
                    }
                )
                + "\n"
            )


def load_graph(path) -> MemoryGraph:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln for ln in (raw.strip() for raw in fh) if ln]
    if not lines:
        raise GraphFormatError("empty graph file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"malformed header: {exc}") from None
    if header.get("format") != "hage-graph" or header.get("version") != 1:
        raise GraphFormatError(f"unrecognized graph header: {header}")
    dim = header.get("dim")
    if not isinstance(dim, int) or dim < 1:
        raise GraphFormatError(f"bad dimension in header: {dim!r}")

    graph = MemoryGraph(dim)
    seen_edge = False
    for lineno, raw in enumerate(lines[1:], start=2):
        try:
            rec = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"line {lineno}: malformed record: {exc}") from None
        kind = rec.get("kind")
        if kind == "node":
            if seen_edge:
                raise GraphFormatError(f"line {lineno}: node record after edge records")
            emb = np.asarray(rec["emb"], dtype=float)
            if emb.shape != (dim,):
                raise GraphFormatError(
                    f"line {lineno}: embedding dimension {emb.shape[0] if emb.ndim else 0} "
                    f"inconsistent with declared dim {dim}"
                )
            try:
                node_id = graph.add_node(rec["content"], rec["ts"], emb, rec.get("attrs", {}))
            except (KeyError, ValueError) as exc:
                raise GraphFormatError(f"line {lineno}: {exc}") from None
            if node_id != rec.get("id"):
                raise GraphFormatError(
                    f"line {lineno}: node id {rec.get('id')} out of order (expected {node_id})"
                )
        elif kind == "edge":
            seen_edge = True
            try:
                relation = RelationType.from_label(rec["rel"])
                src, dst = rec["src"], rec["dst"]
                feat_init = np.asarray(rec["feat_init"], dtype=float)
                feat = np.asarray(rec["feat"], dtype=float)
            except (KeyError, ValueError) as exc:
                raise GraphFormatError(f"line {lineno}: {exc}") from None
            if feat_init.shape != (RELATION_DIM,) or feat.shape != (RELATION_DIM,):
                raise GraphFormatError(f"line {lineno}: edge features must have dimension 4")
            try:
                edge_id = graph.add_edge(src, dst, relation, cached_scores=feat_init)
            except ValueError as exc:
                raise GraphFormatError(f"line {lineno}: {exc}") from None
            if edge_id != rec.get("id"):
                raise GraphFormatError(
                    f"line {lineno}: edge id {rec.get('id')} out of order (expected {edge_id})"
                )
            graph.edges[edge_id].features = feat
        else:
            raise GraphFormatError(f"line {lineno}: unknown record kind {kind!r}")
    return graph
