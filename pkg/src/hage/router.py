"""Query-conditioned edge scoring: a one-hidden-layer MLP with a softplus
output, hand-rolled forward and backward passes, and the softmax traversal
policy built on top of it.

All arithmetic is 64-bit. Softplus uses the stable form
``max(x, 0) + log1p(exp(-|x|))`` and the softmax is max-subtracted, so
outputs are reproducible across platforms and safe for large scores.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .graph import RELATION_DIM, MemoryGraph, RelationEdge, cosine
from .query import QueryContext

__all__ = [
    "ENRICHED_DIM",
    "RouterParams",
    "RouterGrads",
    "CandidateSet",
    "enrich_edge",
    "structural_weight",
    "structural_weights",
    "transition_score",
    "score_candidates",
    "policy_distribution",
    "router_backward",
    "save_router",
    "load_router",
]

ENRICHED_DIM = RELATION_DIM + RELATION_DIM + 2  # edge feat + intent + 2 cosines


def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


@dataclass
class RouterParams:
    """Weights of the scoring MLP plus the score-mixing coefficient."""

    W1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: float
    dim: int
    hidden_dim: int
    lambda_mix: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.lambda_mix <= 1.0:
            raise ValueError("lambda_mix must lie in [0, 1]")
        expected = (self.hidden_dim, self.input_dim)
        if self.W1.shape != expected:
            raise ValueError(f"W1 shape {self.W1.shape} != {expected}")
        if self.b1.shape != (self.hidden_dim,) or self.w2.shape != (self.hidden_dim,):
            raise ValueError("bias/output vector shape mismatch")
        for arr in (self.W1, self.b1, self.w2):
            if not np.isfinite(arr).all():
                raise ValueError("router parameters must be finite")
        if not np.isfinite(self.b2):
            raise ValueError("router parameters must be finite")

    @property
    def input_dim(self) -> int:
        return self.dim + ENRICHED_DIM

    @classmethod
    def init(cls, dim: int, hidden_dim: int = 64, lambda_mix: float = 0.5,
             seed: int = 0) -> "RouterParams":
        """Glorot-uniform weights, zero biases, fixed by seed."""
        rng = np.random.Generator(np.random.PCG64(seed))
        input_dim = dim + ENRICHED_DIM
        lim1 = np.sqrt(6.0 / (input_dim + hidden_dim))
        lim2 = np.sqrt(6.0 / (hidden_dim + 1))
        return cls(
            W1=rng.uniform(-lim1, lim1, size=(hidden_dim, input_dim)),
            b1=np.zeros(hidden_dim),
            w2=rng.uniform(-lim2, lim2, size=hidden_dim),
            b2=0.0,
            dim=dim,
            hidden_dim=hidden_dim,
            lambda_mix=lambda_mix,
        )

    def copy(self) -> "RouterParams":
        return RouterParams(self.W1.copy(), self.b1.copy(), self.w2.copy(),
                            float(self.b2), self.dim, self.hidden_dim, self.lambda_mix)


@dataclass
class RouterGrads:
    """Gradient (or Adam moment) buffers shaped like RouterParams weights."""

    dW1: np.ndarray
    db1: np.ndarray
    dw2: np.ndarray
    db2: float

    @classmethod
    def zeros_like(cls, params: RouterParams) -> "RouterGrads":
        return cls(np.zeros_like(params.W1), np.zeros_like(params.b1),
                   np.zeros_like(params.w2), 0.0)

    def add_(self, other: "RouterGrads", scale: float = 1.0) -> None:
        self.dW1 += scale * other.dW1
        self.db1 += scale * other.db1
        self.dw2 += scale * other.dw2
        self.db2 += scale * other.db2

    def sq_norm(self) -> float:
        return (float(np.sum(self.dW1 ** 2)) + float(np.sum(self.db1 ** 2))
                + float(np.sum(self.dw2 ** 2)) + self.db2 ** 2)

    def scale_(self, s: float) -> None:
        self.dW1 *= s
        self.db1 *= s
        self.dw2 *= s
        self.db2 *= s


def enrich_edge(edge: RelationEdge, ctx: QueryContext,
                src_emb: np.ndarray, dst_emb: np.ndarray) -> np.ndarray:
    """[edge features ; intent one-hot ; cos(q,src) ; cos(q,dst)] — dim 10."""
    q = ctx.query_embedding
    if src_emb.shape != q.shape or dst_emb.shape != q.shape:
        raise ValueError("embedding dimensions do not match the query")
    return np.concatenate([
        edge.features,
        ctx.intent_embedding,
        [cosine(q, src_emb), cosine(q, dst_emb)],
    ])


def _forward(params: RouterParams, query_emb: np.ndarray, enriched: np.ndarray):
    x = np.concatenate([query_emb, enriched])
    if x.shape != (params.input_dim,):
        raise ValueError(f"router input dim {x.shape[0]} != {params.input_dim}")
    if not np.isfinite(x).all():
        raise ValueError("router input must be finite")
    pre = params.W1 @ x + params.b1
    h = np.maximum(pre, 0.0)
    z = float(params.w2 @ h + params.b2)
    w = float(softplus(z))
    return x, pre, h, z, w


def structural_weight(params: RouterParams, query_emb: np.ndarray,
                      enriched: np.ndarray) -> float:
    """softplus(w2 . relu(W1 [q; e~] + b1) + b2); strictly positive."""
    return _forward(params, query_emb, enriched)[4]


def structural_weights(params: RouterParams, query_emb: np.ndarray,
                       enriched_rows: np.ndarray) -> np.ndarray:
    """Batched structural weights for an (n, 10) matrix of enriched features."""
    n = enriched_rows.shape[0]
    if n == 0:
        return np.zeros(0)
    X = np.concatenate([np.tile(query_emb, (n, 1)), enriched_rows], axis=1)
    H = np.maximum(X @ params.W1.T + params.b1, 0.0)
    Z = H @ params.w2 + params.b2
    return softplus(Z)


def transition_score(params: RouterParams, query_emb: np.ndarray,
                     dst_emb: np.ndarray, w: float) -> float:
    """lambda * cos(dst, q) + (1 - lambda) * w."""
    lam = params.lambda_mix
    return lam * cosine(dst_emb, query_emb) + (1.0 - lam) * w


@dataclass
class CandidateSet:
    """Scored unvisited neighbors of one node, in adjacency insertion order."""

    edge_ids: list[int]
    node_ids: list[int]
    cos_dst: np.ndarray
    enriched: np.ndarray  # (n, 10)
    weights: np.ndarray
    scores: np.ndarray
    probs: np.ndarray = field(default=None)

    def __len__(self) -> int:
        return len(self.node_ids)


def _stable_softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - np.max(scores)
    e = np.exp(shifted)
    return e / e.sum()


def score_candidates(graph: MemoryGraph, node: int, ctx: QueryContext,
                     params: RouterParams, visited: set[int]) -> CandidateSet:
    """Score every unvisited out-neighbor of ``node`` and normalize to a policy."""
    src_emb = graph.node(node).embedding
    edge_ids, node_ids, enriched_rows, cos_dst = [], [], [], []
    for eid, dst in graph.adjacency[node]:
        if dst in visited:
            continue
        edge = graph.edges[eid]
        dst_emb = graph.node(dst).embedding
        enriched_rows.append(enrich_edge(edge, ctx, src_emb, dst_emb))
        cos_dst.append(cosine(ctx.query_embedding, dst_emb))
        edge_ids.append(eid)
        node_ids.append(dst)
    if not node_ids:
        return CandidateSet([], [], np.zeros(0), np.zeros((0, ENRICHED_DIM)),
                            np.zeros(0), np.zeros(0), np.zeros(0))
    enriched_mat = np.stack(enriched_rows)
    cos_arr = np.array(cos_dst)
    weights = structural_weights(params, ctx.query_embedding, enriched_mat)
    lam = params.lambda_mix
    scores = lam * cos_arr + (1.0 - lam) * weights
    probs = _stable_softmax(scores)
    return CandidateSet(edge_ids, node_ids, cos_arr, enriched_mat, weights, scores, probs)


def policy_distribution(graph: MemoryGraph, node: int, ctx: QueryContext,
                        params: RouterParams, visited: set[int]
                        ) -> list[tuple[int, float]]:
    """Softmax policy over unvisited neighbors; empty list at a dead end."""
    cands = score_candidates(graph, node, ctx, params, visited)
    return list(zip(cands.node_ids, (float(p) for p in cands.probs)))


def router_backward(params: RouterParams, query_emb: np.ndarray,
                    enriched: np.ndarray, upstream_grad: float
                    ) -> tuple[RouterGrads, np.ndarray]:
    """Exact gradients of the structural weight w.r.t. the MLP parameters and
    the 4 trainable edge-feature components, scaled by ``upstream_grad``.

    The relu subgradient at exactly 0 is taken as 0.
    """
    x, pre, h, z, _ = _forward(params, query_emb, enriched)
    dz = upstream_grad * float(sigmoid(z))
    dw2 = dz * h
    db2 = dz
    dh = dz * params.w2
    dpre = dh * (pre > 0.0)
    dW1 = np.outer(dpre, x)
    db1 = dpre
    dx = params.W1.T @ dpre
    edge_grad = dx[params.dim:params.dim + RELATION_DIM].copy()
    return RouterGrads(dW1, db1, dw2, float(db2)), edge_grad


# -- checkpoint format -----------------------------------------------------


def save_router(params: RouterParams, path) -> None:
    # Python float repr round-trips 64-bit values exactly (<= 17 significant digits).
    doc = {
        "format": "hage-router",
        "version": 1,
        "dim": params.dim,
        "hidden": params.hidden_dim,
        "lambda": params.lambda_mix,
        "W1": params.W1.tolist(),
        "b1": params.b1.tolist(),
        "w2": params.w2.tolist(),
        "b2": params.b2,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")


def load_router(path) -> RouterParams:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != "hage-router" or doc.get("version") != 1:
        raise ValueError(f"unrecognized router checkpoint header in {path}")
    return RouterParams(
        W1=np.asarray(doc["W1"], dtype=float),
        b1=np.asarray(doc["b1"], dtype=float),
        w2=np.asarray(doc["w2"], dtype=float),
        b2=float(doc["b2"]),
        dim=int(doc["dim"]),
        hidden_dim=int(doc["hidden"]),
        lambda_mix=float(doc["lambda"]),
    )
