"""Deterministic planted-path benchmark generator.

Each generated graph hides one relation-consistent path (or several, one per
target) from an anchor node to target evidence nodes. Every node on a planted
path also emits distractor edges of the other relation types, and the first
distractor from each non-terminal path node is a "decoy" whose embedding is
nearly parallel to the query. Pure cosine-greedy traversal therefore walks
into decoy sinks, while the planted relation signal in the edge features makes
the task learnable for the router.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datasets import GraphBundle
from .graph import MemoryGraph, RelationType
from .query import QueryContext, TrainingSample

__all__ = ["SyntheticSpec", "generate_synthetic", "make_planted_benchmark"]

_QUERY_STEMS = {
    RelationType.TEMPORAL: "When did event {0} happen?",
    RelationType.SEMANTIC: "Tell me about event {0}.",
    RelationType.CAUSAL: "Why did event {0} happen?",
    RelationType.ENTITY: "Who was involved in event {0}?",
}


@dataclass
class SyntheticSpec:
    node_count: int
    distractor_out_degree: int
    planted_path_length: int
    planted_relation: RelationType
    target_count: int = 1
    embedding_dim: int = 16
    seed: int = 0

    def __post_init__(self):
        if self.planted_path_length < 1:
            raise ValueError("planted path length must be >= 1")
        if self.target_count < 1:
            raise ValueError("target count must be >= 1")
        if self.distractor_out_degree < 0:
            raise ValueError("distractor out-degree must be >= 0")
        if self.node_count <= self.planted_path_length * self.target_count + 1:
            raise ValueError(
                "node_count must exceed planted_path_length * target_count + 1"
            )


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def generate_synthetic(spec: SyntheticSpec) -> tuple[MemoryGraph, list[TrainingSample]]:
    """Build one planted-path graph and its training sample.

    The anchor embedding equals the query embedding, so start-node selection
    is guaranteed. Targets sit exactly ``planted_path_length`` hops from the
    anchor along edges of ``planted_relation``; that path is the unique
    relation-consistent route within the hop budget because all distractor
    edges carry other relation types and terminate in sink nodes.
    """
    rng = np.random.Generator(np.random.PCG64(spec.seed))
    d = spec.embedding_dim
    L = spec.planted_path_length
    graph = MemoryGraph(d)

    anchor_emb = _unit(rng.normal(size=d))
    anchor = graph.add_node("anchor event 0", 0, anchor_emb, {"role": "anchor"})

    # Planted paths: interpolate embeddings anchor -> target so cosine decays
    # along the path instead of pointing at the next hop.
    paths: list[list[int]] = []
    for m in range(spec.target_count):
        target_emb = _unit(rng.normal(size=d))
        path = [anchor]
        for k in range(1, L + 1):
            frac = k / L
            emb = _unit((1.0 - frac) * anchor_emb + frac * target_emb)
            role = "target" if k == L else "path"
            nid = graph.add_node(
                f"{role} event {m}.{k}", 1000 * (len(graph.nodes)), emb, {"role": role}
            )
            path.append(nid)
        paths.append(path)

    pool_size = spec.node_count - graph.node_count
    non_terminal = [n for path in paths for n in path[:-1]]
    # Deduplicate while preserving order (the anchor is shared across paths).
    non_terminal = list(dict.fromkeys(non_terminal))
    decoy_count = min(len(non_terminal), max(1, pool_size // 2))
    pool: list[int] = []
    decoys: list[int] = []
    for i in range(pool_size):
        if i < decoy_count:
            emb = _unit(anchor_emb + 0.15 * rng.normal(size=d))
            nid = graph.add_node(f"decoy event {i}", 1000 * len(graph.nodes), emb,
                                 {"role": "decoy"})
            decoys.append(nid)
        else:
            emb = _unit(rng.normal(size=d))
            nid = graph.add_node(f"filler event {i}", 1000 * len(graph.nodes), emb,
                                 {"role": "filler"})
        pool.append(nid)

    # Planted edges first so the relation-consistent route exists end to end.
    for path in paths:
        for a, b in zip(path, path[1:]):
            graph.add_edge(a, b, spec.planted_relation)

    other_relations = [r for r in RelationType if r != spec.planted_relation]
    relation_phase = int(rng.integers(len(other_relations)))
    target_ids = {path[-1] for path in paths}
    path_nodes = list(dict.fromkeys(n for path in paths for n in path))
    for i, src in enumerate(path_nodes):
        is_terminal = src in target_ids
        used: set[int] = set()
        for k in range(spec.distractor_out_degree):
            if k == 0 and not is_terminal and decoys:
                dst = decoys[i % len(decoys)]
            else:
                choices = [p for p in pool if p not in used]
                if not choices:
                    break
                dst = int(choices[rng.integers(len(choices))])
            if dst in used:
                continue
            used.add(dst)
            # Rotate relation assignment per source so no relation type is
            # systematically the decoy slot across the suite.
            graph.add_edge(src, dst,
                           other_relations[(k + i + relation_phase) % len(other_relations)])

    targets = frozenset(path[-1] for path in paths)
    ctx = QueryContext(query_embedding=anchor_emb, intent=spec.planted_relation)
    sample = TrainingSample(
        sample_id=f"syn-{spec.seed}",
        query=ctx,
        query_text=_QUERY_STEMS[spec.planted_relation].format(spec.seed),
        targets=targets,
    )
    return graph, [sample]


def make_planted_benchmark(
    num_samples: int = 20,
    node_count: int = 20,
    distractor_out_degree: int = 3,
    path_lengths: tuple[int, ...] = (2, 3),
    embedding_dim: int = 16,
    seed: int = 0,
    relations: tuple[RelationType, ...] = tuple(RelationType),
) -> list[GraphBundle]:
    """A multi-relational suite of planted-path bundles (one sample each).

    Path lengths and planted relations cycle across samples; per-bundle seeds
    derive from the suite seed, so the suite is deterministic end to end.
    """
    seeds = np.random.SeedSequence(seed).generate_state(num_samples)
    bundles = []
    for i in range(num_samples):
        # Phase-shift the length cycle every relation cycle so path length and
        # relation type are not confounded across the suite.
        length_idx = (i + i // len(relations)) % len(path_lengths)
        spec = SyntheticSpec(
            node_count=node_count,
            distractor_out_degree=distractor_out_degree,
            planted_path_length=path_lengths[length_idx],
            planted_relation=relations[i % len(relations)],
            embedding_dim=embedding_dim,
            seed=int(seeds[i]),
        )
        graph, samples = generate_synthetic(spec)
        for j, s in enumerate(samples):
            s.sample_id = f"syn-{seed}-{i:03d}"
        bundles.append(GraphBundle(f"syn-{seed}-{i:03d}", graph, samples))
    return bundles
