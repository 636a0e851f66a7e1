"""Dataset plumbing: a named (graph, samples) bundle and file-pair loading."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .graph import MemoryGraph, load_graph
from .query import TrainingSample, load_samples

__all__ = ["GraphBundle", "load_dataset"]


@dataclass
class GraphBundle:
    """One memory graph plus the training samples that run against it."""

    name: str
    graph: MemoryGraph
    samples: list[TrainingSample]

    @property
    def dim(self) -> int:
        return self.graph.d


def load_dataset(graph_paths: list, sample_paths: list) -> list[GraphBundle]:
    """Load graph/sample file pairs (matched by position)."""
    if len(graph_paths) != len(sample_paths):
        raise ValueError("graph and sample path lists must have equal length")
    bundles = []
    for gp, sp in zip(graph_paths, sample_paths):
        graph = load_graph(gp)
        samples = load_samples(sp, graph=graph)
        bundles.append(GraphBundle(Path(gp).stem, graph, samples))
    return bundles
